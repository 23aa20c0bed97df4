"""Configuration, the coupled time loops for both systems, the c-sweep
driver, the rescaling-covariance test, and all file output.

Configuration format: flat ``key = value`` text, ``#`` comments, unknown
keys rejected.  The schema with per-key units sits in CONFIG_SCHEMA.
All quantities are in scenario units: lengths in L, momenta in V (particle
velocity scale), time in L/V, masses such that G = 1; the light speed c is
in units of V, so c >= 1 means "at least as fast as the matter scale".
"""

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import ErrorRecord, compute_df, compute_kc, fit_order
from .errors import ConfigurationError, NvlimitError
from .field_poisson import deposit_density, gsharp_from_fin, poisson_solve
from .field_wave import (deposit_source, init_field,
                         psi_positivity_audit, wave_step)
from .grids import Grid3, GridSpec
from .phase_space import (Profile, SupportStats, sample_ensemble,
                          spatial_support_bound, support_update)
from .pusher import (NV, VP, ConservationTracker, FieldHistory, WaveLevel,
                     push_nv, push_vp)
from .transfer import gather_cic

# key -> (default, parser, unit/meaning)
CONFIG_SCHEMA = {
    "c_list": ("4,8,16,32", "float_list", "light speeds [V], each >= 1"),
    "grid.n": (48, "int", "cells per axis"),
    "grid.half_width": (3.2, "float", "box half-width [L]"),
    "cfl_safety": (0.8, "float", "wave CFL fraction, in (0,1)"),
    "t_end": (1.0, "float", "final time [L/V]"),
    "checkpoints": (16, "int", "shared checkpoint count over [0, t_end]"),
    "particles.n_per_axis": (6, "int", "lattice points per phase-space axis"),
    "particles.seed": (20240801, "int", "sampling / probe seed"),
    "particles.jitter": (0.0, "float", "lattice jitter fraction, 0 = off"),
    "profile.kind": ("radial-bump", "str", "radial-bump | product-bump"),
    "profile.center_x": ("0,0,0", "vec3", "spatial center [L]"),
    "profile.center_p": ("0.25,0,0", "vec3", "momentum center [V]"),
    "profile.radius_x": (1.0, "float", "spatial support radius [L]"),
    "profile.radius_p": (0.6, "float", "momentum support radius [V]"),
    "profile.amplitude": (0.8, "float", "peak of f^in [mass/(L^3 V^3)]"),
    "h_sharp.kind": ("zero", "str", "zero | bump (field velocity datum)"),
    "h_sharp.amplitude": (0.5, "float", "bump amplitude (used when kind=bump)"),
    "h_sharp.radius": (1.0, "float", "bump radius [L]"),
    "sponge.width": (4, "int", "absorber shell thickness [cells]"),
    "sponge.strength": (2.0, "float", "friction scale (dimensionless)"),
    "sponge.ref_interval": (0.0625, "float", "time between absorber-reference refreshes"),
    "poisson.kernel": ("lattice", "str", "lattice | 1/r Green kernel"),
    "probes.field": (500, "int", "spatial probe nodes for field errors"),
    "probes.phase_space": (200, "int", "phase-space probes for D_F"),
    "history.max_snapshots": (56, "int", "stored field frames per run"),
    "df.stride": (1, "int", "checkpoints between D_F evaluations"),
    "df.backward_steps": (192, "int", "backward RK2 substeps at t_end"),
    "conservation.tracked": (100, "int", "trajectories in the e^{-4phi}f audit"),
    "p_support_guess": (1.4, "float", "v_max for the domain-size invariant [V]"),
    "output.dir": ("out", "str", "output directory"),
}

_PARSERS = {
    "int": int,
    "float": float,
    "str": str,
    "float_list": lambda s: tuple(float(v) for v in str(s).split(",") if v.strip()),
    "vec3": lambda s: tuple(float(v) for v in str(s).split(",")),
}


def parse_config(text):
    """Parse flat key = value text against the schema (fail-closed)."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in body.split("=", 1))
        if key not in CONFIG_SCHEMA:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = val
    vals = {}
    for key, (default, kind, _doc) in CONFIG_SCHEMA.items():
        src = raw.get(key, default)
        try:
            vals[key] = _PARSERS[kind](src)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"key {key!r}: bad value {src!r}") from exc
    return RunConfig.from_values(vals)


def load_config(path):
    with open(path) as f:
        return parse_config(f.read())


@dataclass(frozen=True)
class RunConfig:
    c_list: tuple
    grid_n: int
    half_width: float
    cfl_safety: float
    t_end: float
    checkpoints: int
    n_per_axis: int
    seed: int
    jitter: float
    profile: Profile
    h_sharp_kind: str
    h_sharp_amplitude: float
    h_sharp_radius: float
    sponge_width: int
    sponge_strength: float
    ref_interval: float
    poisson_kernel: str
    probes_field: int
    probes_phase: int
    history_max_snapshots: int
    df_stride: int
    df_backward_steps: int
    conservation_tracked: int
    p_support_guess: float
    output_dir: str

    @classmethod
    def from_values(cls, v):
        profile = Profile(
            kind=v["profile.kind"], center_x=v["profile.center_x"],
            center_p=v["profile.center_p"], radius_x=v["profile.radius_x"],
            radius_p=v["profile.radius_p"], amplitude=v["profile.amplitude"],
        )
        cfg = cls(
            c_list=v["c_list"], grid_n=v["grid.n"],
            half_width=v["grid.half_width"], cfl_safety=v["cfl_safety"],
            t_end=v["t_end"], checkpoints=v["checkpoints"],
            n_per_axis=v["particles.n_per_axis"], seed=v["particles.seed"],
            jitter=v["particles.jitter"], profile=profile,
            h_sharp_kind=v["h_sharp.kind"],
            h_sharp_amplitude=v["h_sharp.amplitude"],
            h_sharp_radius=v["h_sharp.radius"],
            sponge_width=v["sponge.width"],
            sponge_strength=v["sponge.strength"],
            ref_interval=v["sponge.ref_interval"],
            poisson_kernel=v["poisson.kernel"],
            probes_field=v["probes.field"], probes_phase=v["probes.phase_space"],
            history_max_snapshots=v["history.max_snapshots"],
            df_stride=v["df.stride"], df_backward_steps=v["df.backward_steps"],
            conservation_tracked=v["conservation.tracked"],
            p_support_guess=v["p_support_guess"], output_dir=v["output.dir"],
        )
        return cfg.validate()

    def validate(self):
        if self.t_end <= 0:
            raise ConfigurationError("t_end must be positive")
        if not (0 < self.cfl_safety < 1):
            raise ConfigurationError("cfl_safety must lie in (0,1)")
        if any(c < 1.0 for c in self.c_list):
            raise ConfigurationError("all light speeds must be >= 1")
        if self.h_sharp_kind not in ("zero", "bump"):
            raise ConfigurationError("h_sharp.kind must be zero or bump")
        spec = self.grid_spec()
        margin = (self.sponge_width + 2) * spec.h
        needed = (self.profile.support_radius_x
                  + self.p_support_guess * self.t_end + margin)
        if self.half_width < needed:
            raise ConfigurationError(
                f"grid half_width {self.half_width} below the support bound "
                f"R + v_max*t_end + sponge = {needed:.3f}"
            )
        return self

    def grid_spec(self):
        return GridSpec.centered(self.grid_n, self.half_width)

    def steps_for(self, c):
        """CFL step count, rounded up to a multiple of the checkpoint count."""
        spec = self.grid_spec()
        dt_max = self.cfl_safety * spec.h / (np.sqrt(3.0) * c)
        n = int(np.ceil(self.t_end / (self.checkpoints * dt_max)))
        return n * self.checkpoints

    def h_sharp_grid(self, spec):
        """Field-velocity datum h# on the grid (zero or a compact bump)."""
        if self.h_sharp_kind == "zero":
            return None
        r = np.linalg.norm(spec.nodes(), axis=-1)
        from .phase_space import bump
        return Grid3(spec, self.h_sharp_amplitude * bump(r / self.h_sharp_radius))


# ----------------------------------------------------------------------
# single runs


@dataclass
class DiagRow:
    t: float
    c: float            # inf tags the Newtonian run
    P_c: float
    K_c: float
    Q: float
    sup_f: float
    psi_audit: float


@dataclass
class RunResult:
    system: str
    c: float
    history: FieldHistory
    diags: list
    stats: SupportStats
    ensemble: object
    audits: dict
    checkpoint_steps: list
    checkpoint_phis: list = field(default_factory=list)
    final_newtonian: object = None
    steps: int = 0
    wall_clock: float = 0.0


def _history_stride(n_steps, max_snapshots):
    return max(1, int(np.ceil(n_steps / max(max_snapshots - 1, 1))))


def run_nv(cfg, c, collect_checkpoint_phis=False, probe_nodes=None):
    """Evolve the relativistic system at light speed c to t_end.

    Per step: deposit the Vlasov source, advance the wave field (and its
    source-free companion used for the psi audit and the sup-f bound),
    push the characteristics with the conservation-law update, then fold
    the step into the running audits and the field history.

    ``probe_nodes`` (m, 3 integer indices) requests per-step tracking of
    phi and grad phi at those nodes, so the limit errors can be measured
    as suprema over the whole run, matching the uniform-in-time form of
    the convergence statements (the initial light-crossing layer carries
    the O(1/c) content and lasts only ~R/c).
    """
    t_start = time.perf_counter()
    spec = cfg.grid_spec()
    steps = cfg.steps_for(c)
    dt = cfg.t_end / steps
    ens = sample_ensemble(cfg.profile, cfg.n_per_axis, cfg.seed, cfg.jitter)
    g_sharp = gsharp_from_fin(ens, spec) if cfg.poisson_kernel == "lattice" \
        else Grid3(spec, poisson_solve(deposit_density(ens, spec),
                                       kernel=cfg.poisson_kernel).U)
    phi0_grid = g_sharp.data / (c * c)
    ens = ens.with_phi0(gather_cic(spec, phi0_grid, ens.x))
    h_sharp = cfg.h_sharp_grid(spec)

    mu0 = deposit_source(ens, spec, c, cfg.sponge_width)
    fs = init_field(g_sharp, h_sharp, c, dt, src0=mu0,
                    sponge_width=cfg.sponge_width,
                    sponge_strength=cfg.sponge_strength,
                    cfl_safety=cfg.cfl_safety)
    fs_hom = init_field(g_sharp, h_sharp, c, dt, src0=None,
                        sponge_width=cfg.sponge_width,
                        sponge_strength=cfg.sponge_strength,
                        cfl_safety=cfg.cfl_safety)

    hist = FieldHistory(NV, spec, c=c, profile=cfg.profile,
                        phi0_grid=phi0_grid,
                        stride=_history_stride(steps, cfg.history_max_snapshots))
    level = WaveLevel.from_state(fs)
    hist.append_wave(0.0, level.phi, level.dphi_dt, level.grad)
    # the pointwise f evaluator must see phi(0) == phi0 exactly through the
    # stored (float32) frames, so D_F(0) vanishes identically
    hist.phi0_grid = hist.frames[0][0]

    probe_series = None
    if probe_nodes is not None:
        probe_series = {"t": np.empty(steps + 1),
                        "phi": np.empty((steps + 1, len(probe_nodes))),
                        "grad": np.empty((steps + 1, len(probe_nodes), 3))}

        def record_probes(k):
            probe_series["t"][k] = fs.t
            probe_series["phi"][k] = _at_nodes(fs.phi, probe_nodes)
            for ax in range(3):
                probe_series["grad"][k, :, ax] = _at_nodes(level.grad[ax],
                                                           probe_nodes)

        record_probes(0)

    stats = SupportStats(R=ens.R, Pc=_pmax(ens) + 1.0,
                         Q=float(np.max(np.abs(ens.phi0))) if ens.n else 0.0)
    tracker = ConservationTracker(ens, cfg.conservation_tracked)
    interior = fs.interior_mask()
    fin_sup = float(np.max(ens.f0)) if ens.n else 0.0
    phi0_sup = float(np.max(np.abs(phi0_grid)))
    hom_sup = float(np.max(np.abs(fs_hom.phi[interior])))
    audits = {
        "mass_rel_drift": 0.0,
        "psi_audit_max": psi_positivity_audit(fs, fs_hom.phi),
        "linf_bound_worst": 0.0,
        "conservation_drift": 0.0,
        "support_bound_worst": 0.0,
        "kc_max": compute_kc(fs, level.grad),
        "dtphi_interior_max": float(np.abs(fs.dphi_dt_end[interior]).max()),
        "hom_sup_max": hom_sup,
        "hom_lemma_constant": 0.0,
    }
    mu_mass0 = float(np.sum(mu0.mu) * spec.h ** 3)

    checkpoint_steps = _checkpoint_steps(steps, cfg.checkpoints)
    checkpoint_phis = [fs.phi.copy()] if collect_checkpoint_phis else []
    diags = [_nv_diag_row(fs, stats, ens, audits, c)]

    try:
        for k in range(steps):
            mu = deposit_source(ens, spec, c, cfg.sponge_width)
            if cfg.ref_interval > 0 and k > 0 and \
                    int(fs.t / cfg.ref_interval) > int((fs.t - dt) / cfg.ref_interval):
                # re-anchor the absorber to the instantaneous equilibrium so the
                # slowly moving 1/r tail is not mistaken for outgoing radiation;
                # both runs share the reference, keeping their difference (the
                # retarded part psi) an exact discrete source response.  The
                # refresh schedule is in time, not steps, so dt refinement does
                # not move it.
                ref = poisson_solve(Grid3(spec, mu.mu),
                                    kernel=cfg.poisson_kernel).U / (c * c)
                fs = replace(fs, phi_ref=ref)
                fs_hom = replace(fs_hom, phi_ref=ref)
            mw = _weighted_mass(ens, c)
            audits["mass_rel_drift"] = max(
                audits["mass_rel_drift"],
                abs(float(np.sum(mu.mu) * spec.h ** 3) - mw) / max(mw, 1e-300))
            level0 = level
            fs = wave_step(fs, mu, dt)
            fs_hom = wave_step(fs_hom, None, dt)
            level = WaveLevel.from_state(fs)
            ens_new = push_nv(ens, level0, level, dt)
            audits["conservation_drift"] = tracker.update(ens_new, level0, level, dt)
            ens = ens_new

            if ens.n:
                phi_at = gather_cic(spec, fs.phi, ens.x)
                stats = support_update(stats, ens, phi_at)
            hom_sup = max(hom_sup, float(np.max(np.abs(fs_hom.phi[interior]))))
            audits["hom_sup_max"] = hom_sup
            audits["hom_lemma_constant"] = max(
                audits["hom_lemma_constant"],
                float(np.max(np.abs(fs_hom.phi[interior]))) / ((1.0 / c) * (1.0 + fs.t)))
            if ens.n:
                bound = fin_sup * np.exp(4.0 * (hom_sup + phi0_sup))
                audits["linf_bound_worst"] = max(
                    audits["linf_bound_worst"], float(np.max(ens.f)) / bound)
                r_bound = spatial_support_bound(stats, fs.t) + 1e-6 + 2 * dt * stats.Pc
                audits["support_bound_worst"] = max(
                    audits["support_bound_worst"],
                    float(np.max(np.linalg.norm(ens.x, axis=1))) / r_bound)
            audits["psi_audit_max"] = max(
                audits["psi_audit_max"], psi_positivity_audit(fs, fs_hom.phi))
            audits["kc_max"] = max(audits["kc_max"], compute_kc(fs, level.grad))
            audits["dtphi_interior_max"] = max(
                audits["dtphi_interior_max"],
                float(np.abs(fs.dphi_dt_end[interior]).max()))

            if probe_series is not None:
                record_probes(k + 1)
            if (k + 1) % hist.stride == 0 or (k + 1) == steps:
                hist.append_wave(fs.t, level.phi, level.dphi_dt, level.grad)
            if (k + 1) in checkpoint_steps:
                diags.append(_nv_diag_row(fs, stats, ens, audits, c))
                if collect_checkpoint_phis:
                    checkpoint_phis.append(fs.phi.copy())

    except NvlimitError as exc:
        exc.diags = diags      # partial rows for the abort flush
        raise
    audits = dict(audits)
    audits["probe_series"] = probe_series
    audits["pc_final"] = stats.Pc
    audits["final_level"] = {"phi": level.phi, "grad": level.grad}
    return RunResult(
        system=NV, c=c, history=hist, diags=diags, stats=stats, ensemble=ens,
        audits=audits, checkpoint_steps=checkpoint_steps,
        checkpoint_phis=checkpoint_phis, steps=steps,
        wall_clock=time.perf_counter() - t_start,
    )


def _pmax(ens):
    return float(np.max(np.linalg.norm(ens.p, axis=1))) if ens.n else 0.0


def _weighted_mass(ens, c):
    from .field_wave import lorentz_root
    return float(np.sum(ens.w / lorentz_root(ens.p, c)))


def _checkpoint_steps(steps, checkpoints):
    return [steps * k // checkpoints for k in range(1, checkpoints + 1)]


def _nv_diag_row(fs, stats, ens, audits, c):
    return DiagRow(t=fs.t, c=c, P_c=stats.Pc, K_c=audits["kc_max"],
                   Q=stats.Q, sup_f=float(np.max(ens.f)) if ens.n else 0.0,
                   psi_audit=audits["psi_audit_max"])


def run_vp(cfg, collect_checkpoint_U=False):
    """Evolve the Newtonian reference system with the sweep's finest step.

    The step count matches the largest light speed in c_list so checkpoint
    times align exactly across the sweep; f-values ride along unchanged, so
    total mass is conserved bit-for-bit.
    """
    t_start = time.perf_counter()
    spec = cfg.grid_spec()
    steps = cfg.steps_for(max(cfg.c_list))
    dt = cfg.t_end / steps
    ens = sample_ensemble(cfg.profile, cfg.n_per_axis, cfg.seed, cfg.jitter)
    kernel = cfg.poisson_kernel

    def solve(e, t):
        return poisson_solve(deposit_density(e, spec), t=t, kernel=kernel)

    nf = solve(ens, 0.0)
    hist = FieldHistory(VP, spec, profile=cfg.profile,
                        stride=_history_stride(steps, cfg.history_max_snapshots))
    hist.append_newtonian(0.0, nf.U, nf.gradU)
    stats = SupportStats(R=ens.R, Pc=_pmax(ens) + 1.0,
                         Q=float(np.max(np.abs(gather_cic(spec, nf.U, ens.x)))))
    mass0 = ens.total_mass()
    audits = {"mass_rel_drift": 0.0, "support_bound_worst": 0.0}
    checkpoint_steps = _checkpoint_steps(steps, cfg.checkpoints)
    checkpoint_U = [nf.U.copy()] if collect_checkpoint_U else []
    diags = [DiagRow(t=0.0, c=np.inf, P_c=stats.Pc, K_c=np.nan, Q=stats.Q,
                     sup_f=float(np.max(ens.f)), psi_audit=np.nan)]
    hull_lo = ens.x.min(axis=0)
    hull_hi = ens.x.max(axis=0)

    try:
        for k in range(steps):
            t_next = (k + 1) * dt
            # Heun with a corrector solve from the predicted ensemble
            pred = replace(ens, x=ens.x + dt * ens.p)
            nf_next = solve(pred, t_next)
            ens = push_vp(ens, nf, nf_next, dt)
            nf = nf_next
            stats = support_update(stats, ens, gather_cic(spec, nf.U, ens.x))
            audits["mass_rel_drift"] = max(
                audits["mass_rel_drift"], abs(ens.total_mass() - mass0) / mass0)
            r_bound = ens.R + _pmax(ens) * t_next + 1e-6 + 2 * dt * stats.Pc
            audits["support_bound_worst"] = max(
                audits["support_bound_worst"],
                float(np.max(np.linalg.norm(ens.x, axis=1))) / r_bound)
            hull_lo = np.minimum(hull_lo, ens.x.min(axis=0))
            hull_hi = np.maximum(hull_hi, ens.x.max(axis=0))
            if (k + 1) % hist.stride == 0 or (k + 1) == steps:
                nf = solve(ens, t_next)    # corrected-state field for the record
                hist.append_newtonian(t_next, nf.U, nf.gradU)
            if (k + 1) in checkpoint_steps:
                diags.append(DiagRow(t=t_next, c=np.inf, P_c=stats.Pc, K_c=np.nan,
                                     Q=stats.Q, sup_f=float(np.max(ens.f)),
                                     psi_audit=np.nan))
                if collect_checkpoint_U:
                    checkpoint_U.append(nf.U.copy())

    except NvlimitError as exc:
        exc.diags = diags      # partial rows for the abort flush
        raise
    result = RunResult(
        system=VP, c=np.inf, history=hist, diags=diags, stats=stats,
        ensemble=ens, audits=audits, checkpoint_steps=checkpoint_steps,
        steps=steps, wall_clock=time.perf_counter() - t_start,
        final_newtonian=nf,
    )
    result.audits["pc_final"] = stats.Pc
    result.audits["hull_lo"] = hull_lo.tolist()
    result.audits["hull_hi"] = hull_hi.tolist()
    return result


# ----------------------------------------------------------------------
# sweep driver


@dataclass
class ProbeSet:
    node_idx: np.ndarray       # (m, 3) integer node indices for field errors
    phase_x: np.ndarray        # (q, 3)
    phase_p: np.ndarray        # (q, 3)
    taus: list                 # D_F evaluation times


def build_probes(cfg, vp_result):
    """Fixed probe sets shared across the sweep.

    Field probes: grid nodes inside the Newtonian run's support hull
    inflated by two cells (and outside the sponge).  Phase-space probes:
    a deterministic stride through the sampled markers.
    """
    spec = cfg.grid_spec()
    lo = np.asarray(vp_result.audits["hull_lo"]) - 2 * spec.h
    hi = np.asarray(vp_result.audits["hull_hi"]) + 2 * spec.h
    axes = [spec.axis(k) for k in range(3)]
    w = cfg.sponge_width + 1
    sel = [np.where((axes[k] >= lo[k]) & (axes[k] <= hi[k])
                    & (np.arange(spec.n) >= w)
                    & (np.arange(spec.n) < spec.n - w))[0] for k in range(3)]
    if any(s.size == 0 for s in sel):
        raise ConfigurationError("support hull holds no interior probe nodes")
    I, J, K = np.meshgrid(*sel, indexing="ij")
    nodes = np.stack([I.ravel(), J.ravel(), K.ravel()], axis=1)
    if nodes.shape[0] > cfg.probes_field:
        pick = np.linspace(0, nodes.shape[0] - 1, cfg.probes_field).astype(int)
        nodes = nodes[np.unique(pick)]
    ens = sample_ensemble(cfg.profile, cfg.n_per_axis, cfg.seed, cfg.jitter)
    q = min(cfg.probes_phase, ens.n)
    pick = np.unique(np.linspace(0, ens.n - 1, q).astype(int))
    ck_times = [cfg.t_end * k / cfg.checkpoints
                for k in range(0, cfg.checkpoints + 1, max(cfg.df_stride, 1))]
    if ck_times[-1] != cfg.t_end:
        ck_times.append(cfg.t_end)
    return ProbeSet(node_idx=nodes, phase_x=ens.x[pick].copy(),
                    phase_p=ens.p[pick].copy(), taus=ck_times)


def _at_nodes(arr, idx):
    return arr[idx[:, 0], idx[:, 1], idx[:, 2]]


def _vp_probe_series(vp_result, idx):
    """Frame times and (U, grad U) values at the probe nodes, upcast f64."""
    hist = vp_result.history
    times = np.asarray(hist.times)
    U = np.stack([_at_nodes(fr[0].astype(float), idx) for fr in hist.frames])
    G = np.stack([np.stack([_at_nodes(fr[1 + ax].astype(float), idx)
                            for ax in range(3)], axis=-1)
                  for fr in hist.frames])
    return times, U, G


def _interp_rows(times, values, t_query):
    """Linear time interpolation of (n_frames, ...) values to t_query rows."""
    k = np.clip(np.searchsorted(times, t_query, side="right") - 1,
                0, len(times) - 2)
    th = (t_query - times[k]) / (times[k + 1] - times[k])
    th = np.clip(th, 0.0, 1.0)
    shape = (len(t_query),) + (1,) * (values.ndim - 1)
    th = th.reshape(shape)
    return (1.0 - th) * values[k] + th * values[k + 1]


def sweep_member(cfg, c, vp_result, probes):
    """One light-speed member of the sweep: run + cross-system errors.

    Field errors are suprema over the whole run (per-step probe series vs
    the time-interpolated Newtonian reference), matching the theorems'
    uniform-in-time statements; the O(1/c) content lives in the initial
    light-crossing layer, which a t_end snapshot would miss.
    """
    nv = run_nv(cfg, c, probe_nodes=probes.node_idx)
    idx = probes.node_idx
    series = nv.audits.pop("probe_series")
    vpt, vpU, vpG = _vp_probe_series(vp_result, idx)
    Uq = _interp_rows(vpt, vpU, series["t"])
    Gq = _interp_rows(vpt, vpG, series["t"])
    err_phi = float(np.max(np.abs(c * c * series["phi"] - Uq)))
    err_gradphi = float(np.max(np.linalg.norm(
        c * c * series["grad"] - Gq, axis=-1)))
    df = compute_df(nv.history, vp_result.history, probes.phase_x,
                    probes.phase_p, probes.taus,
                    n_steps=cfg.df_backward_steps)
    vpe = vp_result.ensemble
    nve = nv.ensemble
    err_traj = float(np.max(np.linalg.norm(nve.x - vpe.x, axis=1)
                            + np.linalg.norm(nve.p - vpe.p, axis=1)))
    rec = ErrorRecord(c=c, err_phi=err_phi, err_gradphi=err_gradphi,
                      err_dtphi=nv.audits["dtphi_interior_max"],
                      err_f=df.value, err_traj=err_traj,
                      t_eval=cfg.t_end).validate()
    nv.audits["df_skipped"] = df.skipped
    nv.audits["df_t0"] = df.per_tau[0][1] if df.per_tau else 0.0
    nv.audits.pop("final_level", None)
    return rec, nv.diags, nv.audits, nv.steps, nv.wall_clock


@dataclass
class RunSummary:
    records: list
    fits: dict
    audit_table: list
    diags: list
    step_counts: dict
    wall_clocks: dict
    meta: dict

    def fit_for(self, kind):
        return self.fits[kind]

    def all_audits_pass(self):
        return all(ok for _, _, _, ok in self.audit_table)


FIT_KINDS = ("err_phi", "err_gradphi", "err_dtphi", "err_f", "err_traj")


def run_csweep(cfg, workers=1, out_dir=None):
    """The full limit measurement: one Newtonian run, one relativistic run
    per light speed (optionally in parallel processes), error records at
    t_end, log-log order fits, and the CSV/text outputs."""
    if len(cfg.c_list) < 3:
        raise ConfigurationError("the sweep needs at least 3 light speeds")
    t_start = time.perf_counter()
    vp = run_vp(cfg)
    probes = build_probes(cfg, vp)
    members = {}
    failures = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = {c: pool.submit(sweep_member, cfg, c, vp, probes)
                    for c in cfg.c_list}
            for c in cfg.c_list:
                try:
                    members[c] = futs[c].result()
                except NvlimitError as exc:
                    failures[c] = exc
    else:
        for c in cfg.c_list:
            try:
                members[c] = sweep_member(cfg, c, vp, probes)
            except NvlimitError as exc:
                failures[c] = exc

    records = [members[c][0] for c in sorted(members)]
    diags = list(vp.diags)
    audits_per_c = {}
    step_counts = {"vp": vp.steps}
    wall_clocks = {"vp": vp.wall_clock}
    for c in sorted(members):
        _, d, a, s, w = members[c]
        diags.extend(d)
        audits_per_c[c] = a
        step_counts[f"nv_c{c:g}"] = s
        wall_clocks[f"nv_c{c:g}"] = w
    fits = {}
    if len(records) >= 3:
        for kind in FIT_KINDS:
            fits[kind] = fit_order([(r.c, getattr(r, kind)) for r in records])
    audit_table = _audit_table(cfg, vp, audits_per_c, failures)
    meta = {
        "checkpoints": cfg.checkpoints,
        "df_stride": cfg.df_stride,
        "df_taus": probes.taus,
        "failures": {f"{c:g}": str(e) for c, e in failures.items()},
        "field_probes": int(probes.node_idx.shape[0]),
        "phase_probes": int(probes.phase_x.shape[0]),
    }
    summary = RunSummary(records=records, fits=fits, audit_table=audit_table,
                         diags=diags, step_counts=step_counts,
                         wall_clocks=wall_clocks, meta=meta)
    summary.meta["wall_clock_total"] = time.perf_counter() - t_start
    if out_dir is not None:
        write_outputs(out_dir, summary)
    return summary


def _audit_table(cfg, vp, audits_per_c, failures):
    """Invariant audits, each exactly once, as (name, value, threshold, ok)."""
    rows = []

    def row(name, value, threshold, ok):
        rows.append((name, float(value), float(threshold), bool(ok)))

    worst = lambda key: max((a[key] for a in audits_per_c.values()), default=0.0)
    row("member_runs_completed", len(audits_per_c),
        len(cfg.c_list), len(failures) == 0)
    row("deposit_mass_conservation", worst("mass_rel_drift"), 1e-12,
        worst("mass_rel_drift") <= 1e-12)
    row("vp_mass_constant", vp.audits["mass_rel_drift"], 0.0,
        vp.audits["mass_rel_drift"] == 0.0)
    row("psi_sign_audit", worst("psi_audit_max"), 1e-3,
        worst("psi_audit_max") <= 1e-3)
    row("linf_bound", worst("linf_bound_worst"), 1.0 + 1e-6,
        worst("linf_bound_worst") <= 1.0 + 1e-6)
    row("conservation_drift", worst("conservation_drift"), 1e-3,
        worst("conservation_drift") <= 1e-3)
    sup_ratio = max(worst("support_bound_worst"),
                    vp.audits["support_bound_worst"])
    row("support_lemma", sup_ratio, 1.0, sup_ratio <= 1.0)
    kcs = [a["kc_max"] for a in audits_per_c.values()]
    kc_ratio = (max(kcs) / max(min(kcs), 1e-300)) if kcs else 0.0
    row("kc_uniform_in_c", kc_ratio, 4.0, kc_ratio <= 4.0)
    pc_all = max([vp.audits["pc_final"]]
                 + [a["pc_final"] for a in audits_per_c.values()])
    row("pc_bounded", pc_all, cfg.p_support_guess + 1.0,
        pc_all <= cfg.p_support_guess + 1.0)
    row("df_zero_at_t0", worst("df_t0"), 0.0, worst("df_t0") == 0.0)
    row("df_skipped_probes", worst("df_skipped"), 0.0,
        worst("df_skipped") == 0.0)
    homs = [a["hom_lemma_constant"] for _, a in sorted(audits_per_c.items())]
    hom_ok = all(b <= a * 1.1 + 1e-12 for a, b in zip(homs, homs[1:]))
    row("hom_field_bound_stable", max(homs, default=0.0),
        homs[0] * 1.1 if homs else 0.0, hom_ok)
    return rows


def csweep_synthetic(c_list, amplitude=1.0, floor=0.0):
    """Plumbing-only sweep: exact K/c (+ floor) errors through the same
    record/fit machinery; recovers slope -1 when floor = 0."""
    records = [ErrorRecord(c=c, err_phi=amplitude / c + floor,
                           err_gradphi=amplitude / c + floor,
                           err_dtphi=amplitude / c + floor,
                           err_f=amplitude / c + floor,
                           err_traj=amplitude / c + floor,
                           t_eval=1.0).validate()
               for c in sorted(c_list)]
    fits = {kind: fit_order([(r.c, getattr(r, kind)) for r in records])
            for kind in FIT_KINDS}
    return RunSummary(records=records, fits=fits, audit_table=[], diags=[],
                      step_counts={}, wall_clocks={}, meta={"synthetic": True})


# ----------------------------------------------------------------------
# rescaling covariance


def rescaled_config(cfg, c):
    """Map a light-speed-c setup onto the equivalent c = 1 setup.

    Time dilates by c, momenta contract by c, the distribution amplitude
    grows by c (so weights scale by 1/c^2), the field-velocity datum picks
    up the extra 1/c; positions and the grid are untouched.
    """
    prof = cfg.profile
    mapped = Profile(kind=prof.kind, center_x=prof.center_x,
                     center_p=tuple(v / c for v in prof.center_p),
                     radius_x=prof.radius_x, radius_p=prof.radius_p / c,
                     amplitude=prof.amplitude * c)
    return replace(cfg, c_list=(1.0,), profile=mapped, t_end=cfg.t_end * c,
                   h_sharp_amplitude=cfg.h_sharp_amplitude / c ** 3,
                   ref_interval=cfg.ref_interval * c,
                   p_support_guess=max(cfg.p_support_guess / c, 1e-6))


def rescaling_test(cfg, c, refine=True):
    """Covariance check: the c-run, replayed through the c = 1 map, must
    agree with a native c = 1 run up to discretization.

    Reports the matched-checkpoint interior field discrepancy, Richardson
    discretization-error estimates for both runs (under joint (h, dt)
    refinement), and the pass flag
    discrepancy <= 2 * max(discretization errors).
    """
    run_a = run_nv(cfg, c, collect_checkpoint_phis=True)
    cfg_b = rescaled_config(cfg, c)
    run_b = run_nv(cfg_b, 1.0, collect_checkpoint_phis=True)
    spec = cfg.grid_spec()
    w = cfg.sponge_width + 2
    sl = (slice(w, spec.n - w),) * 3
    disc = max(float(np.max(np.abs(pa[sl] - pb[sl])))
               for pa, pb in zip(run_a.checkpoint_phis, run_b.checkpoint_phis))
    report = {
        "c": c,
        "mapped_discrepancy": disc,
        "checkpoints": len(run_a.checkpoint_phis),
    }
    if refine:
        ref_a = _refinement_error(cfg, c)
        ref_b = _refinement_error(cfg_b, 1.0)
        budget = 2.0 * max(ref_a, ref_b)
        report.update(refine_error_a=ref_a, refine_error_b=ref_b,
                      budget=budget, passed=bool(disc <= budget))
    return report


def _refinement_error(cfg, c):
    """Richardson estimate: interior checkpoint difference against the
    jointly refined (2h -> h, dt halves via CFL) run, on coarse probes."""
    coarse = run_nv(cfg, c, collect_checkpoint_phis=True)
    fine_cfg = replace(cfg, grid_n=2 * cfg.grid_n,
                       sponge_width=2 * cfg.sponge_width)
    fine = run_nv(fine_cfg, c, collect_checkpoint_phis=True)
    spec = cfg.grid_spec()
    w = cfg.sponge_width + 2
    ax = [spec.axis(k)[w:spec.n - w] for k in range(3)]
    X, Y, Z = np.meshgrid(*ax, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    sl = (slice(w, spec.n - w),) * 3
    worst = 0.0
    fspec = fine_cfg.grid_spec()
    for pa, pf in zip(coarse.checkpoint_phis, fine.checkpoint_phis):
        vals = gather_cic(fspec, pf, pts)
        worst = max(worst, float(np.max(np.abs(pa[sl].ravel() - vals))))
    return worst


# ----------------------------------------------------------------------
# output writers


def _fmt(v):
    if isinstance(v, float):
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf"
        return repr(v)
    return str(v)


def write_outputs(out_dir, summary):
    import os

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "diagnostics.csv"), "w") as f:
        f.write("t,c,P_c,K_c,Q,sup_f,psi_audit\n")
        rows = sorted(summary.diags,
                      key=lambda r: (np.isinf(r.c), r.c, r.t))
        for r in rows:
            f.write(",".join(_fmt(v) for v in
                             (r.t, r.c, r.P_c, r.K_c, r.Q, r.sup_f,
                              r.psi_audit)) + "\n")
    with open(os.path.join(out_dir, "convergence.csv"), "w") as f:
        f.write("c,err_phi,err_gradphi,err_dtphi,err_f,err_traj,t_eval\n")
        for r in summary.records:
            f.write(",".join(_fmt(v) for v in
                             (r.c, r.err_phi, r.err_gradphi, r.err_dtphi,
                              r.err_f, r.err_traj, r.t_eval)) + "\n")
    with open(os.path.join(out_dir, "order.txt"), "w") as f:
        for kind in FIT_KINDS:
            if kind in summary.fits:
                fit = summary.fits[kind]
                f.write(f"{kind} slope={_fmt(fit.slope)} "
                        f"intercept={_fmt(fit.intercept)} "
                        f"r2={_fmt(fit.r_squared)}\n")
    with open(os.path.join(out_dir, "summary.json"), "w") as f:
        json.dump(summary_to_dict(summary), f, indent=1, sort_keys=True)
        f.write("\n")


def summary_to_dict(summary):
    return {
        "records": [vars(r) for r in summary.records],
        "fits": {k: {"slope": v.slope, "intercept": v.intercept,
                     "r_squared": v.r_squared, "points": v.points}
                 for k, v in summary.fits.items()},
        "audit_table": [list(row) for row in summary.audit_table],
        "step_counts": summary.step_counts,
        "wall_clocks": summary.wall_clocks,
        "meta": summary.meta,
    }
