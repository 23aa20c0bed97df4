import os

import numpy as np
import pytest
from dataclasses import replace

from nvlimit.errors import ConfigurationError, SupportViolationError
from nvlimit.grids import GridSpec
from nvlimit.harness import (CONFIG_SCHEMA, csweep_synthetic, load_config,
                             parse_config, rescaling_test, run_csweep, run_nv,
                             run_vp, write_outputs)

SMALL = """
c_list = 4,8,16
grid.n = 24
grid.half_width = 2.6
t_end = 0.4
checkpoints = 8
particles.n_per_axis = 4
profile.radius_x = 0.7
profile.radius_p = 0.5
profile.amplitude = 0.8
sponge.width = 3
probes.field = 120
probes.phase_space = 40
df.backward_steps = 64
p_support_guess = 1.0
history.max_snapshots = 24
"""


@pytest.fixture(scope="module")
def small_cfg():
    return parse_config(SMALL)


# ----- configuration ----------------------------------------------------------


def test_defaults_parse_and_schema_documented():
    cfg = parse_config("")
    assert cfg.grid_n == 48 and len(cfg.c_list) == 4
    for key, (_default, _kind, doc) in CONFIG_SCHEMA.items():
        assert doc   # every key carries its unit/meaning note


def test_unknown_key_fails_closed():
    with pytest.raises(ConfigurationError):
        parse_config("grid.m = 32")


def test_duplicate_and_malformed_keys_rejected():
    with pytest.raises(ConfigurationError):
        parse_config("t_end = 1\nt_end = 2")
    with pytest.raises(ConfigurationError):
        parse_config("just a line")
    with pytest.raises(ConfigurationError):
        parse_config("grid.n = notanumber")


def test_domain_size_invariant_enforced():
    with pytest.raises(ConfigurationError):
        parse_config("grid.half_width = 1.5")


def test_config_comments_and_file_roundtrip(tmp_path):
    p = os.path.join(tmp_path, "cfg.txt")
    with open(p, "w") as f:
        f.write("# comment line\n t_end = 0.5  # trailing\n" + SMALL)
    with pytest.raises(ConfigurationError):
        load_config(p)       # duplicate t_end
    with open(p, "w") as f:
        f.write("# only comments\n\n")
    cfg = load_config(p)
    assert cfg.t_end == 1.0


def test_step_counts_align_with_checkpoints(small_cfg):
    for c in small_cfg.c_list:
        assert small_cfg.steps_for(c) % small_cfg.checkpoints == 0
    assert small_cfg.steps_for(16) >= small_cfg.steps_for(8)


# ----- single runs --------------------------------------------------------------


def test_zero_profile_runs_identically_zero(small_cfg):
    cfg = replace(small_cfg, profile=replace(small_cfg.profile, amplitude=0.0))
    # an empty ensemble is a configuration the sampler rejects only when the
    # profile is nonzero; amplitude 0 gives the trivial run
    res = run_nv(cfg, 4.0)
    assert all(np.all(frame[0] == 0.0) for frame in res.history.frames)
    assert res.audits["kc_max"] == 0.0


def test_single_step_field_change_bound(small_cfg):
    # one step changes phi by at most dt^2 (4 pi max mu + c^2 |Lap phi0|)
    from nvlimit.field_poisson import gsharp_from_fin
    from nvlimit.field_wave import deposit_source, init_field, wave_step
    from nvlimit.grids import laplacian
    from nvlimit.phase_space import sample_ensemble

    cfg = small_cfg
    c = 4.0
    spec = cfg.grid_spec()
    steps = cfg.steps_for(c)
    dt = cfg.t_end / steps
    ens = sample_ensemble(cfg.profile, cfg.n_per_axis, cfg.seed)
    g = gsharp_from_fin(ens, spec)
    mu = deposit_source(ens, spec, c, cfg.sponge_width)
    fs = init_field(g, None, c, dt, src0=mu, sponge_width=cfg.sponge_width)
    fs1 = wave_step(fs, mu, dt)
    bound = dt * dt * (4 * np.pi * mu.mu.max()
                       + c * c * np.abs(laplacian(fs.phi, spec.h)).max())
    assert np.max(np.abs(fs1.phi - fs.phi)) <= bound + 1e-15


def test_halving_dt_changes_final_phi_second_order(small_cfg):
    c = 4.0
    runs = {}
    for cfl in (0.8, 0.4, 0.2):
        cfg = replace(small_cfg, cfl_safety=cfl)
        runs[cfl] = run_nv(cfg, c).audits["final_level"]["phi"]
    d1 = np.max(np.abs(runs[0.8] - runs[0.4]))
    d2 = np.max(np.abs(runs[0.4] - runs[0.2]))
    assert d1 / d2 > 3.0     # O(dt^2): successive differences shrink ~4x


def test_vp_mass_exact_and_radial_symmetry(small_cfg):
    cfg = replace(small_cfg,
                  profile=replace(small_cfg.profile, center_p=(0.0, 0.0, 0.0)))
    res = run_vp(cfg)
    assert res.audits["mass_rel_drift"] == 0.0
    # spherically symmetric start: deposited density stays symmetric under
    # axis transpositions to grid tolerance
    from nvlimit.field_poisson import deposit_density
    rho = deposit_density(res.ensemble, cfg.grid_spec()).data
    scale = rho.max()
    for perm in ((1, 0, 2), (2, 1, 0)):
        assert np.max(np.abs(rho - np.transpose(rho, perm))) <= 2e-2 * scale


def test_nv_abort_reason_machine_readable(small_cfg):
    cfg = replace(small_cfg, t_end=3.0)   # escapes the box: support violation
    with pytest.raises(SupportViolationError) as info:
        run_nv(cfg, 4.0)
    assert info.value.reason == "support-violation"


# ----- sweep ---------------------------------------------------------------------


def test_synthetic_sweep_recovers_slope_minus_one():
    s = csweep_synthetic((4.0, 8.0, 16.0, 32.0), amplitude=2.0)
    for kind, fit in s.fits.items():
        assert fit.slope == pytest.approx(-1.0, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_sweep_requires_three_speeds(small_cfg):
    with pytest.raises(ConfigurationError):
        run_csweep(replace(small_cfg, c_list=(4.0, 8.0)))


@pytest.fixture(scope="module")
def small_sweep(small_cfg):
    return run_csweep(small_cfg)


def test_sweep_errors_decrease_with_c(small_sweep):
    for kind in ("err_phi", "err_gradphi", "err_dtphi", "err_f", "err_traj"):
        vals = [getattr(r, kind) for r in small_sweep.records]
        assert all(a > b for a, b in zip(vals, vals[1:]))


def test_sweep_audit_table_complete_and_unique(small_sweep):
    names = [row[0] for row in small_sweep.audit_table]
    assert len(names) == len(set(names))
    for required in ("deposit_mass_conservation", "psi_sign_audit",
                     "linf_bound", "conservation_drift", "support_lemma",
                     "kc_uniform_in_c", "pc_bounded", "vp_mass_constant"):
        assert required in names


def test_sweep_outputs_deterministic(small_cfg, tmp_path):
    import filecmp
    a, b = os.path.join(tmp_path, "a"), os.path.join(tmp_path, "b")
    write_outputs(a, run_csweep(small_cfg))
    write_outputs(b, run_csweep(small_cfg))
    for name in ("diagnostics.csv", "convergence.csv", "order.txt"):
        assert filecmp.cmp(os.path.join(a, name), os.path.join(b, name),
                           shallow=False), name
    head = open(os.path.join(a, "convergence.csv")).readline().strip()
    assert head == "c,err_phi,err_gradphi,err_dtphi,err_f,err_traj,t_eval"


def test_sweep_order_independence(small_cfg, small_sweep):
    cfg2 = replace(small_cfg, c_list=(16.0, 4.0, 8.0))
    s2 = run_csweep(cfg2)
    for r1, r2 in zip(small_sweep.records, s2.records):
        assert r1.c == r2.c and r1.err_phi == r2.err_phi


def test_sweep_parallel_workers_match_serial(small_cfg, small_sweep):
    s2 = run_csweep(small_cfg, workers=2)
    for r1, r2 in zip(small_sweep.records, s2.records):
        assert r1.err_phi == r2.err_phi and r1.err_f == r2.err_f


# ----- rescaling -----------------------------------------------------------------


def test_rescaling_identity_at_c_one(small_cfg):
    report = rescaling_test(small_cfg, 1.0, refine=False)
    assert report["mapped_discrepancy"] <= 1e-12


def test_rescaling_covariance_c2(small_cfg):
    report = rescaling_test(small_cfg, 2.0, refine=False)
    # the discrete scheme is covariant: mapped runs agree to roundoff-level
    # accumulation, far inside any discretization budget
    assert report["mapped_discrepancy"] <= 1e-8


def _slope_stderr(fit):
    lc = np.log([c for c, _ in fit.points])
    le = np.log([e for _, e in fit.points])
    pred = fit.slope * lc + fit.intercept
    n = len(lc)
    return float(np.sqrt(np.sum((le - pred) ** 2) / (n - 2)
                         / np.sum((lc - lc.mean()) ** 2)))


def test_sweep_slopes_robust_to_particle_refinement(small_cfg, small_sweep):
    # ~2.4x more markers: fitted slopes move by less than the fits' own
    # 95% confidence on the slope difference
    t95 = {1: 12.71, 2: 4.303, 3: 3.182}
    finer = run_csweep(replace(small_cfg, n_per_axis=5))
    for kind in ("err_phi", "err_gradphi", "err_f", "err_traj"):
        fa = small_sweep.fits[kind]
        fb = finer.fits[kind]
        dof = len(fa.points) - 2
        conf = t95.get(dof, 2.0) * np.hypot(_slope_stderr(fa), _slope_stderr(fb))
        assert abs(fa.slope - fb.slope) <= conf, kind


def test_h_sharp_bump_option_runs(small_cfg):
    cfg = replace(small_cfg, h_sharp_kind="bump", h_sharp_amplitude=0.4,
                  h_sharp_radius=0.8, t_end=0.2)
    res = run_nv(cfg, 4.0)
    # the datum seeds dphi/dt(0) = h#/c^2 on the nodes
    spec = cfg.grid_spec()
    first = res.history.frames[0][1]   # stored dphi/dt at t = 0
    i = spec.n // 2
    node = np.array([spec.axis(0)[i], spec.axis(1)[i], spec.axis(2)[i]])
    from nvlimit.phase_space import bump
    want = 0.4 * float(bump(np.linalg.norm(node) / 0.8)) / 16.0
    assert abs(first[i, i, i] - want) <= 1e-6
