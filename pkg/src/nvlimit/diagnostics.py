"""Quantitative limit diagnostics: support/field-strength functionals,
cross-system error norms, and convergence-order extraction.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .pusher import eval_f_batch


@dataclass
class ErrorRecord:
    """Per-c error functionals measured against the Newtonian reference."""

    c: float
    err_phi: float = np.nan        # max probe |c^2 phi - U|
    err_gradphi: float = np.nan    # max probe |c^2 grad phi - grad U|
    err_dtphi: float = np.nan      # running max interior |dphi/dt|
    err_f: float = np.nan          # D_F estimate
    err_traj: float = np.nan       # max matched-particle |dX| + |dP|
    t_eval: float = np.nan

    def validate(self):
        vals = [self.err_phi, self.err_gradphi, self.err_dtphi,
                self.err_f, self.err_traj]
        if not all(np.isfinite(v) and v >= 0 for v in vals):
            raise ConfigurationError("error record holds non-finite entries")
        return self


@dataclass
class OrderFit:
    """Least-squares line through (ln c, ln err); slope -1 means O(1/c)."""

    slope: float
    intercept: float
    r_squared: float
    points: list = field(default_factory=list)


def fit_order(points):
    """Fit ln(err) = slope * ln(c) + intercept over >= 3 distinct c values.

    Zero or negative errors are rejected: they mean the measurement hit a
    floor (or a bug) and the log fit would be meaningless.
    """
    pts = [(float(c), float(e)) for c, e in points]
    if len({c for c, _ in pts}) < 3:
        raise ConfigurationError("order fit needs >= 3 distinct c values")
    if any(e <= 0.0 for _, e in pts):
        raise ConfigurationError(
            "order fit got a non-positive error; discretization floor reached"
        )
    lc = np.log([c for c, _ in pts])
    le = np.log([e for _, e in pts])
    slope, intercept = np.polyfit(lc, le, 1)
    pred = slope * lc + intercept
    ss_res = float(np.sum((le - pred) ** 2))
    ss_tot = float(np.sum((le - le.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return OrderFit(slope=float(slope), intercept=float(intercept),
                    r_squared=min(r2, 1.0), points=pts)


def compute_kc(fs, grad=None):
    """Field-strength functional max over interior of c|dphi/dt| + c^2|grad phi|."""
    mask = fs.interior_mask()
    g = grad if grad is not None else fs.gradient_grids()
    gabs = np.sqrt(g[0] ** 2 + g[1] ** 2 + g[2] ** 2)
    val = fs.c * np.abs(fs.dphi_dt_end) + fs.c ** 2 * gabs
    return float(val[mask].max())


@dataclass
class DFResult:
    value: float
    skipped: int
    per_tau: list


def compute_df(hist_nv, hist_vp, probes_x, probes_p, taus, n_steps=None):
    """Running sup over probes and checkpoint times of |f - f_inf|.

    Both distribution values come from backward-characteristic evaluation
    through the stored field histories.  Probes whose backward path leaves
    the interpolable region are skipped and counted.
    """
    taus = sorted(float(t) for t in taus)
    if hist_nv.t_max is None or hist_vp.t_max is None:
        raise ConfigurationError("empty field history")
    if taus and (taus[-1] > hist_nv.t_max + 1e-9 or taus[-1] > hist_vp.t_max + 1e-9):
        raise ConfigurationError("history does not cover the requested times")
    worst = 0.0
    skipped = 0
    per_tau = []
    for tau in taus:
        f_nv, ok_nv = eval_f_batch(hist_nv, tau, probes_x, probes_p,
                                   n_steps=n_steps)
        f_vp, ok_vp = eval_f_batch(hist_vp, tau, probes_x, probes_p,
                                   n_steps=n_steps)
        ok = ok_nv & ok_vp
        skipped += int(np.sum(~ok))
        if np.any(ok):
            worst = max(worst, float(np.max(np.abs(f_nv[ok] - f_vp[ok]))))
        per_tau.append((tau, worst))
    return DFResult(value=worst, skipped=skipped, per_tau=per_tau)
