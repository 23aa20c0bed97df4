import numpy as np
import pytest

from nvlimit.diagnostics import compute_df, compute_kc, fit_order
from nvlimit.errors import ConfigurationError
from nvlimit.field_wave import init_field
from nvlimit.grids import Grid3, GridSpec
from nvlimit.phase_space import Profile
from nvlimit.pusher import NV, VP, FieldHistory

PROF = Profile(kind="radial-bump", radius_x=0.7, radius_p=0.5,
               center_p=(0.2, 0.0, 0.0), amplitude=1.0)


def test_fit_order_exact_power_laws():
    cs = (4.0, 8.0, 16.0, 32.0)
    fit = fit_order([(c, 3.7 / c) for c in cs])
    assert fit.slope == pytest.approx(-1.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    fit2 = fit_order([(c, 0.2 / c ** 2) for c in cs])
    assert fit2.slope == pytest.approx(-2.0, abs=1e-12)


def test_fit_order_floor_flattens_slope():
    cs = (4.0, 8.0, 16.0, 32.0)
    fit = fit_order([(c, 1.0 / c + 0.05) for c in cs])
    assert -1.0 < fit.slope < -0.3


def test_fit_order_scale_invariance():
    cs = (2.0, 4.0, 8.0)
    pts = [(c, 0.3 / c ** 1.4) for c in cs]
    a = fit_order(pts)
    b = fit_order([(c, 17.0 * e) for c, e in pts])
    assert a.slope == pytest.approx(b.slope, abs=1e-13)
    assert b.intercept == pytest.approx(a.intercept + np.log(17.0), abs=1e-12)


def test_fit_order_rejects_degenerate_inputs():
    with pytest.raises(ConfigurationError):
        fit_order([(4.0, 1.0), (8.0, 0.5)])
    with pytest.raises(ConfigurationError):
        fit_order([(4.0, 1.0), (8.0, 0.0), (16.0, 0.2)])
    with pytest.raises(ConfigurationError):
        fit_order([(4.0, 1.0), (4.0, 0.9), (4.0, 0.8)])


def test_compute_kc_zero_and_linear_field():
    spec = GridSpec.centered(24, 2.0)
    c = 3.0
    fs = init_field(Grid3(spec, np.zeros(spec.shape)), None, c, 1e-3,
                    sponge_width=3)
    assert compute_kc(fs) == 0.0
    a = np.array([0.04, 0.0, 0.0])
    fs2 = init_field(Grid3(spec, c * c * (spec.nodes() @ a)), None, c, 1e-3,
                     sponge_width=3)
    # static, linear in x: K_c = c^2 |grad phi| on the interior
    assert compute_kc(fs2) == pytest.approx(c * c * 0.04, rel=1e-10)


def _zero_histories(spec, c):
    z = np.zeros(spec.shape, dtype=np.float32)
    hn = FieldHistory(NV, spec, c=c, profile=PROF, phi0_grid=z)
    hv = FieldHistory(VP, spec, profile=PROF)
    for k in range(5):
        t = 0.25 * k
        hn.append_wave(t, z, z, (z, z, z))
        hv.append_newtonian(t, z, (z, z, z))
    return hn, hv


def test_df_zero_at_time_zero_and_growth():
    spec = GridSpec.centered(24, 3.0)
    c = 8.0
    hn, hv = _zero_histories(spec, c)
    rng = np.random.default_rng(0)
    X = rng.uniform(-0.4, 0.4, (40, 3))
    P = rng.uniform(-0.3, 0.3, (40, 3)) + np.array([0.2, 0, 0])
    res = compute_df(hn, hv, X, P, taus=[0.0])
    assert res.value == 0.0 and res.skipped == 0
    # with zero fields both stream freely; the relativistic foot differs by
    # O(c^-2), so D_F grows like c^-2 * t * |grad f|
    res2 = compute_df(hn, hv, X, P, taus=[0.0, 0.5, 1.0])
    assert 0.0 < res2.value <= 5.0 / c ** 2
    assert res2.per_tau[0][1] == 0.0
    assert res2.per_tau[-1][1] >= res2.per_tau[1][1]   # running sup


def test_df_same_history_same_system_is_zero():
    spec = GridSpec.centered(24, 3.0)
    hn, _ = _zero_histories(spec, 8.0)
    X = np.array([[0.1, 0.0, 0.0], [0.0, 0.2, -0.1]])
    P = np.array([[0.2, 0.0, 0.0], [0.1, -0.1, 0.0]])
    from nvlimit.pusher import eval_f_batch
    a, _ = eval_f_batch(hn, 0.75, X, P)
    b, _ = eval_f_batch(hn, 0.75, X, P)
    assert np.array_equal(a, b)


def test_df_requires_history_coverage():
    spec = GridSpec.centered(24, 3.0)
    hn, hv = _zero_histories(spec, 8.0)
    with pytest.raises(ConfigurationError):
        compute_df(hn, hv, np.zeros((1, 3)), np.zeros((1, 3)), taus=[2.0])
