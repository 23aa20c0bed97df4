"""Verification batteries: representation-formula cross-checks and the
lemma/kernel-bound audits.  Used by the CLI verbs and the acceptance suite;
results come back as record-oriented (key, value) lists for golden-file
style reports.
"""

import numpy as np

from .phase_space import Profile, bump
from .quadrature import QuadSpec, gauss_legendre
from .representation import (ManufacturedF, bump_prime, difference_bound_audit,
                             eval_kernels, kernel_bound_audit, lemma1_scan,
                             lemma2_check, lemma3_audit,
                             representation_dtphi_oracle,
                             representation_dxphi_oracle, retarded_phi_oracle,
                             spherical_mean)

ORACLE_PROFILE = Profile(kind="radial-bump", center_x=(0.0, 0.0, 0.0),
                         center_p=(0.2, 0.0, 0.0), radius_x=0.8,
                         radius_p=0.7, amplitude=1.0)

DTPHI_POINTS = (
    (0.50, (0.3, 0.1, -0.2)),
    (0.30, (0.0, 0.0, 0.0)),
    (0.80, (0.2, -0.3, 0.1)),     # data sphere beyond the support
    (0.45, (-0.5, 0.2, 0.25)),
    (0.60, (0.1, 0.4, -0.3)),
)

DXPHI_POINTS = (
    (0.50, (0.3, 0.1, -0.2), 0),
    (0.40, (-0.2, 0.3, 0.1), 1),
)


def representation_battery(c=2.0, lam=0.4, quad=QuadSpec(32, 29, 8),
                           fd_step=0.004, rtol=1e-2, kernel_samples=10_000,
                           seed=3):
    """Representation oracles vs centered differences of the retarded field,
    plus the exact kernel identities at random samples.

    Returns (report_lines, all_ok).
    """
    mf = ManufacturedF(profile=ORACLE_PROFILE, lam=lam, mode="transport")
    report = []
    ok = True
    for t, x in DTPHI_POINTS:
        x = np.asarray(x)
        fd = (retarded_phi_oracle(mf, c, t + fd_step, x, quad)
              - retarded_phi_oracle(mf, c, t - fd_step, x, quad)) / (2 * fd_step)
        rep = representation_dtphi_oracle(mf, c, t, x, quad)
        rel = abs(rep - fd) / max(abs(fd), 1e-300)
        ok = ok and rel <= rtol
        tag = f"dtphi.t{t:g}.x{x[0]:g}_{x[1]:g}_{x[2]:g}"
        report.append((f"{tag}.finite_difference", fd))
        report.append((f"{tag}.representation", rep))
        report.append((f"{tag}.rel_err", rel))
    for t, x, i in DXPHI_POINTS:
        x = np.asarray(x)
        e = np.zeros(3)
        e[i] = fd_step
        fd = (retarded_phi_oracle(mf, c, t, x + e, quad)
              - retarded_phi_oracle(mf, c, t, x - e, quad)) / (2 * fd_step)
        rep = representation_dxphi_oracle(mf, c, t, x, i, quad)
        rel = abs(rep - fd) / max(abs(fd), 1e-300)
        ok = ok and rel <= rtol
        tag = f"dxphi{i}.t{t:g}"
        report.append((f"{tag}.finite_difference", fd))
        report.append((f"{tag}.representation", rep))
        report.append((f"{tag}.rel_err", rel))

    worst_b, worst_c, worst_split = kernel_identity_audit(kernel_samples, seed)
    ok = ok and worst_b == 0.0 and worst_c == 0.0 and worst_split < 1e-10
    report.append(("kernel_identity.b_x_vs_omega_bt.max_abs", worst_b))
    report.append(("kernel_identity.c_x_vs_outer.max_abs", worst_c))
    report.append(("kernel_identity.a_split.max_abs", worst_split))
    report.append(("battery.pass", 1.0 if ok else 0.0))
    return report, ok


def kernel_identity_audit(n_samples=10_000, seed=3, c_values=(1.0, 2.0, 8.0)):
    """b_x = omega * b_t and c_x = omega (x) c_t exactly; the split kernel
    identity a_tilde = a_x - c*omega/(op^2 sq) to roundoff."""
    rng = np.random.default_rng(seed)
    worst_b = worst_c = worst_split = 0.0
    per_c = n_samples // len(c_values)
    for c in c_values:
        for _ in range(per_c):
            omega = rng.normal(size=3)
            omega /= np.linalg.norm(omega)
            p = rng.normal(size=3) * rng.uniform(0.0, 5.0)
            k = eval_kernels(omega, p, c)
            worst_b = max(worst_b, float(np.max(np.abs(k.b_x - omega * k.b_t))))
            worst_c = max(worst_c, float(np.max(np.abs(
                k.c_x - np.outer(omega, k.c_t)))))
            sq = np.sqrt(1.0 + p @ p / c ** 2)
            op = 1.0 + omega @ (p / sq) / c
            split = k.a_x - c * omega / (op * op * sq)
            worst_split = max(worst_split,
                              float(np.max(np.abs(split - k.a_tilde))))
    return worst_b, worst_c, worst_split


def radial_test_field(radius=1.3, amplitude=1.0):
    """A C^inf radial bump with analytic gradient and Laplacian."""

    def h(y):
        r = np.linalg.norm(np.atleast_2d(y), axis=-1)
        return amplitude * bump(r / radius)

    def grad_h(y):
        y = np.atleast_2d(y)
        r = np.linalg.norm(y, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(r[:, None] > 0, y / r[:, None], 0.0)
        return amplitude / radius * bump_prime(r / radius)[:, None] * unit

    def lap_h(y):
        y = np.atleast_2d(y)
        r = np.linalg.norm(y, axis=-1)
        s = r / radius
        out = np.zeros_like(r)
        inside = s < 1.0
        si = s[inside]
        q = 1.0 - si * si
        b = np.exp(1.0 - 1.0 / q)
        d1_over_s = -2.0 * b / (q * q)               # b'(s)/s, finite at 0
        d2 = b * (4.0 * si * si / q ** 4 - 2.0 * (1.0 + 3.0 * si * si) / q ** 3)
        out[inside] = amplitude / radius ** 2 * (d2 + 2.0 * d1_over_s)
        return out

    return h, grad_h, lap_h


def lemma_battery(seed=5):
    """Executable forms of the supporting lemmas and kernel bounds.

    Returns (report_lines, all_ok): the exterior-Laplacian identity to
    1e-6 relative, the bounded spherical-mean scan over xi in [0, 100],
    the denominator lower bound and the kernel P-power envelopes at 1e5
    random samples across c in {1, 4, 16, 64}.
    """
    report = []
    ok = True

    h, grad_h, lap_h = radial_test_field(radius=1.3, amplitude=0.7)
    worst_rel = 0.0
    for (c, t, x) in ((1.0, 0.4, (0.2, -0.1, 0.3)), (2.0, 0.3, (0.0, 0.0, 0.0)),
                      (4.0, 0.15, (0.5, 0.2, -0.2))):
        lhs, rhs = lemma2_check(h, grad_h, lap_h, 1.3, c, t, np.asarray(x))
        rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
        worst_rel = max(worst_rel, rel)
    ok = ok and worst_rel <= 1e-6
    report.append(("lemma2.two_sided_rel_err", worst_rel))

    # xi * surface-int of |g|: bounded by the 1-d reduction constant
    g = lambda y: h(y)
    x0 = np.array([0.35, -0.2, 0.15])
    xi = np.concatenate([np.linspace(0.0, 5.0, 201),
                         np.linspace(5.0, 100.0, 120)])
    scan = lemma1_scan(g, x0, xi)
    s, w = gauss_legendre(200, 0.0, 1.3)
    bound_1d = 2.0 * np.pi / np.linalg.norm(x0) * np.sum(w * s * 0.7 * bump(s / 1.3))
    ok = ok and float(scan.max()) <= bound_1d * (1.0 + 1e-6)
    report.append(("lemma1.scan_max", float(scan.max())))
    report.append(("lemma1.reduction_bound", float(bound_1d)))

    worst3, ok3 = lemma3_audit(n_samples=100_000, seed=seed)
    ok = ok and ok3
    report.append(("lemma3.denominator_ratio_max", worst3))

    env, okk = kernel_bound_audit(n_samples=100_000, seed=seed + 1)
    ok = ok and okk
    for c, vals in env.items():
        for name, v in vals.items():
            report.append((f"kernel_envelope.c{c:g}.{name}", v))

    (w1, w2), okd = difference_bound_audit(n_samples=100_000, seed=seed + 2)
    ok = ok and okd
    report.append(("difference_bound.op_sq", w1))
    report.append(("difference_bound.op2_sq", w2))

    # mean of a constant is that constant at every radius
    const = spherical_mean(lambda y: np.full(len(y), 2.5), np.zeros(3), 7.0)
    ok = ok and abs(const - 2.5) < 1e-12
    report.append(("spherical_mean.constant", const))
    report.append(("battery.pass", 1.0 if ok else 0.0))
    return report, ok
