"""Command-line entry points.

Verbs: ``run`` (single system at one light speed), ``sweep`` (the limit
measurement), ``rescale-test`` (covariance of the c -> 1 map), ``oracle``
(representation-formula battery), ``audit`` (lemma/kernel battery).
Exit codes: 0 pass, 1 run failure, 2 acceptance-audit failure.
"""

import argparse
import os
import sys

import numpy as np

from . import harness
from .errors import NvlimitError
from .grids import Grid3, save_snapshot


def _add_common(p):
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--out", default=None, help="output directory override")


def _load(args):
    cfg = harness.load_config(args.config) if args.config else \
        harness.parse_config("")
    out = args.out or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    return cfg, out


def cmd_run(args):
    cfg, out = _load(args)
    if args.system == "vp":
        res = harness.run_vp(cfg)
    else:
        res = harness.run_nv(cfg, args.c)
        res.audits.pop("final_level", None)
        res.audits.pop("probe_series", None)
    _write_diags(os.path.join(out, "diagnostics.csv"), res.diags)
    if args.snapshot_every > 0:
        spec = cfg.grid_spec()
        for j, (t, frame) in enumerate(zip(res.history.times,
                                           res.history.frames)):
            if j % args.snapshot_every:
                continue
            tag = "U" if args.system == "vp" else "phi"
            save_snapshot(os.path.join(out, f"{tag}_{j:04d}"),
                          Grid3(spec, frame[0].astype(float)), t,
                          np.inf if args.system == "vp" else args.c)
    print(f"{args.system} run complete: {res.steps} steps, "
          f"{res.wall_clock:.1f}s, outputs in {out}")
    return 0


def _write_diags(path, diags):
    with open(path, "w") as f:
        f.write("t,c,P_c,K_c,Q,sup_f,psi_audit\n")
        for r in diags:
            f.write(",".join(harness._fmt(v) for v in
                             (r.t, r.c, r.P_c, r.K_c, r.Q, r.sup_f,
                              r.psi_audit)) + "\n")


def cmd_sweep(args):
    cfg, out = _load(args)
    summary = harness.run_csweep(cfg, workers=args.workers, out_dir=out)
    for name, val, thr, ok in summary.audit_table:
        print(f"audit {name}: {'PASS' if ok else 'FAIL'} "
              f"(value {val:.3e}, threshold {thr:.3e})")
    for kind, fit in summary.fits.items():
        print(f"fit {kind}: slope {fit.slope:+.3f} r2 {fit.r_squared:.4f}")
    if summary.meta.get("failures"):
        print("member failures:", summary.meta["failures"])
        return 1
    return 0 if summary.all_audits_pass() else 2


def cmd_rescale(args):
    cfg, out = _load(args)
    report = harness.rescaling_test(cfg, args.c, refine=not args.no_refine)
    with open(os.path.join(out, "rescale_report.txt"), "w") as f:
        for k in sorted(report):
            f.write(f"{k} = {report[k]}\n")
    for k in sorted(report):
        print(f"{k} = {report[k]}")
    if "passed" in report and not report["passed"]:
        return 2
    return 0


def cmd_oracle(args):
    cfg, out = _load(args)
    from . import oracles

    report, ok = oracles.representation_battery()
    path = os.path.join(out, "oracle_report.txt")
    with open(path, "w") as f:
        for key, val in report:
            f.write(f"{key} = {harness._fmt(val)}\n")
    for key, val in report:
        print(f"{key} = {harness._fmt(val)}")
    return 0 if ok else 2


def cmd_audit(args):
    cfg, out = _load(args)
    from . import oracles

    report, ok = oracles.lemma_battery()
    path = os.path.join(out, "audit_report.txt")
    with open(path, "w") as f:
        for key, val in report:
            f.write(f"{key} = {harness._fmt(val)}\n")
    for key, val in report:
        print(f"{key} = {harness._fmt(val)}")
    return 0 if ok else 2


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="nvlimit",
        description="Relativistic scalar-gravity kinetic runs against their "
                    "Newtonian limit.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="single system, single light speed")
    _add_common(p)
    p.add_argument("--system", choices=("nv", "vp"), default="nv")
    p.add_argument("--c", type=float, default=4.0)
    p.add_argument("--snapshot-every", type=int, default=0, metavar="K")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="limit measurement over c_list")
    _add_common(p)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("rescale-test", help="covariance of the c->1 map")
    _add_common(p)
    p.add_argument("--c", type=float, default=2.0)
    p.add_argument("--no-refine", action="store_true")
    p.set_defaults(fn=cmd_rescale)

    p = sub.add_parser("oracle", help="representation-formula battery")
    _add_common(p)
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("audit", help="lemma and kernel-bound battery")
    _add_common(p)
    p.set_defaults(fn=cmd_audit)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except NvlimitError as exc:
        print(f"abort reason={exc.reason}: {exc}", file=sys.stderr)
        diags = getattr(exc, "diags", None)
        if diags and args.verb == "run":
            out = args.out or "out"
            os.makedirs(out, exist_ok=True)
            _write_diags(os.path.join(out, "diagnostics.csv"), diags)
            print(f"partial diagnostics flushed to {out}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
