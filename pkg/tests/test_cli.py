import json
import os

import numpy as np
import pytest

from nvlimit.cli import main

TINY = """
c_list = 4,8,16
grid.n = 24
grid.half_width = 2.6
t_end = 0.25
checkpoints = 4
particles.n_per_axis = 4
profile.radius_x = 0.7
profile.radius_p = 0.5
profile.amplitude = 0.8
sponge.width = 3
probes.field = 80
probes.phase_space = 30
df.backward_steps = 48
p_support_guess = 1.0
history.max_snapshots = 16
"""


@pytest.fixture()
def cfg_file(tmp_path):
    p = os.path.join(tmp_path, "cfg.txt")
    with open(p, "w") as f:
        f.write(TINY)
    return p


def test_run_verb_writes_diagnostics_and_snapshots(cfg_file, tmp_path):
    out = os.path.join(tmp_path, "out")
    rc = main(["run", "--config", cfg_file, "--out", out, "--system", "nv",
               "--c", "4", "--snapshot-every", "2"])
    assert rc == 0
    header = open(os.path.join(out, "diagnostics.csv")).readline().strip()
    assert header == "t,c,P_c,K_c,Q,sup_f,psi_audit"
    snaps = [f for f in os.listdir(out) if f.endswith(".json") and f.startswith("phi")]
    assert snaps
    meta = json.load(open(os.path.join(out, sorted(snaps)[0])))
    assert set(meta) == {"n", "h", "origin", "t", "c"}


def test_run_verb_vp(cfg_file, tmp_path):
    out = os.path.join(tmp_path, "outvp")
    assert main(["run", "--config", cfg_file, "--out", out,
                 "--system", "vp"]) == 0
    assert os.path.exists(os.path.join(out, "diagnostics.csv"))


def test_sweep_verb_emits_all_outputs(cfg_file, tmp_path):
    out = os.path.join(tmp_path, "sweep")
    rc = main(["sweep", "--config", cfg_file, "--out", out])
    assert rc == 0
    for name in ("diagnostics.csv", "convergence.csv", "order.txt",
                 "summary.json"):
        assert os.path.exists(os.path.join(out, name)), name
    summary = json.load(open(os.path.join(out, "summary.json")))
    assert len(summary["records"]) == 3
    assert all(len(row) == 4 for row in summary["audit_table"])
    order = open(os.path.join(out, "order.txt")).read()
    assert "err_phi slope=" in order


def test_bad_config_exit_code_one(tmp_path):
    p = os.path.join(tmp_path, "bad.txt")
    with open(p, "w") as f:
        f.write("nonsense.key = 7\n")
    assert main(["sweep", "--config", p]) == 1


def test_audit_verb(tmp_path, cfg_file):
    out = os.path.join(tmp_path, "audit")
    assert main(["audit", "--config", cfg_file, "--out", out]) == 0
    text = open(os.path.join(out, "audit_report.txt")).read()
    assert "lemma2.two_sided_rel_err" in text
    assert "battery.pass = 1" in text


def test_abort_flushes_partial_diagnostics(tmp_path):
    # a fast bulk drift (beyond the configured momentum guess) walks the
    # ensemble into the absorber shell mid-run
    p = os.path.join(tmp_path, "cfg.txt")
    with open(p, "w") as f:
        f.write(TINY.replace("t_end = 0.25", "t_end = 0.8")
                    .replace("c_list = 4,8,16",
                             "c_list = 4,8,16\nprofile.center_p = 3,0,0"))
    out = os.path.join(tmp_path, "aborted")
    rc = main(["run", "--config", p, "--out", out, "--system", "nv", "--c", "4"])
    assert rc == 1
    text = open(os.path.join(out, "diagnostics.csv")).read()
    assert text.startswith("t,c,P_c,K_c,Q,sup_f,psi_audit")
    assert len(text.splitlines()) > 1


def test_oracle_verb_report_wiring(tmp_path, monkeypatch):
    import nvlimit.oracles as oracles

    monkeypatch.setattr(oracles, "representation_battery",
                        lambda: ([("dtphi.demo.rel_err", 1.5e-5),
                                  ("battery.pass", 1.0)], True))
    out = os.path.join(tmp_path, "oracle")
    assert main(["oracle", "--out", out]) == 0
    text = open(os.path.join(out, "oracle_report.txt")).read()
    assert "dtphi.demo.rel_err = 1.5e-05" in text
