import csv
import json
import subprocess
import sys

import pytest

from ldr_vms.cli import main
from ldr_vms.scenario import load_policy, load_scenario

TINY = ["--particles", "3", "--iterations", "2", "--replications", "1"]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def policies(tmp_path_factory):
    d = tmp_path_factory.mktemp("policies")
    out = {}
    for vms, sig in [("ldr", "default"), ("genuine", "ldr"), ("ldr", "ldr")]:
        p = d / f"{vms}-{sig}.json"
        assert main(["train", "--vms", vms, "--signal", sig, *TINY, "--out", str(p)]) == 0
        out[(vms, sig)] = p
    return out


def test_synth_writes_split_bundle_deterministically(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert main(["synth", "--days", "20", "--sigma", "0.3", "--seed", "7", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    bundle = load_scenario(a)
    assert len(bundle.train_days) == 10 and len(bundle.test_days) == 10


def test_synth_rejects_zero_days(tmp_path, capsys):
    assert main(["synth", "--days", "0", "--out", str(tmp_path / "x.json")]) == 2
    assert "--days" in capsys.readouterr().err
    assert not (tmp_path / "x.json").exists()


def test_train_refuses_untrainable_strategy(tmp_path, capsys):
    assert main(["train", "--vms", "genuine", "--signal", "default", "--out", str(tmp_path / "p.json")]) == 2
    assert "nothing trainable" in capsys.readouterr().err


def test_train_outputs_are_reproducible(tmp_path, policies):
    p = tmp_path / "again.json"
    trace = tmp_path / "trace.csv"
    assert main(["train", "--vms", "ldr", "--signal", "default", *TINY, "--out", str(p), "--trace", str(trace)]) == 0
    first = policies[("ldr", "default")]
    assert p.read_bytes() == first.read_bytes()
    report = json.loads(p.with_suffix("").with_name("again.report.json").read_text())
    assert report == json.loads(first.with_name("ldr-default.report.json").read_text())
    values = [float(r[1]) for r in _rows(trace)[1:]]
    assert values == report["trace"]
    assert all(b <= a for a, b in zip(values, values[1:]))
    assert report["best_objective"] <= report["baseline_objective"]


def test_joint_policy_has_both_segments(policies):
    rec = load_policy(policies[("ldr", "ldr")])
    assert rec.vms is not None and rec.signal is not None
    assert len(rec.signal.matrices) == 4


def test_evaluate_genuine_writes_day_rows_and_summary(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["evaluate", "--vms", "genuine", "--signal", "default", "--seed", "3", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = _rows(a)
    assert rows[0] == ["day", "strategy", "compliance", "mean_travel_time_s", "completed", "stranded"]
    assert len(rows) == 1 + 10 + 1
    assert [r[0] for r in rows[1:11]] == [f"2016-02-{k}" for k in range(11, 21)]
    assert rows[-1][0] == "mean"
    per_day = [float(r[3]) for r in rows[1:11]]
    assert float(rows[-1][3]) == pytest.approx(sum(per_day) / 10, rel=1e-12)
    assert all(r[2] == "0.1,0.3,0.5,0.7,0.9" for r in rows[1:])


def test_evaluate_with_policy_and_compliance(tmp_path, policies):
    out = tmp_path / "e.csv"
    assert main(["evaluate", "--vms", "ldr", "--signal", "default", "--policy", str(policies[("ldr", "default")]),
                 "--compliance", "0.3,0.4,0.5,0.6,0.7", "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows[1][1] == "ldr+default" and rows[1][2] == "0.3,0.4,0.5,0.6,0.7"


def test_evaluate_needs_policy(capsys):
    assert main(["evaluate", "--vms", "ldr", "--signal", "default"]) == 2
    assert "--policy" in capsys.readouterr().err


def test_evaluate_rejects_mismatched_policy(policies):
    assert main(["evaluate", "--vms", "ldr", "--signal", "default", "--policy",
                 str(policies[("ldr", "ldr")])]) == 2


def test_compare_matrix_and_log(tmp_path, policies):
    args = ["compare", "--out-dir", str(tmp_path / "c")]
    for p in policies.values():
        args += ["--policy", str(p)]
    assert main(args) == 0
    matrix = _rows(tmp_path / "c" / "matrix.csv")
    assert matrix[0] == ["strategy", "compliance=0.3,0.4,0.5,0.6,0.7", "compliance=0.2,0.4,0.5,0.6,0.8",
                         "compliance=0.1,0.3,0.5,0.7,0.9"]
    assert [r[0] for r in matrix[1:]] == ["genuine+default", "genuine+coordinated", "ldr+default",
                                          "ldr+coordinated"]
    assert all(float(v) > 0 for r in matrix[1:] for v in r[1:])
    log = _rows(tmp_path / "c" / "message_volume.csv")
    assert log[0][:6] == ["strategy", "compliance", "day", "step", "message", "v_route1_minus_v_route2"]
    assert len(log) - 1 == 4 * 3 * 10 * 60
    again = tmp_path / "d"
    assert main(args[:1] + ["--out-dir", str(again)] + args[3:]) == 0
    for name in ("matrix.csv", "per_day.csv", "message_volume.csv"):
        assert (again / name).read_bytes() == (tmp_path / "c" / name).read_bytes()


def test_compare_usage_errors(tmp_path, policies):
    assert main(["compare", "--sweep", "", "--out-dir", str(tmp_path)]) == 2
    assert main(["compare", "--out-dir", str(tmp_path)]) == 2  # LDR strategies without policies
    assert main(["compare", "--strategies", "ldr+sometimes", "--out-dir", str(tmp_path)]) == 2


def test_bad_inputs_exit_with_usage_code(tmp_path):
    assert main(["evaluate", "--vms", "genuine", "--compliance", "0.1,0.2"]) == 2
    assert main(["evaluate", "--vms", "genuine", "--scenario", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{\"format_version\": 1,")
    assert main(["validate", str(bad)]) == 2
    assert main(["no-such-command"]) == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ldr_vms.cli", "train", "--vms", "none", "--signal", "default",
                           "--out", "unused.json"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "nothing trainable" in proc.stderr
