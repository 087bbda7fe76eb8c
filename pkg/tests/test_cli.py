import json
import subprocess
import sys

import pytest

from mpmarket.auditors import AuditReport
from mpmarket.cli import dispatch


def run(argv, capsys):
    code = dispatch(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_audit_linear_mep_passes(capsys):
    code, out, _ = run(["audit", "--mechanism", "mep+efficient-linear", "--model", "linear",
                        "--grid", "D=1,eps=0.25"], capsys)
    assert code == 0
    doc = json.loads(out)
    reports = [AuditReport.from_dict(r) for r in doc["reports"]]
    assert [r.property.value for r in reports] == ["IC", "IR"]
    assert all(r.passed for r in reports)
    # the serialized document survives a round trip unchanged
    assert [r.to_dict() for r in reports] == doc["reports"]


def test_audit_failure_exit_code(capsys):
    code, out, _ = run(["audit", "--mechanism", "vcg", "--model", "proportional",
                        "--D", "4", "--eps", "1", "--property", "ic"], capsys)
    assert code == 1
    assert json.loads(out)["reports"][0]["passed"] is False


def test_existence_infeasible_reports_witness(capsys):
    code, out, _ = run(["existence", "--model", "power-market", "--alpha", "-1",
                        "--D", "5", "--eps", "1"], capsys)
    assert code == 1
    doc = json.loads(out)
    assert doc["feasible"] is False and doc["witness"] == [0.0, 2.0]


def test_existence_csv(capsys, tmp_path):
    target = tmp_path / "table.csv"
    code, _, _ = run(["existence", "--model", "power-market", "--alpha", "0", "--D", "2",
                      "--eps", "1", "--format", "csv", "--output", str(target)], capsys)
    assert code == 0
    assert target.read_text().startswith("agent,t_i,others,p_max\n")


def test_vcg_example(capsys):
    code, out, _ = run(["vcg-example"], capsys)
    assert code == 1
    assert json.loads(out)["deviating_u1"] == "27/28"


def test_mep_single_profile(capsys):
    code, out, _ = run(["mep", "--model", "linear", "--alpha-matrix", "[[1, -0.5], [0.2, 2]]",
                        "--quality", "identity", "--types", "0.3,0.4"], capsys)
    assert code == 0
    assert json.loads(out)["payments"] == pytest.approx([0.25, 0.68])


def test_mep_rejects_over_report(capsys):
    code, _, err = run(["mep", "--model", "power-market", "--alpha", "0",
                        "--types", "0.3,0.4", "--reports", "0.5,0.4"], capsys)
    assert code == 2 and "above true type" in err


def test_boundary_and_sweep(capsys):
    code, out, _ = run(["boundary", "--alpha", "-0.8", "--cap", "30"], capsys)
    assert code == 0 and json.loads(out)["boundary"] == 3
    code, out, _ = run(["sweep", "--experiment", "type-sweep", "--samples", "2",
                        "--threads", "2"], capsys)
    assert code == 0 and out.startswith("t2,welfare,revenue,uti_1,uti_2\n")


def test_config_file_and_overrides(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": {"family": "power-market", "growth": 0.0},
                               "grid": {"upper": 2, "step": 1}, "mechanism": "free",
                               "properties": ["desirable"]}))
    code, out, _ = run(["audit", "--config", str(cfg)], capsys)
    assert code == 0
    code, out, _ = run(["audit", "--config", str(cfg), "--alpha", "-1", "--mechanism",
                        "mep+best-model", "--property", "wbb"], capsys)
    assert json.loads(out)["mechanism"] == "mep+best-model"


def test_sweep_config(capsys, tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"experiment": {"experiment": "scaling", "samples": 2,
                                              "n_range": [2, 3]}, "seed": 4}))
    code, out, _ = run(["sweep", "--config", str(cfg)], capsys)
    assert code == 0 and len(out.splitlines()) == 3


@pytest.mark.parametrize("text,needle", [('{"model": {"family": "linear"}, "bogus": 1}', "bogus"),
                                         ('{"model": {"family": "linear"\n "x": 1}', ":2:"),
                                         ('[1, 2]', "object")])
def test_bad_config_is_a_usage_error(capsys, tmp_path, text, needle):
    cfg = tmp_path / "bad.json"
    cfg.write_text(text)
    code, _, err = run(["audit", "--config", str(cfg)], capsys)
    assert code == 2 and needle in err


def test_usage_errors(capsys):
    assert run(["audit", "--model", "linear"], capsys)[0] == 2  # no grid
    assert run(["boundary"], capsys)[0] == 2
    assert run(["audit", "--grid", "D=1,width=3", "--model", "linear"], capsys)[0] == 2
    assert run(["existence", "--model", "power-market", "--D", "1", "--eps", "0.3",
                "--alpha", "0"], capsys)[0] == 2
    with pytest.raises(SystemExit) as exc:
        dispatch(["frobnicate"])
    assert exc.value.code == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "mpmarket", "vcg-example"],
                         capture_output=True, text=True)
    assert res.returncode == 1 and "17/308" in res.stdout
