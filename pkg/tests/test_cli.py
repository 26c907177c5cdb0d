import csv
import json
import subprocess
import sys
from fractions import Fraction

import pytest

from hmlab.cli import main
from hmlab.gadget import GadgetSpec
from hmlab.protocol import hint_protocol, save_protocol


def run(tmp_path, sub, config, *extra, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    out = tmp_path / "out"
    code = main([sub, "--config", str(path), "--out", str(out), *extra])
    return code, out


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_quantum_check_ok(tmp_path):
    code, out = run(tmp_path, "quantum-check", {"n0": 4}, "--seed", "7")
    assert code == 0
    data = rows(out / "quantum_check.csv")
    assert len(data) == 2 ** 4 * 2 * 4
    assert {r["seed"] for r in data} == {"7"}
    assert len({r["config_hash"] for r in data}) == 1
    assert all(r["valid"] == "1" for r in data if float(r["probability"]) > 1e-12)
    summary = json.loads((out / "quantum_check.json").read_text())
    assert summary["passed"] and summary["seed"] == 7


@pytest.mark.parametrize("config", [{"n0": 3}, {"n0": 0}, {"n0": "4"}, {}, {"n0": 22}])
def test_quantum_check_bad_config(tmp_path, config):
    assert run(tmp_path, "quantum-check", config)[0] == 2


def test_bad_json_and_seed(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    assert main(["quantum-check", "--config", str(path), "--out", str(tmp_path)]) == 2
    assert run(tmp_path, "quantum-check", {"n0": 4, "seed": -1})[0] == 2
    assert main(["quantum-check", "--config", str(tmp_path / "missing.json")]) == 2


EXT = {"gadget": {"p": 2, "degree": 3, "r": 8, "n0": 2},
       "sampler": {"mode": "rectangle", "sizes": ["q^8", "q^7"]}, "samples": 20000, "trials": 3}


def test_extractor(tmp_path):
    code, out = run(tmp_path, "extractor", EXT)
    assert code == 0
    data = rows(out / "extractor.csv")
    assert len(data) == 3 and all(r["gip_pass"] == "1" for r in data)


def test_extractor_strict_and_premise(tmp_path):
    assert run(tmp_path, "extractor", EXT, "--strict")[0] == 2  # k = 3 > log2(3)
    bad = dict(EXT, sampler={"mode": "rectangle", "sizes": ["q^7", "q^7"]})
    assert run(tmp_path, "extractor", bad)[0] == 2
    assert run(tmp_path, "extractor", dict(EXT, samples=10))[0] == 2
    assert run(tmp_path, "extractor", dict(EXT, gadget={"p": 2, "degree": 3, "r": 8, "n0": 3}))[0] == 2


def test_extractor_failure_exit_code(tmp_path):
    # r = 1 puts the premise at |S| >= q; with root seed 3 the one-element row-0 factor is {0},
    # so S = {0} x F_8, GIP is constantly 0 and the bound must be reported as violated
    cfg = {"gadget": {"p": 2, "degree": 3, "r": 1, "n0": 2},
           "sampler": {"mode": "rectangle", "sizes": [1, 8]}, "samples": 10000}
    code, out = run(tmp_path, "extractor", cfg, "--seed", "3")
    assert code == 1
    (row,) = rows(out / "extractor.csv")
    assert row["max_prob"] == "1.0" and row["gip_pass"] == "0"
    assert run(tmp_path, "extractor", cfg, "--seed", "0")[0] == 0  # factor {5}: GIP uniform


def test_protocol_audit_prefix_fixture(tmp_path):
    cfg = {"gadget": {"p": 1, "degree": 4, "r": 1, "n0": 4},
           "protocols": [{"fixture": "prefix", "c1": c1} for c1 in range(5)],
           "audits": ["info_upper_bound"]}
    code, out = run(tmp_path, "protocol-audit", cfg)
    assert code == 0
    data = rows(out / "protocol_audit.csv")
    assert [float(r["mutual_info"]) for r in data] == [0.0, 1.0, 2.0, 3.0, 4.0]
    assert all(int(r["c1"]) == round(float(r["mutual_info"])) for r in data)
    assert rows(out / "protocol_audit_transcripts.csv")
    report = json.loads((out / "protocol_audit.json").read_text())
    assert report["passed"] and len(report["audits"]) == 5


def test_protocol_audit_from_file(tmp_path):
    spec = GadgetSpec.build(2, 4, 1, 4)
    save_protocol(hint_protocol(spec, 1), tmp_path / "hint.json")
    cfg = {"protocols": [{"file": str(tmp_path / "hint.json")}], "audits": ["claims", "info_upper_bound"]}
    code, out = run(tmp_path, "protocol-audit", cfg)
    assert code == 0  # simplification fixes the x1 dependence
    assert run(tmp_path, "protocol-audit", {"protocols": [{"file": "nope.json"}]})[0] == 2
    assert run(tmp_path, "protocol-audit", {"protocols": [{"fixture": "prefix", "c1": 1}]})[0] == 2
    assert run(tmp_path, "protocol-audit", {"protocols": []})[0] == 2


def test_property_suites(tmp_path):
    code, out = run(tmp_path, "property-suites", {"fano": 200, "subadditivity": 200,
                                                   "data_processing": 200, "turan": 200})
    assert code == 0
    assert [r["violations"] for r in rows(out / "property_suites.csv")] == ["0"] * 4


def test_baseline_sweep_n16(tmp_path):
    code, out = run(tmp_path, "baseline-sweep", {"n0": 16, "trials": 5000})
    assert code == 0
    data = rows(out / "baseline_sweep.csv")
    assert [int(r["t"]) for r in data] == list(range(17))
    assert float(data[-1]["success"]) == 1.0


def test_baseline_sweep_exact_column(tmp_path):
    code, out = run(tmp_path, "baseline-sweep", {"gadget": {"p": 1, "degree": 4, "r": 1, "n0": 4},
                                                  "trials": 20000, "exact": True})
    assert code == 0
    data = rows(out / "baseline_sweep.csv")
    assert [Fraction(r["exact_success"]) for r in data] == [Fraction(1, 2), Fraction(1, 2),
                                                            Fraction(2, 3), 1, 1]
    assert run(tmp_path, "baseline-sweep", {"n0": 5})[0] == 2


@pytest.mark.parametrize("sub,config", [
    ("quantum-check", {"n0": 6}),
    ("extractor", EXT),
    ("baseline-sweep", {"n0": 8, "trials": 3000}),
])
def test_threads_do_not_change_output(tmp_path, sub, config):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    _, a = run(tmp_path / "a", sub, config, "--threads", "1")
    _, b = run(tmp_path / "b", sub, config, "--threads", "3")
    for f in a.iterdir():
        assert (b / f.name).read_bytes() == f.read_bytes()


def test_module_entry_point(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"n0": 3}')
    proc = subprocess.run([sys.executable, "-m", "hmlab", "quantum-check", "--config", str(cfg),
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 2


def test_quantum_check_n16_row_count(tmp_path):
    code, out = run(tmp_path, "quantum-check", {"n0": 16})
    assert code == 0
    with open(out / "quantum_check.csv") as fh:
        assert sum(1 for _ in fh) - 1 == 2 ** 16 * 8 * 16
