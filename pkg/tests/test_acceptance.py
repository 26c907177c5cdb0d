"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""
import json
import math
import time
from fractions import Fraction

import pytest

from hmlab._seeding import derive_seed, rng_for
from hmlab.analysis import audit_entropy_loss, audit_info_upper_bound
from hmlab.cli import main
from hmlab.gadget import (CylinderSampler, GadgetSpec, GIPSpec, disperser_bound, extractor_estimate,
                          gip_distribution_exact)
from hmlab.matching import verify_family
from hmlab.protocol import (baseline_index_protocol, baseline_success_mc, hint_protocol,
                            prefix_protocol, random_guess, send_all, simplify, verify_simplified_claims)
from hmlab.quantum import zero_error_sweep
from hmlab.suites import SUITES, run_suite
from oracles import fiber_counting_distribution

SEED = 20240611


def test_criterion_01_quantum_zero_error(verdict):
    start = time.perf_counter()
    sweeps = {n0: zero_error_sweep(n0) for n0 in (4, 8, 16)}
    elapsed = time.perf_counter() - start
    ok = all(s.passed for s in sweeps.values()) and elapsed < 60
    worst = max(s.max_prob_deviation for s in sweeps.values())
    assert verdict(1, ok, f"n0 in {{4,8,16}}: invalid={sum(s.invalid_supported for s in sweeps.values())} "
                          f"max|p-2/n0|={worst:.1e} time={elapsed:.1f}s")
    for n0, s in sweeps.items():
        assert s.outcomes == 2 ** n0 * (n0 // 2) * n0


def test_criterion_02_gip_closed_form(verdict):
    start = time.perf_counter()
    mismatches = []
    for degree in (1, 2, 3):
        q = 2 ** degree
        for r in (1, 2, 3):
            gspec = GIPSpec.build(2, degree, r)
            dist = gip_distribution_exact(gspec)
            zero = Fraction(1, q) + Fraction(1, q ** r) - Fraction(1, q ** (r + 1))
            nonzero = Fraction(1, q) - Fraction(1, q ** (r + 1))
            closed = dist[0] == zero and all(dist[v] == nonzero for v in range(1, q))
            oracle = dist == fiber_counting_distribution(2, q, gspec.field.modulus, r)
            if not (closed and oracle):
                mismatches.append((q, r, closed, oracle))
    elapsed = time.perf_counter() - start
    ok = not mismatches and elapsed < 60
    assert verdict(2, ok, f"q in {{2,4,8}}, r in {{1,2,3}}: mismatches={mismatches} time={elapsed:.1f}s")


@pytest.mark.slow
def test_criterion_03_extractor_rectangles(verdict):
    spec = GadgetSpec.build(2, 3, 8, 2)
    bound = 1 / 8 + 8 * (2 / 8) ** 4
    assert disperser_bound(spec) == bound
    row_space = 8 ** 8
    premise = 8 ** 15
    rng = rng_for(SEED, 3)
    start = time.perf_counter()
    worst, failures = -1.0, 0
    for trial in range(100):
        s0 = int(rng.integers(premise // row_space, row_space + 1))
        s1 = int(rng.integers(-(-premise // s0), row_space + 1))
        sampler = CylinderSampler("rectangle", derive_seed(SEED, 3, trial), (s0, s1))
        rep = extractor_estimate(spec, sampler, 10 ** 6)
        assert rep.set_size >= premise and rep.size_exact
        lower = rep.max_prob - 3 * rep.stderr
        worst = max(worst, lower)
        failures += lower > bound
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 600
    assert verdict(3, ok, f"100 rectangles, 1e6 samples: worst max_v Pr - 3sigma = {worst:.5f} "
                          f"<= {bound:.5f}; failures={failures} time={elapsed:.1f}s")


def test_criterion_04_simplified_claims(verdict):
    results = []
    for degree in (4, 8):  # m = 2 and m = 4, three players
        spec = GadgetSpec.build(2, degree, 1, degree)
        fixtures = [send_all(spec), prefix_protocol(spec, 2), random_guess(spec),
                    hint_protocol(spec, 1), baseline_index_protocol(2, spec)]
        for p in fixtures:
            rep = verify_simplified_claims(p)
            results.append((spec.m, p.name, rep.same_error, rep.cost_relation, rep.x1_independent))
    control = verify_simplified_claims(hint_protocol(GadgetSpec.build(2, 4, 1, 4), 1),
                                       candidate=hint_protocol(GadgetSpec.build(2, 4, 1, 4), 1))
    all_pass = all(all(r[2:]) for r in results)
    ok = all_pass and not control.x1_independent
    assert verdict(4, ok, f"{len(results)} fixture/m pairs pass={all_pass}; "
                          f"negative control x1-independent={control.x1_independent}")


def test_criterion_05_info_upper_bound(verdict):
    exact_gaps, failed = [], []
    for n0 in (4, 8):
        spec = GadgetSpec.build(1, n0, 1, n0)  # identity gadget: z uniform
        for c1 in range(n0 + 1):
            rep = audit_info_upper_bound(simplify(prefix_protocol(spec, c1)))
            exact_gaps.append(abs(rep.summary["mutual_info"] - c1))
            if not rep.passed:
                failed.append(rep.protocol)
    p2 = GadgetSpec.build(2, 4, 1, 4)
    for p in (send_all(p2), prefix_protocol(p2, 3), random_guess(p2), hint_protocol(p2, 2)):
        rep = audit_info_upper_bound(simplify(p))
        if not rep.passed or rep.summary["mutual_info"] > rep.c1 + 2:
            failed.append(rep.protocol)
    ok = max(exact_gaps) <= 1e-9 and not failed
    assert verdict(5, ok, f"max|I - c1|={max(exact_gaps):.1e}; audits failing "
                          f"(p<=q, Jensen, I<=c1+2): {failed}")


def test_criterion_06_entropy_loss(verdict):
    details, ok = [], True
    for spec in (GadgetSpec.build(1, 4, 1, 4), GadgetSpec.build(1, 8, 1, 8), GadgetSpec.build(2, 4, 1, 4)):
        rep = audit_entropy_loss(simplify(send_all(spec)))
        pr_good = min(Fraction(x) for x in rep.summary["pr_good"])
        names = {c.name for c in rep.checks}
        needed = {"good_matchings_ge_m/2", "turan", "hamming_le_forest/4", "chain_bound",
                  "h_z_given_parities_le_n0-rank", "pr_good_ge_1/2"}
        ok &= bool(rep.passed) and pr_good >= Fraction(1, 2) and needed <= names
        ok &= any(c.name == "fano" for c in rep.checks)
        details.append(f"n0={spec.n0},p={spec.p}:Pr[good]={pr_good}")
    assert verdict(6, ok, "send-all entropy-loss pipeline " + " ".join(details))


def test_criterion_07_property_suites(verdict):
    start = time.perf_counter()
    results = [run_suite(name, 10 ** 4, SEED) for name in SUITES]
    ok = all(r.passed and r.instances == 10 ** 4 for r in results)
    summary = ", ".join(f"{r.name}={r.violations}" for r in results)
    assert verdict(7, ok, f"violations per 1e4 instances: {summary} time={time.perf_counter() - start:.1f}s")


def test_criterion_08_matching_family(verdict):
    bad = [m for m in range(1, 257) if verify_family(m) != {"perfect": True, "disjoint": True}]
    assert verdict(8, not bad, f"m in 1..256 failing: {bad}")


@pytest.mark.slow
def test_criterion_09_baseline_sweep(verdict):
    n0, trials = 64, 10 ** 5
    est = [baseline_success_mc(n0, t, trials, SEED, task=t) for t in range(n0 + 1)]
    drops = [t for t in range(n0) if est[t + 1][0] < est[t][0] - 3 * math.hypot(est[t][1], est[t + 1][1])]
    sigma0 = math.sqrt(0.25 / trials)
    s0_ok = abs(est[0][0] - 0.5) <= 3 * sigma0
    full = est[n0][0] == 1.0
    ok = not drops and s0_ok and full
    assert verdict(9, ok, f"n0=64, 1e5 trials: success(0)={est[0][0]:.4f} (3sigma={3 * sigma0:.4f}), "
                          f"success(64)={est[n0][0]}, drops beyond 3sigma at t={drops}")


CLI_CONFIGS = {
    "quantum-check": {"n0": 8},
    "extractor": {"gadget": {"p": 2, "degree": 3, "r": 8, "n0": 2},
                  "sampler": {"mode": "rectangle", "sizes": ["q^8", "q^7"]}, "samples": 50000, "trials": 4},
    "protocol-audit": {"gadget": {"p": 2, "degree": 4, "r": 1, "n0": 4},
                       "protocols": [{"fixture": "send-all"}, {"fixture": "prefix", "c1": 2},
                                     {"fixture": "hint", "c1": 1}]},
    "property-suites": {"fano": 500, "subadditivity": 500, "data_processing": 500, "turan": 500},
    "baseline-sweep": {"n0": 16, "trials": 20000},
}


def test_criterion_10_reproducibility(verdict, tmp_path):
    differing = []
    for sub, config in CLI_CONFIGS.items():
        cfg = tmp_path / f"{sub}.json"
        cfg.write_text(json.dumps(config))
        outs = []
        for run, threads in (("a", "1"), ("b", "2")):
            out = tmp_path / run / sub
            assert main([sub, "--config", str(cfg), "--seed", str(SEED), "--out", str(out),
                         "--threads", threads]) == 0
            outs.append(out)
        files = sorted(f.name for f in outs[0].iterdir())
        assert files and files == sorted(f.name for f in outs[1].iterdir())
        differing += [f"{sub}/{f}" for f in files if (outs[0] / f).read_bytes() != (outs[1] / f).read_bytes()]
    assert verdict(10, not differing, f"{len(CLI_CONFIGS)} subcommands rerun; differing files: {differing}")


@pytest.mark.parametrize("n0", [4, 8])
def test_criterion_05_prefix_columns_via_cli(tmp_path, n0):
    """The audit CSV's mutual_info column equals c1 for the bundled prefix fixtures."""
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"gadget": {"p": 1, "degree": n0, "r": 1, "n0": n0},
                               "protocols": [{"fixture": "prefix", "c1": c} for c in range(n0 + 1)],
                               "audits": ["info_upper_bound"]}))
    assert main(["protocol-audit", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "protocol_audit.csv").read_text().splitlines()[1:]
    for c1, line in enumerate(lines):
        assert abs(float(line.split(",")[6]) - c1) <= 1e-9
