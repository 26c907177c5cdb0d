"""Config-driven experiment runner.

Every subcommand reads a JSON config, writes ``<subcommand>.csv`` and
``<subcommand>.json`` into ``--out`` and exits 0 (all checks passed),
1 (some check failed) or 2 (invalid config).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

from ._seeding import derive_seed
from .analysis import NotSimplifiedError, audit_entropy_loss, audit_info_upper_bound, transcript_rows
from .gadget import (CylinderSampler, GadgetError, GadgetSpec, extractor_estimate)
from .gf2n import FieldError
from .protocol import (EnumerationTooLarge, MalformedProtocolError, baseline_index_protocol,
                       baseline_success_mc, distributional_error, hint_protocol, load_protocol,
                       prefix_protocol, random_guess, send_all, simplify, verify_simplified_claims)
from .quantum import SUPPORT_TOL, QuantumError, sweep_blocks
from .suites import SUITES, run_suite

log = logging.getLogger("hmlab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


class Run:
    """Shared state of one invocation: config, seed, output paths, warnings."""

    def __init__(self, name: str, config: dict, seed: int, out: str, threads: int, strict: bool):
        self.name = name
        self.config = config
        self.seed = seed
        self.out = out
        self.threads = max(1, threads)
        self.strict = strict
        self.warnings: list[str] = []
        canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
        self.config_hash = hashlib.sha256(canonical.encode()).hexdigest()[:16]

    def path(self, suffix: str) -> str:
        return os.path.join(self.out, f"{self.name.replace('-', '_')}{suffix}")

    def warn(self, msg: str) -> None:
        if self.strict:
            raise ConfigError(f"strict mode: {msg}")
        log.warning(msg)
        self.warnings.append(msg)

    def gadget(self, key: str = "gadget") -> GadgetSpec:
        if key not in self.config:
            raise ConfigError(f"config needs a '{key}' object")
        try:
            spec = GadgetSpec.from_dict(self.config[key])
        except (GadgetError, FieldError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        for msg in spec.warnings():
            self.warn(msg)
        return spec

    def pmap(self, fn: Callable, items: list) -> list:
        if self.threads == 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(self.threads) as pool:
            return list(pool.map(fn, items))

    def write_json(self, payload: dict) -> None:
        payload = {"subcommand": self.name, "seed": self.seed, "config_hash": self.config_hash,
                   "config": self.config, "warnings": self.warnings, **payload}
        with open(self.path(".json"), "w") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2, default=str)
            fh.write("\n")

    def prefix(self) -> str:
        return f"{self.seed},{self.config_hash}"


def _int(config: dict, key: str, default=None, lo=None, hi=None) -> int:
    value = config.get(key, default)
    if value is None:
        raise ConfigError(f"config needs '{key}'")
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(f"'{key}' must be an integer")
    value = int(value)
    if (lo is not None and value < lo) or (hi is not None and value > hi):
        raise ConfigError(f"'{key}'={value} outside [{lo}, {hi}]")
    return value


# -- subcommands -------------------------------------------------------------------

def cmd_quantum_check(run: Run) -> int:
    n0s = run.config.get("n0")
    n0s = n0s if isinstance(n0s, list) else [n0s]
    for n0 in n0s:
        if isinstance(n0, bool) or not isinstance(n0, int) or n0 < 2 or n0 % 2 or n0 > 20:
            raise ConfigError(f"n0 must be an even integer in [2, 20], got {n0!r}")
    results = []
    pre = run.prefix()
    with open(run.path(".csv"), "w") as fh:
        fh.write("seed,config_hash,n0,z,x1,left,right,sign,probability,b,valid\n")
        for n0 in n0s:
            target = 2 / n0
            invalid = rows = 0
            worst = 0.0
            norm_err = 0.0
            for block in sweep_blocks(n0):
                labels = [(e.left, e.right, s, 0 if s == "+" else 1) for e, s in block.labels]
                probs, valid = block.probs, block.valid
                lines = []
                for zi in range(len(probs)):
                    z = block.z_start + zi
                    head = f"{pre},{n0},{z},{block.x1}"
                    for c, (l, r, s, b) in enumerate(labels):
                        pr = float(probs[zi, c])
                        ok = bool(valid[zi, c])
                        if pr > SUPPORT_TOL:
                            worst = max(worst, abs(pr - target))
                            invalid += not ok
                        lines.append(f"{head},{l},{r},{s},{pr!r},{b},{int(ok)}\n")
                rows += len(lines)
                norm_err = max(norm_err, float(abs(probs.sum(axis=1) - 1).max()))
                fh.writelines(lines)
            passed = invalid == 0 and worst <= 1e-12 and norm_err <= 1e-12
            results.append({"n0": n0, "rows": rows, "invalid_supported": invalid,
                            "max_prob_deviation": worst, "max_norm_error": norm_err, "passed": passed})
            print(f"quantum-check n0={n0}: {'PASS' if passed else 'FAIL'} "
                  f"({rows} outcomes, {invalid} invalid supported)")
    ok = all(r["passed"] for r in results)
    run.write_json({"results": results, "passed": ok})
    return EXIT_OK if ok else EXIT_FAIL


def _size(value, spec: GadgetSpec) -> int:
    """Sizes are integers or strings ``"q^e"``."""
    if isinstance(value, str):
        base, _, exp = value.partition("^")
        if base.strip() != "q" or not exp.strip().isdigit():
            raise ConfigError(f"cannot parse size {value!r}")
        return spec.q ** int(exp)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"size must be an integer or 'q^e', got {value!r}")
    return value


def cmd_extractor(run: Run) -> int:
    spec = run.gadget()
    sampler_cfg = run.config.get("sampler", {"mode": "full"})
    mode = sampler_cfg.get("mode", "full")
    sizes = tuple(_size(s, spec) for s in sampler_cfg.get("sizes", []))
    samples = _int(run.config, "samples", 10**6, lo=10_000)
    trials = _int(run.config, "trials", 1, lo=1)
    try:
        CylinderSampler(mode, 0, sizes)
    except GadgetError as exc:
        raise ConfigError(str(exc)) from None

    def one(trial: int):
        sampler = CylinderSampler(mode, derive_seed(run.seed, trial), sizes)
        return trial, extractor_estimate(spec, sampler, samples)

    try:
        reports = run.pmap(one, list(range(trials)))
    except GadgetError as exc:
        raise ConfigError(str(exc)) from None
    with open(run.path(".csv"), "w") as fh:
        fh.write("seed,config_hash,trial,set_size,size_exact,samples,max_value,max_prob,stderr,"
                 "lower_3sigma,bound,gip_pass,gadget_max_value,gadget_max_prob,gadget_bound,gadget_pass\n")
        for trial, rep in reports:
            fh.write(f"{run.prefix()},{trial},{rep.set_size},{int(rep.size_exact)},{rep.samples},"
                     f"{rep.max_value},{rep.max_prob!r},{rep.stderr!r},{rep.max_prob - 3 * rep.stderr!r},"
                     f"{rep.bound!r},{int(rep.gip_pass)},{rep.gadget_max_value},{rep.gadget_max_prob!r},"
                     f"{rep.gadget_bound!r},{int(rep.gadget_pass)}\n")
    ok = all(rep.passed for _, rep in reports)
    worst = max(rep.max_prob - 3 * rep.stderr for _, rep in reports)
    print(f"extractor: {trials} trials, worst lower-3sigma {worst:.6f} vs bound "
          f"{reports[0][1].bound:.6f}: {'PASS' if ok else 'FAIL'}")
    run.write_json({"passed": ok, "trials": trials, "worst_lower_3sigma": worst})
    return EXIT_OK if ok else EXIT_FAIL


FIXTURES = {
    "send-all": lambda spec, cfg: send_all(spec),
    "prefix": lambda spec, cfg: prefix_protocol(spec, _int(cfg, "c1", lo=0, hi=spec.n0)),
    "random-guess": lambda spec, cfg: random_guess(spec),
    "baseline": lambda spec, cfg: baseline_index_protocol(_int(cfg, "t", lo=0, hi=spec.n0), spec),
    "hint": lambda spec, cfg: hint_protocol(spec, _int(cfg, "c1", lo=0, hi=spec.n0)),
}


def _load_protocols(run: Run):
    entries = run.config.get("protocols")
    if not isinstance(entries, list) or not entries:
        raise ConfigError("config needs a non-empty 'protocols' list")
    out = []
    spec = run.gadget() if "gadget" in run.config else None
    for entry in entries:
        if "file" in entry:
            try:
                proto = load_protocol(entry["file"])
            except (OSError, ValueError, KeyError, MalformedProtocolError) as exc:
                raise ConfigError(f"cannot load {entry['file']}: {exc}") from None
        elif entry.get("fixture") in FIXTURES:
            if spec is None:
                raise ConfigError("fixtures need a 'gadget' object")
            try:
                proto = FIXTURES[entry["fixture"]](spec, entry)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        else:
            raise ConfigError(f"protocol entry needs 'file' or a known 'fixture': {entry}")
        out.append(proto)
    return out


def cmd_protocol_audit(run: Run) -> int:
    protocols = _load_protocols(run)
    audits = run.config.get("audits", ["claims", "info_upper_bound", "entropy_loss"])
    unknown = set(audits) - {"claims", "info_upper_bound", "entropy_loss"}
    if unknown:
        raise ConfigError(f"unknown audits {sorted(unknown)}")
    summaries, details, transcript_lines = [], [], []
    ok = True
    for proto in protocols:
        try:
            star = simplify(proto)
            if "claims" in audits:
                claims = verify_simplified_claims(proto, star)
                ok &= claims.passed
                summaries.append((proto.name, "claims", proto.lengths[0], sum(star.lengths[1:]),
                                  "", str(distributional_error(proto)), claims.passed))
                details.append({"protocol": proto.name, "audit": "claims", **claims.as_dict()})
            for kind, fn in (("info_upper_bound", audit_info_upper_bound), ("entropy_loss", audit_entropy_loss)):
                if kind not in audits:
                    continue
                rep = fn(star)
                ok &= rep.passed is not False
                mi = rep.summary.get("mutual_info", "")
                summaries.append((proto.name, kind, rep.c1, rep.c0, "" if mi == "" else repr(mi),
                                  rep.summary.get("error", ""), rep.passed))
                details.append(rep.as_dict())
                for row in transcript_rows(rep):
                    transcript_lines.append((proto.name, kind, row))
        except (EnumerationTooLarge, NotSimplifiedError, MalformedProtocolError) as exc:
            raise ConfigError(f"{proto.name}: {exc}") from None
    with open(run.path(".csv"), "w") as fh:
        fh.write("seed,config_hash,protocol,audit,c1,c0,mutual_info,error,passed\n")
        for name, kind, c1, c0, mi, err, passed in summaries:
            verdict = "premise_unmet" if passed is None else int(passed)
            fh.write(f"{run.prefix()},{name},{kind},{c1},{c0},{mi},{err},{verdict}\n")
    with open(run.path("_transcripts.csv"), "w") as fh:
        cols = ["rho", "tau", "p_tau", "q_tau", "bad", "eps_tau", "good", "rank", "h_z_given_tau",
                "chain_bound", "expected_hamming"]
        fh.write("seed,config_hash,protocol,audit," + ",".join(cols) + "\n")
        for name, kind, row in transcript_lines:
            fh.write(f"{run.prefix()},{name},{kind}," + ",".join(_cell(row[c]) for c in cols) + "\n")
    for name, kind, *_, passed in summaries:
        print(f"protocol-audit {name} {kind}: {'premise unmet' if passed is None else 'PASS' if passed else 'FAIL'}")
    run.write_json({"passed": ok, "audits": details})
    return EXIT_OK if ok else EXIT_FAIL


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def cmd_property_suites(run: Run) -> int:
    counts = {name: _int(run.config, name, 10_000, lo=0) for name in SUITES}
    results = run.pmap(lambda name: run_suite(name, counts[name], run.seed), list(SUITES))
    with open(run.path(".csv"), "w") as fh:
        fh.write("seed,config_hash,suite,instances,violations,max_excess,passed\n")
        for res in results:
            fh.write(f"{run.prefix()},{res.name},{res.instances},{res.violations},"
                     f"{res.max_violation!r},{int(res.passed)}\n")
            print(f"property-suite {res.name}: {res.violations} violations in {res.instances}")
    ok = all(r.passed for r in results)
    run.write_json({"passed": ok, "suites": [r.__dict__ for r in results]})
    return EXIT_OK if ok else EXIT_FAIL


def cmd_baseline_sweep(run: Run) -> int:
    spec = run.gadget() if "gadget" in run.config else None
    n0 = spec.n0 if spec else _int(run.config, "n0", lo=2, hi=4096)
    if n0 % 2:
        raise ConfigError("n0 must be even")
    trials = _int(run.config, "trials", 100_000, lo=1)
    ts = run.config.get("t", list(range(n0 + 1)))
    if not all(isinstance(t, int) and 0 <= t <= n0 for t in ts):
        raise ConfigError("every t must be an integer in [0, n0]")
    ts = sorted(ts)
    exact = bool(run.config.get("exact", False))
    if exact and spec is None:
        raise ConfigError("exact success needs a gadget")
    results = run.pmap(lambda t: (t, *baseline_success_mc(n0, t, trials, run.seed, spec, task=t)), ts)
    exact_vals = {}
    if exact:
        for t in ts:
            try:
                exact_vals[t] = 1 - distributional_error(baseline_index_protocol(t, spec))
            except EnumerationTooLarge as exc:
                raise ConfigError(str(exc)) from None
    checks = []
    for (t0, s0, e0), (t1, s1, e1) in zip(results, results[1:]):
        checks.append(s1 >= s0 - 3 * math.hypot(e0, e1))
    by_t = {t: (s, e) for t, s, e in results}
    if 0 in by_t:
        s, e = by_t[0]
        checks.append(abs(s - 0.5) <= 3 * max(e, 0.5 / math.sqrt(trials)))
    if n0 in by_t:
        checks.append(by_t[n0][0] == 1.0)
    for t, val in exact_vals.items():
        s, e = by_t[t]
        checks.append(abs(s - float(val)) <= 3 * max(e, 1 / trials))
    ok = all(checks)
    with open(run.path(".csv"), "w") as fh:
        fh.write("seed,config_hash,n0,t,trials,success,stderr,lower_3sigma,upper_3sigma,exact_success\n")
        for t, s, e in results:
            ex = str(exact_vals[t]) if t in exact_vals else ""
            fh.write(f"{run.prefix()},{n0},{t},{trials},{s!r},{e!r},{s - 3 * e!r},{s + 3 * e!r},{ex}\n")
    print(f"baseline-sweep n0={n0}: {'PASS' if ok else 'FAIL'}")
    run.write_json({"passed": ok, "success": {str(t): s for t, s, _ in results}})
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "quantum-check": cmd_quantum_check,
    "extractor": cmd_extractor,
    "protocol-audit": cmd_protocol_audit,
    "property-suites": cmd_property_suites,
    "baseline-sweep": cmd_baseline_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hmlab", description=__doc__.splitlines()[0])
    parser.add_argument("subcommand", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="root seed (u64); overrides config 'seed'")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--strict", action="store_true", help="treat warnings as errors")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            config = json.load(fh)
        if not isinstance(config, dict):
            raise ConfigError("config must be a JSON object")
        seed = args.seed if args.seed is not None else config.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        os.makedirs(args.out, exist_ok=True)
        run = Run(args.subcommand, config, seed, args.out, args.threads, args.strict)
        return COMMANDS[args.subcommand](run)
    except (ConfigError, OSError, json.JSONDecodeError, QuantumError) as exc:
        log.error("invalid config: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
