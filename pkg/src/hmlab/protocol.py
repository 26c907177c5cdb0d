"""Explicit table protocols for HM*g in the one-way NOF model.

Players are numbered ``0..p`` (player 0 is the one usually called player 1). Player 0
has ``x1`` on its forehead and sees every gadget row; player ``i >= 1`` has
gadget row ``i - 1`` on its forehead and sees ``x1`` plus the other rows.
Player ``p`` speaks last and produces the answer.

Visible-input keys are integers:

* player 0: the packed gadget input;
* player i >= 1: ``x1 + m * rest`` where ``rest`` packs the visible rows in
  order (row ``i - 1`` removed, remaining rows shifted down).

Message tables are keyed by ``(visible, prior_transcript, randomness_index)``
where ``prior_transcript`` is the concatenation of the earlier messages.
"""
from __future__ import annotations

import itertools
import json
import math
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._seeding import rng_for
from .gadget import GadgetInput, GadgetSpec, all_gadget_outputs, gip_array, truncate
from .matching import Answer, HMInstance, answer_valid, matching_edge

SCHEMA = "hmlab-protocol/1"
ENUMERATION_LIMIT = 1 << 32

Key = tuple[int, str, int]


class MalformedProtocolError(ValueError):
    pass


class EnumerationTooLarge(ValueError):
    pass


@dataclass
class MessageTable:
    length: int
    entries: dict[Key, str] = field(default_factory=dict)
    default: str | None = None

    def lookup(self, key: Key) -> str:
        msg = self.entries.get(key, self.default)
        if msg is None:
            raise MalformedProtocolError(f"no message for key {key}")
        if len(msg) != self.length:
            raise MalformedProtocolError(f"message {msg!r} is not {self.length} bits")
        return msg


@dataclass
class OutputTable:
    entries: dict[Key, Answer] = field(default_factory=dict)
    default: Answer | None = None

    def lookup(self, key: Key) -> Answer:
        ans = self.entries.get(key, self.default)
        if ans is None:
            raise MalformedProtocolError(f"no output for key {key}")
        return ans


@dataclass
class TableProtocol:
    spec: GadgetSpec
    messages: list[MessageTable]
    output: OutputTable
    randomness: tuple[Fraction, ...] = (Fraction(1),)
    name: str = ""

    def __post_init__(self):
        if len(self.messages) != self.spec.players:
            raise MalformedProtocolError(
                f"{len(self.messages)} message tables for {self.spec.players} players")
        if sum(self.randomness) != 1 or any(w < 0 for w in self.randomness):
            raise MalformedProtocolError("randomness weights must be a distribution")

    @property
    def k(self) -> int:
        return self.spec.players

    @property
    def lengths(self) -> list[int]:
        return [t.length for t in self.messages]

    @property
    def deterministic(self) -> bool:
        return len(self.randomness) == 1


@dataclass(frozen=True)
class CostReport:
    per_player_bits: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.per_player_bits)

    @property
    def c1(self) -> int:
        return self.per_player_bits[0]

    @property
    def c0(self) -> int:
        return sum(self.per_player_bits[1:])


def cost(p: TableProtocol) -> CostReport:
    return CostReport(tuple(p.lengths))


Transcript = tuple[str, ...]


# -- visibility ---------------------------------------------------------------

def drop_row(packed: int, row: int, spec: GadgetSpec) -> int:
    rb = spec.row_bits
    low = packed & ((1 << (row * rb)) - 1)
    return low | ((packed >> ((row + 1) * rb)) << (row * rb))


def visible_key(instance: HMInstance, player: int) -> int:
    packed = instance.gadget_input.pack(instance.spec)
    if player == 0:
        return packed
    return instance.x1 + instance.m * drop_row(packed, player - 1, instance.spec)


def visible_domain(spec: GadgetSpec, player: int) -> range:
    if player == 0:
        return range(spec.input_count)
    return range(spec.m * (1 << (spec.input_bits - spec.row_bits)))


def bitstrings(n: int) -> Iterator[str]:
    if n == 0:
        yield ""
        return
    for v in range(1 << n):
        yield format(v, f"0{n}b")


@dataclass(frozen=True)
class _Prepared:
    """Per-input data reused across runs: player-0 key and blind-row remainders."""
    packed: int
    rests: tuple[int, ...]


def _prepare(spec: GadgetSpec, packed: int) -> _Prepared:
    return _Prepared(packed, tuple(spec.m * drop_row(packed, i, spec) for i in range(spec.p)))


def _run(p: TableProtocol, prep: _Prepared, x1: int, rho: int, tau1: str | None = None
         ) -> tuple[Transcript, Answer]:
    msgs = []
    prior = ""
    for i, table in enumerate(p.messages):
        if i == 0:
            msg = tau1 if tau1 is not None else table.lookup((prep.packed, "", rho))
        else:
            msg = table.lookup((x1 + prep.rests[i - 1], prior, rho))
        msgs.append(msg)
        prior += msg
    ans = p.output.lookup((x1 + prep.rests[-1], prior, rho))
    return tuple(msgs), ans


def run_protocol(p: TableProtocol, instance: HMInstance, seed: int = 0) -> tuple[Transcript, Answer]:
    """Run ``p`` on one instance with randomness point ``seed``."""
    if not 0 <= seed < len(p.randomness):
        raise MalformedProtocolError(f"randomness index {seed} outside the randomness space")
    prep = _prepare(p.spec, instance.gadget_input.pack(p.spec))
    return _run(p, prep, instance.x1, seed)


def _check_enumeration(p: TableProtocol) -> None:
    size = p.spec.m * p.spec.input_count * len(p.randomness)
    if size > ENUMERATION_LIMIT:
        raise EnumerationTooLarge(f"enumeration of {size} runs exceeds 2^32")


def _z_tuples(spec: GadgetSpec) -> list[tuple[int, ...]]:
    outs = all_gadget_outputs(spec)
    return [truncate(int(v), spec.n0) for v in outs]


def distributional_error(p: TableProtocol) -> Fraction:
    """Exact failure probability over uniform (x1, gadget input) and the protocol randomness."""
    _check_enumeration(p)
    spec = p.spec
    zs = _z_tuples(spec)
    total = Fraction(0)
    for rho, weight in enumerate(p.randomness):
        if weight == 0:
            continue
        fails = 0
        for packed in range(spec.input_count):
            prep = _prepare(spec, packed)
            for x1 in range(spec.m):
                _, ans = _run(p, prep, x1, rho)
                fails += not answer_valid(zs[packed], x1, ans, spec.m)
        total += weight * Fraction(fails, spec.m * spec.input_count)
    return total


def transcripts_by_x1(p: TableProtocol, packed: int, rho: int) -> list[Transcript]:
    prep = _prepare(p.spec, packed)
    return [_run(p, prep, x1, rho)[0] for x1 in range(p.spec.m)]


def x1_dependent_inputs(p: TableProtocol, limit: int = 1) -> list[tuple[int, int]]:
    """Up to ``limit`` (packed, rho) points whose transcript changes with x1."""
    _check_enumeration(p)
    bad = []
    for rho in range(len(p.randomness)):
        for packed in range(p.spec.input_count):
            ts = transcripts_by_x1(p, packed, rho)
            if any(t != ts[0] for t in ts[1:]):
                bad.append((packed, rho))
                if len(bad) >= limit:
                    return bad
    return bad


def is_x1_independent(p: TableProtocol) -> bool:
    return not x1_dependent_inputs(p)


# -- tabulation ---------------------------------------------------------------

def tabulate_message(spec: GadgetSpec, player: int, length: int, prior_len: int, n_rand: int,
                     fn: Callable[[int, str, int], str]) -> MessageTable:
    """Build a total message table by evaluating ``fn(visible, prior, rho)`` on its domain."""
    if length == 0:
        return MessageTable(0, {}, "")
    entries = {}
    for vis in visible_domain(spec, player):
        for prior in bitstrings(prior_len):
            for rho in range(n_rand):
                entries[(vis, prior, rho)] = fn(vis, prior, rho)
    return MessageTable(length, entries)


def tabulate_output(spec: GadgetSpec, transcript_len: int, n_rand: int,
                    fn: Callable[[int, str, int], Answer]) -> OutputTable:
    entries = {}
    for vis in visible_domain(spec, spec.p):
        for t in bitstrings(transcript_len):
            for rho in range(n_rand):
                entries[(vis, t, rho)] = Answer(*fn(vis, t, rho))
    return OutputTable(entries)


def silent(n: int) -> list[MessageTable]:
    return [MessageTable(0, {}, "") for _ in range(n)]


def _z_of(spec: GadgetSpec) -> Callable[[int], tuple[int, ...]]:
    zs = _z_tuples(spec)
    return zs.__getitem__


def _first_edge(m: int, x1: int, known: Callable[[int], bool]) -> int | None:
    for l in range(m):
        e = matching_edge(x1, l, m)
        if known(e.left) and known(e.right):
            return l
    return None


def send_all(spec: GadgetSpec) -> TableProtocol:
    """Player 0 sends z; the last player answers edge 0 of its matching exactly."""
    m, n0 = spec.m, spec.n0
    z_of = _z_of(spec)
    first = tabulate_message(spec, 0, n0, 0, 1, lambda vis, prior, rho: "".join(map(str, z_of(vis))))

    def out(vis, t, rho):
        x1 = vis % m
        e = matching_edge(x1, 0, m)
        return e.left, e.right, int(t[e.left]) ^ int(t[e.right])

    return TableProtocol(spec, [first] + silent(spec.p), tabulate_output(spec, n0, 1, out), name="send-all")


def prefix_protocol(spec: GadgetSpec, c1: int) -> TableProtocol:
    """Player 0 sends z_0..z_{c1-1}; the last player answers the lowest fully known edge, else guesses b=0."""
    m, n0 = spec.m, spec.n0
    if not 0 <= c1 <= n0:
        raise ValueError(f"c1 must lie in [0, {n0}]")
    z_of = _z_of(spec)
    first = tabulate_message(spec, 0, c1, 0, 1, lambda vis, prior, rho: "".join(map(str, z_of(vis)[:c1])))

    def out(vis, t, rho):
        x1 = vis % m
        l = _first_edge(m, x1, lambda node: node < c1)
        if l is None:
            e = matching_edge(x1, 0, m)
            return e.left, e.right, 0
        e = matching_edge(x1, l, m)
        return e.left, e.right, int(t[e.left]) ^ int(t[e.right])

    return TableProtocol(spec, [first] + silent(spec.p), tabulate_output(spec, c1, 1, out),
                         name=f"prefix-{c1}")


def random_guess(spec: GadgetSpec) -> TableProtocol:
    """No messages; the last player answers edge 0 with a shared random parity bit."""
    m = spec.m

    def out(vis, t, rho):
        e = matching_edge(vis % m, 0, m)
        return e.left, e.right, rho

    return TableProtocol(spec, silent(spec.players), tabulate_output(spec, 0, 2, out),
                         randomness=(Fraction(1, 2), Fraction(1, 2)), name="random-guess")


def baseline_index_protocol(t: int, spec: GadgetSpec) -> TableProtocol:
    """Player 0 reveals z on a shared random t-subset T; the last player answers from T.

    The randomness space is every t-subset of [n0] in lexicographic order, each
    with equal weight. The answer is the lowest edge of the matching with both
    endpoints in T, else edge 0 with b = 0.
    """
    m, n0 = spec.m, spec.n0
    if not 0 <= t <= n0:
        raise ValueError(f"t must lie in [0, {n0}]")
    subsets = list(itertools.combinations(range(n0), t))
    z_of = _z_of(spec)
    first = tabulate_message(spec, 0, t, 0, len(subsets),
                             lambda vis, prior, rho: "".join(str(z_of(vis)[j]) for j in subsets[rho]))

    def out(vis, tr, rho):
        x1 = vis % m
        pos = {node: i for i, node in enumerate(subsets[rho])}
        l = _first_edge(m, x1, pos.__contains__)
        if l is None:
            e = matching_edge(x1, 0, m)
            return e.left, e.right, 0
        e = matching_edge(x1, l, m)
        return e.left, e.right, int(tr[pos[e.left]]) ^ int(tr[pos[e.right]])

    weight = Fraction(1, len(subsets))
    return TableProtocol(spec, [first] + silent(spec.p), tabulate_output(spec, t, len(subsets), out),
                         randomness=(weight,) * len(subsets), name=f"baseline-{t}")


def hint_protocol(spec: GadgetSpec, c1: int) -> TableProtocol:
    """Prefix protocol plus a one-bit, x1-dependent hint from player 1.

    Player 1 (blind to row 0) sends bit ``x1 mod N`` of the first element of
    row 1. The last player uses the hint as its parity guess when no edge is
    fully known. Needs p >= 2.
    """
    if spec.p < 2:
        raise ValueError("hint protocol needs p >= 2")
    m, n = spec.m, spec.degree
    z_of = _z_of(spec)
    first = tabulate_message(spec, 0, c1, 0, 1, lambda vis, prior, rho: "".join(map(str, z_of(vis)[:c1])))

    def hint(vis, prior, rho):
        x1, rest = vis % m, vis // m
        row1_first = rest & (spec.q - 1)  # row 1 is the first visible row for player 1
        return str((row1_first >> (x1 % n)) & 1)

    second = tabulate_message(spec, 1, 1, c1, 1, hint)

    def out(vis, t, rho):
        x1 = vis % m
        l = _first_edge(m, x1, lambda node: node < c1)
        if l is None:
            e = matching_edge(x1, 0, m)
            return e.left, e.right, int(t[c1])
        e = matching_edge(x1, l, m)
        return e.left, e.right, int(t[e.left]) ^ int(t[e.right])

    msgs = [first, second] + silent(spec.p - 1)
    return TableProtocol(spec, msgs, tabulate_output(spec, c1 + 1, 1, out), name=f"hint-{c1}")


# -- simplification -------------------------------------------------------------

def _split_prior(prior: str, lengths: list[int], m: int, j: int) -> str:
    """Rebuild the original prior transcript for candidate x1 = j from a simplified prior."""
    out = prior[:lengths[0]]
    pos = lengths[0]
    for ell in lengths[1:]:
        block = prior[pos:pos + m * ell]
        out += block[j * ell:(j + 1) * ell]
        pos += m * ell
    return out


def simplify(p: TableProtocol, m: int | None = None) -> TableProtocol:
    """Players i >= 1 send their original message for every candidate x1 in [m].

    Player 0's table is unchanged. The last player extracts the block for the
    true x1 from each message and answers with the original output table.
    """
    spec = p.spec
    m = spec.m if m is None else m
    if m != spec.m:
        raise MalformedProtocolError(f"m={m} does not match the protocol's gadget (m={spec.m})")
    lengths = p.lengths
    n_rand = len(p.randomness)
    new_lengths = [lengths[0]] + [m * ell for ell in lengths[1:]]
    tables = [MessageTable(lengths[0], dict(p.messages[0].entries), p.messages[0].default)]
    for i in range(1, spec.players):
        orig = p.messages[i]
        if orig.length == 0:
            tables.append(MessageTable(0, {}, ""))
            continue

        def fn(vis, prior, rho, orig=orig, i=i):
            rest = vis - vis % m
            parts = []
            for j in range(m):
                old_prior = _split_prior(prior, lengths[:i], m, j)
                parts.append(orig.lookup((j + rest, old_prior, rho)))
            return "".join(parts)

        tables.append(tabulate_message(spec, i, new_lengths[i], sum(new_lengths[:i]), n_rand, fn))

    def out(vis, t, rho):
        x1 = vis % m
        return p.output.lookup((vis, _split_prior(t, lengths, m, x1), rho))

    output = tabulate_output(spec, sum(new_lengths), n_rand, out)
    return TableProtocol(spec, tables, output, p.randomness, name=f"{p.name}*")


@dataclass
class ClaimsReport:
    error_original: Fraction
    error_simplified: Fraction
    lengths_original: list[int]
    lengths_simplified: list[int]
    m: int
    x1_dependent_example: tuple[int, int] | None

    @property
    def same_error(self) -> bool:
        return self.error_original == self.error_simplified

    @property
    def cost_relation(self) -> bool:
        lo, ls, m = self.lengths_original, self.lengths_simplified, self.m
        per_player = ls[0] == lo[0] and all(b == m * a for a, b in zip(lo[1:], ls[1:]))
        return per_player and sum(ls) == lo[0] + m * sum(lo[1:])

    @property
    def x1_independent(self) -> bool:
        return self.x1_dependent_example is None

    @property
    def passed(self) -> bool:
        return self.same_error and self.cost_relation and self.x1_independent

    def as_dict(self) -> dict:
        return {"error_original": str(self.error_original), "error_simplified": str(self.error_simplified),
                "same_error": self.same_error, "cost_relation": self.cost_relation,
                "x1_independent": self.x1_independent,
                "lengths_original": self.lengths_original, "lengths_simplified": self.lengths_simplified}


def verify_simplified_claims(p: TableProtocol, candidate: TableProtocol | None = None) -> ClaimsReport:
    """Check the three simplification claims for ``candidate`` (default: ``simplify(p)``)."""
    star = candidate if candidate is not None else simplify(p)
    bad = x1_dependent_inputs(star)
    return ClaimsReport(distributional_error(p), distributional_error(star), p.lengths, star.lengths,
                        p.spec.m, bad[0] if bad else None)


# -- Monte Carlo baseline -------------------------------------------------------

def baseline_success_mc(n0: int, t: int, trials: int, seed: int,
                        spec: GadgetSpec | None = None, task: int = 0) -> tuple[float, float]:
    """(success rate, standard error) of the index baseline by simulation.

    ``z`` is the gadget output of a uniform input when ``spec`` is given, else
    uniform on {0,1}^n0 (the gadget caps N at 63, below some sweep sizes).
    """
    if spec is not None and spec.n0 != n0:
        raise ValueError("n0 does not match the gadget")
    if not 0 <= t <= n0 or n0 % 2:
        raise ValueError("need even n0 and 0 <= t <= n0")
    m = n0 // 2
    rng = rng_for(seed, task)
    if spec is None:
        z = rng.integers(0, 2, size=(trials, n0), dtype=np.int8)
    else:
        x = rng.integers(0, spec.q, size=(trials, spec.p, spec.r), dtype=np.uint64)
        vals = gip_array(x, spec)
        z = ((vals[:, None] >> np.arange(n0, dtype=np.uint64)[None]) & np.uint64(1)).astype(np.int8)
    x1 = rng.integers(0, m, size=trials)
    in_t = np.argsort(rng.random((trials, n0)), axis=1) < t
    left = np.arange(m)[None, :].repeat(trials, axis=0)
    right = m + (x1[:, None] + left) % m
    rows = np.arange(trials)[:, None]
    known = in_t[rows, left] & in_t[rows, right]
    found = known.any(axis=1)
    first = np.argmax(known, axis=1)
    l_sel = np.where(found, first, 0)
    r_sel = m + (x1 + l_sel) % m
    idx = np.arange(trials)
    parity = z[idx, l_sel] ^ z[idx, r_sel]
    guess = np.where(found, parity, 0)
    success = float(np.mean(guess == parity))
    return success, math.sqrt(success * (1 - success) / trials)


# -- serialisation -------------------------------------------------------------

def _key_str(key: Key) -> str:
    vis, prior, rho = key
    return f"{vis:x}|{prior}|{rho}"


def _parse_key(s: str) -> Key:
    vis, prior, rho = s.split("|")
    return int(vis, 16), prior, int(rho)


def protocol_to_json(p: TableProtocol) -> dict:
    return {
        "schema": SCHEMA,
        "name": p.name,
        "gadget": p.spec.to_dict(),
        "randomness": [str(w) for w in p.randomness],
        "messages": [
            {"length": t.length, "default": t.default,
             "table": {_key_str(k): v for k, v in sorted(t.entries.items())}}
            for t in p.messages
        ],
        "output": {
            "default": list(p.output.default) if p.output.default is not None else None,
            "table": {_key_str(k): list(v) for k, v in sorted(p.output.entries.items())},
        },
    }


def protocol_from_json(d: dict) -> TableProtocol:
    if d.get("schema") != SCHEMA:
        raise MalformedProtocolError(f"unsupported schema {d.get('schema')!r}")
    spec = GadgetSpec.from_dict(d["gadget"])
    msgs = [MessageTable(int(t["length"]), {_parse_key(k): v for k, v in t["table"].items()}, t.get("default"))
            for t in d["messages"]]
    out = d["output"]
    default = Answer(*out["default"]) if out.get("default") is not None else None
    output = OutputTable({_parse_key(k): Answer(*v) for k, v in out["table"].items()}, default)
    return TableProtocol(spec, msgs, output, tuple(Fraction(w) for w in d["randomness"]), d.get("name", ""))


def save_protocol(p: TableProtocol, path) -> None:
    with open(path, "w") as fh:
        json.dump(protocol_to_json(p), fh, sort_keys=True, separators=(",", ":"))


def load_protocol(path) -> TableProtocol:
    with open(path) as fh:
        return protocol_from_json(json.load(fh))


def instance(spec: GadgetSpec, x1: int, packed: int) -> HMInstance:
    return HMInstance(spec, x1, GadgetInput.unpack(packed, spec))
