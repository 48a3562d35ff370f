"""Parametric Markov chains in explicit form.

States are numbered ``0..n-1``.  A chain in normal form has its target
(reach-probability 1) at ``n-1`` and its sink (probability 0) at ``n-2``,
both absorbing with a constant-1 self-loop.  Every other state has at
least one outgoing transition labelled by a polynomial over the
parameters.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from gmpy2 import mpq

from .algebra import ONE, Polynomial, Rational
from .graph import gc_paused, reach, reverse_adjacency


class ModelError(ValueError):
    """Structurally invalid model."""


class NoGraphPreservingValuation(RuntimeError):
    """Rejection sampling found no graph-preserving valuation."""


Row = tuple[tuple[int, Polynomial], ...]


@dataclass(frozen=True, eq=True)
class PMC:
    """An explicit parametric Markov chain.

    ``rows[i]`` lists ``(successor, label)`` pairs sorted by successor,
    without duplicates or zero labels.
    """

    n: int
    rows: tuple[Row, ...]
    params: tuple[str, ...]
    target: int
    sink: int
    initial: int = 0
    labels: tuple[str, ...] | None = field(default=None)

    def __post_init__(self):
        if self.n != len(self.rows):
            raise ModelError("row count does not match number of states")
        for s in (self.target, self.sink, self.initial):
            if not 0 <= s < self.n:
                raise ModelError(f"state id {s} out of range")
        if self.target == self.sink:
            raise ModelError("target and sink must differ")
        one = Polynomial.one()
        for s in (self.target, self.sink):
            if self.rows[s] != ((s, one),):
                raise ModelError(f"state {s} must carry only a constant-1 self-loop")
        if self.labels is not None and len(self.labels) != self.n:
            raise ModelError("label count does not match number of states")

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[tuple[int, int, Polynomial]],
        params: Sequence[str],
        target: int,
        sink: int,
        initial: int = 0,
        labels: Sequence[str] | None = None,
    ) -> "PMC":
        """Build a chain from an edge list; parallel edges are summed and zero
        labels dropped.  Target and sink self-loops are added."""
        acc: list[dict[int, Polynomial]] = [{} for _ in range(n)]
        for i, j, p in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise ModelError(f"transition {i}->{j} references an unknown state")
            if i in (target, sink):
                continue
            if not isinstance(p, Polynomial):
                p = Polynomial.constant(p)
            row = acc[i]
            row[j] = row[j] + p if j in row else p
        one = Polynomial.one()
        acc[target] = {target: one}
        acc[sink] = {sink: one}
        rows = tuple(tuple((j, row[j]) for j in sorted(row) if not row[j].is_zero()) for row in acc)
        for i, row in enumerate(rows):
            if not row:
                raise ModelError(f"state {i} has no outgoing transition")
        return cls(n, rows, tuple(params), target, sink, initial,
                   tuple(labels) if labels is not None else None)

    @property
    def nparams(self) -> int:
        return len(self.params)

    @cached_property
    def successors(self) -> list[list[int]]:
        return [[j for j, _ in row] for row in self.rows]

    @cached_property
    def predecessors(self) -> list[list[int]]:
        return reverse_adjacency(self.successors)

    @property
    def num_transitions(self) -> int:
        return sum(len(r) for r in self.rows)

    def edges(self):
        for i, row in enumerate(self.rows):
            for j, p in row:
                yield i, j, p

    def label(self, i: int) -> str:
        return self.labels[i] if self.labels is not None else str(i)

    def state_id(self, name: str | int) -> int:
        """Resolve a state given by id or by label."""
        if isinstance(name, int):
            if not 0 <= name < self.n:
                raise ModelError(f"state {name} out of range")
            return name
        if self.labels is not None and name in self.labels:
            return self.labels.index(name)
        try:
            return self.state_id(int(name))
        except ValueError:
            raise ModelError(f"unknown state {name!r}") from None

    def param_id(self, name: str | int) -> int:
        if isinstance(name, int):
            if not 0 <= name < self.nparams:
                raise ModelError(f"parameter {name} out of range")
            return name
        if name in self.params:
            return self.params.index(name)
        try:
            return self.param_id(int(name))
        except ValueError:
            raise ModelError(f"unknown parameter {name!r}") from None

    def is_normal_form(self) -> bool:
        return self.target == self.n - 1 and self.sink == self.n - 2

    def with_rows(self, rows: Sequence[Row]) -> "PMC":
        return PMC(self.n, tuple(rows), self.params, self.target, self.sink, self.initial, self.labels)


# kinds

@dataclass(frozen=True)
class PMCKind:
    simple: bool
    trivially_parametric: bool

    def describe(self) -> str:
        if self.trivially_parametric:
            return "trivially parametric"
        if self.simple:
            return "simple"
        return "general"


def _literal_var(p: Polynomial) -> tuple[int, bool] | None:
    """``(k, True)`` for ``x_k``, ``(k, False)`` for ``1 - x_k``, else None."""
    t = p._terms
    if len(t) == 1:
        (m, c), = t.items()
        if c == 1 and sum(m) == 1:
            return len(m) - 1, True
    elif len(t) == 2 and t.get(()) == 1:
        for m, c in t.items():
            if m and c == -1 and sum(m) == 1:
                return len(m) - 1, False
    return None


def _row_sum(row: Row) -> Polynomial:
    total = Polynomial.zero()
    for _, p in row:
        total = total + p
    return total


def detect_kind(pmc: PMC) -> PMCKind:
    """Classify a chain as trivially parametric, simple or general.

    Trivially parametric: every non-absorbing label is a single variable with
    coefficient 1, each variable labels exactly one transition, and no state has
    a single outgoing transition.  Simple: every row sums to 1 identically,
    constants lie in (0, 1], non-constant labels are products of literals
    ``x`` / ``1 - x``, and every parameter labels some transition as a bare
    literal (so graph-preserving valuations lie inside the unit box).
    """
    seen: set[int] = set()
    trivial = True
    for i, row in enumerate(pmc.rows):
        if i in (pmc.target, pmc.sink):
            continue
        if len(row) < 2:
            trivial = False
            break
        for _, p in row:
            lit = _literal_var(p)
            if lit is None or not lit[1] or lit[0] in seen:
                trivial = False
                break
            seen.add(lit[0])
        if not trivial:
            break
    return PMCKind(simple=_is_simple(pmc), trivially_parametric=trivial)


def substitute_one(p: Polynomial, k: int) -> Polynomial:
    """``p`` with ``x_k := 1``."""
    out: dict[tuple, Rational] = {}
    for m, c in p.items():
        if k < len(m) and m[k]:
            m = m[:k] + (0,) + m[k + 1:]
            while m and m[-1] == 0:
                m = m[:-1]
        out[m] = out.get(m, 0) + c
    return Polynomial(out)


def factor_literal_product(p: Polynomial):
    """Write ``p = c * prod(literals)`` with ``0 < c <= 1``.

    Returns ``(c, literals)`` where literals are ``(k, True)`` for ``x_k`` and
    ``(k, False)`` for ``1 - x_k`` (with multiplicity), or None.
    """
    lits: list[tuple[int, bool]] = []
    for k in sorted(p.variables()):
        x = Polynomial.var(k)
        comp = 1 - x
        while not p.is_zero() and all(k < len(m) and m[k] for m, _ in p.items()):
            p = p.exact_divide(x)
            lits.append((k, True))
        while not p.is_zero() and substitute_one(p, k).is_zero():
            p = p.exact_divide(comp)
            lits.append((k, False))
    if not p.is_constant():
        return None
    c = p.constant_value()
    if not 0 < c <= 1:
        return None
    return c, lits


def _literal_product(p: Polynomial) -> bool:
    return factor_literal_product(p) is not None


def _is_simple(pmc: PMC) -> bool:
    one = Polynomial.one()
    standalone: set[int] = set()
    for i, row in enumerate(pmc.rows):
        if i in (pmc.target, pmc.sink):
            continue
        if _row_sum(row) != one:
            return False
        for _, p in row:
            if p.is_constant():
                c = p.constant_value()
                if not 0 < c <= 1:
                    return False
                continue
            lit = _literal_var(p)
            if lit is not None:
                standalone.add(lit[0])
                continue
            if not _literal_product(p):
                return False
    return standalone >= set(range(pmc.nparams))


def trivially_parametric_rows(pmc: PMC) -> bool:
    return detect_kind(pmc).trivially_parametric


# validation

@dataclass
class ValidationReport:
    ok: bool
    violations: list[str]

    def __bool__(self):
        return self.ok


def validate(pmc: PMC, kind: str | None = None) -> ValidationReport:
    """Check structural invariants; ``kind`` may demand ``"simple"`` or
    ``"trivially-parametric"`` on top of them."""
    violations: list[str] = []
    for i, row in enumerate(pmc.rows):
        if not row:
            violations.append(f"state {i} has no outgoing transition")
        for j, p in row:
            if p.is_zero():
                violations.append(f"transition {i}->{j} has a zero label")
            if p.nvars > pmc.nparams:
                violations.append(f"transition {i}->{j} uses an undeclared parameter")
    if kind in ("trivially-parametric", "trivial"):
        counts: dict[int, int] = {}
        for i, row in enumerate(pmc.rows):
            if i in (pmc.target, pmc.sink):
                continue
            for j, p in row:
                lit = _literal_var(p)
                if lit is None or not lit[1]:
                    violations.append(f"transition {i}->{j} is not a single parameter")
                else:
                    counts[lit[0]] = counts.get(lit[0], 0) + 1
        for k, c in sorted(counts.items()):
            if c > 1:
                violations.append(f"parameter {pmc.params[k]} labels {c} transitions")
    elif kind == "simple":
        for i, row in enumerate(pmc.rows):
            total = sum((q for _, q in row), Polynomial.zero())
            if total != Polynomial.one():
                violations.append(f"row {i} sums to {total.format(pmc.params)}, not 1")
        if not violations and not _is_simple(pmc):
            violations.append("chain is not simple")
    elif kind not in (None, "general"):
        raise ValueError(f"unknown kind {kind!r}")
    return ValidationReport(not violations, violations)


def is_graph_preserving(pmc: PMC, valuation: Sequence) -> bool:
    """Every label evaluates into (0, 1] and every row sums to exactly 1."""
    if len(valuation) != pmc.nparams:
        raise ModelError(f"valuation has {len(valuation)} entries, expected {pmc.nparams}")
    point = [mpq(v) for v in valuation]
    cache: dict[Polynomial, Rational] = {}
    for row in pmc.rows:
        total = mpq(0)
        for _, p in row:
            v = cache.get(p)
            if v is None:
                v = cache[p] = p.evaluate(point)
            if not 0 < v <= 1:
                return False
            total += v
        if total != 1:
            return False
    return True


# qualitative preprocessing

@dataclass(frozen=True)
class QualitativeReport:
    prob0: tuple[int, ...]
    prob1: tuple[int, ...]
    mapping: tuple[int, ...]


@gc_paused
def qualitative_preprocess(pmc: PMC) -> tuple[PMC, QualitativeReport]:
    """Merge probability-0 states into the sink and probability-1 states into the
    target, then renumber into normal form.

    Graph-preserving valuations keep every edge, so both sets are determined
    by the underlying graph: prob-0 states cannot reach the target; prob-1
    states cannot reach a prob-0 state without passing the target.
    """
    n = pmc.n
    pred = pmc.predecessors
    to_target = reach(pred, [pmc.target])
    zero = bytearray(1 - b for b in to_target)
    blocked = bytearray(n)
    blocked[pmc.target] = 1
    to_zero = reach(pred, [i for i in range(n) if zero[i]], blocked)
    one = bytearray(1 - b for b in to_zero)
    keep = [i for i in range(n) if not zero[i] and not one[i]]
    k = len(keep)
    new_sink, new_target = k, k + 1
    if pmc.sink == new_sink and pmc.target == new_target and keep == list(range(k)):
        # already in normal form with nothing to merge; keeps cached adjacency
        report = QualitativeReport(prob0=(pmc.sink,), prob1=(pmc.target,), mapping=tuple(range(n)))
        return pmc, report
    mapping = [0] * n
    for idx, i in enumerate(keep):
        mapping[i] = idx
    for i in range(n):
        if zero[i]:
            mapping[i] = new_sink
        elif one[i]:
            mapping[i] = new_target
    rows: list[Row] = []
    for i in keep:
        acc: dict[int, Polynomial] = {}
        for j, p in pmc.rows[i]:
            t = mapping[j]
            acc[t] = acc[t] + p if t in acc else p
        rows.append(tuple((j, acc[j]) for j in sorted(acc) if not acc[j].is_zero()))
    unit = Polynomial.one()
    rows.append(((new_sink, unit),))
    rows.append(((new_target, unit),))
    labels = None
    if pmc.labels is not None:
        labels = tuple(pmc.labels[i] for i in keep) + (pmc.labels[pmc.sink], pmc.labels[pmc.target])
    out = PMC(k + 2, tuple(rows), pmc.params, new_target, new_sink, mapping[pmc.initial], labels)
    report = QualitativeReport(
        prob0=tuple(i for i in range(n) if zero[i]),
        prob1=tuple(i for i in range(n) if one[i]),
        mapping=tuple(mapping),
    )
    return out, report


# sampling

SAMPLE_BITS = 16
_SCALE = 1 << SAMPLE_BITS


def dyadic(rng: random.Random) -> Rational:
    """Uniform ``k / 2^16`` with ``1 <= k < 2^16``."""
    return mpq(rng.randint(1, _SCALE - 1), _SCALE)


def make_sampler(pmc: PMC, kind: PMCKind | None = None, max_tries: int = 10_000):
    """Return ``draw(rng) -> list of rationals`` producing graph-preserving valuations."""
    if kind is None:
        kind = detect_kind(pmc)
    m = pmc.nparams
    if kind.trivially_parametric:
        groups: list[list[int]] = []
        for i, row in enumerate(pmc.rows):
            if i in (pmc.target, pmc.sink):
                continue
            groups.append([_literal_var(p)[0] for _, p in row])

        def draw(rng):
            point = [mpq(1, 2)] * m
            for g in groups:
                weights = [rng.randint(1, _SCALE) for _ in g]
                total = sum(weights)
                for k, w in zip(g, weights):
                    point[k] = mpq(w, total)
            return point
        return draw
    if kind.simple:
        def draw(rng):
            return [dyadic(rng) for _ in range(m)]
        return draw

    def draw(rng):
        for _ in range(max_tries):
            point = [dyadic(rng) for _ in range(m)]
            if is_graph_preserving(pmc, point):
                return point
        raise NoGraphPreservingValuation(
            f"no graph-preserving valuation found in {max_tries} tries")
    return draw


def sample_valuation(pmc: PMC, kind: PMCKind | None = None, seed: int = 0) -> list[Rational]:
    """One seeded graph-preserving valuation (see :func:`make_sampler`)."""
    return make_sampler(pmc, kind)(random.Random(seed))


def normalize_trivial_rows(pmc: PMC) -> PMC:
    """For a trivially parametric chain, replace the last label of each row by
    one minus the others, so formal identities hold on the whole graph-preserving set."""
    if not detect_kind(pmc).trivially_parametric:
        raise ModelError("chain is not trivially parametric")
    rows = []
    for i, row in enumerate(pmc.rows):
        if i in (pmc.target, pmc.sink):
            rows.append(row)
            continue
        rest = Polynomial.one()
        for _, p in row[:-1]:
            rest = rest - p
        rows.append(row[:-1] + ((row[-1][0], rest),))
    return pmc.with_rows(rows)


def valuation_dict(pmc: PMC, point: Sequence) -> dict[str, str]:
    return {name: str(mpq(v)) for name, v in zip(pmc.params, point)}


ONE_POLY = Polynomial.constant(ONE)
