"""Never-worse relation and monotonicity checks with three-valued verdicts.

``i ⊴ j`` holds when ``g_i(v) <= g_j(v)`` at every graph-preserving
valuation; ``g_i`` is monotone increasing in ``x_k`` when it never decreases
along positive shifts of ``x_k`` that stay graph-preserving.  Both exact
problems are hard in general, so the checks here combine falsification by
sampling (a refutation always carries a witness that re-verifies exactly)
with sufficient certificates for non-negativity on the unit box.
"""

from __future__ import annotations

import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

from gmpy2 import mpq

from .algebra import Polynomial, Rational, RationalFunction
from .derivpmc import DerivativePMC, derivative_pmc, nonneg_certificate
from .pmc import (
    PMC,
    ModelError,
    PMCKind,
    detect_kind,
    is_graph_preserving,
    make_sampler,
)
from .valuefn import PointEvaluator, solve_values

SHARD_SIZE = 1000
SYMBOLIC_STATES = 12


@dataclass
class Verdict:
    status: str  # "CertifiedYes" | "RefutedNo" | "Unknown"
    samples_used: int = 0
    certificate: str | None = None
    witness: dict[str, Any] | None = None

    @classmethod
    def yes(cls, certificate: str, samples: int = 0) -> "Verdict":
        return cls("CertifiedYes", samples, certificate=certificate)

    @classmethod
    def no(cls, witness: dict, samples: int) -> "Verdict":
        return cls("RefutedNo", samples, witness=witness)

    @classmethod
    def unknown(cls, samples: int, reason: str | None = None) -> "Verdict":
        return cls("Unknown", samples, certificate=reason)

    @property
    def is_yes(self) -> bool:
        return self.status == "CertifiedYes"

    @property
    def is_no(self) -> bool:
        return self.status == "RefutedNo"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "certificate": self.certificate,
            "witness": self.witness,
            "samples_used": self.samples_used,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _point_dict(pmc: PMC, point: Sequence) -> dict[str, str]:
    return {name: str(mpq(v)) for name, v in zip(pmc.params, point)}


def _point_from_dict(pmc: PMC, d: dict) -> list[Rational]:
    return [mpq(d[name]) for name in pmc.params]


# gadgets

def nwr_gadget(pmc: PMC, i: int, j: int) -> tuple[PMC, int, int]:
    """Add a fresh parameter ``y`` and a state ``n_new`` with ``y -> j`` and
    ``1 - y -> i``.  Then ``g_new = y g_j + (1 - y) g_i``, which is increasing in
    ``y`` exactly when ``i ⊴ j``.  The new state is inserted before the sink so
    the chain stays in normal form."""
    if i == j:
        raise ModelError("the gadget needs two distinct states")
    for s in (i, j):
        if s in (pmc.target, pmc.sink):
            raise ModelError("the gadget needs non-absorbing states")
    pos = min(pmc.sink, pmc.target)
    if not pmc.is_normal_form():
        pos = pmc.n

    def shift(s):
        return s + 1 if s >= pos else s

    name = "y"
    while name in pmc.params:
        name += "_"
    m = pmc.nparams
    y = Polynomial.var(m)
    edges = [(shift(a), shift(b), p) for a, b, p in pmc.edges()]
    edges.append((pos, shift(j), y))
    edges.append((pos, shift(i), 1 - y))
    labels = None
    if pmc.labels is not None:
        labels = list(pmc.labels[:pos]) + [f"gadget({pmc.label(i)},{pmc.label(j)})"] + list(pmc.labels[pos:])
    out = PMC.from_edges(pmc.n + 1, edges, list(pmc.params) + [name], shift(pmc.target),
                         shift(pmc.sink), shift(pmc.initial), labels)
    return out, pos, m


@dataclass
class ShortCircuit:
    monotone: bool | None
    reason: str


def _probe_is_one(d: DerivativePMC) -> bool | None:
    """Whether g'_probe is identically 1 (None when too large to decide)."""
    if d.pmc.n > 5000:
        return None
    return solve_values(d.pmc)[d.probe_state] == RationalFunction(Polynomial.one())


def mono_to_nwr(d: DerivativePMC) -> tuple[PMC, tuple[int, int]] | ShortCircuit:
    """Turn "is ``d g/d x`` non-negative" into an NWR query.

    With ``r = beta/N``: ``r >= 0`` gives monotone outright; ``r <= -1`` gives
    not monotone unless ``g'_probe`` is identically 1; otherwise a new state
    moving to the target with ``-r`` and to the sink with ``1 + r`` has value
    ``-r``, and monotonicity holds iff that state ⊴ probe.
    """
    r = mpq(d.beta) / d.N
    if r >= 0:
        return ShortCircuit(True, "beta/N >= 0")
    if r <= -1:
        one = _probe_is_one(d)
        if one is None:
            return ShortCircuit(None, "beta/N <= -1; identity g' = 1 undecided")
        if one:
            return ShortCircuit(r + 1 >= 0, "beta/N <= -1 with g' = 1")
        return ShortCircuit(False, "beta/N <= -1")
    base = d.pmc
    pos = base.sink
    n = base.n

    def shift(s):
        return s + 1 if s >= pos else s

    edges = [(shift(a), shift(b), p) for a, b, p in base.edges()]
    edges.append((pos, shift(base.target), Polynomial.constant(-r)))
    edges.append((pos, shift(base.sink), Polynomial.constant(1 + r)))
    labels = None
    if base.labels is not None:
        labels = list(base.labels[:pos]) + ["threshold"] + list(base.labels[pos:])
    out = PMC.from_edges(n + 1, edges, base.params, shift(base.target), shift(base.sink),
                         shift(base.initial), labels)
    return out, (pos, shift(d.probe_state))


# sampling engine

def _shards(budget: int) -> list[tuple[int, int]]:
    out = []
    start = 0
    while start < budget:
        out.append((start, min(SHARD_SIZE, budget - start)))
        start += SHARD_SIZE
    return out


def _shard_rng(seed: int, shard: int) -> random.Random:
    return random.Random(seed * 1_000_003 + shard)


def _nwr_shard(args):
    pmc, kind, i, j, seed, shard, count = args
    rng = _shard_rng(seed, shard)
    draw = make_sampler(pmc, kind)
    ev = PointEvaluator(pmc)
    for t in range(count):
        x = draw(rng)
        g = ev.values(x)
        if g[j] < g[i]:
            return t, x, g[i], g[j]
    return None


def _run_shards(fn, base_args, budget: int, jobs: int):
    """Run shards in order (or in parallel); the first witness by shard order wins.
    Returns ``(result, samples_used)``."""
    shards = _shards(budget)
    if jobs <= 1:
        used = 0
        for idx, (start, count) in enumerate(shards):
            res = fn(base_args + (idx, count))
            if res is not None:
                return res, used + res[0] + 1
            used += count
        return None, used
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        results = list(ex.map(fn, [base_args + (idx, count) for idx, (_, count) in enumerate(shards)]))
    used = 0
    for (start, count), res in zip(shards, results):
        if res is not None:
            return res, used + res[0] + 1
        used += count
    return None, used


def _symbolic_values(pmc: PMC) -> list[RationalFunction] | None:
    if pmc.n <= SYMBOLIC_STATES or _acyclic(pmc):
        return solve_values(pmc)
    return None


def _acyclic(pmc: PMC) -> bool:
    from .graph import strongly_connected_components
    for comp in strongly_connected_components(pmc.successors):
        if len(comp) > 1:
            return False
    return all(
        all(j != i for j, _ in pmc.rows[i]) for i in range(pmc.n) if i not in (pmc.target, pmc.sink)
    )


def _box_contains_gp(pmc: PMC, kind: PMCKind) -> bool:
    """Graph-preserving valuations lie in [0,1]^m when every parameter labels a
    transition on its own (simple and trivially parametric chains)."""
    return kind.simple or kind.trivially_parametric


def _certify_nonneg(h: RationalFunction) -> str | None:
    """Certificate that h >= 0 on the box, via num * den (same sign as h)."""
    return nonneg_certificate(h.num * h.den)


def check_nwr(pmc: PMC, i: int, j: int, budget: int = 1000, seed: int = 0, jobs: int = 1) -> Verdict:
    """Decide ``i ⊴ j`` as far as sampling and certificates allow."""
    if i == j:
        return Verdict.yes("reflexive")
    kind = detect_kind(pmc)
    res, used = _run_shards(_nwr_shard, (pmc, kind, i, j, seed), budget, jobs)
    if res is not None:
        _, x, gi, gj = res
        witness = {"valuation": _point_dict(pmc, x), "g_i": str(gi), "g_j": str(gj)}
        return Verdict.no(witness, used)
    if j == pmc.target or i == pmc.sink:
        return Verdict.yes("absorbing bound", used)
    if not _box_contains_gp(pmc, kind):
        return Verdict.unknown(used, "graph-preserving set not contained in the unit box")
    values = _symbolic_values(pmc)
    if values is None:
        return Verdict.unknown(used, "no symbolic form within the size guard")
    cert = _certify_nonneg(values[j] - values[i])
    if cert is not None:
        return Verdict.yes(f"{cert} on g_j - g_i", used)
    return Verdict.unknown(used, "no certificate found")


def verify_nwr_witness(pmc: PMC, i: int, j: int, verdict: Verdict) -> bool:
    """Re-evaluate a refutation exactly: graph-preserving and g_j < g_i."""
    x = _point_from_dict(pmc, verdict.witness["valuation"])
    if not is_graph_preserving(pmc, x):
        return False
    g = PointEvaluator(pmc).values(x)
    return g[j] < g[i]


# monotonicity

def _shift_point(x, k, eps):
    y = list(x)
    y[k] = y[k] + eps
    return y


def _mono_shard(args):
    pmc, kind, states, k, seed, shard, count = args
    rng = _shard_rng(seed, shard)
    draw = make_sampler(pmc, kind)
    ev = PointEvaluator(pmc)
    for t in range(count):
        for _ in range(100):
            x = draw(rng)
            eps = mpq(1, 2 ** rng.randint(4, 12))
            y = _shift_point(x, k, eps)
            if is_graph_preserving(pmc, y):
                break
        else:
            continue
        gx, gy = ev.values(x), ev.values(y)
        for s in states:
            if gy[s] < gx[s]:
                return t, s, x, y, gx[s], gy[s]
    return None


def _mono_witness(pmc, res) -> dict:
    _, s, x, y, gx, gy = res
    return {
        "state": s,
        "lower": _point_dict(pmc, x),
        "upper": _point_dict(pmc, y),
        "g_lower": str(gx),
        "g_upper": str(gy),
    }


def verify_mono_witness(pmc: PMC, k: int, verdict: Verdict) -> bool:
    w = verdict.witness
    x = _point_from_dict(pmc, w["lower"])
    y = _point_from_dict(pmc, w["upper"])
    if not (is_graph_preserving(pmc, x) and is_graph_preserving(pmc, y)):
        return False
    if any(a != b for idx, (a, b) in enumerate(zip(x, y)) if idx != k) or not y[k] > x[k]:
        return False
    ev = PointEvaluator(pmc)
    s = w["state"]
    return ev.values(y)[s] < ev.values(x)[s]


def _states(pmc: PMC, state: int | None) -> list[int]:
    if state is None:
        return [s for s in range(pmc.n) if s not in (pmc.target, pmc.sink)]
    return [state]


def _sample_monotone(pmc, kind, states, k, budget, seed, jobs):
    return _run_shards(_mono_shard, (pmc, kind, states, k, seed), budget, jobs)


def _certify_monotone(pmc: PMC, kind: PMCKind, states: list[int], k: int) -> tuple[bool, str]:
    if not _box_contains_gp(pmc, kind):
        return False, "graph-preserving set not contained in the unit box"
    values = _symbolic_values(pmc)
    if values is None:
        return False, "no symbolic form within the size guard"
    names = set()
    for s in states:
        d = values[s].partial(k)
        # d = (num' den - num den') / den^2: the sign is that of the numerator
        cert = nonneg_certificate(d.num)
        if cert is None:
            return False, f"no certificate for state {s}"
        names.add(cert)
    return True, "+".join(sorted(names)) + " on dg/dx"


def _find_decrease(pmc: PMC, kind: PMCKind, state: int, k: int, x, rng) -> dict | None:
    """A concrete decreasing pair near ``x`` (used when the derivative is negative at ``x``)."""
    ev = PointEvaluator(pmc)
    gx = ev.values(x)[state]
    for e in range(4, 40):
        eps = mpq(1, 2 ** e)
        y = _shift_point(x, k, eps)
        if not is_graph_preserving(pmc, y):
            continue
        gy = ev.values(y)[state]
        if gy < gx:
            return _mono_witness(pmc, (0, state, x, y, gx, gy))
    return None


def check_monotone(
    pmc: PMC,
    state: int | None,
    k: int,
    budget: int = 1000,
    seed: int = 0,
    method: str = "sampling",
    jobs: int = 1,
) -> Verdict:
    """Is ``g_state`` monotone increasing in parameter ``k``?

    ``state=None`` checks every non-absorbing state at once.  Methods:
    ``sampling`` (refutation only), ``certificate`` (non-negativity
    certificate on the derivative numerator), ``auto`` (sampling, then a
    certificate) and ``derivative-pmc`` (derivative chain, threshold gadget,
    then an NWR check).
    """
    if not 0 <= k < pmc.nparams:
        raise ModelError(f"parameter {k} out of range")
    kind = detect_kind(pmc)
    states = _states(pmc, state)
    if not states:
        return Verdict.yes("constant value functions")
    if state is not None and state in (pmc.target, pmc.sink):
        return Verdict.yes("constant value function")
    if method in ("sampling", "auto"):
        res, used = _sample_monotone(pmc, kind, states, k, budget, seed, jobs)
        if res is not None:
            return Verdict.no(_mono_witness(pmc, res), used)
        if method == "sampling":
            return Verdict.unknown(used, "no decrease found")
        ok, why = _certify_monotone(pmc, kind, states, k)
        return Verdict.yes(why, used) if ok else Verdict.unknown(used, why)
    if method == "certificate":
        ok, why = _certify_monotone(pmc, kind, states, k)
        return Verdict.yes(why) if ok else Verdict.unknown(0, why)
    if method == "derivative-pmc":
        if not kind.simple:
            raise ModelError("the derivative-chain method needs a simple pMC")
        used_total = 0
        names = []
        rng = random.Random(seed)
        for s in states:
            d = derivative_pmc(pmc, s, k, seed=seed)
            reduced = mono_to_nwr(d)
            if isinstance(reduced, ShortCircuit):
                if reduced.monotone is True:
                    names.append("derivative-pmc: " + reduced.reason)
                    continue
                if reduced.monotone is None:
                    return Verdict.unknown(used_total, reduced.reason)
                draw = make_sampler(pmc, kind)
                w = _find_decrease(pmc, kind, s, k, draw(rng), rng)
                if w is None:
                    return Verdict.unknown(used_total, reduced.reason)
                return Verdict.no(w, used_total + 1)
            chain, (a, b) = reduced
            v = check_nwr(chain, a, b, budget, seed, jobs)
            used_total += v.samples_used
            if v.is_no:
                x = _point_from_dict(chain, v.witness["valuation"])
                w = _find_decrease(pmc, kind, s, k, x, rng)
                if w is None:
                    return Verdict.unknown(used_total, "derivative negative but no decreasing pair found")
                return Verdict.no(w, used_total)
            if not v.is_yes:
                return Verdict.unknown(used_total, v.certificate)
            names.append("derivative-pmc: " + (v.certificate or ""))
        return Verdict.yes("; ".join(sorted(set(names))), used_total)
    raise ValueError(f"unknown method {method!r}")


__all__ = [
    "Verdict", "ShortCircuit", "nwr_gadget", "mono_to_nwr", "check_nwr", "check_monotone",
    "verify_nwr_witness", "verify_mono_witness",
]
