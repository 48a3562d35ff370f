"""Derivative chains: a simple pMC whose value at a probe state is an affine
image of a partial derivative of a value function.

Building blocks:

* :func:`chonev_rewrite` writes a polynomial as ``N (c/d + sum a_i/b_i Q_i)``
  with every ``Q_i`` a product of literals ``x`` or ``1 - x``;
* :func:`abp_to_pmc` compiles a branching program layer by layer (from the
  sink backwards) into a simple pMC with ``[[A]] = beta + N * g_probe``;
* :func:`derivative_pmc` runs the whole pipeline for ``d g_i / d x_k``.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

from gmpy2 import mpq

from .abp import ABP, ABPError, circuit_to_abp, polynomial_to_abp, validate_abp
from .algebra import Polynomial, Rational, RationalFunction, grlex_key
from .circuit import (
    CircuitBuilder,
    CircuitError,
    circuit_eval,
    derivatives,
    eliminate_divisions,
    depth_reduce,
    push_divisions,
    numerator_denominator,
)
from .formats import model_to_dict
from .pmc import (
    PMC,
    ModelError,
    detect_kind,
    factor_literal_product,
    make_sampler,
    qualitative_preprocess,
)
from .valuefn import PointEvaluator, bareiss_eliminate, build_system, solve_values, value_function_circuits

Literal = tuple[int, bool]  # (variable, True for x / False for 1 - x)


class DerivativeError(RuntimeError):
    pass


# rewriting into literal products

def _chonev_raw(f: Polynomial) -> tuple[Rational, dict[tuple[Literal, ...], Rational]]:
    """``f = C + sum gamma_Q * Q`` with every gamma positive.

    Repeatedly take the graded-lex largest non-constant monomial with a negative
    coefficient t = -|t| x^alpha, flip its lowest-index variable x_i through
    -|t| x^alpha = |t| (1 - x_i) x^(alpha - e_i) - |t| x^(alpha - e_i), and
    continue with the remainder; the flipped monomial has smaller degree, so
    the loop terminates.  Positive monomials are kept as literal products.
    """
    rem: dict[tuple, Rational] = dict(f.items())
    out: dict[tuple[Literal, ...], Rational] = {}

    def lits_of(mono, extra=None):
        lits = []
        for k, e in enumerate(mono):
            lits.extend([(k, True)] * e)
        if extra is not None:
            lits.append(extra)
        return tuple(sorted(lits))

    while True:
        negs = [m for m, c in rem.items() if c < 0 and m]
        if not negs:
            break
        m = max(negs, key=grlex_key)
        c = rem.pop(m)
        i = next(k for k, e in enumerate(m) if e)
        rest = list(m)
        rest[i] -= 1
        while rest and rest[-1] == 0:
            rest.pop()
        rest = tuple(rest)
        key = lits_of(rest, (i, False))
        out[key] = out.get(key, 0) - c
        v = rem.get(rest, 0) + c
        if v:
            rem[rest] = v
        else:
            rem.pop(rest, None)
    for m, c in rem.items():
        if m:
            key = lits_of(m)
            out[key] = out.get(key, 0) + c
    return rem.get((), mpq(0)), out


@dataclass(frozen=True)
class ChonevForm:
    """``f = N * (c/d + sum a_i/b_i * Q_i)`` with ``|c|/d + sum a_i/b_i <= 1``."""

    N: int
    c: int
    d: int
    terms: tuple[tuple[int, int, tuple[Literal, ...]], ...]

    def evaluate(self, point: Sequence) -> Rational:
        total = mpq(self.c, self.d)
        for a, b, q in self.terms:
            total += mpq(a, b) * literal_product_value(q, point)
        return self.N * total

    def mass(self) -> Rational:
        return mpq(abs(self.c), self.d) + sum((mpq(a, b) for a, b, _ in self.terms), mpq(0))


def literal_product_value(q: Sequence[Literal], point: Sequence) -> Rational:
    v = mpq(1)
    for k, pos in q:
        x = mpq(point[k])
        v *= x if pos else 1 - x
    return v


def literal_poly(lit: Literal) -> Polynomial:
    x = Polynomial.var(lit[0])
    return x if lit[1] else 1 - x


def chonev_rewrite(f: Polynomial) -> ChonevForm:
    const, raw = _chonev_raw(f)
    coeffs = [const] + list(raw.values())
    D = 1
    for c in coeffs:
        D = math.lcm(D, int(mpq(c).denominator))
    c_int = int(const * D)
    nums = {q: int(g * D) for q, g in raw.items()}
    N = abs(c_int) + sum(nums.values())
    if N == 0:
        return ChonevForm(1, 0, 1, ())
    terms = tuple((a, N * D, q) for q, a in sorted(nums.items()))
    return ChonevForm(N, c_int, N * D, terms)


def bernstein_nonneg(f: Polynomial, max_elevation: int = 3, max_coefficients: int = 20000) -> bool:
    """All tensor Bernstein coefficients on [0,1]^m non-negative (for some small
    degree elevation), which implies f >= 0 on the box."""
    if f.is_zero():
        return True
    vars_ = sorted(f.variables())
    if not vars_:
        return f.constant_value() >= 0
    base = [f.degree_in(k) for k in vars_]
    terms = [(tuple(m[k] if k < len(m) else 0 for k in vars_), c) for m, c in f.items()]
    for elev in range(max_elevation + 1):
        degs = [n + elev for n in base]
        count = 1
        for n in degs:
            count *= n + 1
        if count > max_coefficients:
            return False
        binoms = [[math.comb(n, j) for j in range(n + 1)] for n in degs]
        ok = True
        for beta in product(*[range(n + 1) for n in degs]):
            s = mpq(0)
            for alpha, c in terms:
                w = c
                for idx, (a_, b_) in enumerate(zip(alpha, beta)):
                    if a_ > b_:
                        w = None
                        break
                    w = w * math.comb(b_, a_) / binoms[idx][a_]
                if w is not None:
                    s += w
            if s < 0:
                ok = False
                break
        if ok:
            return True
    return False


def nonneg_certificate(f: Polynomial) -> str | None:
    """Name of a certificate that ``f >= 0`` on the unit box, or None."""
    form = chonev_rewrite(f)
    if form.c >= 0:
        return "chonev-nonneg"
    if bernstein_nonneg(f):
        return "bernstein-nonneg"
    return None


def chonev_nonneg_certificate(f: Polynomial) -> bool:
    """True only if ``f >= 0`` on [0,1]^m; False is inconclusive.

    First the literal-product form (every term non-negative on the box, so a
    non-negative constant suffices); failing that, non-negative Bernstein
    coefficients, which give another sum of literal products with positive
    weights.
    """
    return nonneg_certificate(f) is not None


# branching program -> simple chain

@dataclass
class CompiledABP:
    pmc: PMC
    beta: Rational
    N: int
    probe_state: int

    def __iter__(self):
        return iter((self.pmc, self.beta, self.N, self.probe_state))


class _ChainBuilder:
    def __init__(self):
        self.rows: list[dict[int, Polynomial]] = []
        self.names: list[str] = []

    def state(self, name: str) -> int:
        self.rows.append({})
        self.names.append(name)
        return len(self.rows) - 1

    def edge(self, i: int, j: int, p: Polynomial):
        if p.is_zero():
            return
        row = self.rows[i]
        row[j] = row[j] + p if j in row else p


def abp_to_pmc(abp: ABP, params: Sequence[str] | None = None) -> CompiledABP:
    """Simple pMC with ``[[A]](x) = beta + N * g_probe(x)``.

    Working backwards from the sink (``N = 1``, ``beta = 1``), each vertex u in
    layer j satisfies ``[[u]] = N_j (beta_u + g_{u+})`` and ``g_{u-} = 1 - g_{u+}``
    for two states ``u+`` and ``u-``.  The layer expression
    ``sum_v l(u,v) (beta_v + G_v)`` (``G_v`` standing for ``g_{v+}``) is rewritten
    into literal products; a shared factor A_j >= max_u(|C_u| + sum gamma)
    keeps all ``N`` within the layer equal.  A product ``x * G_v`` becomes a
    chain ``u+ -> c -> v+`` (leaving to the sink when the literal fails); the
    complement ``u-`` uses the same chain with target and sink swapped.
    """
    problems = validate_abp(abp)
    if problems:
        raise ABPError("invalid ABP: " + "; ".join(problems[:3]))
    m = abp.nvars
    if params is None:
        params = [f"x{k}" for k in range(m)]
    cb = _ChainBuilder()
    top = cb.state("top")
    bot = cb.state("bot")
    cb.edge(top, top, Polynomial.one())
    cb.edge(bot, bot, Polynomial.one())
    one = Polynomial.one()
    layers = abp.layers
    sink_v = abp.sink
    out = abp.out_edges
    plus: dict[int, int] = {}
    minus: dict[int, int] = {}
    beta: dict[int, Rational] = {}
    N_next = 1
    N_of_layer: dict[int, int] = {len(layers) - 1: 1}
    for j in range(len(layers) - 2, -1, -1):
        pos = {v: idx for idx, v in enumerate(layers[j + 1]) if v != sink_v}
        raws = {}
        for u in layers[j]:
            expr = Polynomial.zero()
            for v, lab in out.get(u, ()):
                if v == sink_v:
                    expr = expr + lab
                else:
                    expr = expr + lab * (Polynomial.constant(beta[v]) + Polynomial.var(m + pos[v]))
            raws[u] = _chonev_raw(expr)
        A = 1
        for C, terms in raws.values():
            A = max(A, math.ceil(abs(C) + sum(terms.values(), mpq(0))))
        for u in layers[j]:
            plus[u] = cb.state(f"v{u}+")
            minus[u] = cb.state(f"v{u}-")
        inv_pos = {idx: v for v, idx in pos.items()}
        for u in layers[j]:
            C, terms = raws[u]
            beta[u] = mpq(C) / A
            up, um = plus[u], minus[u]
            mass = mpq(0)
            for q, gamma in sorted(terms.items()):
                alpha = mpq(gamma) / A
                mass += alpha
                xs = [lit for lit in q if lit[0] < m]
                gs = [lit for lit in q if lit[0] >= m]
                if len(gs) > 1:
                    raise DerivativeError("internal: product of two next-layer values")
                if gs:
                    v = inv_pos[gs[0][0] - m]
                    dest = plus[v] if gs[0][1] else minus[v]
                    cdest = minus[v] if gs[0][1] else plus[v]
                else:
                    dest, cdest = top, bot
                _emit_chain(cb, up, alpha, xs, dest, fail=bot, name=f"v{u}+")
                _emit_chain(cb, um, alpha, xs, cdest, fail=top, name=f"v{u}-", complement=True)
            if mass > 1:
                raise DerivativeError("internal: outgoing mass exceeds 1")
            rest = 1 - mass
            if rest:
                cb.edge(up, bot, Polynomial.constant(rest))
                cb.edge(um, top, Polynomial.constant(rest))
        N_next = A * N_next
        N_of_layer[j] = N_next
    src = abp.source
    probe = plus[src]
    N = N_of_layer[0]
    beta_total = N * beta[src]
    # dummy states keep every parameter present as a bare literal
    used = set()
    for row in cb.rows:
        for p in row.values():
            used |= p.variables()
    for k in range(m):
        if k not in used:
            dmy = cb.state(f"param_{params[k]}")
            x = Polynomial.var(k)
            cb.edge(dmy, top, x)
            cb.edge(dmy, bot, 1 - x)
    order = [i for i in range(len(cb.rows)) if i not in (top, bot)] + [bot, top]
    new = {old: k for k, old in enumerate(order)}
    edges = [(new[i], new[j], p) for i in order for j, p in cb.rows[i].items()]
    chain = PMC.from_edges(len(order), edges, params, new[top], new[bot], new[probe],
                           [cb.names[i] for i in order])
    chain, report = qualitative_preprocess(chain)
    return CompiledABP(chain, beta_total, N, report.mapping[new[probe]])


def _emit_chain(cb, start, alpha, xs, dest, fail, name, complement=False):
    """Edges realising ``alpha * prod(xs) * [dest]`` from ``start``.

    For the complement side (``complement=True``) the chain leaves to ``fail``
    (the target) whenever a literal fails, so the probability of *not* being
    absorbed in the sink along this branch is ``1 - prod(xs) * [dest]``.
    """
    a = Polynomial.constant(alpha)
    if not xs:
        cb.edge(start, dest, a)
        return
    cur = cb.state(f"{name}/c")
    cb.edge(start, cur, a)
    for idx, lit in enumerate(xs):
        lp = literal_poly(lit)
        nxt = dest if idx == len(xs) - 1 else cb.state(f"{name}/c")
        cb.edge(cur, nxt, lp)
        cb.edge(cur, fail, 1 - lp)
        cur = nxt


# end-to-end pipeline

@dataclass
class DerivativePMC:
    """``d g_state / d x_param = (beta + N * g'_probe) / scale`` where ``g'`` is the
    value function of ``pmc`` and ``scale`` is the squared denominator."""

    pmc: PMC
    beta: Rational
    N: int
    probe_state: int
    numerator: Polynomial
    scale: Polynomial
    state: int
    param: int
    route: str = "sparse"
    checks: dict = field(default_factory=dict)

    def relation_value(self, point: Sequence) -> Rational:
        g = PointEvaluator(self.pmc).values(point)[self.probe_state]
        return self.beta + self.N * g

    def derivative_value(self, point: Sequence) -> Rational:
        return self.relation_value(point) / self.scale.evaluate(point)

    def to_dict(self, names: Sequence[str]) -> dict:
        d = model_to_dict(self.pmc)
        d["relation"] = {
            "beta": str(self.beta),
            "N": str(self.N),
            "probe_state": self.probe_state,
            "scale_poly": self.scale.format(names),
            "numerator_poly": self.numerator.format(names),
            "state": self.state,
            "param": names[self.param],
            "route": self.route,
        }
        return d

    def to_json(self, names: Sequence[str]) -> str:
        return json.dumps(self.to_dict(names), indent=1) + "\n"


def _derivative_numerator(pmc: PMC, i: int, k: int) -> tuple[Polynomial, Polynomial]:
    diag = bareiss_eliminate(build_system(pmc))
    b, a = diag.b[i], diag.a[i]
    return b.partial(k) * a - b * a.partial(k), a * a


def _circuit_route_abp(pmc: PMC, i: int, k: int, degree: int, seed: int) -> ABP:
    vc = value_function_circuits(pmc, seed)
    num_c, den_c = vc.numerator(i), vc.denominator(i)
    dn, dd = derivatives(num_c), derivatives(den_c)
    b = CircuitBuilder(pmc.nparams)
    n_ids, d_ids = b.copy(dn), b.copy(dd)
    N_, dN = n_ids[dn.outputs[0]], n_ids[dn.outputs[1 + k]]
    D_, dD = d_ids[dd.outputs[0]], d_ids[dd.outputs[1 + k]]
    P_gate = b.sub(b.mul(dN, D_), b.mul(N_, dD))
    circuit = b.build([P_gate])
    pushed = push_divisions(circuit)
    if pushed.has_division:
        num, den = numerator_denominator(pushed)
        if den.gates[den.outputs[0]] == ("const", 1):
            free = num
        else:
            free = eliminate_divisions(pushed, degree, seed)
    else:
        free = pushed
    if free.depth > 8:
        free = depth_reduce(free, seed)
    return circuit_to_abp(free)


def derivative_pmc(
    pmc: PMC,
    i: int,
    k: int,
    route: str = "auto",
    seed: int = 0,
    checks: int = 20,
    verify: str = "auto",
) -> DerivativePMC:
    """Simple pMC M' with ``d g_i/d x_k = (beta + N g'_probe) / D``.

    ``P = d(num) * den - num * d(den)`` and ``D = den^2`` come from the
    fraction-free elimination; ``P`` is cross-checked against reverse-mode
    differentiation of the traced elimination circuit at ``checks`` random
    graph-preserving points.  The branching program for ``P`` is the sparse
    sum-of-products program (``route="sparse"`` or ``"auto"``) or the width-3
    register program of the circuit (``route="circuit"``, only feasible for
    very shallow circuits).  The final identity ``beta + N g'_probe = P`` is
    verified symbolically (``verify="symbolic"``) or at 100 random points.
    """
    if not 0 <= i < pmc.n:
        raise ModelError(f"state {i} out of range")
    if not 0 <= k < pmc.nparams:
        raise ModelError(f"parameter {k} out of range")
    kind = detect_kind(pmc)
    if not kind.simple:
        raise DerivativeError("derivative chains are defined for simple pMCs")
    P, D = _derivative_numerator(pmc, i, k)

    # cross-check against the traced circuit and reverse-mode derivatives
    rng = random.Random(seed)
    draw = make_sampler(pmc, kind)
    vc = value_function_circuits(pmc, seed)
    dq = derivatives(vc.quotient(i))
    for _ in range(checks):
        x = draw(rng)
        got = circuit_eval(dq, x)[1 + k]
        want = P.evaluate(x) / D.evaluate(x)
        if got != want:
            raise DerivativeError("circuit derivative disagrees with the symbolic derivative")

    if route in ("auto", "sparse"):
        abp = polynomial_to_abp(P, pmc.nparams)
        used = "sparse"
    elif route == "circuit":
        try:
            abp = _circuit_route_abp(pmc, i, k, max(P.degree(), 0), seed)
        except (ABPError, CircuitError) as exc:
            raise DerivativeError(f"circuit route infeasible: {exc}") from None
        used = "circuit"
    else:
        raise ValueError(f"unknown route {route!r}")

    compiled = abp_to_pmc(abp, pmc.params)
    result = DerivativePMC(compiled.pmc, compiled.beta, compiled.N, compiled.probe_state,
                           P, D, i, k, used)
    if verify == "auto":
        verify = "symbolic" if compiled.pmc.n <= 5000 else "sampling"
    if verify == "symbolic":
        g = solve_values(compiled.pmc)[compiled.probe_state]
        ok = RationalFunction(Polynomial.constant(compiled.beta)) + g * compiled.N == P
    elif verify == "sampling":
        ev = PointEvaluator(compiled.pmc)
        ok = True
        for _ in range(100):
            x = [mpq(rng.randint(1, 2**16 - 1), 2**16) for _ in range(pmc.nparams)]
            if compiled.beta + compiled.N * ev.values(x)[compiled.probe_state] != P.evaluate(x):
                ok = False
                break
    elif verify == "none":
        ok = True
    else:
        raise ValueError(f"unknown verification mode {verify!r}")
    if not ok:
        raise DerivativeError("derivative chain fails its identity check")
    result.checks = {"circuit_points": checks, "identity": verify}
    return result


__all__ = [
    "ChonevForm", "CompiledABP", "DerivativePMC", "DerivativeError",
    "chonev_rewrite", "chonev_nonneg_certificate", "nonneg_certificate",
    "abp_to_pmc", "derivative_pmc", "factor_literal_product",
]
