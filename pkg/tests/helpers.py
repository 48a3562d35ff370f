"""Independent oracles and random model generators shared by the tests.

The oracles deliberately avoid the package's own solvers: exact values come
from plain Gauss-Jordan elimination over ``fractions.Fraction`` and symbolic
value functions from sympy.
"""

from __future__ import annotations

import random
from fractions import Fraction

import sympy

from pmcnwr.algebra import Polynomial
from pmcnwr.pmc import PMC, detect_kind


# oracles

def frac_poly(poly: Polynomial, point) -> Fraction:
    total = Fraction(0)
    for mono, c in poly.terms:
        t = Fraction(int(c.numerator), int(c.denominator))
        for k, e in enumerate(mono):
            t *= Fraction(point[k]) ** e
        total += t
    return total


def can_reach(pmc: PMC, goal: int) -> set[int]:
    pred: dict[int, list[int]] = {i: [] for i in range(pmc.n)}
    for i, row in enumerate(pmc.rows):
        for j, _ in row:
            pred[j].append(i)
    seen, stack = {goal}, [goal]
    while stack:
        u = stack.pop()
        for w in pred[u]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def absorbing_reachable(pmc: PMC) -> bool:
    """Every state reaches the target or the sink (no closed transient cycles)."""
    return len(can_reach(pmc, pmc.target) | can_reach(pmc, pmc.sink)) == pmc.n


def oracle_values(pmc: PMC, point) -> list[Fraction]:
    """Reachability probabilities at a numeric point by Gauss-Jordan elimination."""
    point = [Fraction(int(v.numerator), int(v.denominator)) for v in point]
    good = can_reach(pmc, pmc.target)
    idx = [i for i in range(pmc.n) if i in good and i != pmc.target]
    pos = {s: k for k, s in enumerate(idx)}
    m = len(idx)
    A = [[Fraction(0)] * (m + 1) for _ in range(m)]
    for r, s in enumerate(idx):
        A[r][r] += 1
        for j, p in pmc.rows[s]:
            v = frac_poly(p, point)
            if j == pmc.target:
                A[r][m] += v
            elif j in pos:
                A[r][pos[j]] -= v
    for c in range(m):
        piv = next(r for r in range(c, m) if A[r][c] != 0)
        A[c], A[piv] = A[piv], A[c]
        inv = 1 / A[c][c]
        A[c] = [x * inv for x in A[c]]
        for r in range(m):
            if r != c and A[r][c] != 0:
                f = A[r][c]
                A[r] = [x - f * y for x, y in zip(A[r], A[c])]
    out = [Fraction(0)] * pmc.n
    out[pmc.target] = Fraction(1)
    for s, k in pos.items():
        out[s] = A[k][m]
    return out


def sym(poly: Polynomial, symbols) -> sympy.Expr:
    expr = sympy.Integer(0)
    for mono, c in poly.terms:
        t = sympy.Rational(int(c.numerator), int(c.denominator))
        for k, e in enumerate(mono):
            t *= symbols[k] ** e
        expr += t
    return expr


def sympy_residual_ok(pmc: PMC, values) -> bool:
    """Check with sympy that ``g_i = num_i / den_i`` solves the reachability equations:
    ``g_target = 1``, ``g_i = 0`` when the target is unreachable, and
    ``g_i = sum_j P_ij g_j`` otherwise.  The solution is unique, so this proves
    the values correct."""
    symbols = sympy.symbols([f"v{k}" for k in range(max(pmc.nparams, 1))])
    if not isinstance(symbols, (list, tuple)):
        symbols = [symbols]
    good = can_reach(pmc, pmc.target)
    num = [sym(g.num, symbols) for g in values]
    den = [sym(g.den, symbols) for g in values]
    if sympy.expand(num[pmc.target] - den[pmc.target]) != 0:
        return False
    shared = all(g.den == values[0].den for g in values)
    for i in range(pmc.n):
        if i == pmc.target:
            continue
        if i not in good:
            if sympy.expand(num[i]) != 0:
                return False
            continue
        if shared:
            # common denominator: num_i == sum_j P_ij num_j
            rhs = sum((sym(p, symbols) * num[j] for j, p in pmc.rows[i]), sympy.Integer(0))
            if sympy.expand(num[i] - rhs) != 0:
                return False
            continue
        # clear denominators: num_i * prod_j den_j == den_i * sum_j P_ij num_j prod_{l != j} den_l
        succ = [j for j, _ in pmc.rows[i]]
        common = sympy.Integer(1)
        for j in succ:
            common *= den[j]
        rhs = sympy.Integer(0)
        for j, p in pmc.rows[i]:
            rest = sympy.Integer(1)
            for l in succ:
                if l != j:
                    rest *= den[l]
            rhs += sym(p, symbols) * num[j] * rest
        if sympy.expand(num[i] * common - den[i] * rhs) != 0:
            return False
    return True


def gp_point(pmc: PMC, rng: random.Random) -> list[Fraction] | None:
    """Random graph-preserving point for a trivially parametric chain
    (each row's weights are positive and normalized)."""
    point: list[Fraction | None] = [None] * pmc.nparams
    for i, row in enumerate(pmc.rows):
        if i in (pmc.target, pmc.sink):
            continue
        ws = [Fraction(rng.randint(1, 50)) for _ in row]
        tot = sum(ws)
        for (_, p), w in zip(row, ws):
            (mono, _), = p.terms
            point[mono.index(1)] = w / tot
    return [x if x is not None else Fraction(1, 2) for x in point]


def unit_point(m: int, rng: random.Random, bits: int = 12) -> list[Fraction]:
    return [Fraction(rng.randint(1, 2 ** bits - 1), 2 ** bits) for _ in range(m)]


# generators

def random_trivial_pmc(rng: random.Random, max_states: int = 10) -> PMC:
    """Random trivially parametric chain in normal form; every edge has its own parameter."""
    n = rng.randint(3, max_states)
    transient = n - 2
    edges = []
    k = 0
    for i in range(transient):
        outdeg = rng.randint(2, min(3, n - 1))
        succ = rng.sample([j for j in range(n) if j != i], outdeg)
        for j in succ:
            edges.append((i, j, Polynomial.var(k)))
            k += 1
    params = [f"x{t}" for t in range(k)]
    pmc = PMC.from_edges(n, edges, params, n - 1, n - 2)
    if not absorbing_reachable(pmc):
        return random_trivial_pmc(rng, max_states)
    return pmc


def _split(rng, mass: Polynomial, depth: int, nparams: int, leaves: list):
    if depth == 0 or rng.random() < 0.35:
        leaves.append(mass)
        return
    if nparams and rng.random() < 0.8:
        x = Polynomial.var(rng.randrange(nparams))
        _split(rng, mass * x, depth - 1, nparams, leaves)
        _split(rng, mass * (1 - x), depth - 1, nparams, leaves)
    else:
        c = rng.choice([Fraction(1, 2), Fraction(1, 3), Fraction(1, 4)])
        _split(rng, mass.scale(c), depth - 1, nparams, leaves)
        _split(rng, mass.scale(1 - c), depth - 1, nparams, leaves)


def random_simple_pmc(rng: random.Random, max_states: int = 6, max_params: int = 2,
                      max_degree: int = 2) -> PMC:
    """Random simple chain: each row is a split tree of literals of depth <= max_degree,
    leaves sent to distinct successors.  Retries until the chain is simple."""
    while True:
        n = rng.randint(3, max_states)
        m = rng.randint(1, max_params)
        edges = []
        ok = True
        for i in range(n - 2):
            leaves: list[Polynomial] = []
            first = Polynomial.var(i % m)
            _split(rng, first, max_degree - 1, m, leaves)
            _split(rng, 1 - first, max_degree - 1, m, leaves)
            pool = [j for j in range(n) if j != i]
            if len(leaves) > len(pool):
                ok = False
                break
            for j, p in zip(rng.sample(pool, len(leaves)), leaves):
                edges.append((i, j, p))
        if not ok:
            continue
        pmc = PMC.from_edges(n, edges, [f"x{t}" for t in range(m)], n - 1, n - 2)
        if detect_kind(pmc).simple and absorbing_reachable(pmc):
            return pmc


def random_polynomial(rng: random.Random, nvars: int = 3, max_terms: int = 5,
                      max_degree: int = 3, max_coeff: int = 5) -> Polynomial:
    f = Polynomial.zero()
    for _ in range(rng.randint(0, max_terms)):
        mono = [0] * nvars
        for _ in range(rng.randint(0, max_degree)):
            mono[rng.randrange(nvars)] += 1
        c = Fraction(rng.randint(-max_coeff, max_coeff), rng.randint(1, 3))
        term = Polynomial.constant(c)
        for k, e in enumerate(mono):
            if e:
                term = term * Polynomial.var(k, e)
        f = f + term
    return f


def random_circuit(rng: random.Random, nvars: int = 3, ngates: int = 12, max_degree: int = 6,
                   divisions: bool = False):
    """Random single-output circuit built gate by gate; syntactic degrees are kept
    below ``max_degree`` (for numerators and denominators separately)."""
    from pmcnwr.circuit import CircuitBuilder
    b = CircuitBuilder(nvars, fold=False)
    nodes = [(b.input(k), 1) for k in range(nvars)]
    nodes += [(b.const(Fraction(rng.randint(-4, 4), rng.randint(1, 3))), 0) for _ in range(2)]
    for _ in range(ngates):
        (a, da), (c, dc) = rng.choice(nodes), rng.choice(nodes)
        r = rng.random()
        if divisions and r < 0.15 and dc > 0:
            nodes.append((b.div(a, b.add(c, b.const(rng.randint(1, 3)))), max(da, dc)))
        elif r < 0.55 and da + dc <= max_degree:
            nodes.append((b.mul(a, c), da + dc))
        else:
            nodes.append((b.add(a, c), max(da, dc)))
    # the output combines the last few gates so that most of the circuit is live
    out = nodes[-1][0]
    for g, _ in nodes[-4:-1]:
        out = b.add(out, g)
    return b.build([out])


def polynomial_quotient_circuit(rng: random.Random, nvars: int = 3, ngates: int = 8):
    """Circuit with divisions whose output is a polynomial: (F*G)/G + H."""
    from pmcnwr.circuit import CircuitBuilder, syntactic_degree
    F = random_circuit(rng, nvars, ngates, max_degree=4)
    G = random_circuit(rng, nvars, ngates // 2, max_degree=3)
    H = random_circuit(rng, nvars, ngates // 2, max_degree=3)
    b = CircuitBuilder(nvars, fold=False)
    f = b.copy(F)[F.outputs[0]]
    g = b.copy(G)[G.outputs[0]]
    h = b.copy(H)[H.outputs[0]]
    g = b.add(b.mul(g, g), b.const(1))  # a sum of squares plus one never vanishes over Q
    out = b.add(b.div(b.mul(f, g), g), h)
    d = max(syntactic_degree(F), syntactic_degree(H), 1)
    return b.build([out]), d


def _frac_partial(poly: Polynomial, k: int, point) -> Fraction:
    total = Fraction(0)
    for mono, c in poly.terms:
        e = mono[k] if k < len(mono) else 0
        if e == 0:
            continue
        t = Fraction(int(c.numerator), int(c.denominator)) * e
        for j, ej in enumerate(mono):
            t *= Fraction(point[j]) ** (ej - 1 if j == k else ej)
        total += t
    return total


def oracle_derivative(pmc: PMC, point, k: int) -> list[Fraction]:
    """``d g / d x_k`` at a point by implicit differentiation of ``g = A g + b``:
    ``(I - A) g' = A' g`` over the states that reach the target."""
    point = [Fraction(int(v.numerator), int(v.denominator)) for v in point]
    g = oracle_values(pmc, point)
    good = can_reach(pmc, pmc.target)
    idx = [i for i in range(pmc.n) if i in good and i != pmc.target]
    pos = {s: r for r, s in enumerate(idx)}
    m = len(idx)
    A = [[Fraction(0)] * (m + 1) for _ in range(m)]
    for r, s in enumerate(idx):
        A[r][r] += 1
        for j, p in pmc.rows[s]:
            A[r][m] += _frac_partial(p, k, point) * g[j]
            if j in pos:
                A[r][pos[j]] -= frac_poly(p, point)
    for c in range(m):
        piv = next(r for r in range(c, m) if A[r][c] != 0)
        A[c], A[piv] = A[piv], A[c]
        inv = 1 / A[c][c]
        A[c] = [x * inv for x in A[c]]
        for r in range(m):
            if r != c and A[r][c] != 0:
                f = A[r][c]
                A[r] = [x - f * y for x, y in zip(A[r], A[c])]
    out = [Fraction(0)] * pmc.n
    for s, r in pos.items():
        out[s] = A[r][m]
    return out
