"""Arithmetic circuits over the rationals.

A circuit is a topologically ordered list of fan-in-2 gates::

    ("input", k)      the variable x_k
    ("const", c)      a rational constant
    ("add", a, b)     gate a + gate b
    ("mul", a, b)     gate a * gate b
    ("div", a, b)     gate a / gate b

plus a tuple of output gate ids.  :class:`CircuitBuilder` hash-conses gates
and folds constants.  The transformations here are: moving divisions to the
outputs, removing them altogether by power-series inversion, depth reduction
of division-free circuits, and reverse-mode partial derivatives.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

from gmpy2 import mpq

from .algebra import AlgebraError, Polynomial, Rational, to_rational


class CircuitError(ValueError):
    """Malformed circuit or failed transformation."""


class CircuitDivisionByZero(ZeroDivisionError):
    def __init__(self, gate: int):
        super().__init__(f"division by zero at gate {gate}")
        self.gate = gate


MAX_EXPAND_TERMS = 100_000
MAX_REDUCED_GATES = 1_000_000

_COMMUTATIVE = ("add", "mul")


@dataclass(frozen=True)
class Circuit:
    nvars: int
    gates: tuple[tuple, ...]
    outputs: tuple[int, ...]

    def __post_init__(self):
        for idx, g in enumerate(self.gates):
            op = g[0]
            if op == "input":
                if not 0 <= g[1] < self.nvars:
                    raise CircuitError(f"gate {idx} reads undeclared variable {g[1]}")
            elif op == "const":
                pass
            elif op in ("add", "mul", "div"):
                if len(g) != 3 or not (0 <= g[1] < idx and 0 <= g[2] < idx):
                    raise CircuitError(f"gate {idx} must reference two earlier gates")
            else:
                raise CircuitError(f"unknown gate kind {op!r}")
        for o in self.outputs:
            if not 0 <= o < len(self.gates):
                raise CircuitError(f"output {o} is not a gate")

    @property
    def size(self) -> int:
        return len(self.gates)

    @cached_property
    def gate_depths(self) -> list[int]:
        depth = [0] * len(self.gates)
        for i, g in enumerate(self.gates):
            if len(g) == 3:
                depth[i] = 1 + max(depth[g[1]], depth[g[2]])
        return depth

    @property
    def depth(self) -> int:
        d = self.gate_depths
        return max((d[o] for o in self.outputs), default=0)

    @property
    def has_division(self) -> bool:
        return any(g[0] == "div" for g in self.gates)

    def restrict(self, outputs: Sequence[int]) -> "Circuit":
        """Sub-circuit computing only ``outputs`` (unused gates removed)."""
        needed = bytearray(len(self.gates))
        stack = list(outputs)
        for o in stack:
            needed[o] = 1
        while stack:
            g = self.gates[stack.pop()]
            if len(g) == 3:
                for a in g[1:]:
                    if not needed[a]:
                        needed[a] = 1
                        stack.append(a)
        remap = {}
        gates = []
        for i, g in enumerate(self.gates):
            if not needed[i]:
                continue
            if len(g) == 3:
                g = (g[0], remap[g[1]], remap[g[2]])
            remap[i] = len(gates)
            gates.append(g)
        return Circuit(self.nvars, tuple(gates), tuple(remap[o] for o in outputs))

    def output(self, k: int) -> "Circuit":
        return self.restrict([self.outputs[k]])


class CircuitBuilder:
    """Incremental construction with hash-consing and (optional) constant folding."""

    def __init__(self, nvars: int, fold: bool = True):
        self.nvars = nvars
        self.fold = fold
        self.gates: list[tuple] = []
        self._index: dict[tuple, int] = {}

    def __len__(self):
        return len(self.gates)

    def _emit(self, key: tuple) -> int:
        g = self._index.get(key)
        if g is None:
            g = len(self.gates)
            self.gates.append(key)
            self._index[key] = g
        return g

    def const_value(self, g: int):
        gate = self.gates[g]
        return gate[1] if gate[0] == "const" else None

    def input(self, k: int) -> int:
        if not 0 <= k < self.nvars:
            raise CircuitError(f"variable {k} out of range")
        return self._emit(("input", k))

    def const(self, c) -> int:
        return self._emit(("const", to_rational(c)))

    def add(self, a: int, b: int) -> int:
        if self.fold:
            ca, cb = self.const_value(a), self.const_value(b)
            if ca is not None and cb is not None:
                return self.const(ca + cb)
            if ca == 0:
                return b
            if cb == 0:
                return a
        return self._emit(("add", min(a, b), max(a, b)))

    def mul(self, a: int, b: int) -> int:
        if self.fold:
            ca, cb = self.const_value(a), self.const_value(b)
            if ca is not None and cb is not None:
                return self.const(ca * cb)
            if ca == 0 or cb == 0:
                return self.const(0)
            if ca == 1:
                return b
            if cb == 1:
                return a
        return self._emit(("mul", min(a, b), max(a, b)))

    def div(self, a: int, b: int) -> int:
        if self.fold:
            ca, cb = self.const_value(a), self.const_value(b)
            if cb == 0:
                raise CircuitError("division by the constant 0")
            if ca is not None and cb is not None:
                return self.const(ca / cb)
            if cb == 1:
                return a
            if ca == 0:
                return a
        return self._emit(("div", a, b))

    def neg(self, a: int) -> int:
        return self.mul(self.const(-1), a)

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def sum(self, items: Sequence[int]) -> int:
        """Balanced sum (0 for an empty list)."""
        items = list(items)
        if not items:
            return self.const(0)
        while len(items) > 1:
            nxt = [self.add(items[i], items[i + 1]) for i in range(0, len(items) - 1, 2)]
            if len(items) % 2:
                nxt.append(items[-1])
            items = nxt
        return items[0]

    def product(self, items: Sequence[int]) -> int:
        items = list(items)
        if not items:
            return self.const(1)
        while len(items) > 1:
            nxt = [self.mul(items[i], items[i + 1]) for i in range(0, len(items) - 1, 2)]
            if len(items) % 2:
                nxt.append(items[-1])
            items = nxt
        return items[0]

    def power(self, a: int, e: int) -> int:
        result = self.const(1)
        base = a
        while e:
            if e & 1:
                result = self.mul(result, base)
            e >>= 1
            if e:
                base = self.mul(base, base)
        return result

    def polynomial(self, f: Polynomial) -> int:
        terms = []
        for mono, c in f.terms:
            factors = [self.const(c)]
            for k, e in enumerate(mono):
                if e:
                    factors.append(self.power(self.input(k), e))
            terms.append(self.product(factors))
        return self.sum(terms)

    def copy(self, circuit: Circuit, inputs: Sequence[int] | None = None) -> list[int]:
        """Re-emit ``circuit``; returns the new id of every gate.  ``inputs`` optionally
        substitutes gate ids for the variables."""
        ids: list[int] = []
        for g in circuit.gates:
            op = g[0]
            if op == "input":
                ids.append(inputs[g[1]] if inputs is not None else self.input(g[1]))
            elif op == "const":
                ids.append(self.const(g[1]))
            else:
                a, b = ids[g[1]], ids[g[2]]
                ids.append(self.add(a, b) if op == "add" else self.mul(a, b) if op == "mul" else self.div(a, b))
        return ids

    def build(self, outputs: Sequence[int], prune: bool = True) -> Circuit:
        c = Circuit(self.nvars, tuple(self.gates), tuple(outputs))
        return c.restrict(outputs) if prune else c


def from_polynomial(f: Polynomial, nvars: int | None = None) -> Circuit:
    b = CircuitBuilder(max(nvars or 0, f.nvars))
    return b.build([b.polynomial(f)])


# evaluation and expansion

def evaluate_gates(circuit: Circuit, point: Sequence) -> list[Rational]:
    vals: list = [None] * len(circuit.gates)
    for i, g in enumerate(circuit.gates):
        op = g[0]
        if op == "input":
            vals[i] = mpq(point[g[1]])
        elif op == "const":
            vals[i] = g[1]
        elif op == "add":
            vals[i] = vals[g[1]] + vals[g[2]]
        elif op == "mul":
            vals[i] = vals[g[1]] * vals[g[2]]
        else:
            d = vals[g[2]]
            if d == 0:
                raise CircuitDivisionByZero(i)
            vals[i] = vals[g[1]] / d
    return vals


def circuit_eval(circuit: Circuit, point: Sequence) -> list[Rational]:
    """Exact values of all outputs at ``point``."""
    if len(point) < circuit.nvars:
        raise CircuitError(f"point has {len(point)} coordinates, circuit needs {circuit.nvars}")
    vals = evaluate_gates(circuit, point)
    return [vals[o] for o in circuit.outputs]


def expand_to_polynomial(circuit: Circuit, max_terms: int = MAX_EXPAND_TERMS) -> list[Polynomial]:
    """Expand every output.  Division gates must divide exactly."""
    polys: list = [None] * len(circuit.gates)
    for i, g in enumerate(circuit.gates):
        op = g[0]
        if op == "input":
            p = Polynomial.var(g[1])
        elif op == "const":
            p = Polynomial.constant(g[1])
        elif op == "add":
            p = polys[g[1]] + polys[g[2]]
        elif op == "mul":
            p = polys[g[1]] * polys[g[2]]
        else:
            try:
                p = polys[g[1]].exact_divide(polys[g[2]])
            except AlgebraError as exc:
                raise CircuitError(f"gate {i}: {exc}") from None
        if p.support_size() > max_terms:
            raise CircuitError(f"expansion exceeds {max_terms} terms at gate {i}")
        polys[i] = p
    return [polys[o] for o in circuit.outputs]


def syntactic_degrees(circuit: Circuit) -> list[int]:
    if circuit.has_division:
        raise CircuitError("syntactic degree is defined for division-free circuits")
    deg = [0] * len(circuit.gates)
    for i, g in enumerate(circuit.gates):
        op = g[0]
        if op == "input":
            deg[i] = 1
        elif op == "add":
            deg[i] = max(deg[g[1]], deg[g[2]])
        elif op == "mul":
            deg[i] = deg[g[1]] + deg[g[2]]
    return deg


def syntactic_degree(circuit: Circuit) -> int:
    deg = syntactic_degrees(circuit)
    return max((deg[o] for o in circuit.outputs), default=0)


def random_point(nvars: int, rng: random.Random, bits: int = 16, signed: bool = True) -> list[Rational]:
    """Random rational point with ``bits``-bit numerators over ``2^bits``."""
    scale = 1 << bits
    lo = -scale if signed else 1
    return [mpq(rng.randint(lo, scale), scale) for _ in range(nvars)]


def evaluation_equal(c1: Circuit, c2: Circuit, points: int = 20, seed: int = 0) -> bool:
    """Compare two circuits at seeded random points (points where either side
    divides by zero are skipped)."""
    rng = random.Random(seed)
    n = max(c1.nvars, c2.nvars)
    checked = 0
    tries = 0
    while checked < points and tries < 50 * points:
        tries += 1
        x = random_point(n, rng)
        try:
            if circuit_eval(c1, x) != circuit_eval(c2, x):
                return False
        except CircuitDivisionByZero:
            continue
        checked += 1
    if checked < points:
        raise CircuitError("could not find enough points avoiding zero denominators")
    return True


# division handling

def _division_pairs(circuit: Circuit, b: CircuitBuilder) -> list[tuple[int, int | None]]:
    """For every gate a division-free (numerator, denominator) pair in ``b``;
    a denominator of None stands for 1."""
    pairs: list = [None] * len(circuit.gates)

    def mul_opt(x, y):
        if x is None:
            return y
        if y is None:
            return x
        return b.mul(x, y)

    for i, g in enumerate(circuit.gates):
        op = g[0]
        if op == "input":
            pairs[i] = (b.input(g[1]), None)
        elif op == "const":
            pairs[i] = (b.const(g[1]), None)
        else:
            (n1, d1), (n2, d2) = pairs[g[1]], pairs[g[2]]
            if op == "add":
                if d1 is None and d2 is None:
                    pairs[i] = (b.add(n1, n2), None)
                elif d1 == d2:
                    pairs[i] = (b.add(n1, n2), d1)
                else:
                    pairs[i] = (b.add(mul_opt(n1, d2), mul_opt(n2, d1)), mul_opt(d1, d2))
            elif op == "mul":
                pairs[i] = (b.mul(n1, n2), mul_opt(d1, d2))
            else:
                pairs[i] = (mul_opt(n1, d2), mul_opt(d1, n2))
    return pairs


def push_divisions(circuit: Circuit) -> Circuit:
    """Equivalent circuit whose only divisions are one per output, at the top."""
    b = CircuitBuilder(circuit.nvars)
    pairs = _division_pairs(circuit, b)
    outs = []
    for o in circuit.outputs:
        num, den = pairs[o]
        outs.append(num if den is None else b.div(num, den))
    return b.build(outs)


def numerator_denominator(circuit: Circuit) -> tuple[Circuit, Circuit]:
    """Division-free circuits ``(N, D)`` with output ``k`` equal to ``N_k / D_k``."""
    b = CircuitBuilder(circuit.nvars)
    pairs = _division_pairs(circuit, b)
    one = b.const(1)
    nums = [pairs[o][0] for o in circuit.outputs]
    dens = [pairs[o][1] if pairs[o][1] is not None else one for o in circuit.outputs]
    return b.build(nums), b.build(dens)


def homogenize(
    circuit: Circuit,
    d: int,
    b: CircuitBuilder,
    leaf: Callable[[int], list],
) -> list[list]:
    """Homogeneous components ``0..d`` of every gate of a division-free circuit,
    emitted into ``b``.  ``leaf(k)`` gives the components of variable ``k``;
    missing components are None.  Degree-0 components are constant gates."""
    if circuit.has_division:
        raise CircuitError("homogenization needs a division-free circuit")
    comps: list = [None] * len(circuit.gates)
    for i, g in enumerate(circuit.gates):
        op = g[0]
        if op == "input":
            comps[i] = leaf(g[1])
        elif op == "const":
            comps[i] = [b.const(g[1]) if g[1] != 0 else None] + [None] * d
        elif op == "add":
            c1, c2 = comps[g[1]], comps[g[2]]
            out = []
            for x, y in zip(c1, c2):
                out.append(y if x is None else x if y is None else b.add(x, y))
            comps[i] = out
        else:
            c1, c2 = comps[g[1]], comps[g[2]]
            out = []
            for k in range(d + 1):
                terms = [b.mul(c1[j], c2[k - j]) for j in range(k + 1)
                         if c1[j] is not None and c2[k - j] is not None]
                out.append(b.sum(terms) if terms else None)
            comps[i] = out
    return comps


def eliminate_divisions(circuit: Circuit, d: int, seed: int = 0, checks: int = 20) -> Circuit:
    """Division-free circuit computing the same polynomials, assuming each output
    is a polynomial of degree at most ``d``.

    Shift the variables to a point where every denominator is non-zero, expand
    numerator and denominator into homogeneous parts, invert the denominator as
    a truncated power series and multiply.  The result is verified by exact
    evaluation at seeded random points; a mismatch (for instance a wrong ``d``)
    raises :class:`CircuitError`.
    """
    pre = CircuitBuilder(circuit.nvars)
    pairs = _division_pairs(circuit, pre)
    one = pre.const(1)
    outs = list(circuit.outputs)
    num_ids = [pairs[o][0] for o in outs]
    den_ids = [pairs[o][1] if pairs[o][1] is not None else one for o in outs]
    free = Circuit(pre.nvars, tuple(pre.gates), tuple(num_ids + den_ids))
    rng = random.Random(seed)
    m = circuit.nvars
    for _ in range(1000):
        a = random_point(m, rng)
        vals = evaluate_gates(free, a)
        if all(vals[g] != 0 for g in den_ids):
            break
    else:
        raise CircuitError("no point with non-zero denominators found in 1000 trials")

    b = CircuitBuilder(m)
    leaves = []
    for k in range(m):
        shifted = b.add(b.input(k), b.const(-a[k]))
        leaves.append([b.const(a[k]) if a[k] != 0 else None, shifted] + [None] * (d - 1) if d >= 1
                      else [b.const(a[k]) if a[k] != 0 else None])
    comps = homogenize(free, d, b, lambda k: leaves[k])
    results = []
    for num, den in zip(num_ids, den_ids):
        F, G = comps[num], comps[den]
        c = b.const_value(G[0]) if G[0] is not None else 0
        if c is None or c == 0:
            raise CircuitError("denominator vanishes at the expansion point")
        inv_c = 1 / c
        inv = [b.const(inv_c)]
        for k in range(1, d + 1):
            terms = [b.mul(G[i], inv[k - i]) for i in range(1, k + 1) if G[i] is not None]
            inv.append(b.mul(b.const(-inv_c), b.sum(terms)))
        parts = []
        for k in range(d + 1):
            terms = [b.mul(F[i], inv[k - i]) for i in range(k + 1) if F[i] is not None]
            if terms:
                parts.append(b.sum(terms))
        results.append(b.sum(parts))
    out = b.build(results)
    _verify(circuit, out, checks, seed + 1, "division elimination")
    return out


def _verify(original: Circuit, new: Circuit, checks: int, seed: int, what: str):
    try:
        ok = evaluation_equal(original, new, checks, seed)
    except CircuitError as exc:
        raise CircuitError(f"{what}: cannot verify ({exc})") from None
    if not ok:
        raise CircuitError(f"{what}: transformed circuit disagrees with the input")


# depth reduction

def depth_bound(size: int, d: int, kappa: int = 8) -> int:
    """Depth guaranteed by :func:`depth_reduce`: kappa * log(size*d) * (log d + 1)."""
    return int(kappa * math.log2(max(2, size * max(d, 1))) * (math.log2(max(d, 1)) + 1))


def depth_reduce(circuit: Circuit, seed: int = 0, checks: int = 20) -> Circuit:
    """Rebalance a division-free circuit to depth O(log(size*d) * log d).

    The circuit is homogenized up to its syntactic degree d.  For gates g, w
    write [g] for the polynomial at g and [g:w] for the partial derivative of
    [g] in the gate w viewed as a fresh variable (w a product gate).  With
    G_m the product gates t = t1*t2 with deg t > m >= deg t1 (t1 the larger
    factor), both quantities satisfy

        [g]   = sum_{t in G_m} [g:t] [t1] [t2],     m = floor(deg g / 2)
        [g:w] = sum_{t in G_m} [g:t] [t1:w] [t2],   m = floor((deg g + deg w) / 2)

    and every factor on the right has at most half the degree (gap) of the
    left-hand side, which gives the logarithmic recursion depth.
    """
    if circuit.has_division:
        raise CircuitError("depth reduction needs a division-free circuit")
    d = syntactic_degree(circuit)
    hb = CircuitBuilder(circuit.nvars)
    leaves = [[None, hb.input(k)] + [None] * (d - 1) if d >= 1 else [None] for k in range(circuit.nvars)]
    comps = homogenize(circuit, d, hb, lambda k: leaves[k])
    H = hb.gates
    deg = [0] * len(H)
    kind = [""] * len(H)
    # kind: "in", "const", "add", "scale" (const * gate), "mul" (genuine product)
    for i, g in enumerate(H):
        op = g[0]
        if op == "input":
            deg[i], kind[i] = 1, "in"
        elif op == "const":
            kind[i] = "const"
        elif op == "add":
            deg[i], kind[i] = max(deg[g[1]], deg[g[2]]), "add"
        else:
            deg[i] = deg[g[1]] + deg[g[2]]
            if deg[g[1]] == 0 or deg[g[2]] == 0:
                kind[i] = "scale"
            else:
                kind[i] = "mul"
    first = {}
    for i, g in enumerate(H):
        if kind[i] == "mul":
            a, c = g[1], g[2]
            first[i] = (a, c) if deg[a] >= deg[c] else (c, a)

    # product gates each gate depends on syntactically through first factors
    carr: list = [None] * len(H)
    empty = frozenset()
    for i, g in enumerate(H):
        k = kind[i]
        if k in ("in", "const"):
            carr[i] = empty
        elif k == "add":
            carr[i] = carr[g[1]] | carr[g[2]]
        elif k == "scale":
            carr[i] = carr[g[2]] if deg[g[1]] == 0 else carr[g[1]]
        else:
            carr[i] = carr[first[i][0]] | {i}

    out = CircuitBuilder(circuit.nvars)
    lin_memo: dict = {}
    sq_memo: dict = {}
    val_memo: dict = {}
    quo_memo: dict = {}

    def const_of(g):
        return H[g][1]

    def scale_parts(g):
        a, c = H[g][1], H[g][2]
        return (const_of(a), c) if deg[a] == 0 else (const_of(c), a)

    def lin(g):
        """Linear form of a degree-1 gate as {var: coeff}."""
        r = lin_memo.get(g)
        if r is not None:
            return r
        k = kind[g]
        if k == "in":
            r = {H[g][1]: mpq(1)}
        elif k == "add":
            r = dict(lin(H[g][1]))
            for v, c in lin(H[g][2]).items():
                r[v] = r.get(v, 0) + c
        elif k == "scale":
            s, a = scale_parts(g)
            r = {v: s * c for v, c in lin(a).items()}
        else:
            raise CircuitError("internal: product gate of degree 1")
        lin_memo[g] = r
        return r

    def small(g, w):
        """[g:w] when deg g - deg w <= 1: a scalar (gap 0) or a linear form (gap 1)."""
        key = (g, w)
        if key in sq_memo:
            return sq_memo[key]
        gap = deg[g] - deg[w]
        if g == w:
            r = mpq(1)
        elif w not in carr[g]:
            r = mpq(0) if gap == 0 else {}
        else:
            k = kind[g]
            if k == "add":
                x, y = small(H[g][1], w), small(H[g][2], w)
                if gap == 0:
                    r = x + y
                else:
                    r = dict(x)
                    for v, c in y.items():
                        r[v] = r.get(v, 0) + c
            elif k == "scale":
                s, a = scale_parts(g)
                x = small(a, w)
                r = s * x if gap == 0 else {v: s * c for v, c in x.items()}
            else:
                t1, t2 = first[g]
                coeff = small(t1, w)
                r = {v: coeff * c for v, c in lin(t2).items()}
        sq_memo[key] = r
        return r

    def emit_linear(form):
        terms = [out.mul(out.const(c), out.input(v)) for v, c in sorted(form.items()) if c != 0]
        return out.sum(terms)

    def val(g):
        r = val_memo.get(g)
        if r is not None:
            return r
        if deg[g] == 0:
            r = out.const(const_of(g)) if kind[g] == "const" else out.const(0)
        elif deg[g] == 1:
            r = emit_linear(lin(g))
        else:
            m = deg[g] // 2
            terms = []
            for t in sorted(carr[g]):
                t1, t2 = first[t]
                if deg[t] > m >= deg[t1]:
                    terms.append(out.mul(quo(g, t), out.mul(val(t1), val(t2))))
            r = out.sum(terms)
        if len(out) > MAX_REDUCED_GATES:
            raise CircuitError("depth reduction exceeds the gate budget")
        val_memo[g] = r
        return r

    def quo(g, w):
        key = (g, w)
        r = quo_memo.get(key)
        if r is not None:
            return r
        gap = deg[g] - deg[w]
        if gap == 0:
            r = out.const(small(g, w))
        elif gap == 1:
            r = emit_linear(small(g, w))
        else:
            m = (deg[g] + deg[w]) // 2
            terms = []
            for t in sorted(carr[g]):
                t1, t2 = first[t]
                if deg[t] > m >= deg[t1] and w in carr[t1]:
                    terms.append(out.mul(quo(g, t), out.mul(quo(t1, w), val(t2))))
            r = out.sum(terms)
        quo_memo[key] = r
        return r

    results = []
    for o in circuit.outputs:
        parts = []
        for k, h in enumerate(comps[o]):
            if h is None:
                continue
            parts.append(out.const(const_of(h)) if k == 0 else val(h))
        results.append(out.sum(parts))
    reduced = out.build(results)
    _verify(circuit, reduced, checks, seed, "depth reduction")
    return reduced


# derivatives

def derivatives(circuit: Circuit) -> Circuit:
    """Reverse-mode differentiation of a single-output circuit.

    Outputs are ``f, df/dx_0, ..., df/dx_{m-1}``.  Each original gate adds at
    most five gates (a division gate: one division, two products, two sums).
    """
    if len(circuit.outputs) != 1:
        raise CircuitError("derivatives expects a single-output circuit")
    b = CircuitBuilder(circuit.nvars)
    ids = b.copy(circuit)
    minus_one = b.const(-1)
    adj: dict[int, int] = {circuit.outputs[0]: b.const(1)}
    grads: list = [None] * circuit.nvars

    def push(g, v):
        adj[g] = v if g not in adj else b.add(adj[g], v)

    for i in range(len(circuit.gates) - 1, -1, -1):
        if i not in adj:
            continue
        a = adj.pop(i)
        g = circuit.gates[i]
        op = g[0]
        if op == "input":
            k = g[1]
            grads[k] = a if grads[k] is None else b.add(grads[k], a)
        elif op == "const":
            continue
        elif op == "add":
            push(g[1], a)
            push(g[2], a)
        elif op == "mul":
            push(g[1], b.mul(a, ids[g[2]]))
            push(g[2], b.mul(a, ids[g[1]]))
        else:
            t = b.div(a, ids[g[2]])
            push(g[1], t)
            push(g[2], b.mul(minus_one, b.mul(t, ids[i])))
    zero = b.const(0)
    outs = [ids[circuit.outputs[0]]] + [g if g is not None else zero for g in grads]
    return b.build(outs)


# text format

def write_circuit(circuit: Circuit, names: Sequence[str] | None = None) -> str:
    lines = [f"circuit {circuit.nvars} {circuit.size}"]
    if names is not None:
        lines.append("params " + " ".join(names))
    lines.append("outputs " + " ".join(str(o) for o in circuit.outputs))
    for i, g in enumerate(circuit.gates):
        if g[0] == "const":
            lines.append(f"{i} const {g[1]}")
        else:
            lines.append(f"{i} " + " ".join(str(x) for x in g))
    return "\n".join(lines) + "\n"


def read_circuit(text: str) -> tuple[Circuit, tuple[str, ...] | None]:
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or lines[0][0] != "circuit" or len(lines[0]) != 3:
        raise CircuitError("missing 'circuit <nvars> <ngates>' header")
    nvars, ngates = int(lines[0][1]), int(lines[0][2])
    names = None
    outputs = None
    gates = []
    for parts in lines[1:]:
        if parts[0] == "params":
            names = tuple(parts[1:])
        elif parts[0] == "outputs":
            outputs = tuple(int(x) for x in parts[1:])
        else:
            idx, op = int(parts[0]), parts[1]
            if idx != len(gates):
                raise CircuitError(f"gate {idx} out of order")
            if op == "input":
                gates.append(("input", int(parts[2])))
            elif op == "const":
                gates.append(("const", to_rational(parts[2])))
            else:
                gates.append((op, int(parts[2]), int(parts[3])))
    if outputs is None:
        raise CircuitError("missing outputs line")
    if len(gates) != ngates:
        raise CircuitError(f"expected {ngates} gates, found {len(gates)}")
    return Circuit(nvars, tuple(gates), outputs), names
