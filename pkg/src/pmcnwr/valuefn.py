"""Value functions (probability of reaching the target) of parametric chains.

Three routes, all exact:

* :func:`bareiss_eliminate` runs fraction-free Gaussian elimination on
  ``(I - A) g = e_target`` and yields ``g_i = b_i / a_i`` with polynomials;
* :func:`value_function_circuits` runs the same elimination with gates
  instead of polynomials, giving division-bearing circuits of polynomial size;
* :func:`solve_values` solves strongly connected component by component
  (cheap on acyclic chains) and :class:`PointEvaluator` does the same with
  numbers at a fixed valuation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from gmpy2 import mpq

from .algebra import AlgebraError, Polynomial, Rational, RationalFunction
from .circuit import Circuit, CircuitBuilder, evaluate_gates, random_point
from .graph import reach, strongly_connected_components
from .pmc import PMC

MAX_DENSE_STATES = 2000


class SingularSystem(ArithmeticError):
    """The linear system has no unique solution (chain not preprocessed?)."""


@dataclass(frozen=True)
class LinearSystem:
    """``transitions`` is A with the target and sink rows zeroed; the system is
    ``(I - A) g = rhs`` with ``rhs`` the target indicator."""

    transitions: tuple[tuple[Polynomial, ...], ...]
    rhs: tuple[Polynomial, ...]

    def coefficient_matrix(self) -> list[list[Polynomial]]:
        n = len(self.rhs)
        one = Polynomial.one()
        out = []
        for i in range(n):
            row = []
            for j in range(n):
                a = self.transitions[i][j]
                row.append((one - a) if i == j else -a)
            out.append(row)
        return out


def build_system(pmc: PMC) -> LinearSystem:
    n = pmc.n
    if n > MAX_DENSE_STATES:
        raise ValueError(f"dense system limited to {MAX_DENSE_STATES} states")
    zero = Polynomial.zero()
    A = [[zero] * n for _ in range(n)]
    for i, row in enumerate(pmc.rows):
        if i in (pmc.target, pmc.sink):
            continue
        for j, p in row:
            A[i][j] = p
    rhs = [zero] * n
    rhs[pmc.target] = Polynomial.one()
    return LinearSystem(tuple(tuple(r) for r in A), tuple(rhs))


class _PolyRing:
    zero = Polynomial.zero()
    one = Polynomial.one()

    @staticmethod
    def is_zero(x):
        return x.is_zero()

    @staticmethod
    def add(x, y):
        return x + y

    @staticmethod
    def sub(x, y):
        return x - y

    @staticmethod
    def mul(x, y):
        return x * y

    @staticmethod
    def div(x, y):
        return x.exact_divide(y)


class _GateRing:
    """Ring elements are gate ids; zero tests use exact values at random points."""

    def __init__(self, b: CircuitBuilder, points: Sequence[Sequence[Rational]]):
        self.b = b
        self.points = points
        self.vals: list[list[Rational]] = [[] for _ in points]
        self.zero = b.const(0)
        self.one = b.const(1)

    def _sync(self):
        gates = self.b.gates
        for k, point in enumerate(self.points):
            vals = self.vals[k]
            for i in range(len(vals), len(gates)):
                g = gates[i]
                op = g[0]
                if op == "input":
                    v = point[g[1]]
                elif op == "const":
                    v = g[1]
                elif op == "add":
                    v = vals[g[1]] + vals[g[2]]
                elif op == "mul":
                    v = vals[g[1]] * vals[g[2]]
                else:
                    d = vals[g[2]]
                    v = vals[g[1]] / d if d != 0 else mpq(0)
                vals.append(v)

    def is_zero(self, x):
        if self.b.const_value(x) == 0:
            return True
        self._sync()
        return all(v[x] == 0 for v in self.vals)

    def add(self, x, y):
        return self.b.add(x, y)

    def sub(self, x, y):
        return self.b.sub(x, y)

    def mul(self, x, y):
        return self.b.mul(x, y)

    def div(self, x, y):
        return self.b.div(x, y)


def _bareiss(M: list[list], rhs: list, ring):
    """Fraction-free elimination with back substitution.

    Returns ``(D, X)`` with ``D`` the last pivot (the determinant up to sign)
    and ``X_i = D * y_i`` for the solution ``y`` of ``M y = rhs``.
    """
    n = len(M)
    A = [list(M[i]) + [rhs[i]] for i in range(n)]
    prev = ring.one
    for k in range(n - 1):
        if ring.is_zero(A[k][k]):
            for r in range(k + 1, n):
                if not ring.is_zero(A[r][k]):
                    A[k], A[r] = A[r], A[k]
                    break
            else:
                raise SingularSystem("singular system")
        p = A[k][k]
        rowk = A[k]
        for i in range(k + 1, n):
            rowi = A[i]
            aik = rowi[k]
            aik_zero = ring.is_zero(aik)
            for j in range(k + 1, n + 1):
                if aik_zero or ring.is_zero(rowk[j]):
                    t = ring.mul(p, rowi[j])
                else:
                    t = ring.sub(ring.mul(p, rowi[j]), ring.mul(aik, rowk[j]))
                rowi[j] = t if ring.is_zero(t) else ring.div(t, prev)
            rowi[k] = ring.zero
        prev = p
    D = A[n - 1][n - 1]
    if ring.is_zero(D):
        raise SingularSystem("singular system")
    X: list = [None] * n
    X[n - 1] = A[n - 1][n]
    for i in range(n - 2, -1, -1):
        acc = ring.mul(D, A[i][n])
        for j in range(i + 1, n):
            if not ring.is_zero(A[i][j]):
                acc = ring.sub(acc, ring.mul(A[i][j], X[j]))
        X[i] = ring.div(acc, A[i][i])
    return D, X


@dataclass(frozen=True)
class DiagonalSystem:
    """Value functions ``g_i = b[i] / a[i]``."""

    a: tuple[Polynomial, ...]
    b: tuple[Polynomial, ...]

    def value(self, i: int) -> RationalFunction:
        return RationalFunction(self.b[i], self.a[i])


def bareiss_eliminate(system: LinearSystem) -> DiagonalSystem:
    M = system.coefficient_matrix()
    D, X = _bareiss(M, list(system.rhs), _PolyRing)
    n = len(X)
    return DiagonalSystem(tuple([D] * n), tuple(X))


def value_functions(pmc: PMC) -> list[RationalFunction]:
    """Exact value function of every state via the dense elimination."""
    diag = bareiss_eliminate(build_system(pmc))
    return [diag.value(i) for i in range(pmc.n)]


@dataclass(frozen=True)
class ValueCircuits:
    """One circuit whose outputs are ``X_0, ..., X_{n-1}, D`` with ``g_i = X_i / D``."""

    circuit: Circuit
    n: int

    def numerator(self, i: int) -> Circuit:
        return self.circuit.output(i)

    def denominator(self, i: int | None = None) -> Circuit:
        return self.circuit.output(self.n)

    def pair(self, i: int) -> tuple[Circuit, Circuit]:
        return self.numerator(i), self.denominator(i)

    def quotient(self, i: int) -> Circuit:
        """Single-output circuit for ``g_i`` (with one division at the top)."""
        b = CircuitBuilder(self.circuit.nvars)
        ids = b.copy(self.circuit)
        return b.build([b.div(ids[self.circuit.outputs[i]], ids[self.circuit.outputs[self.n]])])


def value_function_circuits(pmc: PMC, seed: int = 0, max_states: int = 200) -> ValueCircuits:
    """Trace the fraction-free elimination into an arithmetic circuit.

    Pivot choices use exact zero tests at two seeded random points, so no
    polynomial is ever expanded.
    """
    if pmc.n > max_states:
        raise ValueError(f"circuit tracing limited to {max_states} states")
    m = pmc.nparams
    b = CircuitBuilder(m)
    rng = random.Random(seed)
    ring = _GateRing(b, [random_point(m, rng, signed=False) for _ in range(2)])
    system = build_system(pmc)
    M = [[b.polynomial(p) for p in row] for row in system.coefficient_matrix()]
    rhs = [b.polynomial(p) for p in system.rhs]
    D, X = _bareiss(M, rhs, ring)
    return ValueCircuits(b.build(list(X) + [D]), pmc.n)


# component-wise solving

def _prob0(pmc: PMC) -> bytearray:
    to_target = reach(pmc.predecessors, [pmc.target])
    return bytearray(1 - x for x in to_target)


def solve_values(pmc: PMC) -> list[RationalFunction]:
    """Exact value functions, solving one strongly connected component at a time
    in reverse topological order (no dense system for acyclic chains)."""
    n = pmc.n
    zero_states = _prob0(pmc)
    one = Polynomial.one()
    zero = Polynomial.zero()
    vals: list = [None] * n
    for i in range(n):
        if zero_states[i]:
            vals[i] = RationalFunction(zero)
    vals[pmc.target] = RationalFunction(one)
    for comp in strongly_connected_components(pmc.successors):
        comp = [i for i in comp if vals[i] is None]
        if not comp:
            continue
        if len(comp) == 1:
            i = comp[0]
            acc = RationalFunction(zero)
            loop = zero
            for j, p in pmc.rows[i]:
                if j == i:
                    loop = loop + p
                else:
                    acc = acc + vals[j] * p
            if not loop.is_zero():
                acc = RationalFunction(acc.num, acc.den * (one - loop))
            vals[i] = acc
            continue
        index = {s: k for k, s in enumerate(comp)}
        k = len(comp)
        out_terms: list[list] = [[] for _ in range(k)]
        M = [[zero] * k for _ in range(k)]
        for a, s in enumerate(comp):
            M[a][a] = one
            for j, p in pmc.rows[s]:
                if j in index:
                    M[a][index[j]] = M[a][index[j]] - p
                else:
                    out_terms[a].append(vals[j] * p)
        dens: list[Polynomial] = []
        for terms in out_terms:
            for t in terms:
                if t.num.is_zero():
                    continue
                if not any(t.den == d for d in dens):
                    dens.append(t.den)
        common = one
        for d in dens:
            common = common * d
        rhs = []
        for terms in out_terms:
            acc = zero
            for t in terms:
                if t.num.is_zero():
                    continue
                acc = acc + t.num * common.exact_divide(t.den)
            rhs.append(acc)
        D, X = _bareiss(M, rhs, _PolyRing)
        den = D * common
        for a, s in enumerate(comp):
            vals[s] = RationalFunction(X[a], den)
    return vals


class PointEvaluator:
    """Exact values of all states at given valuations, reusing the component
    structure of the chain between calls."""

    def __init__(self, pmc: PMC):
        self.pmc = pmc
        self.zero_states = _prob0(pmc)
        labels: dict[Polynomial, int] = {}
        rows = []
        for i, row in enumerate(pmc.rows):
            r = []
            for j, p in row:
                idx = labels.get(p)
                if idx is None:
                    idx = labels[p] = len(labels)
                r.append((j, idx))
            rows.append(r)
        self.labels = list(labels)
        self.rows = rows
        self.order = [
            [i for i in comp if not self.zero_states[i] and i != pmc.target]
            for comp in strongly_connected_components(pmc.successors)
        ]
        self.order = [c for c in self.order if c]

    def values(self, point: Sequence) -> list[Rational]:
        pmc = self.pmc
        point = [mpq(x) for x in point]
        lab = [p.evaluate(point) for p in self.labels]
        g: list = [None] * pmc.n
        zero, one = mpq(0), mpq(1)
        for i in range(pmc.n):
            if self.zero_states[i]:
                g[i] = zero
        g[pmc.target] = one
        rows = self.rows
        for comp in self.order:
            if len(comp) == 1:
                i = comp[0]
                acc = zero
                loop = zero
                for j, idx in rows[i]:
                    if j == i:
                        loop += lab[idx]
                    else:
                        acc += lab[idx] * g[j]
                if loop:
                    if loop == one:
                        raise SingularSystem(f"state {i} is absorbing at this valuation")
                    acc = acc / (one - loop)
                g[i] = acc
            else:
                self._solve_component(comp, lab, g)
        return g

    def value(self, state: int, point: Sequence) -> Rational:
        return self.values(point)[state]

    def _solve_component(self, comp, lab, g):
        index = {s: k for k, s in enumerate(comp)}
        k = len(comp)
        M = [[mpq(0)] * (k + 1) for _ in range(k)]
        for a, s in enumerate(comp):
            M[a][a] += 1
            for j, idx in self.rows[s]:
                if j in index:
                    M[a][index[j]] -= lab[idx]
                else:
                    M[a][k] += lab[idx] * g[j]
        for c in range(k):
            piv = next((r for r in range(c, k) if M[r][c] != 0), None)
            if piv is None:
                raise SingularSystem("singular component at this valuation")
            M[c], M[piv] = M[piv], M[c]
            rowc = M[c]
            inv = 1 / rowc[c]
            for r in range(k):
                if r != c and M[r][c] != 0:
                    f = M[r][c] * inv
                    rowr = M[r]
                    for j in range(c, k + 1):
                        if rowc[j]:
                            rowr[j] -= f * rowc[j]
        for a, s in enumerate(comp):
            g[s] = M[a][k] / M[a][a]


def degree_bound_constant(pmc: PMC, diag: DiagonalSystem) -> float:
    """Smallest C with deg(a_i), deg(b_i) <= C * n * d (d = max label degree)."""
    d = max((p.degree() for _, _, p in pmc.edges()), default=1) or 1
    worst = max(max(x.degree() for x in diag.a), max(x.degree() for x in diag.b))
    return worst / (pmc.n * d)


def check_value(pmc: PMC, values: Sequence[RationalFunction], point: Sequence) -> bool:
    """Exact agreement of symbolic values with the pointwise solver at ``point``."""
    direct = PointEvaluator(pmc).values(point)
    try:
        return all(v.evaluate(point) == x for v, x in zip(values, direct))
    except AlgebraError:
        return False


__all__ = [
    "LinearSystem", "DiagonalSystem", "ValueCircuits", "PointEvaluator", "SingularSystem",
    "build_system", "bareiss_eliminate", "value_functions", "value_function_circuits",
    "solve_values", "evaluate_gates",
]
