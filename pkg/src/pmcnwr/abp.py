"""Algebraic branching programs.

An ABP is a layered DAG with a single source (layer 0) and a single sink
(last layer); every edge goes from one layer to the next and carries a
polynomial of degree at most 1.  It computes the sum over source-sink paths of
the product of the edge labels.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

from gmpy2 import mpq

from .algebra import Polynomial, Rational
from .circuit import Circuit, CircuitError

MAX_ABP_VERTICES = 10_000_000
MAX_FORMULA_DEPTH = 24


class ABPError(ValueError):
    pass


@dataclass(frozen=True)
class ABP:
    nvars: int
    layers: tuple[tuple[int, ...], ...]
    edges: tuple[tuple[int, int, Polynomial], ...]

    @property
    def source(self) -> int:
        return self.layers[0][0]

    @property
    def sink(self) -> int:
        return self.layers[-1][0]

    @property
    def width(self) -> int:
        return max(len(layer) for layer in self.layers)

    @property
    def num_vertices(self) -> int:
        return sum(len(layer) for layer in self.layers)

    @cached_property
    def layer_of(self) -> dict[int, int]:
        return {v: k for k, layer in enumerate(self.layers) for v in layer}

    @cached_property
    def out_edges(self) -> dict[int, list[tuple[int, Polynomial]]]:
        out: dict[int, list] = defaultdict(list)
        for u, v, p in self.edges:
            out[u].append((v, p))
        return out


def validate_abp(abp: ABP) -> list[str]:
    problems = []
    if len(abp.layers) < 2:
        problems.append("need at least two layers")
    if len(abp.layers[0]) != 1:
        problems.append("layer 0 must contain exactly the source")
    if len(abp.layers[-1]) != 1:
        problems.append("last layer must contain exactly the sink")
    seen = set()
    for layer in abp.layers:
        for v in layer:
            if v in seen:
                problems.append(f"vertex {v} appears twice")
            seen.add(v)
    lay = abp.layer_of
    for u, v, p in abp.edges:
        if u not in lay or v not in lay:
            problems.append(f"edge {u}->{v} uses an unknown vertex")
            continue
        if lay[v] != lay[u] + 1:
            problems.append(f"edge {u}->{v} skips layers")
        if p.degree() > 1:
            problems.append(f"edge {u}->{v} has a label of degree {p.degree()}")
        if p.nvars > abp.nvars:
            problems.append(f"edge {u}->{v} uses an undeclared variable")
    return problems


def abp_eval(abp: ABP, point: Sequence) -> Rational:
    point = [mpq(x) for x in point]
    val = {abp.source: mpq(1)}
    out = abp.out_edges
    cache: dict[Polynomial, Rational] = {}
    for layer in abp.layers[:-1]:
        for u in layer:
            x = val.get(u)
            if not x:
                continue
            for v, p in out.get(u, ()):
                c = cache.get(p)
                if c is None:
                    c = cache[p] = p.evaluate(point)
                val[v] = val.get(v, 0) + x * c
    return val.get(abp.sink, mpq(0))


def abp_expand(abp: ABP, max_terms: int = 100_000) -> Polynomial:
    val = {abp.source: Polynomial.one()}
    out = abp.out_edges
    for layer in abp.layers[:-1]:
        for u in layer:
            x = val.pop(u, None)
            if x is None or x.is_zero():
                continue
            for v, p in out.get(u, ()):
                y = x * p
                val[v] = val[v] + y if v in val else y
                if val[v].support_size() > max_terms:
                    raise ABPError(f"expansion exceeds {max_terms} terms")
    return val.get(abp.sink, Polynomial.zero())


def _prune(nvars: int, layers: list[list[int]], edges: list[tuple[int, int, Polynomial]]) -> ABP:
    """Drop zero edges and vertices not on a source-sink path; renumber compactly."""
    edges = [e for e in edges if not e[2].is_zero()]
    source, sink = layers[0][0], layers[-1][0]
    fwd: dict[int, list[int]] = defaultdict(list)
    bwd: dict[int, list[int]] = defaultdict(list)
    for u, v, _ in edges:
        fwd[u].append(v)
        bwd[v].append(u)

    def closure(start, adj):
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for w in adj.get(u, ()):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return seen

    live = closure(source, fwd) & closure(sink, bwd)
    live |= {source, sink}
    new_id: dict[int, int] = {}
    new_layers = []
    for layer in layers:
        kept = []
        for v in layer:
            if v in live:
                new_id[v] = len(new_id)
                kept.append(new_id[v])
        new_layers.append(tuple(kept))
    new_edges = tuple((new_id[u], new_id[v], p) for u, v, p in edges if u in live and v in live)
    return ABP(nvars, tuple(new_layers), new_edges)


def formula_size(circuit: Circuit) -> int:
    """Number of leaf instructions of the register program (circuit unfolded to a formula,
    every product costing four sub-programs)."""
    sizes = [0] * len(circuit.gates)
    for i, g in enumerate(circuit.gates):
        op = g[0]
        if op in ("input", "const"):
            sizes[i] = 1
        elif op == "add":
            sizes[i] = sizes[g[1]] + sizes[g[2]]
        elif op == "mul":
            sizes[i] = 2 * (sizes[g[1]] + sizes[g[2]])
        else:
            raise CircuitError("circuit_to_abp needs a division-free circuit")
    return sizes[circuit.outputs[0]]


def circuit_to_abp(circuit: Circuit) -> ABP:
    """Width-3 ABP for a single-output division-free circuit.

    The circuit is compiled into a straight-line program on three registers
    whose instructions have the form ``R_j += c * l * R_i`` with ``l`` a
    variable or constant.  Sums add the two sub-programs; a product
    ``R_j += a*b*R_i`` uses the free register ``R_k``::

        R_k += a R_i;  R_j += b R_k;  R_k -= a R_i;  R_j -= b R_k

    (net effect ``R_j += a b R_i``, ``R_k`` restored).  Each instruction becomes
    one layer: identity edges for every live register plus one labelled edge.
    Starting from R_0 = 1, R_1 = R_2 = 0, register R_1 ends with the circuit's
    value, so the ABP runs from R_0 in layer 0 to R_1 in the last layer.
    """
    if len(circuit.outputs) != 1:
        raise ABPError("circuit_to_abp expects a single-output circuit")
    if circuit.depth > MAX_FORMULA_DEPTH:
        raise ABPError(f"circuit depth {circuit.depth} exceeds {MAX_FORMULA_DEPTH}")
    length = formula_size(circuit)
    if 3 * (length + 1) > MAX_ABP_VERTICES:
        raise ABPError(f"register program of length {length} exceeds the vertex budget")
    program: list[tuple[int, int, Polynomial]] = []
    gates = circuit.gates

    def emit(g: int, i: int, j: int, sign: int):
        op = gates[g][0]
        if op == "input":
            program.append((i, j, Polynomial.var(gates[g][1]).scale(sign)))
        elif op == "const":
            c = gates[g][1]
            if c != 0:
                program.append((i, j, Polynomial.constant(c * sign)))
        elif op == "add":
            emit(gates[g][1], i, j, sign)
            emit(gates[g][2], i, j, sign)
        else:
            k = 3 - i - j
            a, b = gates[g][1], gates[g][2]
            emit(a, i, k, 1)
            emit(b, k, j, sign)
            emit(a, i, k, -1)
            emit(b, k, j, -sign)

    emit(circuit.outputs[0], 0, 1, 1)
    one = Polynomial.one()
    layers: list[list[int]] = [[0]]
    edges: list[tuple[int, int, Polynomial]] = []
    live = {0}
    reg_vertex = {0: 0}
    next_id = 1
    for i, j, label in program:
        live_next = live | {j}
        new_vertex = {}
        for r in sorted(live_next):
            new_vertex[r] = next_id
            next_id += 1
        for r in sorted(live):
            edges.append((reg_vertex[r], new_vertex[r], one))
        if i in live:
            edges.append((reg_vertex[i], new_vertex[j], label))
        layers.append([new_vertex[r] for r in sorted(live_next)])
        live, reg_vertex = live_next, new_vertex
    if 1 not in live:
        # empty program: the circuit is the constant 0
        sink = next_id
        layers.append([sink])
        return _prune(circuit.nvars, layers, edges)
    layers[-1] = [reg_vertex[1]]
    # identity edges into dropped registers of the last layer are removed by pruning
    return _prune(circuit.nvars, layers, edges)


def polynomial_to_abp(f: Polynomial, nvars: int | None = None) -> ABP:
    """Sum-of-products ABP: a trie over the variable sequences of the monomials.

    A monomial ``c * x_{v1} ... x_{vk}`` (variables in ascending order) follows
    the trie path labelled ``x_{v1}, ..., x_{vk}`` and then one edge labelled ``c``
    onto a chain of 1-edges leading to the sink.  Width is at most the number of
    distinct monomial prefixes of a given length, plus one.
    """
    nvars = max(nvars or 0, f.nvars)
    D = f.degree()
    one = Polynomial.one()
    trie: dict[tuple, int] = {(): 0}
    depth_of = {0: 0}
    edges: list[tuple[int, int, Polynomial]] = []
    next_id = 1
    finish = {}
    for k in range(1, D + 2):
        finish[k] = next_id
        next_id += 1
    for k in range(1, D + 1):
        edges.append((finish[k], finish[k + 1], one))
    for mono, c in f.terms:
        seq: list[int] = []
        for var, e in enumerate(mono):
            seq.extend([var] * e)
        node = 0
        for t in range(len(seq)):
            key = tuple(seq[: t + 1])
            child = trie.get(key)
            if child is None:
                child = trie[key] = next_id
                depth_of[child] = t + 1
                next_id += 1
                edges.append((node, child, Polynomial.var(seq[t])))
            node = child
        edges.append((node, finish[len(seq) + 1], Polynomial.constant(c)))
    layers: list[list[int]] = [[] for _ in range(D + 2)]
    for node, dpt in depth_of.items():
        layers[dpt].append(node)
    for k in range(1, D + 2):
        layers[k].append(finish[k])
    for layer in layers:
        layer.sort()
    return _prune(nvars, layers, edges)
