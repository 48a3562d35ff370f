"""State-space collapse for trivially parametric chains.

Removing a state ``u`` may cut other states off from both absorbing states;
those states cannot reach the target or the sink without passing through
``u``, so each of them has the same value function as ``u``.  Grouping them
with ``u`` (the class *exit*) and redirecting every transition into the class
to the exit shrinks the chain without changing any value function of the
surviving states.

Two engines compute the classes:

* ``"search"`` processes states in reverse breadth-first order from the target
  and runs one backward reachability search per class (quadratic worst case);
* ``"dominators"`` (default) reads the same classes off the dominator tree of
  the reversed graph rooted at {target, sink}: ``w`` is cut off by removing
  ``u`` exactly when ``u`` dominates ``w``.  The first state in the order that
  dominates ``w`` is its highest dominator, so each class is a top-level
  subtree of the dominator tree below the virtual root.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field

from .algebra import Polynomial
from .graph import bfs_order, gc_paused, immediate_dominators, reach
from .pmc import PMC


class CollapseError(RuntimeError):
    pass


@dataclass(frozen=True)
class EquivalenceClass:
    exit: int
    members: tuple[int, ...]

    def __len__(self):
        return len(self.members)


@dataclass
class CollapseReport:
    classes: list[EquivalenceClass]
    size_before: int
    size_after: int
    mapping: list[int]
    elapsed: float
    benchmark: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def nontrivial_classes(self) -> int:
        return sum(1 for c in self.classes if len(c) > 1)

    def summary(self) -> dict:
        return {
            "benchmark": self.benchmark,
            "size_before": self.size_before,
            "size_after": self.size_after,
            "classes": len(self.classes),
            "elapsed_ms": round(self.elapsed * 1000, 3),
        }

    def to_json(self, include_classes: bool = False, timing: bool = True) -> str:
        d = self.summary()
        d["nontrivial_classes"] = self.nontrivial_classes
        if not timing:
            d.pop("elapsed_ms")
        if include_classes:
            d["class_members"] = [
                {"exit": c.exit, "members": list(c.members)} for c in self.classes if len(c) > 1
            ]
        d.update(self.extra)
        return json.dumps(d, sort_keys=True)

    CSV_COLUMNS = ("benchmark", "size_before", "size_after", "classes", "elapsed_ms")

    def to_csv_row(self, timing: bool = True) -> list:
        s = self.summary()
        if not timing:
            s["elapsed_ms"] = ""
        return [s[c] for c in self.CSV_COLUMNS]

    def to_csv(self, header: bool = True, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(self.CSV_COLUMNS)
        w.writerow(self.to_csv_row(timing))
        return buf.getvalue()


def reverse_bfs_order(pmc: PMC) -> list[int]:
    """States by breadth-first distance from the target along reversed
    transitions, ties by ascending id; states that cannot reach the target last."""
    return bfs_order(pmc.predecessors, pmc.target)


def _classes_search(pmc: PMC, order: list[int]) -> list[EquivalenceClass]:
    n = pmc.n
    pred = pmc.predecessors
    todo = bytearray([1]) * n
    classes = []
    for u in order:
        if not todo[u]:
            continue
        blocked = bytearray(n)
        blocked[u] = 1
        alive = reach(pred, [pmc.target, pmc.sink], blocked)
        members = [w for w in range(n) if w == u or (not alive[w] and todo[w])]
        for w in members:
            todo[w] = 0
        classes.append(EquivalenceClass(u, tuple(members)))
    return classes


def _classes_dominators(pmc: PMC, order: list[int]) -> list[EquivalenceClass]:
    n = pmc.n
    idom = immediate_dominators(pmc.predecessors, [pmc.target, pmc.sink])
    root = n
    children: list[list[int]] = [[] for _ in range(n + 1)]
    unreachable = []
    for w in range(n):
        p = idom[w]
        if p == -1:
            unreachable.append(w)
        else:
            children[p].append(w)
    classes = []
    first = True
    for u in order:
        if idom[u] != root:
            continue
        members = [u]
        stack = list(children[u])
        while stack:
            w = stack.pop()
            members.append(w)
            stack.extend(children[w])
        if first:
            # states that reach neither absorbing state fall into the first class
            members.extend(unreachable)
            first = False
        members.sort()
        classes.append(EquivalenceClass(u, tuple(members)))
    return classes


def equivalence_classes(pmc: PMC, method: str = "dominators") -> list[EquivalenceClass]:
    """Classes in discovery order; exits are the members first in the order."""
    order = reverse_bfs_order(pmc)
    if method == "dominators":
        classes = _classes_dominators(pmc, order)
    elif method == "search":
        classes = _classes_search(pmc, order)
    else:
        raise ValueError(f"unknown method {method!r}")
    for c in classes:
        if len(c) > 1 and (pmc.target in c.members or pmc.sink in c.members):
            raise CollapseError(
                "a class contains the target or the sink; preprocess the chain first")
    return classes


@gc_paused
def collapse(pmc: PMC, method: str = "dominators", benchmark: str = "") -> tuple[PMC, CollapseReport]:
    """Quotient the chain by its equivalence classes.

    Surviving states are the class exits, renumbered compactly in their original
    relative order (so normal form is kept).  Edges into a class go to its exit;
    edges from the exit back into its own class become a self-loop.
    """
    start = time.perf_counter()
    classes = equivalence_classes(pmc, method)
    n = pmc.n
    exit_of = [0] * n
    for c in classes:
        for w in c.members:
            exit_of[w] = c.exit
    exits = sorted(c.exit for c in classes)
    new_id = {u: k for k, u in enumerate(exits)}
    rows = []
    for u in exits:
        acc: dict[int, Polynomial] = {}
        for j, p in pmc.rows[u]:
            t = new_id[exit_of[j]]
            acc[t] = acc[t] + p if t in acc else p
        rows.append(tuple((j, acc[j]) for j in sorted(acc) if not acc[j].is_zero()))
    labels = tuple(pmc.labels[u] for u in exits) if pmc.labels is not None else None
    out = PMC(
        len(exits), tuple(rows), pmc.params,
        new_id[exit_of[pmc.target]], new_id[exit_of[pmc.sink]],
        new_id[exit_of[pmc.initial]], labels,
    )
    mapping = [new_id[exit_of[w]] for w in range(n)]
    elapsed = time.perf_counter() - start
    report = CollapseReport(classes, n, len(exits), mapping, elapsed, benchmark)
    return out, report


def oracle_equivalence_classes(pmc: PMC, max_states: int = 12) -> list[list[int]]:
    """Partition of the states by exact equality of value functions on the
    graph-preserving valuations (reference for small trivially parametric chains)."""
    from .pmc import normalize_trivial_rows
    from .valuefn import value_functions

    if pmc.n > max_states:
        raise ValueError(f"oracle limited to {max_states} states")
    values = value_functions(normalize_trivial_rows(pmc))
    blocks: list[list[int]] = []
    for i, v in enumerate(values):
        for blk in blocks:
            if values[blk[0]] == v:
                blk.append(i)
                break
        else:
            blocks.append([i])
    return blocks
