"""Generators for the four scalable benchmark families A-D (parameters p, q).

Layout for size parameter n: a start state ``s``, then 2n blocks arranged in
two rows of n, then ``fail`` and ``goal``.  A block is a 2 x n ladder with
positions 1..n (upper lane) and n+1..2n (lower lane); position n+1 has no
incoming transition and is omitted, so each block has 2n-1 states and the
chain has 4n^2 - 2n + 3 states.

State ids (block-major): ``0`` is ``s``; block ``b`` (0-based column) of row
``r`` (0 = top row, 1 = bottom row) occupies ids
``1 + (2b + r)(2n - 1) ...`` with positions 1..n first, then n+2..2n;
``fail`` and ``goal`` are the last two ids.

Ladder steps from column i to i+1 (i = 1..n-1):

* A, B: ``i -> i+1`` with p, ``i -> n+i+1`` with 1-p,
  ``n+i -> n+i+1`` with 1-p, ``n+i -> i+1`` with p;
* C, D: the upper lane as above, ``n+i -> n+i+1`` with p, ``n+i -> i+1`` with 1-p.

Each block funnels into a single exit (A, B: top-row blocks ``n -> 2n``
exit 2n, bottom-row blocks ``2n -> n`` exit n; C, D: ``n -> 2n`` exit 2n)
whose q / 1-q transitions lead to position 1 of the next column's blocks or,
in the last column, to goal and fail.
"""

from __future__ import annotations

from dataclasses import dataclass

from .algebra import Polynomial
from .graph import gc_paused
from .pmc import PMC, Row

VARIANTS = ("A", "B", "C", "D")


@dataclass(frozen=True)
class VariantSpec:
    variant: str
    n: int
    wiring: str = "default"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if not isinstance(self.n, int) or self.n < 2:
            raise ValueError("n must be an integer >= 2")
        if self.wiring not in ("default", "drawn"):
            raise ValueError("wiring must be 'default' or 'drawn'")


def expected_sizes(spec: VariantSpec) -> tuple[int, int]:
    n = spec.n
    return 4 * n * n - 2 * n + 3, 2 * n + 3


def _exit_labels(variant: str, row: int, wiring: str) -> tuple[str, str]:
    """Labels ``(to next top block, to next bottom block)`` of a block exit."""
    if variant == "A":
        return ("q", "1-q") if row == 0 else ("1-q", "q")
    if variant == "B":
        return ("q", "1-q") if row == 0 else ("q", "1-q")
    if variant == "C":
        return ("q", "1-q") if row == 0 else ("1-q", "q")
    # D: the label swap that distinguishes D from C sits on the bottom-row exit,
    # as for B versus A; "drawn" puts it on the top-row exit instead.
    if wiring == "drawn":
        return ("1-q", "q") if row == 0 else ("1-q", "q")
    return ("q", "1-q") if row == 0 else ("q", "1-q")


@gc_paused
def generate(spec: VariantSpec) -> PMC:
    v, n = spec.variant, spec.n
    per_block = 2 * n - 1
    total = 4 * n * n - 2 * n + 3
    fail, goal = total - 2, total - 1
    P = {
        "p": Polynomial.var(0),
        "1-p": 1 - Polynomial.var(0),
        "q": Polynomial.var(1),
        "1-q": 1 - Polynomial.var(1),
        "1": Polynomial.one(),
    }

    def sid(b: int, r: int, pos: int) -> int:
        local = pos - 1 if pos <= n else pos - 2
        return 1 + (2 * b + r) * per_block + local

    rows: list = [None] * total
    labels: list = [None] * total
    labels[0], labels[fail], labels[goal] = "s", "fail", "goal"
    rows[0] = tuple(sorted([(sid(0, 0, 1), P["q"]), (sid(0, 1, 1), P["1-q"])]))
    ab = v in ("A", "B")
    lower_same, lower_cross = ("1-p", "p") if ab else ("p", "1-p")
    for b in range(n):
        last = b == n - 1
        for r in (0, 1):
            prefix = ("T" if r == 0 else "B") + str(b + 1)
            for pos in range(1, 2 * n + 1):
                if pos != n + 1:
                    labels[sid(b, r, pos)] = f"{prefix}_{pos}"
            for i in range(1, n):
                rows[sid(b, r, i)] = _row({sid(b, r, i + 1): P["p"], sid(b, r, n + i + 1): P["1-p"]})
                if i > 1:
                    rows[sid(b, r, n + i)] = _row({
                        sid(b, r, n + i + 1): P[lower_same], sid(b, r, i + 1): P[lower_cross]})
            if ab and r == 1:
                funnel_from, exit_pos = 2 * n, n
            else:
                funnel_from, exit_pos = n, 2 * n
            rows[sid(b, r, funnel_from)] = ((sid(b, r, exit_pos), P["1"]),)
            ex = sid(b, r, exit_pos)
            if not last:
                to_top, to_bot = _exit_labels(v, r, spec.wiring)
                rows[ex] = _row({sid(b + 1, 0, 1): P[to_top], sid(b + 1, 1, 1): P[to_bot]})
            elif ab:
                if v == "A":
                    win = "q" if r == 0 else "1-q"
                else:
                    win = "q"
                lose = "1-q" if win == "q" else "q"
                rows[ex] = _row({goal: P[win], fail: P[lose]})
            elif r == 0:
                rows[ex] = _row({goal: P["p"], fail: P["1-p"]})
            else:
                rows[ex] = _row({sid(b, 0, 2 * n): P["p"], fail: P["1-p"]})
    rows[fail] = ((fail, P["1"]),)
    rows[goal] = ((goal, P["1"]),)
    return PMC(total, tuple(rows), ("p", "q"), goal, fail, 0, tuple(labels))


def _row(d: dict[int, Polynomial]) -> Row:
    return tuple(sorted(d.items()))
