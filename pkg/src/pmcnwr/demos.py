"""Two small hand-made chains used throughout the tests and documentation."""

from __future__ import annotations

from .algebra import parse_polynomial
from .pmc import PMC


def _build(params, names, edges, initial="s"):
    idx = {name: i for i, name in enumerate(names)}
    parsed = [(idx[a], idx[b], parse_polynomial(p, params)) for a, b, p in edges]
    return PMC.from_edges(len(names), parsed, params, idx["goal"], idx["fail"], idx[initial], names)


def monotonicity_demo() -> PMC:
    """Two parameters ``p, r``; values ``g_s = p^2 + r - r*p`` and
    ``g_t = r*p + r - r^2``.  ``g_s`` is not monotone in ``p`` while ``g_t`` is."""
    return _build(
        ["p", "r"],
        ["s", "t", "u", "v", "fail", "goal"],
        [
            ("s", "u", "p"), ("s", "v", "1-p"),
            ("t", "u", "r"), ("t", "v", "1-r"),
            ("u", "goal", "p"), ("u", "fail", "1-p"),
            ("v", "goal", "r"), ("v", "fail", "1-r"),
        ],
    )


def nwr_demo() -> PMC:
    """Values ``g_u = 1 - p``, ``g_v = p - p^2``; hence ``g_v <= g_u`` everywhere
    but not conversely, and ``g_s`` is increasing in ``r``."""
    return _build(
        ["p", "r"],
        ["s", "u", "v", "fail", "goal"],
        [
            ("s", "u", "r"), ("s", "v", "1-r"),
            ("u", "goal", "1-p"), ("u", "fail", "p"),
            ("v", "u", "p"), ("v", "fail", "1-p"),
        ],
    )
