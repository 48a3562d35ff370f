"""Reading and writing chains: a JSON interchange format and PRISM output.

JSON layout::

    {"parameters": ["p", "r"], "states": 6, "initial": 0,
     "target": 5, "sink": 4, "labels": ["s", ...],
     "transitions": [{"from": 0, "to": 2, "poly": "p"}, ...]}

Coefficients inside ``poly`` are exact (``a/b``).  Parallel transitions are
summed on input.
"""

from __future__ import annotations

import json
import re
from typing import Any

from .algebra import AlgebraError, Polynomial, parse_polynomial
from .pmc import PMC, ModelError

_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class FormatError(ValueError):
    """Malformed model file."""


def model_to_dict(pmc: PMC) -> dict[str, Any]:
    d: dict[str, Any] = {
        "parameters": list(pmc.params),
        "states": pmc.n,
        "initial": pmc.initial,
        "target": pmc.target,
        "sink": pmc.sink,
    }
    if pmc.labels is not None:
        d["labels"] = list(pmc.labels)
    d["transitions"] = [
        {"from": i, "to": j, "poly": p.format(pmc.params)}
        for i, row in enumerate(pmc.rows)
        for j, p in row
    ]
    return d


def emit_model(pmc: PMC) -> str:
    return json.dumps(model_to_dict(pmc), indent=1) + "\n"


def model_from_dict(d: Any) -> PMC:
    if not isinstance(d, dict):
        raise FormatError("model must be a JSON object")
    for key in ("parameters", "states", "target", "sink", "transitions"):
        if key not in d:
            raise FormatError(f"missing field {key!r}")
    params = d["parameters"]
    if not isinstance(params, list) or not all(isinstance(p, str) and _NAME.match(p) for p in params):
        raise FormatError("parameters must be a list of identifiers")
    if len(set(params)) != len(params):
        raise FormatError("duplicate parameter names")
    n = d["states"]
    if not isinstance(n, int) or n < 2:
        raise FormatError("states must be an integer >= 2")
    edges = []
    for t in d["transitions"]:
        try:
            i, j, text = t["from"], t["to"], t["poly"]
        except (KeyError, TypeError):
            raise FormatError(f"malformed transition {t!r}") from None
        if not isinstance(i, int) or not isinstance(j, int):
            raise FormatError(f"transition endpoints must be integers: {t!r}")
        if not isinstance(text, str):
            text = str(text)
        try:
            p = parse_polynomial(text, params)
        except AlgebraError as exc:
            raise FormatError(f"transition {i}->{j}: {exc}") from None
        edges.append((i, j, p))
    labels = d.get("labels")
    if labels is not None and (not isinstance(labels, list) or len(labels) != n):
        raise FormatError("labels must list one name per state")
    try:
        return PMC.from_edges(n, edges, params, d["target"], d["sink"], d.get("initial", 0), labels)
    except ModelError as exc:
        raise FormatError(str(exc)) from None


def parse_model(text: str) -> PMC:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from None
    return model_from_dict(d)


def load_model(path: str) -> PMC:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


def emit_prism(pmc: PMC, module: str = "chain") -> str:
    """PRISM DTMC text: one ``const double`` per parameter, a single state variable
    and one guarded command per state (absorbing states keep their self-loop)."""
    var = "s"
    while var in pmc.params:
        var += "_"
    lines = ["dtmc", ""]
    for p in pmc.params:
        lines.append(f"const double {p};")
    if pmc.params:
        lines.append("")
    lines.append(f"module {module}")
    lines.append(f"  {var} : [0..{pmc.n - 1}] init {pmc.initial};")
    for i, row in enumerate(pmc.rows):
        updates = " + ".join(
            f"{_prism_expr(p, pmc.params)} : ({var}'={j})" for j, p in row
        )
        lines.append(f"  [] {var}={i} -> {updates};")
    lines.append("endmodule")
    lines.append("")
    lines.append(f'label "target" = {var}={pmc.target};')
    lines.append(f'label "sink" = {var}={pmc.sink};')
    return "\n".join(lines) + "\n"


def _prism_expr(p: Polynomial, names) -> str:
    """Terms in ascending order so that ``1 - p`` reads naturally."""
    parts = []
    for mono, c in reversed(p.terms):
        t = Polynomial._raw({mono: c}).format(names, power="*")
        if not parts:
            parts.append(t)
        elif t.startswith("-"):
            parts.append("- " + t[1:])
        else:
            parts.append("+ " + t)
    text = " ".join(parts)
    if len(parts) == 1 and not text.startswith("-"):
        return text
    return f"({text})"
