"""Command-line front end.

Subcommands read models as JSON (``-`` for stdin) and write to stdout unless
``-o`` is given; files are written atomically, so a failing command never
leaves a partial output.  Exit codes: 0 success, 1 a ``RefutedNo`` verdict
under ``--strict``, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import tempfile
import time

from . import __version__
from .algebra import AlgebraError
from .benchgen import VARIANTS, VariantSpec, generate
from .circuit import CircuitError
from .collapse import CollapseError, CollapseReport, collapse
from .derivpmc import DerivativeError, derivative_pmc
from .formats import FormatError, emit_model, emit_prism, parse_model
from .pmc import ModelError, detect_kind, qualitative_preprocess
from .relations import check_monotone, check_nwr, nwr_gadget
from .valuefn import solve_values

log = logging.getLogger("pmcnwr")

EXIT_OK, EXIT_REFUTED, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _read(path: str) -> str:
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None


def write_output(path: str | None, text: str) -> None:
    """Write ``text`` to ``path`` (stdout for ``None`` or ``-``) atomically."""
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load(path: str):
    text = _read(path)
    return parse_model(text), hashlib.sha256(text.encode()).hexdigest()


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _emit_verdict(args, verdict, extra: dict) -> int:
    d = verdict.to_dict()
    d.update(extra)
    write_output(args.out, _json(d))
    if args.strict and verdict.is_no:
        return EXIT_REFUTED
    return EXIT_OK


# commands

def cmd_collapse(args) -> int:
    pmc, digest = _load(args.input)
    kind = detect_kind(pmc)
    if not kind.trivially_parametric:
        log.warning("input is not trivially parametric; classes are computed on its graph")
    stages = {}
    t = time.perf_counter()
    pre, qrep = qualitative_preprocess(pmc)
    stages["preprocess_ms"] = round((time.perf_counter() - t) * 1000, 3)
    out, rep = collapse(pre, method=args.method, benchmark=args.benchmark or "")
    stages["collapse_ms"] = round(rep.elapsed * 1000, 3)
    t = time.perf_counter()
    text = emit_model(out)
    stages["emit_ms"] = round((time.perf_counter() - t) * 1000, 3)
    report = {
        "command": "collapse",
        "input_sha256": digest,
        "benchmark": rep.benchmark,
        "size_input": pmc.n,
        "size_before": rep.size_before,
        "size_after": rep.size_after,
        "classes": len(rep.classes),
        "nontrivial_classes": rep.nontrivial_classes,
        "method": args.method,
    }
    if args.classes:
        report["class_members"] = [
            {"exit": c.exit, "members": list(c.members)} for c in rep.classes if len(c) > 1]
    if not args.no_timings:
        report["elapsed_ms"] = stages
    write_output(args.out, text)
    if args.report:
        write_output(args.report, _json(report))
    else:
        print(f"collapse: {rep.size_before} -> {rep.size_after} states", file=sys.stderr)
    return EXIT_OK


def cmd_values(args) -> int:
    pmc, _ = _load(args.input)
    values = solve_values(pmc)
    states = [pmc.state_id(args.state)] if args.state is not None else range(pmc.n)
    lines = []
    for s in states:
        lines.append(f"{pmc.label(s)}: {values[s].format(pmc.params)}")
    write_output(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_derivative(args) -> int:
    pmc, _ = _load(args.input)
    i, k = pmc.state_id(args.state), pmc.param_id(args.param)
    d = derivative_pmc(pmc, i, k, route=args.route, seed=args.seed)
    write_output(args.out, d.to_json(pmc.params))
    print(f"derivative chain: {d.pmc.n} states, beta={d.beta}, N={d.N}, probe={d.probe_state}",
          file=sys.stderr)
    return EXIT_OK


def cmd_check_mono(args) -> int:
    pmc, digest = _load(args.input)
    state = pmc.state_id(args.state) if args.state is not None else None
    k = pmc.param_id(args.param)
    v = check_monotone(pmc, state, k, budget=args.budget, seed=args.seed, method=args.method,
                       jobs=args.jobs)
    extra = {"command": "check-mono", "input_sha256": digest, "state": state,
             "param": pmc.params[k], "method": args.method, "seed": args.seed}
    return _emit_verdict(args, v, extra)


def cmd_check_nwr(args) -> int:
    pmc, digest = _load(args.input)
    i, j = pmc.state_id(args.i), pmc.state_id(args.j)
    if args.gadget_out:
        g, new, y = nwr_gadget(pmc, i, j)
        write_output(args.gadget_out, emit_model(g))
    v = check_nwr(pmc, i, j, budget=args.budget, seed=args.seed, jobs=args.jobs)
    extra = {"command": "check-nwr", "input_sha256": digest, "i": i, "j": j, "seed": args.seed}
    return _emit_verdict(args, v, extra)


def cmd_gen_bench(args) -> int:
    spec = VariantSpec(args.variant, args.n, args.wiring)
    pmc = generate(spec)
    text = emit_prism(pmc) if args.prism else emit_model(pmc)
    write_output(args.out, text)
    return EXIT_OK


def cmd_convert(args) -> int:
    pmc, _ = _load(args.input)
    text = emit_prism(pmc) if args.format == "prism" else emit_model(pmc)
    write_output(args.out, text)
    return EXIT_OK


def cmd_sweep(args) -> int:
    """Generate and collapse each variant/size pair; one report line per run."""
    ns = [int(x) for x in args.n.split(",")]
    variants = args.variants.split(",")
    for v in variants:
        if v not in VARIANTS:
            raise InputError(f"unknown variant {v!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if args.format == "csv":
        writer.writerow(CollapseReport.CSV_COLUMNS)
    for v in variants:
        for n in ns:
            pmc = generate(VariantSpec(v, n, args.wiring))
            pre, _ = qualitative_preprocess(pmc)
            _, rep = collapse(pre, method=args.method, benchmark=f"{v}/n={n}")
            if args.format == "csv":
                writer.writerow(rep.to_csv_row(timing=not args.no_timings))
            else:
                buf.write(rep.to_json(timing=not args.no_timings) + "\n")
            if args.out in (None, "-"):
                sys.stdout.write(buf.getvalue())
                sys.stdout.flush()
                buf.seek(0)
                buf.truncate()
    if args.out not in (None, "-"):
        write_output(args.out, buf.getvalue())
    return EXIT_OK


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pmcnwr", description="Parametric Markov chain toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def model_io(sp, output=True):
        sp.add_argument("input", nargs="?", default="-", help="model JSON ('-' for stdin)")
        if output:
            sp.add_argument("-o", "--out", default=None, help="output file (default stdout)")

    def sampling(sp):
        sp.add_argument("--budget", type=_nonneg_int, default=1000, help="number of samples")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--jobs", type=int, default=1, help="parallel sampling workers")
        sp.add_argument("--strict", action="store_true", help="exit 1 on a RefutedNo verdict")

    sp = sub.add_parser("collapse", help="preprocess and collapse equivalence classes")
    model_io(sp)
    sp.add_argument("--report", help="write a JSON run report here")
    sp.add_argument("--method", choices=("dominators", "search"), default="dominators")
    sp.add_argument("--benchmark", help="name recorded in the report")
    sp.add_argument("--classes", action="store_true", help="list class members in the report")
    sp.add_argument("--no-timings", action="store_true", help="omit timings for byte-identical reports")
    sp.set_defaults(func=cmd_collapse)

    sp = sub.add_parser("values", help="print value functions")
    model_io(sp)
    sp.add_argument("--state", help="state id or label (default: all)")
    sp.set_defaults(func=cmd_values)

    sp = sub.add_parser("derivative", help="build the derivative chain of g_state in a parameter")
    model_io(sp)
    sp.add_argument("--state", required=True)
    sp.add_argument("--param", required=True)
    sp.add_argument("--route", choices=("auto", "sparse", "circuit"), default="auto")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_derivative)

    sp = sub.add_parser("check-mono", help="check monotonicity in a parameter")
    model_io(sp)
    sp.add_argument("--state", help="state id or label (default: every state)")
    sp.add_argument("--param", required=True)
    sp.add_argument("--method", choices=("sampling", "certificate", "auto", "derivative-pmc"),
                    default="auto")
    sampling(sp)
    sp.set_defaults(func=cmd_check_mono)

    sp = sub.add_parser("check-nwr", help="check the never-worse relation i <= j")
    model_io(sp)
    sp.add_argument("--i", required=True)
    sp.add_argument("--j", required=True)
    sp.add_argument("--gadget-out", help="also write the reduction gadget model here")
    sampling(sp)
    sp.set_defaults(func=cmd_check_nwr)

    sp = sub.add_parser("gen-bench", help="generate a benchmark chain")
    sp.add_argument("--variant", choices=VARIANTS, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--wiring", choices=("default", "drawn"), default="default")
    sp.add_argument("--prism", action="store_true", help="emit PRISM instead of JSON")
    sp.add_argument("-o", "--out", default=None)
    sp.set_defaults(func=cmd_gen_bench)

    sp = sub.add_parser("convert", help="convert a model to JSON or PRISM")
    model_io(sp)
    sp.add_argument("--format", choices=("json", "prism"), default="prism")
    sp.set_defaults(func=cmd_convert)

    sp = sub.add_parser("sweep", help="generate and collapse a grid of benchmarks")
    sp.add_argument("--variants", default=",".join(VARIANTS))
    sp.add_argument("--n", default="2,3,8,10,15,25,50,100,150", help="comma-separated sizes")
    sp.add_argument("--wiring", choices=("default", "drawn"), default="default")
    sp.add_argument("--method", choices=("dominators", "search"), default="dominators")
    sp.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    sp.add_argument("--no-timings", action="store_true")
    sp.add_argument("-o", "--out", default=None)
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, FormatError, ModelError, AlgebraError, CircuitError, ValueError,
            CollapseError, DerivativeError) as e:
        print(f"pmcnwr {args.command}: error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
