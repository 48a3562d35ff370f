"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest -v -s tests/test_acceptance.py`` (or ``python3
tests/test_acceptance.py``) to see the report lines.
"""

import math
import random
import time
from fractions import Fraction

import pytest
import sympy

from helpers import (
    gp_point,
    oracle_derivative,
    oracle_values,
    polynomial_quotient_circuit,
    random_circuit,
    random_polynomial,
    random_simple_pmc,
    random_trivial_pmc,
    sym,
    sympy_residual_ok,
    unit_point,
)
from pmcnwr.abp import abp_eval, circuit_to_abp, validate_abp
from pmcnwr.algebra import Polynomial, RationalFunction, parse_polynomial, poly_partial_derivative, ratfn_equal
from pmcnwr.benchgen import VariantSpec, generate
from pmcnwr.circuit import (
    circuit_eval,
    depth_bound,
    depth_reduce,
    derivatives,
    eliminate_divisions,
    evaluation_equal,
    expand_to_polynomial,
    push_divisions,
    random_point,
    syntactic_degree,
)
from pmcnwr.collapse import collapse, equivalence_classes
from pmcnwr.demos import monotonicity_demo, nwr_demo
from pmcnwr.derivpmc import chonev_rewrite, derivative_pmc
from pmcnwr.pmc import normalize_trivial_rows, qualitative_preprocess
from pmcnwr.relations import check_monotone, check_nwr, verify_mono_witness, verify_nwr_witness
from pmcnwr.valuefn import solve_values, value_functions


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        assert ok, detail
    return emit


# frozen before -> after sizes of the custom benchmark table
TABLE_SIZES = {
    "A": {2: (15, 7), 3: (33, 9), 8: (243, 19), 10: (383, 23), 15: (873, 33), 50: (9903, 103),
          100: (39803, 203), 150: (89703, 303)},
    "B": {2: (15, 7), 25: (2453, 53), 50: (9903, 103), 100: (39803, 203), 150: (89703, 303)},
    "C": {2: (15, 7), 3: (33, 9), 8: (243, 19), 10: (383, 23), 15: (873, 33), 20: (1563, 43),
          50: (9903, 103), 100: (39803, 203), 150: (89703, 303)},
    "D": {2: (15, 7), 25: (2453, 53), 50: (9903, 103), 100: (39803, 203), 150: (89703, 303)},
}
GRID = (2, 3, 8, 10, 15, 25, 50, 100, 150)


def test_criterion_1_table_sizes(report):
    start = time.perf_counter()
    bad = []
    for v in "ABCD":
        for n in sorted(set(GRID) | set(TABLE_SIZES[v])):
            m = generate(VariantSpec(v, n))
            out, _ = collapse(qualitative_preprocess(m)[0])
            got = (m.n, out.n)
            if got != (4 * n * n - 2 * n + 3, 2 * n + 3):
                bad.append((v, n, got))
            if n in TABLE_SIZES[v] and got != TABLE_SIZES[v][n]:
                bad.append((v, n, got, "table"))
    elapsed = time.perf_counter() - start
    report(1, not bad and elapsed < 10, f"all sizes match, {elapsed:.2f}s (< 10s)" if not bad else f"{bad}")


def test_criterion_2_scale(report):
    m = generate(VariantSpec("A", 500))
    start = time.perf_counter()
    out, _ = collapse(m)
    elapsed = time.perf_counter() - start
    ok = m.n == 999003 and out.n == 1003 and elapsed < 600
    report(2, ok, f"{m.n} -> {out.n} states, collapse {elapsed:.1f}s (< 600s)")


def test_criterion_3_closed_forms(report):
    m1, m2 = monotonicity_demo(), nwr_demo()
    want = [
        (m1, "s", "p^2 + r - r*p"), (m1, "t", "r*p + r - r^2"),
        (m2, "u", "1 - p"), (m2, "v", "p - p^2"), (m2, "s", "r*(1-p)^2 + p*(1-p)"),
    ]
    vals = {id(m1): value_functions(m1), id(m2): value_functions(m2)}
    ok = True
    for m, s, text in want:
        expected = RationalFunction(parse_polynomial(text, m.params))
        ok &= ratfn_equal(vals[id(m)][m.state_id(s)], expected)
    ok &= sympy_residual_ok(m1, vals[id(m1)]) and sympy_residual_ok(m2, vals[id(m2)])
    report(3, ok, "value functions of both demo chains match the closed forms")


def test_criterion_4_nwr_instance(report):
    m = nwr_demo()
    u, v = m.state_id("u"), m.state_id("v")
    yes = check_nwr(m, v, u)
    no = check_nwr(m, u, v)
    ok = yes.status == "CertifiedYes" and no.status == "RefutedNo" and verify_nwr_witness(m, u, v, no)
    report(4, ok, f"(v,u) {yes.status} [{yes.certificate}], (u,v) {no.status} witness {no.witness}")


def test_criterion_5_monotonicity_profile(report):
    start = time.perf_counter()
    rows, ok = [], True
    for v in "ABCD":
        for n in (2, 3):
            m = generate(VariantSpec(v, n))
            q = m.param_id("q")
            vq = check_monotone(m, None, q, budget=10_000, seed=0)
            expect_q = v in "AC"
            ok &= vq.is_no == expect_q
            if vq.is_no:
                ok &= verify_mono_witness(m, q, vq)
            rows.append(f"{v}{n}:q={'dec' if vq.is_no else 'none'}")
            if v in "CD":
                vp = check_monotone(m, None, m.param_id("p"), budget=10_000, seed=0)
                ok &= not vp.is_no
                rows.append(f"{v}{n}:p={'dec' if vp.is_no else 'none'}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60
    report(5, ok, f"{' '.join(rows)}; {elapsed:.1f}s (< 60s)")


def _derivative_matches(m, i, k, rng, points=3):
    d = derivative_pmc(m, i, k, checks=5)
    values = solve_values(m)
    symbols = sympy.symbols([f"v{t}" for t in range(m.nparams)])
    symbols = symbols if isinstance(symbols, (list, tuple)) else [symbols]
    num, den = sym(values[i].num, symbols), sym(values[i].den, symbols)
    var = symbols[k]
    lhs = sym(d.numerator, symbols) * den ** 2
    rhs = sym(d.scale, symbols) * (sympy.diff(num, var) * den - num * sympy.diff(den, var))
    if sympy.expand(lhs - rhs) != 0:
        return False
    # the chain's own relation against the derivative numerator
    g = solve_values(d.pmc)[d.probe_state]
    if RationalFunction(Polynomial.constant(d.beta)) + g * d.N != RationalFunction(d.numerator):
        return False
    for _ in range(points):
        pt = unit_point(m.nparams, rng)
        if Fraction(str(d.derivative_value(pt))) != oracle_derivative(m, pt, k)[i]:
            return False
    return True


def test_criterion_6_derivative_chains(report):
    start = time.perf_counter()
    rng = random.Random(2024)
    failures, pairs = [], 0
    for t in range(50):
        m = random_simple_pmc(rng, max_states=6, max_params=2, max_degree=2)
        if not sympy_residual_ok(m, solve_values(m)):
            failures.append(("values", t))
        for i in range(m.n):
            for k in range(m.nparams):
                pairs += 1
                if not _derivative_matches(m, i, k, rng):
                    failures.append((t, i, k))
    for m in (monotonicity_demo(), nwr_demo()):
        for i in range(m.n):
            for k in range(m.nparams):
                pairs += 1
                if not _derivative_matches(m, i, k, rng, points=10):
                    failures.append((m.labels, i, k))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 600
    report(6, ok, f"{pairs} (state, parameter) pairs exact, {elapsed:.1f}s (< 600s)"
           if not failures else f"failures {failures[:5]}")


def test_criterion_7_circuit_transforms(report):
    start = time.perf_counter()
    rng = random.Random(7)
    problems = []
    max_width = 0
    for t in range(200):
        seed = 1000 + t
        if t % 2 == 0:
            c = random_circuit(rng, nvars=3, ngates=8, max_degree=4)
            d = syntactic_degree(c)
            r = depth_reduce(c, seed)
            if not evaluation_equal(c, r, points=100, seed=seed):
                problems.append((t, "depth_reduce"))
            if r.depth > depth_bound(c.size, d):
                problems.append((t, "depth bound", r.depth, depth_bound(c.size, d)))
            f = expand_to_polynomial(c)[0]
            dc = derivatives(c)
            grads = expand_to_polynomial(dc)
            if grads[0] != f or any(grads[1 + k] != poly_partial_derivative(f, k) for k in range(3)):
                problems.append((t, "derivatives"))
            a = circuit_to_abp(c)
            max_width = max(max_width, a.width)
            if validate_abp(a) or a.width > 4:
                problems.append((t, "abp shape"))
            prng = random.Random(seed)
            for _ in range(100):
                p = random_point(3, prng)
                vals = circuit_eval(dc, p)
                if abp_eval(a, p) != circuit_eval(c, p)[0] or vals[0] != f.evaluate(p):
                    problems.append((t, "abp/derivative evaluation"))
                    break
                if any(vals[1 + k] != poly_partial_derivative(f, k).evaluate(p) for k in range(3)):
                    problems.append((t, "derivative evaluation"))
                    break
        else:
            q, dq = polynomial_quotient_circuit(rng)
            if not evaluation_equal(q, push_divisions(q), points=100, seed=seed):
                problems.append((t, "push_divisions"))
            e = eliminate_divisions(q, dq, seed)
            if e.has_division or not evaluation_equal(q, e, points=100, seed=seed):
                problems.append((t, "eliminate_divisions"))
            r = depth_reduce(e, seed)
            de = syntactic_degree(e)
            if not evaluation_equal(e, r, points=100, seed=seed) or r.depth > depth_bound(e.size, de):
                problems.append((t, "depth_reduce after elimination"))
    elapsed = time.perf_counter() - start
    report(7, not problems, f"200 circuits x 100 points, max ABP width {max_width}, {elapsed:.1f}s"
           if not problems else f"{problems[:5]}")


def test_criterion_8_collapse_soundness(report):
    start = time.perf_counter()
    rng = random.Random(88)
    problems = []
    for t in range(300):
        raw = random_trivial_pmc(rng, max_states=10)
        pre, qrep = qualitative_preprocess(normalize_trivial_rows(raw))
        values = solve_values(pre)
        classes = equivalence_classes(pre)
        for c in classes:
            if any(not ratfn_equal(values[w], values[c.exit]) for w in c.members):
                problems.append((t, "class not within a value block"))
        out, rep = collapse(pre)
        after = solve_values(out)
        for c in classes:
            if not ratfn_equal(after[rep.mapping[c.exit]], values[c.exit]):
                problems.append((t, "exit value changed"))
        # independent check: exact values of the original chain at a valuation
        point = gp_point(raw, rng)
        want = oracle_values(raw, point)
        got = [v.evaluate(point) for v in after]
        if any(got[rep.mapping[qrep.mapping[s]]] != want[s] for s in range(raw.n)):
            problems.append((t, "pointwise mismatch"))
    elapsed = time.perf_counter() - start
    report(8, not problems, f"300 chains sound, {elapsed:.1f}s" if not problems else f"{problems[:5]}")


def test_criterion_9_chonev(report):
    rng = random.Random(9)
    problems = []
    for t in range(500):
        f = random_polynomial(rng, nvars=3, max_terms=6, max_degree=4)
        form = chonev_rewrite(f)
        deg = max(f.degree(), 0)
        if form.mass() > 1:
            problems.append((t, "mass"))
        if len(form.terms) > len(f.terms) * deg:
            problems.append((t, "term count"))
        if any(len(q) > deg for _, _, q in form.terms):
            problems.append((t, "product length"))
        for _ in range(100):
            p = random_point(3, rng, signed=False)
            if form.evaluate(p) != f.evaluate(p):
                problems.append((t, "identity"))
                break
    f = parse_polynomial("-2*x1*x2*x3", ["x1", "x2", "x3"])
    form = chonev_rewrite(f)
    lits = sorted(q for _, _, q in form.terms)
    example_ok = (form.N, form.c, form.d) == (8, -2, 8) and lits == sorted([
        ((0, False), (1, True), (2, True)), ((1, False), (2, True)), ((2, False),)])
    report(9, not problems and example_ok,
           f"500 polynomials, example N={form.N} c={form.c} d={form.d}" if not problems else f"{problems[:5]}")


def test_criterion_10_power_law(report):
    ns = (10, 20, 40)
    sizes, times = [], []
    for n in ns:
        m = generate(VariantSpec("A", n))
        best = math.inf
        for _ in range(5):
            start = time.perf_counter()
            collapse(m)
            best = min(best, time.perf_counter() - start)
        sizes.append(m.n)
        times.append(best)
    xs = [math.log(s) for s in sizes]
    ys = [math.log(t) for t in times]
    mx, my = sum(xs) / 3, sum(ys) / 3
    slope = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sum((x - mx) ** 2 for x in xs)
    slope_n = slope * 2  # states grow as n^2
    report(10, slope <= 2.5, f"exponent {slope:.2f} in states ({slope_n:.2f} in n), "
           f"times {[round(t * 1000, 1) for t in times]} ms")


if __name__ == "__main__":
    raise SystemExit(pytest.main(["-v", "-s", __file__]))
