import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from helpers import polynomial_quotient_circuit, random_circuit
from pmcnwr.algebra import Polynomial, parse_polynomial
from pmcnwr.circuit import (
    CircuitBuilder,
    CircuitDivisionByZero,
    CircuitError,
    circuit_eval,
    depth_bound,
    depth_reduce,
    derivatives,
    eliminate_divisions,
    evaluation_equal,
    expand_to_polynomial,
    from_polynomial,
    numerator_denominator,
    push_divisions,
    random_point,
    read_circuit,
    syntactic_degree,
    write_circuit,
)
from pmcnwr.demos import monotonicity_demo, nwr_demo
from pmcnwr.valuefn import value_function_circuits

F = Fraction


def x1x2_plus_x1():
    b = CircuitBuilder(2)
    x1, x2 = b.input(0), b.input(1)
    return b.build([b.add(b.mul(x1, x2), x1)])


def test_eval_examples():
    b = CircuitBuilder(1)
    x = b.input(0)
    assert circuit_eval(b.build([b.mul(x, x)]), [F(3, 2)]) == [F(9, 4)]
    b = CircuitBuilder(2)
    x1, x2 = b.input(0), b.input(1)
    c = b.build([b.mul(b.div(x1, x2), x2)])
    assert circuit_eval(c, [2, 5]) == [2]
    with pytest.raises(CircuitDivisionByZero):
        circuit_eval(c, [2, 0])


def test_traced_value_function_ratio():
    # p^2 + r - rp and r(1-p)^2 + p(1-p) at p = 1/2, r = 1/3
    pt = [F(1, 2), F(1, 3)]
    for m, want in ((monotonicity_demo(), F(5, 12)), (nwr_demo(), F(1, 3))):
        num, den = value_function_circuits(m).pair(m.state_id("s"))
        assert circuit_eval(num, pt)[0] / circuit_eval(den, pt)[0] == want


def test_builder_examples():
    b = CircuitBuilder(1)
    c = b.build([b.power(b.input(0), 4)])
    assert expand_to_polynomial(c) == [Polynomial.var(0, 4)]
    assert c.depth == 2
    b = CircuitBuilder(1)
    z = b.add(b.const(1), b.const(-1))
    assert expand_to_polynomial(b.build([z])) == [Polynomial.zero()]
    # hash-consing
    b = CircuitBuilder(2)
    assert b.add(b.input(0), b.input(1)) == b.add(b.input(1), b.input(0))


def test_syntactic_degree_examples():
    b = CircuitBuilder(1)
    x = b.input(0)
    assert syntactic_degree(b.build([b.mul(x, x)])) == 2
    y = b.add(x, b.const(1))
    assert syntactic_degree(b.build([b.mul(y, y)])) == 2
    assert syntactic_degree(b.build([b.const(5)])) == 0


def test_push_divisions_example():
    b = CircuitBuilder(3)
    x1, x2, x3 = (b.input(k) for k in range(3))
    c = b.build([b.add(b.div(x1, x2), x3)])
    pushed = push_divisions(c)
    assert sum(1 for g in pushed.gates if g[0] == "div") == 1
    top = pushed.gates[pushed.outputs[0]]
    assert top[0] == "div"
    assert evaluation_equal(c, pushed, points=20)
    num, den = numerator_denominator(c)
    names = ["x1", "x2", "x3"]
    n, d = expand_to_polynomial(num)[0], expand_to_polynomial(den)[0]
    assert n * parse_polynomial("x2", names) == parse_polynomial("x1 + x3*x2", names) * d


def test_push_divisions_division_free():
    c = x1x2_plus_x1()
    assert not push_divisions(c).has_division


def test_eliminate_divisions_examples():
    b = CircuitBuilder(2)
    x1, x2 = b.input(0), b.input(1)
    c = b.build([b.mul(b.div(x1, x2), x2)])
    e = eliminate_divisions(c, 1)
    assert not e.has_division
    assert expand_to_polynomial(e) == [Polynomial.var(0)]
    b = CircuitBuilder(1)
    x = b.input(0)
    one = b.const(1)
    c = b.build([b.mul(b.div(one, b.sub(one, x)), b.sub(one, b.mul(x, x)))])
    e = eliminate_divisions(c, 2)
    assert expand_to_polynomial(e) == [1 + Polynomial.var(0)]


def test_eliminate_divisions_wrong_degree_detected():
    b = CircuitBuilder(1)
    x = b.input(0)
    one = b.const(1)
    c = b.build([b.mul(b.div(one, b.sub(one, x)), b.sub(one, b.mul(b.mul(x, x), x)))])
    with pytest.raises(CircuitError):
        eliminate_divisions(c, 1)


def test_eliminate_divisions_value_numerator():
    m = nwr_demo()
    vc = value_function_circuits(m)
    num, den = vc.pair(m.state_id("s"))
    e = eliminate_divisions(num, syntactic_degree(num))
    assert evaluation_equal(num, e, points=50)


def test_depth_reduce_comb():
    b = CircuitBuilder(1)
    x = b.input(0)
    acc = x
    for _ in range(3):
        acc = b.mul(acc, x)
    comb = b.build([acc])
    r = depth_reduce(comb)
    assert evaluation_equal(comb, r, points=10)
    assert r.depth <= depth_bound(comb.size, 4)


def test_depth_reduce_long_comb_gets_shallower():
    b = CircuitBuilder(1)
    x = b.input(0)
    acc = x
    for _ in range(255):
        acc = b.mul(acc, x)
    comb = b.build([acc])
    assert comb.depth == 255
    r = depth_reduce(comb)
    assert r.depth <= depth_bound(comb.size, 256)
    assert r.depth < comb.depth // 8
    assert expand_to_polynomial(r) == [Polynomial.var(0, 256)]


def test_depth_reduce_value_numerator():
    m = nwr_demo()
    num, _ = value_function_circuits(m).pair(m.state_id("s"))
    num = eliminate_divisions(num, syntactic_degree(num))
    r = depth_reduce(num)
    assert evaluation_equal(num, r, points=20)
    assert r.depth <= max(num.depth, depth_bound(num.size, syntactic_degree(num)))


def test_derivative_examples():
    c = derivatives(x1x2_plus_x1())
    assert expand_to_polynomial(c) == [
        parse_polynomial("x0*x1 + x0"), parse_polynomial("x1 + 1"), parse_polynomial("x0")]
    b = CircuitBuilder(2)
    c = derivatives(b.build([b.const(3)]))
    assert expand_to_polynomial(c)[1:] == [Polynomial.zero(), Polynomial.zero()]


def test_derivative_of_value_function():
    m = nwr_demo()
    s, r = m.state_id("s"), m.param_id("r")
    q = value_function_circuits(m).quotient(s)
    d = derivatives(q)
    rng = random.Random(3)
    for _ in range(20):
        p = random_point(2, rng, signed=False)
        assert circuit_eval(d, p)[1 + r] == (1 - p[0]) ** 2


def test_circuit_text_roundtrip():
    c = x1x2_plus_x1()
    text = write_circuit(c, ["a", "b"])
    back, names = read_circuit(text)
    assert back == c and names == ("a", "b")
    with pytest.raises(CircuitError):
        read_circuit("circuit 1 1\n0 mul 3 4\n")


seeds = st.integers(0, 10**6)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_transforms_preserve_evaluation(seed):
    rng = random.Random(seed)
    c = random_circuit(rng)
    d = syntactic_degree(c)
    assert evaluation_equal(c, depth_reduce(c), points=10, seed=seed)
    assert depth_reduce(c).depth <= depth_bound(c.size, d)
    f = expand_to_polynomial(c)[0]
    grads = expand_to_polynomial(derivatives(c))
    assert grads[0] == f
    for k in range(c.nvars):
        assert grads[1 + k] == f.partial(k)
    q, dq = polynomial_quotient_circuit(rng)
    assert evaluation_equal(q, push_divisions(q), points=10, seed=seed)
    assert evaluation_equal(q, eliminate_divisions(q, dq), points=10, seed=seed)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_from_polynomial_roundtrip(seed):
    from helpers import random_polynomial
    f = random_polynomial(random.Random(seed))
    assert expand_to_polynomial(from_polynomial(f, 3)) == [f]
