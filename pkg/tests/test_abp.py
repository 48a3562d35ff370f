import random

from hypothesis import given, settings, strategies as st

from helpers import random_circuit, random_polynomial
from pmcnwr.abp import ABP, abp_eval, abp_expand, circuit_to_abp, polynomial_to_abp, validate_abp
from pmcnwr.algebra import Polynomial, parse_polynomial
from pmcnwr.circuit import CircuitBuilder, circuit_eval, expand_to_polynomial, random_point

x, one = Polynomial.var, Polynomial.one()


def test_single_edge():
    a = ABP(1, ((0,), (1,)), ((0, 1, x(0)),))
    assert validate_abp(a) == []
    assert abp_expand(a) == x(0)


def test_two_paths_sum():
    a = ABP(2, ((0,), (1, 2), (3,)), ((0, 1, x(0)), (1, 3, one), (0, 2, one), (2, 3, x(1))))
    assert abp_eval(a, [3, 5]) == 8
    assert abp_expand(a) == x(0) + x(1)


def test_validation_problems():
    bad_label = ABP(1, ((0,), (1,)), ((0, 1, x(0) * x(0)),))
    assert any("degree 2" in p for p in validate_abp(bad_label))
    two_sinks = ABP(1, ((0,), (1, 2)), ((0, 1, x(0)), (0, 2, one)))
    assert any("sink" in p for p in validate_abp(two_sinks))
    skipping = ABP(1, ((0,), (1,), (2,)), ((0, 2, x(0)),))
    assert any("skips" in p for p in validate_abp(skipping))


def test_circuit_to_abp_examples():
    b = CircuitBuilder(2)
    x1, x2 = b.input(0), b.input(1)
    c = b.build([b.add(b.mul(x1, x2), x1)])
    a = circuit_to_abp(c)
    assert validate_abp(a) == [] and a.width <= 4
    rng = random.Random(0)
    for _ in range(50):
        p = random_point(2, rng)
        assert abp_eval(a, p) == circuit_eval(c, p)[0]

    b = CircuitBuilder(1)
    a = circuit_to_abp(b.build([b.input(0)]))
    assert a.width <= 4 and abp_expand(a) == x(0)

    b = CircuitBuilder(2)
    c = b.build([b.add(b.input(0), b.input(1))])
    a = circuit_to_abp(c)
    assert a.width <= 4 and abp_expand(a) == x(0) + x(1)


def test_circuit_to_abp_comb():
    b = CircuitBuilder(1)
    v = b.input(0)
    acc = v
    for _ in range(3):
        acc = b.mul(acc, v)
    a = circuit_to_abp(b.build([acc]))
    assert len(a.layers) - 1 <= 4 ** 3
    assert abp_expand(a) == x(0, 4)


def test_polynomial_to_abp_example():
    f = parse_polynomial("3*x0*x1 - 2*x1^2 + 1/2")
    a = polynomial_to_abp(f)
    assert validate_abp(a) == []
    assert abp_expand(a) == f


seeds = st.integers(0, 10**6)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_circuit_to_abp_property(seed):
    rng = random.Random(seed)
    c = random_circuit(rng, ngates=8, max_degree=4)
    a = circuit_to_abp(c)
    assert validate_abp(a) == []
    assert a.width <= 4
    assert abp_expand(a) == expand_to_polynomial(c)[0]


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_polynomial_to_abp_property(seed):
    f = random_polynomial(random.Random(seed))
    a = polynomial_to_abp(f, 3)
    assert validate_abp(a) == []
    assert abp_expand(a) == f
