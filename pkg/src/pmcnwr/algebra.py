"""Exact multivariate polynomials and rational functions over the rationals.

Coefficients are GMP rationals (``gmpy2.mpq``), always in lowest terms.
A monomial is a tuple of exponents with trailing zeros trimmed, so the
empty tuple is the constant monomial and plain tuple comparison orders
monomials lexicographically.  Polynomials are immutable.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from gmpy2 import mpq

Rational = type(mpq(0))

MAX_EXPONENT = 2**32

ZERO = mpq(0)
ONE = mpq(1)


class AlgebraError(ValueError):
    """Raised for malformed polynomials or failed exact operations."""


def to_rational(x) -> Rational:
    """Convert ints, Fractions, mpq values and strings like ``"3/4"`` or ``"0.25"``."""
    if isinstance(x, Rational):
        return x
    if isinstance(x, bool):
        raise AlgebraError("booleans are not coefficients")
    if isinstance(x, int):
        return mpq(x)
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    if isinstance(x, str):
        s = x.strip()
        try:
            if "/" in s:
                num, den = s.split("/")
                d = int(den)
                if d == 0:
                    raise AlgebraError(f"zero denominator in {x!r}")
                return mpq(int(num), d)
            return mpq(Fraction(s))
        except (ValueError, ZeroDivisionError) as exc:
            raise AlgebraError(f"not a rational number: {x!r}") from exc
    if isinstance(x, float):
        raise AlgebraError("floats are not exact; pass a string or Fraction")
    try:
        return mpq(x)
    except (TypeError, ValueError) as exc:
        raise AlgebraError(f"cannot convert {x!r} to a rational") from exc


def rational_str(c) -> str:
    """Render a rational as ``a`` or ``a/b``."""
    return str(to_rational(c))


def _trim(m: tuple) -> tuple:
    k = len(m)
    while k and m[k - 1] == 0:
        k -= 1
    return m if k == len(m) else m[:k]


def _mono_mul(a: tuple, b: tuple) -> tuple:
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return a
    return tuple([x + y for x, y in zip(a, b)]) + a[len(b):]


def grlex_key(m: tuple):
    """Graded-lexicographic sort key of a monomial."""
    return (sum(m), m)


class Polynomial:
    """A sparse polynomial ``{monomial: coefficient}`` with no zero coefficients."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[tuple, object] | Iterable[tuple[tuple, object]] = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[tuple, Rational] = {}
        for mono, coeff in items:
            mono = tuple(int(e) for e in mono)
            for e in mono:
                if e < 0:
                    raise AlgebraError("negative exponent")
                if e >= MAX_EXPONENT:
                    raise AlgebraError("exponent overflow")
            mono = _trim(mono)
            c = to_rational(coeff)
            if mono in acc:
                acc[mono] += c
            else:
                acc[mono] = c
        self._terms = {m: c for m, c in acc.items() if c != 0}
        self._hash = None

    @classmethod
    def _raw(cls, terms: dict) -> "Polynomial":
        p = object.__new__(cls)
        p._terms = terms
        p._hash = None
        return p

    # constructors

    @classmethod
    def zero(cls) -> "Polynomial":
        return cls._raw({})

    @classmethod
    def one(cls) -> "Polynomial":
        return cls._raw({(): ONE})

    @classmethod
    def constant(cls, c) -> "Polynomial":
        c = to_rational(c)
        return cls._raw({(): c} if c != 0 else {})

    @classmethod
    def var(cls, k: int, power: int = 1) -> "Polynomial":
        if k < 0:
            raise AlgebraError("variable index must be non-negative")
        if power == 0:
            return cls.one()
        return cls._raw({(0,) * k + (power,): ONE})

    # inspection

    @property
    def terms(self) -> tuple[tuple[tuple, Rational], ...]:
        """Terms in descending graded-lex order (the canonical order)."""
        return tuple(sorted(self._terms.items(), key=lambda t: grlex_key(t[0]), reverse=True))

    def items(self):
        return self._terms.items()

    def coefficient(self, mono: tuple) -> Rational:
        return self._terms.get(_trim(tuple(mono)), ZERO)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return not self._terms or (len(self._terms) == 1 and () in self._terms)

    def constant_value(self) -> Rational:
        return self._terms.get((), ZERO)

    @property
    def nvars(self) -> int:
        """One more than the largest variable index that occurs."""
        return max((len(m) for m in self._terms), default=0)

    def variables(self) -> set[int]:
        out = set()
        for m in self._terms:
            out.update(i for i, e in enumerate(m) if e)
        return out

    def degree(self) -> int:
        return max((sum(m) for m in self._terms), default=0)

    def degree_in(self, k: int) -> int:
        return max((m[k] if k < len(m) else 0 for m in self._terms), default=0)

    def support_size(self) -> int:
        return len(self._terms)

    def max_coeff(self) -> int:
        """Largest absolute numerator or denominator over all coefficients."""
        best = 0
        for c in self._terms.values():
            best = max(best, abs(int(c.numerator)), int(c.denominator))
        return best

    def reps(self) -> int:
        """Representation size |supp| * deg * ceil(log2(coeff + 1))."""
        if not self._terms:
            return 0
        bits = math.ceil(math.log2(self.max_coeff() + 1))
        return self.support_size() * self.degree() * bits

    def leading_term(self) -> tuple[tuple, Rational]:
        if not self._terms:
            raise AlgebraError("zero polynomial has no leading term")
        m = max(self._terms, key=grlex_key)
        return m, self._terms[m]

    # arithmetic

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other)
        if not other._terms:
            return self
        if not self._terms:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            s = out.get(m)
            if s is None:
                out[m] = c
            else:
                s = s + c
                if s:
                    out[m] = s
                else:
                    del out[m]
        return Polynomial._raw(out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other)
        return self + (-other)

    def __rsub__(self, other):
        return Polynomial.constant(other) - self

    def scale(self, c) -> "Polynomial":
        c = to_rational(c)
        if c == 0:
            return Polynomial.zero()
        if c == 1:
            return self
        return Polynomial._raw({m: c * v for m, v in self._terms.items()})

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return self.scale(other)
        a, b = self._terms, other._terms
        if not a or not b:
            return Polynomial.zero()
        if len(a) < len(b):
            a, b = b, a
        out: dict[tuple, Rational] = {}
        get = out.get
        for m2, c2 in b.items():
            for m1, c1 in a.items():
                m = _mono_mul(m1, m2)
                s = get(m)
                out[m] = c1 * c2 if s is None else s + c1 * c2
        return Polynomial._raw({m: c for m, c in out.items() if c})

    __rmul__ = __mul__

    def __pow__(self, e: int):
        if not isinstance(e, int) or e < 0:
            raise AlgebraError("only non-negative integer powers")
        result = Polynomial.one()
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def partial(self, k: int) -> "Polynomial":
        out = {}
        for m, c in self._terms.items():
            if k < len(m) and m[k]:
                e = m[k]
                nm = _trim(m[:k] + (e - 1,) + m[k + 1:])
                out[nm] = out.get(nm, ZERO) + c * e
        return Polynomial._raw({m: c for m, c in out.items() if c})

    def evaluate(self, point: Sequence) -> Rational:
        """Exact value at ``point`` (a sequence of rationals indexed by variable)."""
        total = ZERO
        powers: dict[tuple[int, int], Rational] = {}
        for m, c in self._terms.items():
            t = c
            for k, e in enumerate(m):
                if e:
                    key = (k, e)
                    p = powers.get(key)
                    if p is None:
                        try:
                            x = point[k]
                        except IndexError:
                            raise AlgebraError(f"point has no value for x{k}") from None
                        p = powers[key] = mpq(x) ** e
                    t = t * p
            total += t
        return total

    def exact_divide(self, divisor: "Polynomial") -> "Polynomial":
        """Quotient of an exact division; raises if ``divisor`` does not divide."""
        if divisor.is_zero():
            raise AlgebraError("division by the zero polynomial")
        if divisor.is_constant():
            return self.scale(1 / divisor.constant_value())
        lm, lc = divisor.leading_term()
        rem = dict(self._terms)
        quot: dict[tuple, Rational] = {}
        dterms = list(divisor._terms.items())
        while rem:
            m = max(rem, key=grlex_key)
            if len(m) < len(lm) and any(lm[i] > 0 for i in range(len(m), len(lm))):
                raise AlgebraError("division is not exact")
            qm = []
            for i in range(max(len(m), len(lm))):
                e = (m[i] if i < len(m) else 0) - (lm[i] if i < len(lm) else 0)
                if e < 0:
                    raise AlgebraError("division is not exact")
                qm.append(e)
            qm = _trim(tuple(qm))
            qc = rem[m] / lc
            quot[qm] = qc
            for dm, dc in dterms:
                mm = _mono_mul(qm, dm)
                v = rem.get(mm, ZERO) - qc * dc
                if v:
                    rem[mm] = v
                else:
                    rem.pop(mm, None)
        return Polynomial._raw(quot)

    # comparison and hashing

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self._terms == other._terms
        if isinstance(other, (int, Rational, Fraction)):
            return self._terms == Polynomial.constant(other)._terms
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __bool__(self):
        return bool(self._terms)

    # rendering

    def format(self, names: Sequence[str] | None = None, power: str = "^") -> str:
        if not self._terms:
            return "0"
        parts = []
        for i, (m, c) in enumerate(self.terms):
            neg = c < 0
            a = -c if neg else c
            factors = []
            for k, e in enumerate(m):
                if not e:
                    continue
                name = names[k] if names is not None else f"x{k}"
                if e == 1:
                    factors.append(name)
                elif power == "*":
                    factors.append("*".join([name] * e))
                else:
                    factors.append(f"{name}{power}{e}")
            body = "*".join(factors)
            if not body:
                body = str(a)
            elif a != 1:
                body = f"{a}*{body}"
            if i == 0:
                parts.append(("-" if neg else "") + body)
            else:
                parts.append((" - " if neg else " + ") + body)
        return "".join(parts)

    def __str__(self):
        return self.format()

    def __repr__(self):
        return f"Polynomial({self.format()!r})"


class RationalFunction:
    """A quotient ``num / den`` of polynomials; equality is by cross-multiplication."""

    __slots__ = ("num", "den")

    def __init__(self, num: Polynomial, den: Polynomial | None = None):
        if den is None:
            den = Polynomial.one()
        if den.is_zero():
            raise AlgebraError("zero denominator")
        self.num = num
        self.den = den

    def _coerce(self, other) -> "RationalFunction":
        if isinstance(other, RationalFunction):
            return other
        if isinstance(other, Polynomial):
            return RationalFunction(other)
        return RationalFunction(Polynomial.constant(other))

    def __add__(self, other):
        o = self._coerce(other)
        if self.den == o.den:
            return RationalFunction(self.num + o.num, self.den)
        return RationalFunction(self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction(-self.num, self.den)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        return RationalFunction(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o.num.is_zero():
            raise AlgebraError("division by the zero rational function")
        return RationalFunction(self.num * o.den, self.den * o.num)

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def evaluate(self, point: Sequence) -> Rational:
        d = self.den.evaluate(point)
        if d == 0:
            raise AlgebraError("denominator vanishes at the given point")
        return self.num.evaluate(point) / d

    def partial(self, k: int) -> "RationalFunction":
        return RationalFunction(
            self.num.partial(k) * self.den - self.num * self.den.partial(k), self.den * self.den
        )

    def as_polynomial(self) -> Polynomial:
        """Exact polynomial value, if the denominator divides the numerator."""
        return self.num.exact_divide(self.den)

    def __eq__(self, other):
        if not isinstance(other, (RationalFunction, Polynomial, int, Rational, Fraction)):
            return NotImplemented
        o = self._coerce(other)
        return self.num * o.den == o.num * self.den

    __hash__ = None

    def format(self, names: Sequence[str] | None = None) -> str:
        if self.den == Polynomial.one():
            return self.num.format(names)
        return f"({self.num.format(names)}) / ({self.den.format(names)})"

    def __repr__(self):
        return f"RationalFunction({self.format()!r})"


# functional aliases

def poly_add(f: Polynomial, g: Polynomial) -> Polynomial:
    return f + g


def poly_sub(f: Polynomial, g: Polynomial) -> Polynomial:
    return f - g


def poly_mul(f: Polynomial, g: Polynomial) -> Polynomial:
    return f * g


def poly_eval(f: Polynomial, point: Sequence) -> Rational:
    return f.evaluate(point)


def poly_partial_derivative(f: Polynomial, k: int) -> Polynomial:
    return f.partial(k)


def poly_exact_divide(f: Polynomial, g: Polynomial) -> Polynomial:
    return f.exact_divide(g)


def degree(f: Polynomial) -> int:
    return f.degree()


def support_size(f: Polynomial) -> int:
    return f.support_size()


def max_coeff(f: Polynomial) -> int:
    return f.max_coeff()


def reps(f: Polynomial) -> int:
    return f.reps()


def ratfn_equal(f: RationalFunction, g: RationalFunction) -> bool:
    return f == g


# parsing

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d+)?)|([A-Za-z_][A-Za-z0-9_]*)|(\*\*|[-+*/^()]))")
_DEFAULT_NAME = re.compile(r"x(\d+)$")


class _Parser:
    def __init__(self, text: str, names: Sequence[str] | None):
        self.text = text
        self.index = {n: i for i, n in enumerate(names)} if names is not None else None
        self.tokens = self._tokenize(text)
        self.pos = 0

    def _tokenize(self, text):
        tokens = []
        i = 0
        text = text.rstrip()
        while i < len(text):
            m = _TOKEN.match(text, i)
            if not m or m.end() == i:
                raise AlgebraError(f"unexpected character at position {i} in {text!r}")
            if m.group(1) is not None:
                tokens.append(("num", m.group(1)))
            elif m.group(2) is not None:
                tokens.append(("name", m.group(2)))
            else:
                op = m.group(3)
                tokens.append(("op", "^" if op == "**" else op))
            i = m.end()
        return tokens

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def parse(self) -> Polynomial:
        if not self.tokens:
            raise AlgebraError("empty polynomial")
        p = self.expr()
        if self.pos != len(self.tokens):
            raise AlgebraError(f"trailing input in {self.text!r}")
        return p

    def expr(self):
        kind, val = self.peek()
        neg = False
        if kind == "op" and val in "+-":
            self.take()
            neg = val == "-"
        p = self.term()
        if neg:
            p = -p
        while True:
            kind, val = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                t = self.term()
                p = p + t if val == "+" else p - t
            else:
                return p

    def term(self):
        p = self.factor()
        while True:
            kind, val = self.peek()
            if kind == "op" and val == "*":
                self.take()
                p = p * self.factor()
            elif kind == "op" and val == "/":
                self.take()
                d = self.factor()
                if not d.is_constant() or d.is_zero():
                    raise AlgebraError("only division by non-zero constants is allowed")
                p = p.scale(1 / d.constant_value())
            else:
                return p

    def factor(self):
        kind, val = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            f = self.factor()
            return -f if val == "-" else f
        base = self.atom()
        kind, val = self.peek()
        if kind == "op" and val == "^":
            self.take()
            kind, e = self.take()
            if kind != "num" or not e.isdigit():
                raise AlgebraError("exponent must be a non-negative integer")
            e = int(e)
            if e >= MAX_EXPONENT:
                raise AlgebraError("exponent overflow")
            base = base ** e
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return Polynomial.constant(to_rational(val))
        if kind == "name":
            if self.index is None:
                m = _DEFAULT_NAME.match(val)
                if not m:
                    raise AlgebraError(f"unknown variable {val!r}")
                return Polynomial.var(int(m.group(1)))
            if val not in self.index:
                raise AlgebraError(f"unknown variable {val!r}")
            return Polynomial.var(self.index[val])
        if kind == "op" and val == "(":
            p = self.expr()
            kind, val = self.take()
            if (kind, val) != ("op", ")"):
                raise AlgebraError(f"unbalanced parentheses in {self.text!r}")
            return p
        raise AlgebraError(f"unexpected token {val!r} in {self.text!r}")


def parse_polynomial(text: str, names: Sequence[str] | None = None) -> Polynomial:
    """Parse ``text`` such as ``"p^2 - p*r + 1/2"``.

    ``names`` maps identifiers to variable indices; without it only the
    default names ``x0, x1, ...`` are accepted.
    """
    return _Parser(text, names).parse()


def format_polynomial(f: Polynomial, names: Sequence[str] | None = None) -> str:
    return f.format(names)
