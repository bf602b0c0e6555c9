"""Exact rational evaluation of the sign-deciding integral of g.

g(x) = (1 + 2 alpha' - c sqrt(x)) x^alpha prod (abar_l^2 - x)^m_l on [0, V_c].
Under x = u^2 the integrand g(u^2) 2u is a polynomial in u because
2 alpha = N_F - 1 is an integer, so the integral is a rational number.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable

from .ke_ode import OdeParams

__all__ = [
    "RationalPolynomial",
    "Sign",
    "SignIntegralResult",
    "build_g",
    "sign_integral",
    "g_zero_crossing",
]


class RationalPolynomial:
    """Polynomial with Fraction coefficients; ``coeffs[k]`` multiplies u^k."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[Fraction | int] = ()):
        c = [Fraction(x) for x in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.coeffs: tuple[Fraction, ...] = tuple(c)

    @classmethod
    def monomial(cls, degree: int, coeff: Fraction | int = 1) -> "RationalPolynomial":
        if degree < 0:
            raise ValueError("negative degree")
        return cls([0] * degree + [coeff])

    @property
    def degree(self) -> int:
        """Degree, with -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = RationalPolynomial([other])
        return isinstance(other, RationalPolynomial) and self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __repr__(self) -> str:
        return f"RationalPolynomial({[str(c) for c in self.coeffs]})"

    @staticmethod
    def _lift(x) -> "RationalPolynomial":
        return x if isinstance(x, RationalPolynomial) else RationalPolynomial([x])

    def __add__(self, other) -> "RationalPolynomial":
        o = self._lift(other)
        n = max(len(self.coeffs), len(o.coeffs))
        a = self.coeffs + (Fraction(0),) * (n - len(self.coeffs))
        b = o.coeffs + (Fraction(0),) * (n - len(o.coeffs))
        return RationalPolynomial(x + y for x, y in zip(a, b))

    __radd__ = __add__

    def __neg__(self) -> "RationalPolynomial":
        return RationalPolynomial(-x for x in self.coeffs)

    def __sub__(self, other) -> "RationalPolynomial":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "RationalPolynomial":
        return self._lift(other) - self

    def __mul__(self, other) -> "RationalPolynomial":
        o = self._lift(other)
        if self.is_zero() or o.is_zero():
            return RationalPolynomial()
        out = [Fraction(0)] * (len(self.coeffs) + len(o.coeffs) - 1)
        for i, x in enumerate(self.coeffs):
            if x:
                for j, y in enumerate(o.coeffs):
                    if y:
                        out[i + j] += x * y
        return RationalPolynomial(out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "RationalPolynomial":
        if not isinstance(n, int) or n < 0:
            raise ValueError("exponent must be a non-negative integer")
        result, base = RationalPolynomial([1]), self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def derivative(self) -> "RationalPolynomial":
        return RationalPolynomial(k * c for k, c in enumerate(self.coeffs) if k)

    def antiderivative(self) -> "RationalPolynomial":
        """The antiderivative vanishing at 0."""
        return RationalPolynomial([0] + [c / (k + 1) for k, c in enumerate(self.coeffs)])

    def __call__(self, u: Fraction | int) -> Fraction:
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * u + c
        return acc

    def definite_integral(self, lo: Fraction | int, hi: Fraction | int) -> Fraction:
        F = self.antiderivative()
        return F(Fraction(hi)) - F(Fraction(lo))

    def sign_changes(self, lo: Fraction, hi: Fraction, samples: int) -> list[tuple[Fraction, Fraction]]:
        """Sub-intervals of an exact uniform partition of ]lo, hi[ on which the sign flips.

        Samples where the polynomial vanishes exactly are stepped over, so a
        root on a sample point is reported once, by the interval around it.
        """
        pts = [lo + (hi - lo) * Fraction(k, samples) for k in range(1, samples)]
        out = []
        prev = None
        for p in pts:
            v = self(p)
            if v == 0:
                continue
            if prev is not None and (prev[1] > 0) != (v > 0):
                out.append((prev[0], p))
            prev = (p, v)
        return out


class Sign(str, Enum):
    NEGATIVE = "Negative"
    ZERO = "Zero"
    POSITIVE = "Positive"

    @classmethod
    def of(cls, value: Fraction) -> "Sign":
        return cls.NEGATIVE if value < 0 else cls.POSITIVE if value > 0 else cls.ZERO


@dataclass(frozen=True)
class SignIntegralResult:
    value: Fraction
    sign: Sign
    integrand_degree: int

    def __post_init__(self) -> None:
        if self.sign is not Sign.of(self.value):
            raise ValueError("sign does not match value")

    def to_json(self) -> dict:
        return {
            "value": {"numerator": str(self.value.numerator), "denominator": str(self.value.denominator)},
            "sign": self.sign.value,
            "integrand_degree": self.integrand_degree,
        }


def _half_integer_power(alpha: Fraction) -> int:
    two_alpha = 2 * alpha
    if two_alpha.denominator != 1 or two_alpha < 0:
        raise ValueError(f"2 alpha = {two_alpha} is not a non-negative integer")
    return int(two_alpha)


def build_g(params: OdeParams) -> RationalPolynomial:
    """p(u) = g(u^2) 2u = 2 (1 + 2 alpha' - c u) u^(2 alpha + 1) prod (abar^2 - u^2)^m."""
    n = _half_integer_power(params.alpha) + 1
    p = RationalPolynomial([2 * (1 + 2 * params.alpha_prime), -2 * params.c_hat]) * RationalPolynomial.monomial(n)
    for a, m in params.a_bars:
        if m:
            p = p * RationalPolynomial([a * a, 0, -1]) ** m
    return p


def _sqrt_ceiling(params: OdeParams) -> Fraction:
    r = params.sqrt_V_ceiling
    if r * r != params.V_ceiling:
        raise AssertionError("ceiling is not the square of 2(1 + alpha')/c")
    return r


def sign_integral(params: OdeParams) -> SignIntegralResult:
    """I = int_0^{V_c} g(x) dx = int_0^{sqrt V_c} p(u) du, exactly."""
    p = build_g(params)
    value = p.definite_integral(0, _sqrt_ceiling(params))
    return SignIntegralResult(value, Sign.of(value), p.degree)


def g_zero_crossing(params: OdeParams) -> Fraction:
    """The x where the linear factor 1 + 2 alpha' - c sqrt(x) vanishes."""
    return ((1 + 2 * params.alpha_prime) / params.c_hat) ** 2

