"""Exact construction and evaluation of the geometric (Fubini) polynomials.

The family P_0 = 1, P_1 = x, P_2 = 2x^2 + x, ... is generated three
independent ways (binomial recurrence, Stirling-number coefficients, and a
derivative identity), all in arbitrary-precision integer arithmetic.  The
three generators must agree bit for bit; tests and the CLI cross-validate
them.  Floating evaluation is only ever done on the factorial-normalized
form P_n/n!, whose coefficients stay in floating range, and always returns
a rigorous relative error bound next to the value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from threading import Lock
from typing import Union

import mpmath

from .errors import DomainViolation, PrecisionLoss

#: Default working precision (bits) for normalized complex evaluation.
DEFAULT_PRECISION = 256

Rational = Union[int, Fraction]


@dataclass(frozen=True)
class GeometricPolynomial:
    """P_n with exact integer coefficients c_1..c_n (ascending powers).

    The constant term is identically zero for n >= 1 and is not stored;
    P_0 is the constant 1 with an empty coefficient tuple.
    """

    degree: int
    coeffs: tuple[int, ...]

    def __post_init__(self):
        n = self.degree
        if n < 0 or len(self.coeffs) != n:
            raise ValueError("degree and coefficient count disagree")
        if n == 0:
            return
        if self.coeffs[0] != 1:
            raise ValueError("c_1 must equal 1")
        if self.coeffs[-1] != math.factorial(n):
            raise ValueError("leading coefficient must equal n!")
        if any(c <= 0 for c in self.coeffs):
            raise ValueError("all coefficients must be positive")

    def __call__(self, x: Rational) -> Fraction:
        return eval_exact(self, x)

    def q_coeffs(self) -> tuple[int, ...]:
        """Coefficients of the deflated polynomial P_n(x)/x (degree n-1).

        Deflation is a pure reindexing: the stored c_1..c_n become the
        coefficients of degrees 0..n-1.
        """
        if self.degree == 0:
            raise DomainViolation("P_0 has no zero at the origin to deflate")
        return self.coeffs

    def derivative_coeffs(self) -> tuple[int, ...]:
        """Coefficients of P_n'(x), ascending, degree n-1 (includes constant 1)."""
        return tuple(k * c for k, c in enumerate(self.coeffs, start=1))

    def to_json(self) -> dict:
        """Export schema: coefficients as decimal strings (c_n = n! overflows
        64-bit integers from n = 21 on)."""
        return {"n": self.degree, "coeffs": [str(c) for c in self.coeffs]}


@dataclass(frozen=True)
class NormalizedPolynomial:
    """P_n/n! with exact rational coefficients; leading coefficient is 1."""

    degree: int
    coeffs: tuple[Fraction, ...]

    def __post_init__(self):
        if self.degree != len(self.coeffs):
            raise ValueError("degree and coefficient count disagree")
        if self.degree and self.coeffs[-1] != 1:
            raise ValueError("normalized leading coefficient must equal 1")

    @classmethod
    def from_geometric(cls, p: GeometricPolynomial) -> "NormalizedPolynomial":
        fact = math.factorial(p.degree)
        return cls(p.degree, tuple(Fraction(c, fact) for c in p.coeffs))


# --------------------------------------------------------------------------
# Cached triangles and polynomial ladder.  All caches are append-only lists
# of immutable tuples, guarded by a lock; rows never change once published,
# so concurrent readers are safe.
# --------------------------------------------------------------------------

_cache_lock = Lock()
_binomials: list[tuple[int, ...]] = [(1,)]
_stirlings: list[tuple[int, ...]] = [(1,)]  # row n: S(n,0..n)
_polys: list[GeometricPolynomial] = []
_normalized: list[NormalizedPolynomial] = []


def binomial_row(n: int) -> tuple[int, ...]:
    """Row n of Pascal's triangle."""
    with _cache_lock:
        while len(_binomials) <= n:
            prev = _binomials[-1]
            row = (1,) + tuple(prev[i] + prev[i + 1] for i in range(len(prev) - 1)) + (1,)
            _binomials.append(row)
        return _binomials[n]


def stirling_row(n: int) -> tuple[int, ...]:
    """Row n of the Stirling triangle of the second kind, built from
    S(n+1, k) = k*S(n, k) + S(n, k-1)."""
    with _cache_lock:
        while len(_stirlings) <= n:
            prev = _stirlings[-1]
            m = len(_stirlings)  # row being built
            row = [0] * (m + 1)
            for k in range(1, m + 1):
                row[k] = k * (prev[k] if k < len(prev) else 0) + prev[k - 1]
            _stirlings.append(tuple(row))
        return _stirlings[n]


def stirling2(n: int, k: int) -> int:
    """S(n, k), the number of partitions of an n-set into k blocks."""
    if k < 0 or k > n:
        return 0
    return stirling_row(n)[k]


def gen_recurrence(n_max: int) -> list[GeometricPolynomial]:
    """P_0..P_N via P_n(z) = z * sum_{k<n} C(n,k) P_k(z)."""
    if n_max < 0:
        raise DomainViolation("n_max must be nonnegative")
    out = [GeometricPolynomial(0, ())]
    for n in range(1, n_max + 1):
        binom = binomial_row(n)
        coeffs = [0] * n  # c_1..c_n
        coeffs[0] = binom[0]  # P_0 contributes its constant 1
        for k in range(1, n):
            ck = out[k].coeffs
            b = binom[k]
            for j, c in enumerate(ck):  # degree j+1 in P_k -> degree j+2 in P_n
                coeffs[j + 1] += b * c
        out.append(GeometricPolynomial(n, tuple(coeffs)))
    return out


def gen_stirling(n_max: int) -> list[GeometricPolynomial]:
    """P_0..P_N via the coefficient formula c_k = k! * S(n, k)."""
    if n_max < 0:
        raise DomainViolation("n_max must be nonnegative")
    out = [GeometricPolynomial(0, ())]
    for n in range(1, n_max + 1):
        row = stirling_row(n)
        out.append(GeometricPolynomial(
            n, tuple(math.factorial(k) * row[k] for k in range(1, n + 1))))
    return out


def gen_derivative(n_max: int) -> list[GeometricPolynomial]:
    """P_0..P_N via P_n(z) = z * d/dz[(1+z) P_{n-1}(z)].

    Coefficient form: c^(n)_j = j * (c^(n-1)_j + c^(n-1)_{j-1}).
    """
    if n_max < 0:
        raise DomainViolation("n_max must be nonnegative")
    out = [GeometricPolynomial(0, ())]
    for n in range(1, n_max + 1):
        prev = out[-1].coeffs

        def c_prev(j: int) -> int:
            if n - 1 == 0:
                return 1 if j == 0 else 0  # P_0 = 1
            return prev[j - 1] if 1 <= j <= n - 1 else 0

        coeffs = tuple(j * (c_prev(j) + c_prev(j - 1)) for j in range(1, n + 1))
        out.append(GeometricPolynomial(n, coeffs))
    return out


def polynomials(n_max: int) -> tuple[GeometricPolynomial, ...]:
    """Cached ladder P_0..P_N (recurrence generator); grows monotonically."""
    with _cache_lock:
        have = len(_polys) - 1
    if have < n_max:
        fresh = gen_recurrence(n_max)
        with _cache_lock:
            if len(_polys) - 1 < n_max:
                _polys[:] = fresh
    with _cache_lock:
        return tuple(_polys[: n_max + 1])


def normalized(n: int) -> NormalizedPolynomial:
    """Cached P_n/n!."""
    polynomials(n)
    with _cache_lock:
        while len(_normalized) <= n:
            _normalized.append(NormalizedPolynomial.from_geometric(_polys[len(_normalized)]))
        return _normalized[n]


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------


def eval_exact(p: GeometricPolynomial, x: Rational) -> Fraction:
    """P_n(x) by Horner's rule in exact rational arithmetic.

    The result's sign is certified: no rounding happens anywhere.
    """
    x = Fraction(x)
    if p.degree == 0:
        return Fraction(1)
    acc = Fraction(0)
    for c in reversed(p.coeffs):
        acc = acc * x + c
    return acc * x


def eval_derivative_exact(p: GeometricPolynomial, x: Rational) -> Fraction:
    """P_n'(x) exactly."""
    x = Fraction(x)
    if p.degree == 0:
        return Fraction(0)
    acc = Fraction(0)
    for c in reversed(p.derivative_coeffs()):
        acc = acc * x + c
    return acc


def _to_mp(z, prec: int):
    """Convert input to mpf/mpc at the given binary precision."""
    with mpmath.workprec(prec):
        if isinstance(z, Fraction):
            return mpmath.mpf(z.numerator) / mpmath.mpf(z.denominator)
        if isinstance(z, complex) or isinstance(z, mpmath.mpc):
            return mpmath.mpc(z)
        return mpmath.mpf(z)


def eval_normalized(p: NormalizedPolynomial, z, precision: int = DEFAULT_PRECISION,
                    tol: float | None = None):
    """Evaluate P_n(z)/n! in binary floating point of the given precision.

    Returns ``(value, bound)`` where ``bound`` is a rigorous relative error
    bound, 2^(1-precision) times the Horner condition number at z.  Since
    all coefficients are positive, the condition numerator sum |a_k| |z|^k
    is just the same polynomial evaluated at |z|.  Inside (-1, 0) the
    condition number grows exponentially with n (catastrophic cancellation);
    callers needing those points switch to exact evaluation.

    Raises PrecisionLoss when ``tol`` is given and the bound exceeds it.
    """
    if precision < 53:
        raise DomainViolation("precision must be at least 53 bits")
    n = p.degree
    if n == 0:
        return mpmath.mpf(1), mpmath.mpf(0)
    guard = precision + 10
    with mpmath.workprec(guard):
        zz = _to_mp(z, guard)
        coeffs = [mpmath.mpf(c.numerator) / mpmath.mpf(c.denominator) for c in p.coeffs]
        acc = mpmath.mpf(0)
        for c in reversed(coeffs):
            acc = acc * zz + c
        value = acc * zz
        az = abs(zz)
        sacc = mpmath.mpf(0)
        for c in reversed(coeffs):
            sacc = sacc * az + c
        smag = sacc * az
        if value == 0:
            bound = mpmath.inf if smag != 0 else mpmath.mpf(0)
        else:
            cond = (2 * n + 3) * smag / abs(value)
            bound = mpmath.mpf(2) ** (1 - precision) * cond
    if tol is not None and bound > tol:
        raise PrecisionLoss(
            f"relative error bound {mpmath.nstr(bound, 6)} exceeds tolerance {tol}")
    with mpmath.workprec(precision):
        return +value, +bound


# --------------------------------------------------------------------------
# Special values and exact identities
# --------------------------------------------------------------------------


def fubini_number(n: int) -> int:
    """P_n(1): the number of ordered set partitions of an n-set."""
    if n < 0:
        raise DomainViolation("n must be nonnegative")
    p = polynomials(n)[n]
    return 1 if n == 0 else sum(p.coeffs)


def check_symmetry(p: GeometricPolynomial, z: Rational) -> bool:
    """Exact check of (1+z) P_n(z) == (-1)^n z P_n(-1-z), n >= 1."""
    if p.degree < 1:
        raise DomainViolation("the symmetry identity needs n >= 1")
    z = Fraction(z)
    lhs = (1 + z) * eval_exact(p, z)
    rhs = (-1) ** p.degree * z * eval_exact(p, -1 - z)
    return lhs == rhs


def check_logderiv_identity(p: GeometricPolynomial, z: Rational) -> bool:
    """Exact check of P_n'(z)/P_n(z) + P_n'(-1-z)/P_n(-1-z) == 1/(z(1+z)).

    Preconditions: z not in {0, -1}, and neither z nor -1-z is a zero of P_n.
    """
    z = Fraction(z)
    if z == 0 or z == -1:
        raise DomainViolation("z must avoid 0 and -1")
    pz = eval_exact(p, z)
    pm = eval_exact(p, -1 - z)
    if pz == 0 or pm == 0:
        raise DomainViolation("z (or -1-z) is a zero of P_n")
    lhs = eval_derivative_exact(p, z) / pz + eval_derivative_exact(p, -1 - z) / pm
    return lhs == 1 / (z * (1 + z))
