"""Certified isolation of the zeros of P_n in (-1, 0].

Every P_n (n >= 1) vanishes at 0, every even-degree P_n also at -1/2; all
remaining zeros are simple, lie in (-1, 0), come in pairs symmetric about
-1/2, and interlace with the zeros of P_{n-1}.  Isolation exploits that
structure: the certified zeros of P_{n-1} separate the zeros of P_n, each
separated bracket is certified by an exact sign change of the deflated
polynomial Q_n = P_n/x, and plain bisection (exact dyadic midpoints, exact
signs) narrows it to the requested width.  No Newton polishing, no Sturm
sequences: exact sign evaluation makes bisection unconditionally correct.

Sign evaluation is staged for speed: an MPFR Horner pass at PREC bits with
a rigorous forward-error cap certifies the sign whenever the value clears
the cap; the rare inconclusive cases (points nearly or exactly on a zero)
fall back to exact big-integer Horner.  Zeros cluster doubly-exponentially
at both ends of the interval (the smallest nonzero zero of P_n sits near
-2^-n), so midpoints of the previous enclosures are supplemented with
dyadic ladder points -2^-j and -1+2^-j; a global flip count equal to
deg Q_n then certifies that every bracket holds exactly one zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import gmpy2

from .errors import BracketFailure, DomainViolation, Indeterminate
from .polynomials import GeometricPolynomial, polynomials

#: Default enclosure width; downstream weight computations need ~1e-20 zeros.
DEFAULT_WIDTH = Fraction(1, 2**80)

#: Precision ladder (bits) of the certified floating filter.  Horner on
#: Q_n(x) for x in (-1, 0) cancels roughly n*log2(n) bits against the
#: positive-coefficient scale Q_n(|x|), so the filter escalates geometrically
#: and only truly singular points (exact zeros) reach the integer path.
_LEVELS = (352, 704, 1408, 2816, 5632, 11264, 22528)

_HALF = Fraction(-1, 2)


def _dyadic(x: Fraction) -> tuple[int, int]:
    """Write x as num/2^e.  All isolation points are dyadic by construction."""
    den = x.denominator
    e = den.bit_length() - 1
    if (1 << e) != den:
        raise ValueError(f"{x} is not dyadic")
    return x.numerator, e


def _snap_point(lo: Fraction, hi: Fraction) -> Fraction:
    """Shallowest dyadic strictly inside (lo, hi), nearest the center.

    Separators taken straight from enclosure midpoints inherit the previous
    generation's dyadic depth and every isolation step would add its own
    bisection depth on top, so denominators would grow linearly with n.
    Snapping keeps the depth at the scale the gap itself requires.  Ties go
    to even numerators, which commutes with x -> -1-x and so preserves the
    exact mirror symmetry of the resulting enclosures.
    """
    s = 0
    while True:
        den = 1 << s
        k_lo = (lo.numerator * den) // lo.denominator + 1
        k_hi = -((-hi.numerator * den) // hi.denominator) - 1
        if k_lo <= k_hi:
            center2 = (lo + hi) * den  # twice the center, in grid units
            best = min(
                range(k_lo, k_hi + 1),
                key=lambda k: (abs(Fraction(2 * k) - center2), k % 2),
            )
            return Fraction(best, den)
        s += 1


def dyadic_decimal(x: Fraction) -> str:
    """Exact finite decimal expansion of a dyadic rational."""
    num, e = _dyadic(x)
    if e == 0:
        return str(num)
    digits = str(abs(num) * 5**e).rjust(e + 1, "0")
    head, tail = digits[:-e], digits[-e:]
    tail = tail.rstrip("0") or "0"
    return ("-" if num < 0 else "") + head + "." + tail


class _SignOracle:
    """Certified sign of Q_n = P_n/x at dyadic rationals.

    A value whose magnitude clears a rigorous Horner forward-error cap has a
    certified sign; otherwise the evaluation escalates through _LEVELS and,
    as a last resort, runs exact integer Horner.  Q_n has positive
    coefficients, so the error-bound numerator sum |q_k| |x|^k is just
    Q_n(|x|): one cheap extra pass at the base level, reused by all levels.
    """

    __slots__ = ("degree", "_ints_rev", "_lead_int", "_float_cache")

    def __init__(self, poly: GeometricPolynomial):
        q = poly.q_coeffs()
        self.degree = len(q) - 1
        ints = tuple(gmpy2.mpz(c) for c in q)
        self._ints_rev = tuple(reversed(ints[:-1]))
        self._lead_int = ints[-1]
        self._float_cache: dict[int, tuple] = {}

    def _floats(self, prec: int):
        got = self._float_cache.get(prec)
        if got is None:
            with gmpy2.context(precision=prec):
                lead = gmpy2.mpfr(self._lead_int)
                rev = tuple(gmpy2.mpfr(c) for c in self._ints_rev)
            got = self._float_cache[prec] = (lead, rev)
        return got

    def value_at(self, num: int, e: int, prec: int):
        """Horner value of Q_n(num/2^e) in MPFR at the given precision."""
        lead, rev = self._floats(prec)
        with gmpy2.context(precision=prec):
            x = gmpy2.div_2exp(gmpy2.mpfr(num), e)
            v = lead
            for c in rev:
                v = v * x + c
            return v

    def scale_bound(self, num: int, e: int):
        """Upper bound on sum |q_k| (|num|/2^e)^k, monotone in |num|/2^e."""
        with gmpy2.context(precision=_LEVELS[0]):
            return self.value_at(abs(num), e, _LEVELS[0]) * (1 + gmpy2.exp2(-64))

    def sign(self, num: int, e: int, scale=None, start_level: int = 0):
        """Certified sign, returned together with the level that decided it.

        ``scale`` must upper-bound sum |q_k| |x'|^k for every x' at which
        this oracle will be queried under the same bound (it is monotone in
        |x'|, so the widest point of a bracket serves the whole bracket).
        """
        if scale is None:
            scale = self.scale_bound(num, e)
        margin = 8 * (self.degree + 1)
        for lvl in range(start_level, len(_LEVELS)):
            prec = _LEVELS[lvl]
            if num.bit_length() >= prec - 4:
                continue  # num/2^e not exactly representable at this level
            v = self.value_at(num, e, prec)
            cap = gmpy2.mul_2exp(scale * margin, -prec)
            if abs(v) > cap:
                return (1 if v > 0 else -1), lvl
        return self.exact_sign(num, e), len(_LEVELS)

    def exact_sign(self, num: int, e: int) -> int:
        """Sign of Q_n(num/2^e) via integer Horner on 2^(e*d) Q_n(x)."""
        acc = self._lead_int
        shift = 0
        for c in self._ints_rev:
            shift += e
            acc = acc * num + (c << shift)
        return (acc > 0) - (acc < 0)


@dataclass(frozen=True)
class ZeroSet:
    """The zeros of P_n: exact structural zeros plus certified enclosures.

    ``structural`` holds the exact rational zeros (always 0; also -1/2 when
    n is even).  Each enclosure [lo, hi] lies strictly inside (-1, 0), has
    width at most ``width``, and carries an implicit sign certificate:
    sign P_n(lo) * sign P_n(hi) = -1, recomputable by exact evaluation.
    """

    poly: GeometricPolynomial
    structural: tuple[Fraction, ...]
    enclosures: tuple[tuple[Fraction, Fraction], ...]
    width: Fraction

    def __post_init__(self):
        n = self.poly.degree
        if len(self.structural) + len(self.enclosures) != (n if n >= 1 else 0):
            raise ValueError("zero count must equal the degree")
        for lo, hi in self.enclosures:
            if not (-1 < lo < hi < 0):
                raise ValueError("enclosures must lie strictly inside (-1, 0)")
            if hi - lo > self.width:
                raise ValueError("enclosure wider than the declared bound")

    @property
    def degree(self) -> int:
        return self.poly.degree

    def representatives(self) -> tuple[Fraction, ...]:
        """All n zeros as exact points or enclosure midpoints, ascending."""
        reps = list(self.structural) + [(lo + hi) / 2 for lo, hi in self.enclosures]
        return tuple(sorted(reps))

    def nonzero_intervals(self) -> tuple[tuple[Fraction, Fraction], ...]:
        """Nonzero zeros as intervals (structural ones degenerate), ascending."""
        items = [(s, s) for s in self.structural if s != 0]
        items.extend(self.enclosures)
        return tuple(sorted(items))

    def to_json(self) -> dict:
        zeros = []
        for lo, hi in self.nonzero_intervals():
            if lo == hi:
                zeros.append({"exact": "-1/2"})
            else:
                zeros.append({"lo": dyadic_decimal(lo), "hi": dyadic_decimal(hi)})
        zeros.append({"exact": "0"})
        return {"n": self.degree, "zeros": zeros}


def base_zero_set(width: Fraction = DEFAULT_WIDTH) -> ZeroSet:
    """ZeroSet of P_1 = x: the single structural zero at the origin."""
    return ZeroSet(polynomials(1)[1], (Fraction(0),), (), Fraction(width))


def _bisect_bracket(oracle: _SignOracle, lo: Fraction, hi: Fraction, s_lo: int,
                    width: Fraction):
    """Narrow a certified bracket to the target width, keeping endpoints
    strictly inside (-1, 0).

    The error-bound scale and the filter level that last succeeded are both
    reused across midpoints: cancellation changes little within a bracket.
    """
    num_lo, e_lo = _dyadic(lo)
    num_hi, e_hi = _dyadic(hi)
    e = max(e_lo, e_hi)
    a = num_lo << (e - e_lo)
    b = num_hi << (e - e_hi)
    scale = oracle.scale_bound(max(abs(a), abs(b)), e)
    level = 0
    wnum, wden = width.numerator, width.denominator
    while (b - a) * wden > wnum << e or a <= -(1 << e) or b >= 0:
        m = a + b  # midpoint at scale e+1
        s, level = oracle.sign(m, e + 1, scale, level)
        if s == 0:
            return _enclose_exact_hit(oracle, m, e + 1, width)
        if s == s_lo:
            a, b, e = m, b << 1, e + 1
        else:
            a, b, e = a << 1, m, e + 1
    return Fraction(a, 1 << e), Fraction(b, 1 << e)


def _enclose_exact_hit(oracle: _SignOracle, num: int, e: int, width: Fraction):
    """A bisection midpoint landed exactly on a zero; wrap it symmetrically."""
    t = e
    while (1 << t) * width.numerator < 4 * width.denominator:
        t += 1
    p = num << (t - e)
    for _ in range(300):
        s_lo, _ = oracle.sign(p - 1, t)
        s_hi, _ = oracle.sign(p + 1, t)
        if s_lo != 0 and s_hi == -s_lo:
            return Fraction(p - 1, 1 << t), Fraction(p + 1, 1 << t)
        p <<= 1
        t += 1
    raise BracketFailure("could not certify a sign change around an exact hit")


def isolate(p_n: GeometricPolynomial, prev: ZeroSet, width) -> ZeroSet:
    """Isolate all zeros of P_n given a valid ZeroSet for P_{n-1}.

    Raises BracketFailure if the expected sign-change pattern cannot be
    exhibited, which a valid ``prev`` makes impossible.
    """
    width = Fraction(width)
    if width <= 0:
        raise DomainViolation("width must be positive")
    n = p_n.degree
    if n < 1:
        raise DomainViolation("P_0 has no zeros to isolate")
    if prev.degree != n - 1:
        raise DomainViolation("prev must describe the zeros of P_{n-1}")
    return _isolate_inner(p_n, prev, width)


def _isolate_inner(p_n: GeometricPolynomial, prev: ZeroSet, width: Fraction) -> ZeroSet:
    n = p_n.degree
    oracle = _SignOracle(p_n)

    cands = {Fraction(-1), Fraction(0)}
    for lo, hi in prev.enclosures:
        cands.add(_snap_point(lo, hi))
    for s in prev.structural:
        if s != 0:
            cands.add(s)
    jmax = n + 3
    cands.update(_ladder_points(2, jmax))
    if n % 2 == 0:
        cands.discard(_HALF)  # exact zero of even Q_n; its bracket is detected below

    signs: dict[Fraction, int] = {}
    pts = _admit(sorted(cands), oracle, signs, width)

    for _ in range(64):
        flips = sum(
            1 for u, v in zip(pts, pts[1:]) if signs[u] * signs[v] < 0
        )
        if flips == n - 1:
            break
        fresh = [
            (u + v) / 2
            for u, v in zip(pts, pts[1:])
            if signs[u] * signs[v] > 0 and v - u > width / 4
        ]
        jmax = min(2 * jmax, 16 * n + 64)
        fresh.extend(p for p in _ladder_points(2, jmax) if p not in signs)
        if not fresh:
            raise BracketFailure(f"cannot separate the zeros of P_{n}")
        pts = _admit(sorted(set(pts) | set(fresh)), oracle, signs, width)
    else:
        raise BracketFailure(f"cannot separate the zeros of P_{n}")

    structural = [Fraction(0)]
    enclosures = []
    for u, v in zip(pts, pts[1:]):
        if signs[u] * signs[v] > 0:
            continue
        if n % 2 == 0 and u < _HALF < v:
            if oracle.exact_sign(-1, 1) != 0:
                raise BracketFailure("expected an exact zero at -1/2")
            structural.append(_HALF)
            continue
        enclosures.append(_bisect_bracket(oracle, u, v, signs[u], width))
    return ZeroSet(p_n, tuple(sorted(structural)), tuple(sorted(enclosures)), width)


def _ladder_points(j_lo: int, j_hi: int):
    """Dyadic probes -2^-j and -1+2^-j covering both accumulation ends."""
    pts = []
    for j in range(j_lo, j_hi + 1):
        d = 1 << j
        pts.append(Fraction(-1, d))
        pts.append(Fraction(-(d - 1), d))
    return pts


def _admit(pts: list[Fraction], oracle: _SignOracle, signs: dict, width: Fraction) -> list[Fraction]:
    """Evaluate signs at new points; displace any point that hits a zero."""
    out = []
    for p in pts:
        if p not in signs:
            num, e = _dyadic(p)
            signs[p] = oracle.sign(num, e)[0]
        if signs[p] != 0:
            out.append(p)
            continue
        delta = width / 4
        for _ in range(200):
            left, right = p - delta, p + delta
            for q in (left, right):
                if q not in signs:
                    num, e = _dyadic(q)
                    signs[q] = oracle.sign(num, e)[0]
            if signs[left] != 0 and signs[right] == -signs[left]:
                out.extend((left, right))
                break
            delta /= 2
        else:
            raise BracketFailure("cannot displace a candidate off an exact zero")
    return sorted(set(out))


def refine(zs: ZeroSet, width) -> ZeroSet:
    """Narrow every enclosure to the given width by continued bisection.

    Structural zeros are untouched; refining to a width already met is a
    no-op, so the operation is idempotent.
    """
    width = Fraction(width)
    if width <= 0:
        raise DomainViolation("width must be positive")
    return _refine_selected(zs, width, range(len(zs.enclosures)), min(zs.width, width))


def _refine_selected(zs: ZeroSet, width: Fraction, indices, declared: Fraction) -> ZeroSet:
    oracle = _SignOracle(zs.poly)
    enclosures = list(zs.enclosures)
    for i in set(indices):
        lo, hi = enclosures[i]
        if hi - lo <= width:
            continue
        num, e = _dyadic(lo)
        s_lo, _ = oracle.sign(num, e)
        enclosures[i] = _bisect_bracket(oracle, lo, hi, s_lo, width)
    return ZeroSet(zs.poly, zs.structural, tuple(enclosures), declared)


def verify_interlace(zs_n: ZeroSet, zs_prev: ZeroSet) -> bool:
    """True iff strictly between consecutive nonzero zeros of P_n lies
    exactly one zero of P_{n-1}.

    Raises Indeterminate when enclosures of the two sets overlap, carrying
    the offending enclosure indices so that the caller can refine them.
    """
    if zs_n.degree != zs_prev.degree + 1:
        raise DomainViolation("degrees must differ by exactly one")
    tagged = []
    for tag, zs in (("upper", zs_n), ("lower", zs_prev)):
        positions = {pair: i for i, pair in enumerate(zs.enclosures)}
        for lo, hi in zs.nonzero_intervals():
            idx = positions.get((lo, hi))
            tagged.append((lo, hi, tag, idx))
    tagged.sort(key=lambda t: (t[0], t[1]))
    overlaps = []
    for cur, nxt in zip(tagged, tagged[1:]):
        if cur[1] > nxt[0]:
            overlaps.append(((cur[2], cur[3]), (nxt[2], nxt[3])))
    if overlaps:
        raise Indeterminate("overlapping enclosures; refine and retry", overlaps)
    pattern = [t[2] for t in tagged]
    expected = ["upper" if i % 2 == 0 else "lower" for i in range(len(pattern))]
    return pattern == expected


class ZeroLadder:
    """Inductive, cached isolation of ZeroSet(1..n).

    Requesting degree n implicitly builds (and keeps) every lower degree,
    since isolation is driven by interlacing with the previous set.
    """

    def __init__(self, width=DEFAULT_WIDTH):
        width = Fraction(width)
        if width <= 0:
            raise DomainViolation("width must be positive")
        self.width = width
        self._sets: list[ZeroSet | None] = [None]  # P_0 has no zeros

    def zero_set(self, n: int) -> ZeroSet:
        if n < 1:
            raise DomainViolation("zero sets exist for n >= 1")
        polys = polynomials(n)
        if len(self._sets) == 1:
            self._sets.append(base_zero_set(self.width))
        while len(self._sets) <= n:
            k = len(self._sets)
            self._sets.append(isolate(polys[k], self._sets[k - 1], self.width))
        return self._sets[n]

    def interlace_verified(self, n: int, max_rounds: int = 400) -> bool:
        """verify_interlace(n, n-1), refining overlapping enclosures on demand.

        Zeros of consecutive polynomials near the interval ends differ by
        factors close to 2 at scales far below the default width, so a few
        hundred targeted halvings can be needed for large n.
        """
        self.zero_set(n)
        for _ in range(max_rounds):
            try:
                return verify_interlace(self._sets[n], self._sets[n - 1])
            except Indeterminate as exc:
                for tag, degree in (("upper", n), ("lower", n - 1)):
                    idx = sorted({
                        i for pair in exc.overlaps for t, i in pair
                        if t == tag and i is not None
                    })
                    if idx:
                        zs = self._sets[degree]
                        target = min(zs.enclosures[i][1] - zs.enclosures[i][0] for i in idx) / 256
                        self._sets[degree] = _refine_selected(zs, target, idx, zs.width)
        raise Indeterminate("interlace verification did not converge", ())
