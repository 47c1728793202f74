"""Shared domain types for the gap-probability library.

Interval unions model the confinement set E.  Scalars that outgrow any
fixed-exponent format (moment determinants scale like exp(n a^2 / 2) times
factorially large constants) travel as (sign, log magnitude) pairs backed by
mpmath reals, so only the working *precision* ever needs tuning, never the
representable range.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from mpmath import mp, mpf


class SourceGapError(Exception):
    """Base class for all library errors."""


class ValidationError(SourceGapError, ValueError):
    """Malformed input: bad interval list, parameter out of domain, ..."""


class UnboundedSetError(SourceGapError):
    """An operation that needs finite endpoints got an unbounded set."""


class DegenerateSourceError(SourceGapError):
    """a = 0 with k1*k2 > 0: the full-line normalization vanishes."""


class DivergentIntegrandError(SourceGapError):
    """Deformation exponent diverges on an unbounded integration set."""


class PrecisionError(SourceGapError):
    """Working precision exhausted; the result would be unreliable."""


class MissingPartialError(SourceGapError, KeyError):
    """A derivative table lacks a partial required by an operator."""


class OperatorOrderError(SourceGapError):
    """Operator composition would exceed the supported derivative order."""


class DiscretizationError(SourceGapError):
    """A discretized operator produced a structurally impossible value."""


def as_mpf(x) -> mpf:
    """Convert numbers and 'inf'/'-inf' style strings to mpf, rejecting NaN."""
    if isinstance(x, str):
        s = x.strip().lower()
        if s in ("inf", "+inf", "oo"):
            return mp.inf
        if s in ("-inf", "-oo"):
            return mp.ninf
        v = mpf(x)
    elif isinstance(x, Fraction):
        v = mpf(x.numerator) / x.denominator
    else:
        v = mpf(x)
    if mp.isnan(v):
        raise ValidationError("NaN is not a valid coordinate")
    return v


@dataclass(frozen=True)
class IntervalUnion:
    """Ordered disjoint union of real intervals, endpoints possibly infinite.

    Only the first lower endpoint may be -inf and only the last upper
    endpoint +inf.  Construct through :func:`normalize` (merging) or
    :meth:`from_endpoints` (strict, finite, used when endpoints act as
    coordinates).
    """

    intervals: tuple[tuple[mpf, mpf], ...]

    @classmethod
    def from_endpoints(cls, values: Sequence) -> "IntervalUnion":
        vals = [as_mpf(v) for v in values]
        if len(vals) % 2 != 0:
            raise ValidationError("need an even number of endpoints")
        for v in vals:
            if mp.isinf(v):
                raise ValidationError("from_endpoints requires finite values")
        for p, q in zip(vals, vals[1:]):
            if not p < q:
                raise ValidationError(f"endpoints not strictly increasing: {vals}")
        return cls(tuple((vals[i], vals[i + 1]) for i in range(0, len(vals), 2)))

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    @property
    def is_bounded(self) -> bool:
        if self.is_empty:
            return True
        return not (mp.isinf(self.intervals[0][0]) or mp.isinf(self.intervals[-1][1]))

    @property
    def unbounded_below(self) -> bool:
        return bool(self.intervals) and mp.isinf(self.intervals[0][0])

    @property
    def unbounded_above(self) -> bool:
        return bool(self.intervals) and mp.isinf(self.intervals[-1][1])

    def finite_endpoints(self) -> tuple[mpf, ...]:
        """The 2r boundary values b_1 < ... < b_2r; rejects unbounded sets."""
        if not self.is_bounded:
            raise UnboundedSetError(f"set has infinite endpoints: {self}")
        out = []
        for lo, hi in self.intervals:
            out.extend((lo, hi))
        return tuple(out)

    def reflect(self) -> "IntervalUnion":
        """The mirror set -E."""
        return IntervalUnion(tuple((-hi, -lo) for lo, hi in reversed(self.intervals)))

    def complement(self) -> "IntervalUnion":
        """The set R \\ E (closed intervals; isolated points are dropped)."""
        if self.is_empty:
            return IntervalUnion(((mp.ninf, mp.inf),))
        pieces = []
        cursor = mp.ninf
        for lo, hi in self.intervals:
            if cursor < lo:
                pieces.append((cursor, lo))
            cursor = hi
        if cursor < mp.inf:
            pieces.append((cursor, mp.inf))
        return IntervalUnion(tuple(pieces))

    def shifted(self, deltas: Sequence) -> "IntervalUnion":
        """Move each finite endpoint b_i by deltas[i]; ordering must survive."""
        b = [v + as_mpf(d) for v, d in zip(self.finite_endpoints(), deltas, strict=True)]
        return IntervalUnion.from_endpoints(b)

    def scaled(self, c) -> "IntervalUnion":
        """The set c*E for c > 0 (infinite endpoints stay infinite)."""
        c = as_mpf(c)
        if not c > 0:
            raise ValidationError("scale factor must be positive; use reflect() for -E")
        return IntervalUnion(tuple((lo * c, hi * c) for lo, hi in self.intervals))

    def contains(self, x) -> bool:
        x = as_mpf(x)
        return any(lo <= x <= hi for lo, hi in self.intervals)

    def __str__(self) -> str:
        if self.is_empty:
            return "{}"
        return " U ".join(f"[{mp.nstr(lo, 8)}, {mp.nstr(hi, 8)}]" for lo, hi in self.intervals)


def normalize(raw: Iterable) -> IntervalUnion:
    """Sort, validate and merge a raw list of (lo, hi) pairs into an IntervalUnion."""
    pairs = []
    for item in raw:
        lo, hi = item
        lo, hi = as_mpf(lo), as_mpf(hi)
        if not lo < hi:
            raise ValidationError(f"interval needs lo < hi, got ({lo}, {hi})")
        pairs.append((lo, hi))
    pairs.sort(key=lambda p: (p[0], p[1]))
    merged: list[tuple[mpf, mpf]] = []
    for lo, hi in pairs:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return IntervalUnion(tuple(merged))


FULL_LINE = IntervalUnion(((mp.ninf, mp.inf),))
EMPTY_SET = IntervalUnion(())


@dataclass(frozen=True)
class SourceSpec:
    """External source strength a with eigenvalue multiplicities k1 (at +a)
    and k2 (at -a); the matrix size is n = k1 + k2 >= 1."""

    a: mpf
    k1: int
    k2: int

    def __post_init__(self):
        object.__setattr__(self, "a", as_mpf(self.a))
        if self.k1 < 0 or self.k2 < 0 or self.k1 + self.k2 < 1:
            raise ValidationError("need k1, k2 >= 0 and k1 + k2 >= 1")
        if mp.isinf(self.a):
            raise ValidationError("source strength must be finite")

    @property
    def n(self) -> int:
        return self.k1 + self.k2

    def swapped(self) -> "SourceSpec":
        """The dual parameter point (-a, k2, k1)."""
        return SourceSpec(-self.a, self.k2, self.k1)

    @property
    def degenerate(self) -> bool:
        return self.a == 0 and self.k1 * self.k2 > 0


@dataclass(frozen=True)
class PrecisionConfig:
    """Working precision (decimal digits) plus the tolerances quadratures
    and truncations aim for."""

    significant_digits: int = 30
    rel_tol: float = 1e-12
    abs_tol: float = 1e-15

    def __post_init__(self):
        if self.significant_digits < 15:
            raise ValidationError("significant_digits must be >= 15")

    @property
    def dps(self) -> int:
        return self.significant_digits

    def workdps(self, extra: int = 0):
        return mp.workdps(self.significant_digits + extra)

    def with_digits(self, digits: int) -> "PrecisionConfig":
        return PrecisionConfig(digits, self.rel_tol, self.abs_tol)


DEFAULT_PRECISION = PrecisionConfig()


@dataclass(frozen=True)
class SignedLogValue:
    """A real number stored as (sign, log|value|); sign 0 means exact zero."""

    sign: int
    log_abs: mpf

    @classmethod
    def zero(cls) -> "SignedLogValue":
        return cls(0, mp.ninf)

    @classmethod
    def one(cls) -> "SignedLogValue":
        return cls(1, mpf(0))

    @classmethod
    def from_number(cls, x) -> "SignedLogValue":
        x = as_mpf(x)
        if x == 0:
            return cls.zero()
        return cls(1 if x > 0 else -1, mp.log(abs(x)))

    def to_mpf(self) -> mpf:
        if self.sign == 0:
            return mpf(0)
        return self.sign * mp.exp(self.log_abs)

    @property
    def log10(self) -> mpf:
        return self.log_abs / mp.log(10)

    def __mul__(self, other: "SignedLogValue") -> "SignedLogValue":
        if self.sign == 0 or other.sign == 0:
            return SignedLogValue.zero()
        return SignedLogValue(self.sign * other.sign, self.log_abs + other.log_abs)

    def __truediv__(self, other: "SignedLogValue") -> "SignedLogValue":
        if other.sign == 0:
            raise ZeroDivisionError("division by exact zero SignedLogValue")
        if self.sign == 0:
            return SignedLogValue.zero()
        return SignedLogValue(self.sign * other.sign, self.log_abs - other.log_abs)

    def __pow__(self, k: int) -> "SignedLogValue":
        if self.sign == 0:
            return SignedLogValue.one() if k == 0 else SignedLogValue.zero()
        return SignedLogValue(self.sign ** (k % 2) if self.sign < 0 else 1, self.log_abs * k)

    def __neg__(self) -> "SignedLogValue":
        return SignedLogValue(-self.sign, self.log_abs)

    def __abs__(self) -> "SignedLogValue":
        return SignedLogValue(abs(self.sign), self.log_abs)

    def __add__(self, other: "SignedLogValue") -> "SignedLogValue":
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        if self.log_abs >= other.log_abs:
            big, small = self, other
        else:
            big, small = other, self
        d = small.log_abs - big.log_abs
        if big.sign == small.sign:
            return SignedLogValue(big.sign, big.log_abs + mp.log(1 + mp.exp(d)))
        if d == 0:
            return SignedLogValue.zero()
        # 1 - exp(d) via expm1 keeps nearby-magnitude cancellations accurate
        return SignedLogValue(big.sign, big.log_abs + mp.log(-mp.expm1(d)))

    def __sub__(self, other: "SignedLogValue") -> "SignedLogValue":
        return self + (-other)


def signed_log_det(rows: Sequence[Sequence]) -> tuple[SignedLogValue, float]:
    """Determinant of a square mpf matrix by fully pivoted LU elimination.

    The matrix is row/column equilibrated first so the pivot spread reflects
    genuine conditioning rather than scale.  Returns the determinant as a
    SignedLogValue together with log10(max|pivot| / min|pivot|), a proxy for
    the number of decimal digits lost to cancellation.
    """
    n = len(rows)
    if n == 0:
        return SignedLogValue.one(), 0.0
    w = [[mpf(x) for x in row] for row in rows]
    if any(len(r) != n for r in w):
        raise ValidationError("matrix must be square")
    log_scale = mpf(0)
    for i in range(n):
        m = max(abs(x) for x in w[i])
        if m == 0:
            return SignedLogValue.zero(), 0.0
        log_scale += mp.log(m)
        w[i] = [x / m for x in w[i]]
    for j in range(n):
        m = max(abs(w[i][j]) for i in range(n))
        if m == 0:
            return SignedLogValue.zero(), 0.0
        log_scale += mp.log(m)
        for i in range(n):
            w[i][j] /= m

    sign = 1
    log_pivots = []
    for k in range(n):
        pi, pj, pv = k, k, abs(w[k][k])
        for i in range(k, n):
            wi = w[i]
            for j in range(k, n):
                if abs(wi[j]) > pv:
                    pi, pj, pv = i, j, abs(wi[j])
        if pv == 0:
            return SignedLogValue.zero(), 0.0
        if pi != k:
            w[k], w[pi] = w[pi], w[k]
            sign = -sign
        if pj != k:
            for row in w:
                row[k], row[pj] = row[pj], row[k]
            sign = -sign
        piv = w[k][k]
        if piv < 0:
            sign = -sign
        log_pivots.append(mp.log(abs(piv)))
        for i in range(k + 1, n):
            if w[i][k] == 0:
                continue
            l = w[i][k] / piv
            wi, wk = w[i], w[k]
            for j in range(k + 1, n):
                wi[j] -= l * wk[j]
    spread = float((max(log_pivots) - min(log_pivots)) / mp.log(10))
    return SignedLogValue(sign, log_scale + mp.fsum(log_pivots)), spread
