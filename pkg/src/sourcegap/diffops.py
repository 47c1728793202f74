"""A small formal algebra of first-order boundary/parameter operators and a
finite-difference jet builder.

Operators are finite sums  coeff * (monomial in the coordinates) * (raw
partial derivative).  Composition expands Leibniz cross terms exactly, with
rational coefficients, so structural identities such as the commutator
[B_{-1}, B_0] = B_{-1} hold on the nose.  Evaluation pairs an operator with
a DerivativeTable: a jet of raw partials of a scalar function obtained from
central differences with Richardson extrapolation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import comb

from mpmath import mp, mpf

from .core import (
    IntervalUnion,
    MissingPartialError,
    OperatorOrderError,
    PrecisionConfig,
    DEFAULT_PRECISION,
    SourceGapError,
    UnboundedSetError,
    ValidationError,
    as_mpf,
)

MAX_ORDER = 4

# 1-D central difference stencils, all with O(h^2) leading error
_CENTRAL = {
    0: {0: Fraction(1)},
    1: {-1: Fraction(-1, 2), 1: Fraction(1, 2)},
    2: {-1: Fraction(1), 0: Fraction(-2), 1: Fraction(1)},
    3: {-2: Fraction(-1, 2), -1: Fraction(1), 1: Fraction(-1), 2: Fraction(1, 2)},
    4: {-2: Fraction(1), -1: Fraction(-4), 0: Fraction(6), 1: Fraction(-4), 2: Fraction(1)},
}


def default_axes(num_endpoints: int, param: str = "a") -> tuple[str, ...]:
    return (param,) + tuple(f"b{i}" for i in range(1, num_endpoints + 1))


@dataclass(frozen=True)
class OperatorExpr:
    """Formal sum of terms (coeff, coordinate-monomial powers, partial multi-index)."""

    axes: tuple[str, ...]
    terms: tuple[tuple[tuple[int, ...], tuple[int, ...], Fraction], ...]

    @classmethod
    def _from_dict(cls, axes, d) -> "OperatorExpr":
        items = tuple(
            (pw, pt, c) for (pw, pt), c in sorted(d.items()) if c != 0
        )
        return cls(tuple(axes), items)

    @property
    def order(self) -> int:
        return max((sum(pt) for _, pt, _ in self.terms), default=0)

    def __add__(self, other: "OperatorExpr") -> "OperatorExpr":
        self._check_axes(other)
        d = {(pw, pt): c for pw, pt, c in self.terms}
        for pw, pt, c in other.terms:
            d[(pw, pt)] = d.get((pw, pt), Fraction(0)) + c
        return OperatorExpr._from_dict(self.axes, d)

    def __sub__(self, other: "OperatorExpr") -> "OperatorExpr":
        return self + other.scaled(-1)

    def scaled(self, c) -> "OperatorExpr":
        c = Fraction(c)
        return OperatorExpr(self.axes, tuple((pw, pt, c0 * c) for pw, pt, c0 in self.terms))

    def __rmul__(self, c) -> "OperatorExpr":
        return self.scaled(c)

    def _check_axes(self, other):
        if self.axes != other.axes:
            raise ValidationError("operator axes mismatch")


def identity_op(axes) -> OperatorExpr:
    z = (0,) * len(axes)
    return OperatorExpr(tuple(axes), (((z, z, Fraction(1))),))


def partial_op(axes, axis: str, order: int = 1) -> OperatorExpr:
    axes = tuple(axes)
    i = axes.index(axis)
    pw = (0,) * len(axes)
    pt = tuple(order if j == i else 0 for j in range(len(axes)))
    return OperatorExpr(axes, ((pw, pt, Fraction(1)),))


def monomial_op(axes, powers: dict, coeff=1) -> OperatorExpr:
    """Multiplication by coeff * prod axis^power."""
    axes = tuple(axes)
    pw = tuple(powers.get(ax, 0) for ax in axes)
    pt = (0,) * len(axes)
    return OperatorExpr(axes, ((pw, pt, Fraction(coeff)),))


def boundary_op(k: int, endpoints, axes=None) -> OperatorExpr:
    """B_k = sum_i b_i^{k+1} d/db_i over the endpoint coordinates.

    `endpoints` may be an endpoint count, a bounded IntervalUnion, or a
    sequence of axis names; unbounded sets are rejected.
    """
    if k < -1:
        raise ValidationError("boundary operators are defined for k >= -1")
    if isinstance(endpoints, IntervalUnion):
        if not endpoints.is_bounded:
            raise UnboundedSetError("boundary operator needs finite endpoints")
        names = [f"b{i}" for i in range(1, len(endpoints.finite_endpoints()) + 1)]
    elif isinstance(endpoints, int):
        names = [f"b{i}" for i in range(1, endpoints + 1)]
    else:
        names = list(endpoints)
    axes = tuple(axes) if axes is not None else default_axes(len(names))
    d = {}
    for name in names:
        i = axes.index(name)
        pw = tuple(k + 1 if j == i else 0 for j in range(len(axes)))
        pt = tuple(1 if j == i else 0 for j in range(len(axes)))
        d[(pw, pt)] = d.get((pw, pt), Fraction(0)) + 1
    return OperatorExpr._from_dict(axes, d)


def _falling(p: int, m: int) -> int:
    out = 1
    for i in range(m):
        out *= p - i
    return out


def compose(p: OperatorExpr, q: OperatorExpr) -> OperatorExpr:
    """The operator p o q (apply q first), Leibniz cross terms included."""
    p._check_axes(q)
    if p.order + q.order > MAX_ORDER:
        raise OperatorOrderError(
            f"composition order {p.order}+{q.order} exceeds {MAX_ORDER}"
        )
    v = len(p.axes)
    d: dict = {}
    for pw1, pt1, c1 in p.terms:
        gammas = itertools.product(*(range(g + 1) for g in pt1))
        gammas = list(gammas)
        for pw2, pt2, c2 in q.terms:
            for gamma in gammas:
                coeff = c1 * c2
                ok = True
                for i in range(v):
                    g = gamma[i]
                    if g == 0:
                        continue
                    fall = _falling(pw2[i], g)
                    if fall == 0:
                        ok = False
                        break
                    coeff *= comb(pt1[i], g) * fall
                if not ok or coeff == 0:
                    continue
                new_pw = tuple(pw1[i] + pw2[i] - gamma[i] for i in range(v))
                new_pt = tuple(pt1[i] - gamma[i] + pt2[i] for i in range(v))
                key = (new_pw, new_pt)
                d[key] = d.get(key, Fraction(0)) + coeff
    return OperatorExpr._from_dict(p.axes, d)


@dataclass
class DerivativeTable:
    """Finite-difference jet of a scalar function at a center point.

    entries maps partial multi-indices (per-axis derivative orders, hence
    automatically symmetric in the order of differentiation) to values.
    """

    axes: tuple[str, ...]
    center: tuple[mpf, ...]
    entries: dict
    steps: tuple[mpf, ...]
    richardson_levels: int
    observed_orders: dict | None = None

    def value(self, multi) -> mpf:
        key = tuple(multi)
        if key not in self.entries:
            raise MissingPartialError(f"partial {key} not in table over axes {self.axes}")
        return self.entries[key]


def evaluate(expr: OperatorExpr, table: DerivativeTable) -> mpf:
    """Apply an operator expression to the jet of f; deterministic summation."""
    if expr.axes != table.axes:
        raise ValidationError("operator and table axes differ")
    total = mpf(0)
    for pw, pt, c in expr.terms:
        v = table.value(pt)
        mono = mpf(1)
        for x, p in zip(table.center, pw):
            if p:
                mono *= x ** p
        total += mpf(c.numerator) / c.denominator * mono * v
    return total


def pow2_step(target) -> mpf:
    """Largest power of two <= target; exact-binary steps keep stencil
    points representable and Richardson ratios exact."""
    t = as_mpf(target)
    if not t > 0:
        raise ValidationError("step must be positive")
    return mpf(2) ** int(mp.floor(mp.log(t, 2)))


def default_step(prec: PrecisionConfig, order: int = 4) -> mpf:
    """Step balancing truncation against roundoff for the given derivative
    order: 10^(-digits/6) for the 4th-order tables, 10^(-digits/5) for
    order <= 2."""
    expo = prec.significant_digits / (6 if order >= 3 else 5)
    return pow2_step(mpf(10) ** (-expo))


def build_table(
    f,
    center,
    steps,
    axes,
    max_order: int = MAX_ORDER,
    richardson_levels: int = 1,
    include=None,
    max_axis_order=None,
) -> DerivativeTable:
    """Tensor-product central differences for all raw partials of f.

    f takes a tuple of coordinates (same layout as `center`) and returns a
    scalar.  All stencil evaluations are shared across entries and levels.
    `include` may prune the multi-index set; `max_axis_order` caps the
    per-axis derivative order.  With richardson_levels >= 2 an observed
    convergence order is recorded per entry.
    """
    axes = tuple(axes)
    v = len(axes)
    center = tuple(as_mpf(c) for c in center)
    if isinstance(steps, (int, float, str)) or hasattr(steps, "_mpf_"):
        steps = (as_mpf(steps),) * v
    else:
        steps = tuple(as_mpf(h) for h in steps)
    if len(center) != v or len(steps) != v:
        raise ValidationError("center/steps length must match axes")
    L = richardson_levels
    caps = max_axis_order or {}

    multis = []
    for total in range(0, max_order + 1):
        for pt in itertools.product(range(total + 1), repeat=v):
            if sum(pt) != total:
                continue
            if any(pt[i] > caps.get(axes[i], MAX_ORDER) for i in range(v)):
                continue
            if include is not None and total > 0 and not include(pt):
                continue
            multis.append(pt)

    # shared stencil-point bookkeeping; keys are offsets in units of h/2^L
    plans = {}
    needed = set()
    for pt in multis:
        stencils = [_CENTRAL[m] for m in pt]
        nodes = []
        for combo in itertools.product(*(list(s.items()) for s in stencils)):
            offs = tuple(c[0] for c in combo)
            coeff = Fraction(1)
            for _, cf in combo:
                coeff *= cf
            nodes.append((offs, coeff))
        per_level = []
        for lev in range(L + 1):
            shift = 1 << (L - lev)
            per_level.append([(tuple(o * shift for o in offs), coeff) for offs, coeff in nodes])
            for key, _ in per_level[-1]:
                needed.add(key)
        plans[pt] = per_level

    fine = mpf(2) ** (-L)
    values = {}
    fmax = mpf(0)
    for key in sorted(needed):
        point = tuple(center[i] + steps[i] * fine * key[i] for i in range(v))
        try:
            values[key] = mpf(f(point))
        except SourceGapError:
            raise
        except Exception as exc:  # noqa: BLE001 - report the offending point
            raise SourceGapError(f"function evaluation failed at {point}: {exc}") from exc
        fmax = max(fmax, abs(values[key]))

    entries = {}
    orders = {}
    for pt in multis:
        raw = []
        for lev in range(L + 1):
            denom = mpf(1)
            for i in range(v):
                if pt[i]:
                    denom *= (steps[i] * mpf(2) ** (-lev)) ** pt[i]
            acc = mpf(0)
            for key, coeff in sorted(plans[pt][lev]):
                acc += mpf(coeff.numerator) / coeff.denominator * values[key]
            raw.append(acc / denom)
        # Romberg across levels (central stencils have even error expansions)
        col = list(raw)
        for m in range(1, L + 1):
            fac = mpf(4) ** m
            col = [(fac * col[i + 1] - col[i]) / (fac - 1) for i in range(len(col) - 1)]
        entries[pt] = col[-1]
        if L >= 2 and sum(pt) > 0:
            d01, d12 = abs(raw[0] - raw[1]), abs(raw[1] - raw[2])
            # noise floor of the finest raw difference: function roundoff
            # amplified by the stencil weights over the step powers
            amp = mpf(1)
            for i in range(v):
                if pt[i]:
                    csum = float(sum(abs(c) for c in _CENTRAL[pt[i]].values()))
                    amp *= csum / (steps[i] * mpf(2) ** (-L)) ** pt[i]
            floor = fmax * mpf(10) ** (-(mp.dps - 4)) * amp
            if d12 <= floor:
                orders[pt] = float("inf")
            elif d01 == 0:
                orders[pt] = 0.0
            else:
                orders[pt] = float(mp.log(d01 / d12, 2))
    return DerivativeTable(axes, center, entries, steps, L, orders if L >= 2 else None)


def wronskian(f, g, Xf, Xg, convention: str = "gXf-fXg"):
    """Two-sided Wronskian {f, g}_X in either sign convention."""
    if convention == "gXf-fXg":
        return g * Xf - f * Xg
    if convention == "Xf.g-f.Xg":
        return Xf * g - f * Xg
    raise ValidationError(f"unknown wronskian convention {convention!r}")


def central_derivative(fn, steps: dict, halvings: int = 2):
    """First or mixed-second central derivative of fn with step refinement.

    fn maps a dict {axis: offset} to a scalar.  Returns (value, observed
    order, raw values per step); the value is Richardson-extrapolated from
    the two finest steps.
    """
    axes = list(steps)
    if len(axes) not in (1, 2):
        raise ValidationError("central_derivative handles one or two axes")
    raws = []
    fmax = mpf(0)
    amp_fine = mpf(1)

    def call(offsets):
        nonlocal fmax
        val = fn(offsets)
        fmax = max(fmax, abs(val))
        return val

    for lev in range(halvings + 1):
        h = {ax: as_mpf(steps[ax]) * mpf(2) ** (-lev) for ax in axes}
        if len(axes) == 1:
            ax = axes[0]
            d = (call({ax: h[ax]}) - call({ax: -h[ax]})) / (2 * h[ax])
            amp_fine = 1 / h[ax]
        else:
            a1, a2 = axes
            d = (
                call({a1: h[a1], a2: h[a2]})
                - call({a1: h[a1], a2: -h[a2]})
                - call({a1: -h[a1], a2: h[a2]})
                + call({a1: -h[a1], a2: -h[a2]})
            ) / (4 * h[a1] * h[a2])
            amp_fine = 1 / (h[a1] * h[a2])
        raws.append(d)
    value = (4 * raws[-1] - raws[-2]) / 3
    order = None
    if halvings >= 2:
        d01, d12 = abs(raws[0] - raws[1]), abs(raws[1] - raws[2])
        floor = fmax * mpf(10) ** (-(mp.dps - 4)) * amp_fine
        if d12 <= floor:
            order = float("inf")
        elif d01 == 0:
            order = 0.0
        else:
            order = float(mp.log(d01 / d12, 2))
    return value, order, raws
