"""Quartic PDE residual for the log gap probability of the source ensemble.

The PDE combines two families of intermediate objects (one per eigenvalue
group).  Both families are produced by the *same* assembly applied to two
independently built jets: the plus family from the jet of
log P(a; k1, k2) at (a; b), the minus family from the jet of
log P(.; k2, k1) at (-a; b).  The dual pair never reuses the other's table,
so the exact symmetry between the two acts as a cross-check on the
numerics instead of an assumption baked into them.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from mpmath import mp, mpf

from .core import (
    DEFAULT_PRECISION,
    DegenerateSourceError,
    IntervalUnion,
    PrecisionConfig,
    SourceSpec,
    UnboundedSetError,
    ValidationError,
)
from .tau import FdConfig, log_gap_probability, tau_fullline_closed, tau_value
from .moments import ZERO_DEFORMATION
from . import diffops
from .diffops import (
    DerivativeTable,
    boundary_op,
    compose,
    evaluate,
    monomial_op,
    partial_op,
    pow2_step,
)

MIN_DIGITS = 30
DEFAULT_DIGITS = 40


@dataclass(frozen=True)
class SideObjects:
    """All intermediates of one family, as plain numbers at the center."""

    F: mpf
    H1: mpf
    H2: mpf
    G: mpf
    B1F: mpf
    B2F: mpf
    B1G: mpf
    dF_da: mpf
    dH2_da: mpf
    B1H1: mpf
    B1H2: mpf


@dataclass(frozen=True)
class Thm01Intermediates:
    plus: SideObjects
    minus: SideObjects
    duality_gap: float  # |f+(center) - f-(center)| relative, should be ~0


@dataclass(frozen=True)
class ResidualReport:
    residual: float
    scale: float
    relative_residual: float
    steps: tuple
    trend: tuple
    converged: bool
    precision_digits: int
    details: dict


@lru_cache(maxsize=None)
def _side_operators(num_endpoints: int):
    """Operator expressions for one family over axes (a, b1..b_2r)."""
    axes = diffops.default_axes(num_endpoints)
    B1 = boundary_op(-1, num_endpoints, axes)
    B0 = boundary_op(0, num_endpoints, axes)
    da = partial_op(axes, "a")
    a_ = monomial_op(axes, {"a": 1})
    one = diffops.identity_op(axes)

    core = B0 - compose(a_, da) - compose(a_, B1)  # B0 - a d/da - a B[-1]
    opF = compose(B1, da - B1).scaled(2)
    opH1 = compose(da, core) + compose(B0, B1) + da.scaled(4)
    opH2 = compose(da, core) - compose(B0 - compose(a_, B1).scaled(2) - one.scaled(2), B1)
    return {
        "axes": axes,
        "F": opF,
        "H1": opH1,
        "H2": opH2,
        "B1F": compose(B1, opF),
        "B2F": compose(B1, compose(B1, opF)),
        "dF": compose(da, opF),
        "B1dF": compose(B1, compose(da, opF)),
        "B1H1": compose(B1, opH1),
        "B2H1": compose(B1, compose(B1, opH1)),
        "dH2": compose(da, opH2),
        "B1dH2": compose(B1, compose(da, opH2)),
        "B1H2": compose(B1, opH2),
    }


def assemble_side(table: DerivativeTable, k1: int, k2: int) -> SideObjects:
    """Build one family of intermediates from a 4th-order jet of log P.

    The constant parts (the -4 k1 offset of F, the 4 k1 (a + k2/a) offset
    of H1) have no endpoint dependence, so boundary derivatives see only
    the operator parts; the a-derivative of H2's operator part is complete
    because H2 carries no offset.
    """
    ops = _side_operators(len(table.axes) - 1)
    if ops["axes"] != table.axes:
        raise ValidationError("table axes do not match the operator layout")
    a = table.center[0]
    ev = lambda name: evaluate(ops[name], table)

    F = ev("F") - 4 * k1
    H1 = ev("H1") + 4 * k1 * (a + mpf(k2) / a)
    H2 = ev("H2")
    B1F, B2F, dF = ev("B1F"), ev("B2F"), ev("dF")
    B1H1, B2H1 = ev("B1H1"), ev("B2H1")
    dH2, B1dH2, B1H2, B1dF = ev("dH2"), ev("B1dH2"), ev("B1H2"), ev("B1dF")

    # 2G = {H1, F}_{B1} - {H2, F}_{d/da} with {f,g}_X = g X f - f X g
    G = (diffops.wronskian(H1, F, B1H1, B1F) - diffops.wronskian(H2, F, dH2, dF)) / 2
    # product rule applied to 2 B1 G; the (B1F)(B1H1) cross terms cancel
    B1G = (F * B2H1 - H1 * B2F - B1F * dH2 - F * B1dH2 + B1H2 * dF + H2 * B1dF) / 2
    return SideObjects(F, H1, H2, G, B1F, B2F, B1G, dF, dH2, B1H1, B1H2)


def _log_p_handle(k1: int, k2: int, E: IntervalUnion, prec: PrecisionConfig, cache: dict):
    """Memoized (a, b...) -> log P; the full-line normalizer only depends on a."""
    norm_cache: dict = {}

    def f(point):
        if point in cache:
            return cache[point]
        a, b = point[0], point[1:]
        spec = SourceSpec(a, k1, k2)
        num = tau_value(spec, ZERO_DEFORMATION, IntervalUnion.from_endpoints(b), prec)
        if a not in norm_cache:
            norm_cache[a] = tau_fullline_closed(spec, prec)
        den = norm_cache[a]
        if num.sign == 0 or num.sign != den.sign:
            raise DegenerateSourceError("gap determinant lost its sign inside the jet")
        val = num.log_abs - den.log_abs
        cache[point] = val
        return val

    return f


def build_tables(spec: SourceSpec, E: IntervalUnion, step, prec: PrecisionConfig,
                 richardson_levels: int = 1, caches: tuple[dict, dict] | None = None
                 ) -> tuple[DerivativeTable, DerivativeTable]:
    """The plus jet at (a; b) and the independently computed minus jet at
    (-a; b) with multiplicities swapped.  Pure 4th a-derivatives are never
    used by the assembly, so they are pruned from both tables."""
    b = E.finite_endpoints()
    axes = diffops.default_axes(len(b))
    cp, cm = caches if caches is not None else ({}, {})
    fp = _log_p_handle(spec.k1, spec.k2, E, prec, cp)
    fm = _log_p_handle(spec.k2, spec.k1, E, prec, cm)
    kw = dict(
        axes=axes,
        max_order=4,
        richardson_levels=richardson_levels,
        max_axis_order={"a": 3},
    )
    tp = diffops.build_table(fp, (spec.a,) + tuple(b), step, **kw)
    tm = diffops.build_table(fm, (-spec.a,) + tuple(b), step, **kw)
    return tp, tm


def assemble_intermediates(spec: SourceSpec, E: IntervalUnion,
                           table_plus: DerivativeTable, table_minus: DerivativeTable,
                           prec: PrecisionConfig = DEFAULT_PRECISION) -> Thm01Intermediates:
    plus = assemble_side(table_plus, spec.k1, spec.k2)
    minus = assemble_side(table_minus, spec.k2, spec.k1)
    f_p = table_plus.entries[(0,) * len(table_plus.axes)]
    f_m = table_minus.entries[(0,) * len(table_minus.axes)]
    gap = float(abs(f_p - f_m) / max(abs(f_p), mpf(1)))
    return Thm01Intermediates(plus, minus, gap)


def pde_terms(inter: Thm01Intermediates) -> tuple[mpf, mpf, mpf, mpf]:
    p, m = inter.plus, inter.minus
    T1 = p.F * m.B1G + m.F * p.B1G
    T2 = p.F * m.B1F - m.F * p.B1F
    T3 = p.F * m.G + m.F * p.G
    T4 = p.F * m.B2F - m.F * p.B2F
    return T1, T2, T3, T4


def residual_thm01(spec: SourceSpec, E: IntervalUnion, fd: FdConfig | None = None,
                   prec: PrecisionConfig | None = None) -> ResidualReport:
    """Residual of the quartic PDE  T1*T2 - T3*T4 = 0 with a step-refinement
    trend; the relative residual normalizes by max(|T1*T2|, |T3*T4|)."""
    if prec is None:
        prec = PrecisionConfig(DEFAULT_DIGITS)
    if prec.significant_digits < MIN_DIGITS:
        raise ValidationError(
            f"4th-order jets of determinant ratios need >= {MIN_DIGITS} digits"
        )
    if not E.is_bounded:
        raise UnboundedSetError("PDE residual needs a bounded set")
    if spec.degenerate:
        raise DegenerateSourceError("a = 0 with k1*k2 > 0: normalization is singular")
    fd = fd or FdConfig()
    # coarse enough that truncation, not jet roundoff, rules all refinements
    base = fd.base_step if fd.base_step is not None else mpf(10) ** (-prec.significant_digits / 12.0)
    base = pow2_step(base)

    caches: tuple[dict, dict] = ({}, {})
    rels, abses, scales = [], [], []
    duality_gap = 0.0
    degenerate = False
    with mp.workdps(prec.significant_digits):
        for r in range(fd.refinements):
            h = base * mpf(2) ** (-r)
            tp, tm = build_tables(spec, E, h, prec, fd.richardson_levels, caches)
            inter = assemble_intermediates(spec, E, tp, tm, prec)
            duality_gap = max(duality_gap, inter.duality_gap)
            T1, T2, T3, T4 = pde_terms(inter)
            resid = T1 * T2 - T3 * T4
            scale = max(abs(T1 * T2), abs(T3 * T4))
            # symmetric configurations (k1 = k2 with E = -E) annihilate T1
            # and T4 identically; judge the residual against the surviving
            # factor scale instead of 0/0
            factor_sq = max(abs(x) for x in (T1, T2, T3, T4)) ** 2
            if scale < factor_sq * mpf(10) ** (-prec.significant_digits / 2):
                scale = factor_sq
                degenerate = True
            abses.append(abs(resid))
            scales.append(scale)
            rels.append(abs(resid) / scale if scale > 0 else mpf("inf"))
        if degenerate:
            # every refinement sits on the noise floor; no trend to demand
            converged = all(rel < mpf(10) ** (-prec.significant_digits / 2) for rel in rels)
        else:
            converged = all(rels[i + 1] < rels[i] for i in range(len(rels) - 1))
        return ResidualReport(
            residual=float(abses[-1]),
            scale=float(scales[-1]),
            relative_residual=float(rels[-1]),
            steps=tuple(float(base * mpf(2) ** (-r)) for r in range(fd.refinements)),
            trend=tuple(float(x) for x in rels),
            converged=converged,
            precision_digits=prec.significant_digits,
            details={
                "duality_gap": duality_gap,
                "factors": [float(x) for x in (T1, T2, T3, T4)],
                "degenerate_products": degenerate,
            },
        )
