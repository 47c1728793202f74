"""Monte Carlo oracle for the source ensemble, plus the deterministic
changes of variables connecting it to non-crossing path probabilities and
their small-z critical scaling.

Sampling uses the shift representation M = A + H with H drawn from the
standard Hermitian Gaussian ensemble; eigenvalues come from LAPACK at
machine precision, which is far below the statistical error of any
realistic sample count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from mpmath import mp, mpf

from .core import (
    DEFAULT_PRECISION,
    IntervalUnion,
    PrecisionConfig,
    SourceSpec,
    ValidationError,
)
from .tau import tau_fullline_closed, tau_value
from .moments import ZERO_DEFORMATION

_CHUNK = 1 << 16


@dataclass(frozen=True)
class McConfig:
    samples: int
    seed: int
    spec: SourceSpec | None = None

    def __post_init__(self):
        if self.samples < 1:
            raise ValidationError("samples must be >= 1")


@dataclass(frozen=True)
class McEstimate:
    p_hat: float
    std_err: float
    samples: int
    seed: int


def _source_diagonal(spec: SourceSpec) -> np.ndarray:
    a = float(spec.a)
    return np.concatenate([np.full(spec.k1, a), np.full(spec.k2, -a)])


def _sample_batch(spec: SourceSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    """Eigenvalues of A + H for `count` independent draws, shape (count, n)."""
    n = spec.n
    x = rng.standard_normal((count, n, n))
    y = rng.standard_normal((count, n, n))
    g = (x + 1j * y) / np.sqrt(2.0)
    h = (g + np.conjugate(np.transpose(g, (0, 2, 1)))) / np.sqrt(2.0)
    h += np.diag(_source_diagonal(spec))
    return np.linalg.eigvalsh(h)


def sample_spectrum(spec: SourceSpec, rng: np.random.Generator) -> np.ndarray:
    """One spectrum of M = A + H, sorted ascending."""
    return _sample_batch(spec, rng, 1)[0]


def _membership(eigs: np.ndarray, E: IntervalUnion) -> np.ndarray:
    if E.is_empty:
        return np.zeros(eigs.shape[0], dtype=bool)
    inside = np.zeros(eigs.shape, dtype=bool)
    for lo, hi in E.intervals:
        lo_f = -np.inf if mp.isinf(lo) else float(lo)
        hi_f = np.inf if mp.isinf(hi) else float(hi)
        inside |= (eigs >= lo_f) & (eigs <= hi_f)
    return inside.all(axis=1)


def mc_gap_probabilities(spec: SourceSpec, sets: list[IntervalUnion], cfg: McConfig) -> list[McEstimate]:
    """Frequency estimates for several sets from one shared sample stream.

    Sharing the stream makes monotonicity under set inclusion hold pathwise
    exactly, not just in expectation.
    """
    rng = np.random.default_rng(cfg.seed)
    hits = np.zeros(len(sets), dtype=np.int64)
    left = cfg.samples
    while left > 0:
        take = min(_CHUNK, left)
        eigs = _sample_batch(spec, rng, take)
        for i, E in enumerate(sets):
            hits[i] += int(_membership(eigs, E).sum())
        left -= take
    out = []
    for h in hits:
        p = h / cfg.samples
        out.append(McEstimate(p, float(np.sqrt(p * (1 - p) / cfg.samples)), cfg.samples, cfg.seed))
    return out


def mc_gap_probability(spec: SourceSpec, E: IntervalUnion, cfg: McConfig) -> McEstimate:
    return mc_gap_probabilities(spec, [E], cfg)[0]


def brownian_to_source(t, a, E: IntervalUnion) -> tuple[mpf, IntervalUnion]:
    """Map time t in (0,1), endpoint spread a and set E of the bridge
    picture to the equivalent source-ensemble parameters (u, V):
    u = a sqrt(2t/(1-t)), V = E sqrt(2/(t(1-t)))."""
    t = mpf(t)
    if not 0 < t < 1:
        raise ValidationError("need 0 < t < 1")
    a = mpf(a)
    u = a * mp.sqrt(2 * t / (1 - t))
    V = E.scaled(mp.sqrt(2 / (t * (1 - t))))
    return u, V


def scaled_digits(n: int, base: int) -> int:
    """Working digits for the critical-scaling evaluation; the moment
    determinant sheds digits roughly linearly in the matrix size."""
    return max(base, 24 + 2 * n)


def scaled_Qz(s, G: IntervalUnion, n: int, eps: int = 1,
              prec: PrecisionConfig = DEFAULT_PRECISION) -> mpf:
    """log P_n at the critical scaling z = (2/n)^(1/4).

    The eigenvalues are confined to the complement of the scaled gap set.
    The coordinate/parameter dictionary is the one matched to the kernel
    normalization used by the pearcey module:

        window  x_ens = xi * n^(-1/4),   source  u = eps * (sqrt(n) + s/2).

    The window coefficient follows from equating eigenvalue counts: the
    critical macroscopic density is (sqrt(3)/2pi) n^(1/3) |x|^(1/3) (free
    convolution of the semicircle with (delta_a + delta_{-a})/2 at the
    closing point a = sqrt(n)), while the limiting process density tends to
    (sqrt(3)/2pi)|xi|^(1/3).  The source offset follows from matching the
    support-edge opening +-(2/3 sqrt(3)) s^(3/2) on both sides.  Both were
    cross-checked against the determinant and Monte Carlo; the dilated
    variables of the non-crossing-path picture differ by fixed powers of 2
    (see the pearcey module notes).

    Needs working precision that grows with n (see scaled_digits).
    """
    if n < 2 or n % 2:
        raise ValidationError("n must be an even integer >= 2")
    if eps not in (1, -1):
        raise ValidationError("eps must be +1 or -1")
    if not G.is_bounded:
        raise ValidationError("gap set must be compact")
    if G.is_empty:
        return mpf(0)
    digits = scaled_digits(n, prec.significant_digits)
    wprec = prec.with_digits(digits)
    with mp.workdps(digits):
        s = mpf(s)
        z2 = mp.sqrt(mpf(2) / n)  # z^2
        if abs(s) * z2 >= mpf(1) / 2:
            raise ValidationError("need |s| z^2 < 1/2")
        u = eps * (mp.sqrt(n) + s / 2)
        V = G.scaled(mpf(n) ** (-mpf(1) / 4))
        spec = SourceSpec(u, n // 2, n // 2)
        num = tau_value(spec, ZERO_DEFORMATION, V.complement(), wprec)
        den = tau_fullline_closed(spec, wprec)
        if num.sign == 0 or num.sign != den.sign:
            raise ValidationError("scaled determinant degenerated; raise precision")
        return num.log_abs - den.log_abs
