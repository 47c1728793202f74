"""Gaussian moments over interval unions, with and without deformations.

The workhorse integral is

    mu_k = integral over E of  z^k exp(-c2 z^2/2 + c1 z) dz,

evaluated by a boundary-corrected three-term recurrence seeded with the
Gaussian mass of E.  This covers the bare source weight (c1 = +-a, c2 = 1)
and every deformation of polynomial degree <= 2 in the exponent.  Quadratic
(beta) and degree >= 3 deformations change the weight class, so those route
through adaptive quadrature instead; the quadrature path doubles as the
independent oracle for the recurrence in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from mpmath import mp, mpf

from .core import (
    DivergentIntegrandError,
    IntervalUnion,
    PrecisionConfig,
    DEFAULT_PRECISION,
    SourceSpec,
    ValidationError,
    as_mpf,
)

MAX_DEFORM_DEGREE = 4


def _as_tuple(v) -> tuple:
    if v is None:
        return ()
    if isinstance(v, (int, float, str)) or hasattr(v, "_mpf_"):
        return (v,)
    return tuple(v)


@dataclass(frozen=True)
class DeformationPoint:
    """Truncated deformation parameters (t, s, u, beta).

    t couples to both eigenvalue groups, s only to the +a group, u only to
    the -a group, beta to the quadratic part with opposite signs per group.
    """

    t: tuple = ()
    s: tuple = ()
    u: tuple = ()
    beta: mpf = mpf(0)

    def __post_init__(self):
        object.__setattr__(self, "t", tuple(as_mpf(x) for x in _as_tuple(self.t)))
        object.__setattr__(self, "s", tuple(as_mpf(x) for x in _as_tuple(self.s)))
        object.__setattr__(self, "u", tuple(as_mpf(x) for x in _as_tuple(self.u)))
        object.__setattr__(self, "beta", as_mpf(self.beta))
        for name in ("t", "s", "u"):
            if len(getattr(self, name)) > MAX_DEFORM_DEGREE:
                raise ValidationError(f"deformation vector {name} longer than {MAX_DEFORM_DEGREE}")

    @property
    def is_zero(self) -> bool:
        return self.beta == 0 and not any(self.t) and not any(self.s) and not any(self.u)

    @property
    def degree(self) -> int:
        deg = 0
        for vec in (self.t, self.s, self.u):
            for k, v in enumerate(vec, start=1):
                if v != 0:
                    deg = max(deg, k)
        return deg

    @property
    def needs_quadrature(self) -> bool:
        # degree <= 2 deformations fold into the Gaussian recurrence; beta
        # and degree >= 3 do not (different weight class).
        return self.beta != 0 or self.degree >= 3

    def exponent_coeffs(self, branch: str, a) -> list[mpf]:
        """Coefficients c[0..K] of the exponent polynomial sum c_k z^k."""
        if branch not in ("+", "-"):
            raise ValidationError("branch must be '+' or '-'")
        sgn = 1 if branch == "+" else -1
        d = self.s if branch == "+" else self.u
        K = max(2, len(self.t), len(d))
        c = [mpf(0)] * (K + 1)
        c[1] = sgn * as_mpf(a)
        c[2] = mpf(-1) / 2 + sgn * self.beta
        for k, v in enumerate(self.t, start=1):
            c[k] += v
        for k, v in enumerate(d, start=1):
            c[k] -= v
        while len(c) > 3 and c[-1] == 0:
            c.pop()
        return c


ZERO_DEFORMATION = DeformationPoint()


@dataclass(frozen=True)
class MomentRequest:
    """One entry mu_{ij} of the moment matrix: monomial degree i + j - 1."""

    i: int
    j: int
    branch: str
    spec: SourceSpec
    deform: DeformationPoint
    E: IntervalUnion

    def __post_init__(self):
        if self.i < 1 or self.j < 0:
            raise ValidationError("need i >= 1 and j >= 0")
        if self.branch not in ("+", "-"):
            raise ValidationError("branch must be '+' or '-'")

    @property
    def degree(self) -> int:
        return self.i + self.j - 1


_SQRT2 = None


def _sqrt2():
    return mp.sqrt(2)


def _gauss_mass(alpha, beta):
    """P(alpha < Z < beta) for standard normal Z, stable in both tails."""
    if alpha >= 0:
        return (mp.erfc(alpha / _sqrt2()) - mp.erfc(beta / _sqrt2())) / 2
    if beta <= 0:
        return (mp.erfc(-beta / _sqrt2()) - mp.erfc(-alpha / _sqrt2())) / 2
    return 1 - (mp.erfc(-alpha / _sqrt2()) + mp.erfc(beta / _sqrt2())) / 2


def moment_sequence(kmax: int, c1, c2, E: IntervalUnion) -> list[mpf]:
    """mu_0 .. mu_kmax of z^k exp(-c2 z^2/2 + c1 z) over E, c2 > 0.

    Recurrence: c2*mu_k = c1*mu_{k-1} + (k-1)*mu_{k-2} - [z^{k-1} w(z)] at
    the oriented finite boundary; boundary terms vanish at infinity.
    Runs at the ambient mpmath precision.
    """
    c1, c2 = mpf(c1), mpf(c2)
    if not c2 > 0:
        raise DivergentIntegrandError("recurrence needs a negative-definite quadratic exponent")
    if E.is_empty:
        return [mpf(0)] * (kmax + 1)
    sd = 1 / mp.sqrt(c2)
    mean = c1 / c2
    mass = mp.fsum(
        _gauss_mass((lo - mean) / sd, (hi - mean) / sd) for lo, hi in E.intervals
    )
    mu0 = mp.sqrt(2 * mp.pi / c2) * mp.exp(c1 * c1 / (2 * c2)) * mass
    if kmax == 0:
        return [mu0]
    # weights and running powers z^{k-1} at each finite endpoint
    ends = []  # (value, orientation +1 for hi / -1 for lo)
    for lo, hi in E.intervals:
        if not mp.isinf(lo):
            ends.append([lo, mpf(-1), mp.exp(-c2 * lo * lo / 2 + c1 * lo), mpf(1)])
        if not mp.isinf(hi):
            ends.append([hi, mpf(1), mp.exp(-c2 * hi * hi / 2 + c1 * hi), mpf(1)])
    mus = [mu0]
    for k in range(1, kmax + 1):
        bnd = mp.fsum(orient * w * pw for _, orient, w, pw in ends)
        prev2 = mus[k - 2] if k >= 2 else mpf(0)
        mus.append((c1 * mus[k - 1] + (k - 1) * prev2 - bnd) / c2)
        for e in ends:
            e[3] *= e[0]
    return mus


def gaussian_moment_closed(k: int, a, E: IntervalUnion, prec: PrecisionConfig = DEFAULT_PRECISION) -> mpf:
    """mu_k(a; E) = integral of z^k exp(-z^2/2 + a z) over E by recurrence."""
    if k < 0:
        raise ValidationError("moment order must be >= 0")
    with prec.workdps():
        return moment_sequence(k, as_mpf(a), mpf(1), E)[k]


def _check_convergence(coeffs: list, E: IntervalUnion) -> None:
    m = len(coeffs) - 1
    while m > 0 and coeffs[m] == 0:
        m -= 1
    lead = coeffs[m]
    if E.unbounded_above and not lead < 0:
        raise DivergentIntegrandError("exponent does not decay at +infinity")
    if E.unbounded_below:
        ok = lead < 0 if m % 2 == 0 else lead > 0
        if not ok:
            raise DivergentIntegrandError("exponent does not decay at -infinity")


def _poly(coeffs, z):
    acc = mpf(0)
    for c in reversed(coeffs):
        acc = acc * z + c
    return acc


def _truncation_radius(coeffs, side: int, abs_tol) -> mpf:
    """Radius R on the given side with exponent(R) = log(abs_tol) - 50."""
    target = mp.log(as_mpf(abs_tol)) - 50
    r = mpf(1)
    for _ in range(200):
        if _poly(coeffs, side * r) <= target:
            break
        r *= 2
    else:
        raise DivergentIntegrandError("no truncation radius found")
    lo, hi = r / 2, r
    for _ in range(80):
        mid = (lo + hi) / 2
        if _poly(coeffs, side * mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi


def _quad_moment(k: int, coeffs, E: IntervalUnion, prec: PrecisionConfig) -> mpf:
    _check_convergence(coeffs, E)

    def integrand(z):
        return z ** k * mp.exp(_poly(coeffs, z))

    total = mpf(0)
    for lo, hi in E.intervals:
        if mp.isinf(lo):
            lo = -_truncation_radius(coeffs, -1, prec.abs_tol)
        if mp.isinf(hi):
            hi = _truncation_radius(coeffs, +1, prec.abs_tol)
        if lo >= hi:
            continue
        total += mp.quad(integrand, [lo, 0, hi] if lo < 0 < hi else [lo, hi])
    return total


def deformed_moment(req: MomentRequest, prec: PrecisionConfig = DEFAULT_PRECISION) -> mpf:
    """Deformed moment mu^{branch}_{ij}; recurrence when the exponent stays
    Gaussian, adaptive quadrature otherwise (with documented tail truncation
    on unbounded sets)."""
    with prec.workdps(8):
        coeffs = req.deform.exponent_coeffs(req.branch, req.spec.a)
        k = req.degree
        if not req.deform.needs_quadrature:
            c2 = -2 * coeffs[2]
            # c2 > 0 guarantees convergence on any E; c2 <= 0 only makes
            # sense on bounded sets, where quadrature takes over.
            if c2 > 0:
                return moment_sequence(k, coeffs[1], c2, req.E)[k]
        return _quad_moment(k, coeffs, req.E, prec)
