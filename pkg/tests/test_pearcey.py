import pytest
from mpmath import mp, mpf

import sourcegap as sg
from sourcegap.core import DiscretizationError, UnboundedSetError, ValidationError
from sourcegap.tau import FdConfig
from sourcegap.pearcey import (
    fredholm_log_det,
    gauss_legendre,
    kernel,
    kernel_product_form,
    ode_march,
    ode_residuals,
    p_jet,
    pearcey_p,
    pearcey_q,
    product_integral,
    q_jet,
    residual_thm02,
    scaling_limit_report,
)

PREC = sg.PrecisionConfig(25)


def test_gauss_legendre_nodes():
    with mp.workdps(30):
        nodes, weights = gauss_legendre(12, 30)
        assert abs(mp.fsum(weights) - 2) < mpf("1e-28")
        assert abs(mp.fsum(w * x * x for x, w in zip(nodes, weights)) - mpf(2) / 3) < mpf("1e-28")


def test_p_at_zero_closed_form():
    with mp.workdps(30):
        v = pearcey_p(0, 0, 0, sg.PrecisionConfig(30))
        ref = mp.gamma(mpf(1) / 4) / (mp.pi * 4 ** mpf("0.75"))
        assert abs(v - ref) < mpf("1e-25")


def test_p_even_q_odd():
    with mp.workdps(30):
        for t in (-1, 0, 0.7):
            assert pearcey_p(1.3, t, 0, PREC) == pearcey_p(-1.3, t, 0, PREC)
            qd = pearcey_q(1.1, t, 0, PREC) + pearcey_q(-1.1, t, 0, PREC)
            assert abs(qd) < mpf("1e-22")
            assert pearcey_p(0, t, 1, PREC) == 0
            assert pearcey_q(0, t, 0, PREC) == 0


def test_p_against_adaptive_quadrature():
    with mp.workdps(30):
        t, x = mpf("0.4"), mpf("1.7")
        ref = mp.quad(lambda u: mp.exp(-u ** 4 / 4 - t * u * u / 2) * mp.cos(u * x),
                      [0, 8]) / mp.pi
        v = pearcey_p(x, t, 0, sg.PrecisionConfig(28))
        assert abs(v - ref) < mpf("1e-24")


@pytest.mark.parametrize("x,y,t", [(0, 0, 0), (0.7, 1.3, 0.3), (0.5, 0.5, -2.0),
                                   (2.0, -2.0, 1.0), (-1.0, 2.0, -1.0)])
def test_ode_residuals(x, y, t):
    rp, rq = ode_residuals(x, y, t, sg.PrecisionConfig(20))
    assert abs(rp) < 1e-8
    assert abs(rq) < 1e-8


def test_ode_march_oracle_for_q():
    # march the third-order equation from quadrature seeds at 0 and compare
    # against an independent quadrature at the target
    with mp.workdps(30):
        seeds = q_jet(0, 0, 2, sg.PrecisionConfig(30))
        got = ode_march("q", 0, 0, seeds, 1)[0]
        ref = pearcey_q(1.0, 0, 0, sg.PrecisionConfig(30))
        assert abs(got - ref) < mpf("1e-24")


def test_kernel_diagonal_positive_and_continuous():
    with mp.workdps(25):
        k0 = kernel(0.5, 0.5, 0, PREC)
        assert k0 > 0
        for dy in (mpf("1e-6"), -mpf("1e-6")):
            assert abs(kernel(0.5, mpf("0.5") + dy, 0, PREC) - k0) < mpf("1e-5")


def test_numerator_vanishes_on_diagonal():
    with mp.workdps(25):
        x, t = mpf("0.5"), mpf(0)
        pj = p_jet(x, t, 2, PREC)
        qj = q_jet(x, t, 2, PREC)
        num = pj[0] * qj[2] - pj[1] * qj[1] + pj[2] * qj[0] - t * pj[0] * qj[0]
        scale = max(abs(pj[0] * qj[2]), abs(pj[1] * qj[1]), abs(pj[2] * qj[0]))
        assert abs(num) < scale * mpf("1e-20")


def test_kernel_representations_agree():
    for (x, y, t) in [(0.3, -0.4, 0.1), (1.5, 2.0, -0.5), (-2.0, 1.0, 1.0)]:
        kq = kernel(x, y, t, sg.PrecisionConfig(20))
        kp = kernel_product_form(x, y, t, sg.PrecisionConfig(20))
        assert abs(kq - kp) <= abs(kq) * mpf("1e-8")


def test_partial_product_integral_identity():
    # integral_0^Z p q dz telescopes the kernel along the shifted diagonal
    with mp.workdps(25):
        x, y, t, Z = mpf("0.2"), mpf("-0.5"), mpf("0.3"), mpf(6)
        lhs = product_integral(x, y, t, Z, PREC)
        rhs = kernel(x + Z, y + Z, t, PREC) - kernel(x, y, t, PREC)
        assert abs(lhs - rhs) < mpf("1e-15")


def test_derivative_identity_links_representations():
    # (d/dx + d/dy) of the quotient numerator equals (x - y) p(x) q(y)
    with mp.workdps(25):
        for (x, y, t) in [(0.3, -0.4, 0.1), (1.1, 0.6, -0.8)]:
            x, y, t = mpf(x), mpf(y), mpf(t)
            pj = p_jet(x, t, 3, PREC)
            qj = q_jet(y, t, 3, PREC)
            lhs = (pj[1] * qj[2] - pj[2] * qj[1] + pj[3] * qj[0] - t * pj[1] * qj[0]) \
                + (pj[0] * qj[3] - pj[1] * qj[2] + pj[2] * qj[1] - t * pj[0] * qj[1])
            rhs = (x - y) * pj[0] * qj[0]
            assert abs(lhs - rhs) < mpf("1e-18")


class TestFredholm:
    def test_empty_set(self):
        assert fredholm_log_det(0, sg.EMPTY_SET, 16, PREC) == 0

    def test_unbounded_rejected(self):
        with pytest.raises(UnboundedSetError):
            fredholm_log_det(0, sg.normalize([(0, "inf")]), 16, PREC)

    def test_order_floor(self):
        with pytest.raises(ValidationError):
            fredholm_log_det(0, sg.normalize([(-1, 1)]), 2, PREC)

    def test_small_interval_first_order(self):
        with mp.workdps(25):
            h = mpf("1e-3")
            E = sg.IntervalUnion(((mpf("0.5") - h / 2, mpf("0.5") + h / 2),))
            q = fredholm_log_det(0, E, 8, PREC)
            ref = -h * kernel(0.5, 0.5, 0, PREC)
            assert abs(q - ref) < abs(ref) * mpf("1e-2")

    def test_spectral_convergence(self):
        E = sg.normalize([(-1, 1)])
        with mp.workdps(30):
            q6 = fredholm_log_det(0, E, 6, PREC)
            q12 = fredholm_log_det(0, E, 12, PREC)
            q24 = fredholm_log_det(0, E, 24, PREC)
            q48 = fredholm_log_det(0, E, 48, PREC)
            assert abs(q12 - q24) < abs(q6 - q12) / 100
            assert abs(q24 - q48) < mpf("1e-15")

    def test_negative_and_monotone(self):
        prev = mpf(0)
        for hi in (0.5, 1.0, 1.5):
            q = fredholm_log_det(0.2, sg.normalize([(-hi, hi)]), 24, PREC)
            assert q < 0
            assert q < prev
            prev = q

    def test_two_intervals(self):
        E = sg.normalize([(-1.5, -0.5), (0.5, 1.5)])
        q = fredholm_log_det(0, E, 24, PREC)
        assert q < 0

    def test_reflection_invariance(self):
        E = sg.normalize([(0.2, 1.3)])
        with mp.workdps(25):
            q1 = fredholm_log_det(0.4, E, 24, PREC)
            q2 = fredholm_log_det(0.4, E.reflect(), 24, PREC)
            assert abs(q1 - q2) < abs(q1) * mpf("1e-18")


class TestThm02:
    def test_asymmetric_interval_nondegenerate_low_precision(self):
        rep = residual_thm02(0.3, sg.normalize([(-0.7, 1.2)]),
                             FdConfig(refinements=2), sg.PrecisionConfig(20),
                             order=20)
        assert not rep.degenerate
        assert rep.converged
        assert rep.relative_residual < 1e-2
        assert rep.trend[1] < rep.trend[0]

    def test_asymmetric_interval_nondegenerate_high_precision(self):
        rep = residual_thm02(0.3, sg.normalize([(-0.7, 1.2)]),
                             FdConfig(refinements=2), sg.PrecisionConfig(25),
                             order=24)
        assert not rep.degenerate
        assert rep.converged
        assert rep.relative_residual < 1e-8
        assert rep.trend[1] < rep.trend[0]

    def test_symmetric_interval_degenerate(self):
        rep = residual_thm02(0.0, sg.normalize([(-1, 1)]),
                             FdConfig(refinements=2), sg.PrecisionConfig(20),
                             order=20)
        assert rep.degenerate
        assert rep.converged
        assert rep.relative_residual < 1e-5

    def test_reflected_set_same_report(self):
        E = sg.normalize([(-0.6, 1.1)])
        r1 = residual_thm02(0.2, E, FdConfig(refinements=1),
                            sg.PrecisionConfig(18), order=16)
        r2 = residual_thm02(0.2, E.reflect(), FdConfig(refinements=1),
                            sg.PrecisionConfig(18), order=16)
        assert abs(r1.relative_residual - r2.relative_residual) \
            <= 1e-6 * (1 + abs(r1.relative_residual))

    def test_unbounded_rejected(self):
        with pytest.raises(UnboundedSetError):
            residual_thm02(0, sg.normalize([(0, "inf")]), prec=PREC)


class TestScalingReport:
    def test_empty_gap(self):
        rep = scaling_limit_report(0, sg.EMPTY_SET, [8, 32], prec=PREC)
        assert rep.Q == 0 and all(r.diff == 0 for r in rep.rows)
        assert rep.decreasing

    def test_trend_small_sizes(self):
        G = sg.normalize([(-1, 1)])
        rep = scaling_limit_report(0, G, [8, 32], order=32, prec=sg.PrecisionConfig(25))
        assert rep.decreasing
        assert rep.rows[0].diff > rep.rows[1].diff
        assert rep.slope is not None and rep.slope > 0

    def test_eps_rows_equal_for_symmetric_gap(self):
        G = sg.normalize([(-1, 1)])
        r1 = scaling_limit_report(0, G, [8], eps=1, order=24, prec=PREC)
        r2 = scaling_limit_report(0, G, [8], eps=-1, order=24, prec=PREC)
        assert abs(r1.rows[0].Q_z - r2.rows[0].Q_z) < 1e-12
