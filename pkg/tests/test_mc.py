import numpy as np
import pytest
from mpmath import mp, mpf

import sourcegap as sg
from sourcegap.core import SourceSpec, ValidationError
from sourcegap.mc import (
    McConfig,
    brownian_to_source,
    mc_gap_probabilities,
    mc_gap_probability,
    sample_spectrum,
    scaled_Qz,
    _sample_batch,
)

PREC = sg.PrecisionConfig(30)


def test_seeded_runs_reproducible():
    spec = SourceSpec(1, 1, 1)
    E = sg.normalize([(-2, 2)])
    cfg = McConfig(samples=20000, seed=123)
    a = mc_gap_probability(spec, E, cfg)
    b = mc_gap_probability(spec, E, cfg)
    assert a == b


def test_single_eigenvalue_statistics():
    spec = SourceSpec(1.5, 1, 0)
    rng = np.random.default_rng(7)
    eigs = _sample_batch(spec, rng, 200000)
    se_mean = 1 / np.sqrt(eigs.size)
    assert abs(eigs.mean() - 1.5) < 4 * se_mean
    assert abs(eigs.var() - 1.0) < 0.02


def test_zero_source_symmetric():
    spec = SourceSpec(0, 1, 1)
    rng = np.random.default_rng(21)
    eigs = _sample_batch(spec, rng, 100000)
    avg = eigs.mean(axis=1)
    assert abs(avg.mean()) < 4 * avg.std() / np.sqrt(len(avg))


def test_wide_separation_heuristic():
    spec = SourceSpec(3, 1, 1)
    rng = np.random.default_rng(3)
    eigs = _sample_batch(spec, rng, 50000)
    assert abs(eigs[:, 0].mean() + 3) < 1.0
    assert abs(eigs[:, 1].mean() - 3) < 1.0


def test_sample_spectrum_sorted():
    rng = np.random.default_rng(5)
    s = sample_spectrum(SourceSpec(1, 2, 2), rng)
    assert s.shape == (4,)
    assert np.all(np.diff(s) >= 0)


def test_full_line_probability_one():
    est = mc_gap_probability(SourceSpec(1, 1, 1), sg.FULL_LINE,
                             McConfig(samples=5000, seed=1))
    assert est.p_hat == 1.0 and est.std_err == 0.0


def test_half_line_zero_source():
    est = mc_gap_probability(SourceSpec(0, 1, 0), sg.normalize([("-inf", 0)]),
                             McConfig(samples=200000, seed=11))
    assert abs(est.p_hat - 0.5) < 4 * est.std_err


def test_against_determinant():
    spec = SourceSpec(1, 1, 1)
    E = sg.normalize([(-2, 2)])
    est = mc_gap_probability(spec, E, McConfig(samples=400000, seed=42))
    det = float(sg.gap_probability(spec, E, PREC))
    assert abs(est.p_hat - det) < 3 * est.std_err


def test_shared_stream_monotone_pathwise():
    spec = SourceSpec(0.8, 1, 1)
    sets = [sg.normalize([(-w, w)]) for w in (0.8, 1.4, 2.2, 4.0)]
    ests = mc_gap_probabilities(spec, sets, McConfig(samples=50000, seed=9))
    phats = [e.p_hat for e in ests]
    assert phats == sorted(phats)


def test_mc_config_validation():
    with pytest.raises(ValidationError):
        McConfig(samples=0, seed=1)


class TestBrownianMap:
    def test_half_time_values(self):
        E = sg.normalize([(-1, 1)])
        with mp.workdps(25):
            u, V = brownian_to_source(0.5, 1.25, E)
            assert abs(u - mpf(1.25) * mp.sqrt(2)) < mpf("1e-20")
            assert abs(V.intervals[0][1] - 2 * mp.sqrt(2)) < mpf("1e-20")

    def test_small_time_limit(self):
        u, _ = brownian_to_source(1e-8, 1.0, sg.normalize([(-1, 1)]))
        assert u < mpf("2e-4")

    def test_domain(self):
        E = sg.normalize([(-1, 1)])
        for bad in (0, 1, -0.5, 1.5):
            with pytest.raises(ValidationError):
                brownian_to_source(bad, 1, E)

    def test_identity_against_quadrature(self):
        # two-path avoidance probability: deterministic map + determinant
        # versus direct double quadrature of the bridge density
        t, a = mpf("0.3"), mpf(1)
        E = sg.normalize([(-1, 1)])
        u, V = brownian_to_source(t, a, E)
        p_det = sg.gap_probability(SourceSpec(u, 1, 1), V, sg.PrecisionConfig(25))
        with mp.workdps(25):
            c = 1 / (t * (1 - t))

            def dens(x, y):
                return (y - x) * mp.exp(-c * x * x + 2 * a * x / (1 - t)) \
                    * mp.exp(-c * y * y - 2 * a * y / (1 - t))

            def block(lo, hi):
                return mp.quad(lambda x: mp.quad(lambda y: dens(x, y), [lo, hi]),
                               [lo, hi])

            p_ref = block(-1, 1) / block(-8, 8)
            assert abs(p_det - p_ref) <= p_ref * mpf("1e-8")

    def test_duality_symmetric(self):
        E = sg.normalize([(-1.2, 1.2)])
        u, V = brownian_to_source(0.4, 0.9, E)
        p1 = sg.gap_probability(SourceSpec(u, 1, 1), V, PREC)
        p2 = sg.gap_probability(SourceSpec(-u, 1, 1), V, PREC)
        with mp.workdps(35):
            assert abs(p1 - p2) <= p1 * mpf("1e-12")


class TestScaledQz:
    def test_empty_gap_is_zero(self):
        assert scaled_Qz(0, sg.EMPTY_SET, 8, 1, PREC) == 0

    def test_validation(self):
        G = sg.normalize([(-1, 1)])
        with pytest.raises(ValidationError):
            scaled_Qz(0, G, 7, 1, PREC)
        with pytest.raises(ValidationError):
            scaled_Qz(0, G, 8, 2, PREC)
        with pytest.raises(ValidationError):
            scaled_Qz(3, G, 8, 1, PREC)  # |s| z^2 >= 1/2
        with pytest.raises(ValidationError):
            scaled_Qz(0, sg.normalize([(0, "inf")]), 8, 1, PREC)

    def test_eps_symmetry(self):
        G = sg.normalize([(-1, 1)])
        qp = scaled_Qz(0, G, 8, 1, PREC)
        qm = scaled_Qz(0, G, 8, -1, PREC)
        with mp.workdps(30):
            assert abs(qp - qm) <= abs(qp) * mpf("1e-12")

    def test_agrees_with_mc(self):
        G = sg.normalize([(-1, 1)])
        q = scaled_Qz(0, G, 8, 1, PREC)
        n = 8
        with mp.workdps(30):
            u = float(mp.sqrt(n))
            scale = float(mpf(n) ** (-mpf(1) / 4))
        V = G.scaled(scale)
        est = mc_gap_probability(SourceSpec(u, 4, 4), V.complement(),
                                 McConfig(samples=300000, seed=77))
        p = float(mp.exp(q))
        assert abs(est.p_hat - p) < 4 * est.std_err
