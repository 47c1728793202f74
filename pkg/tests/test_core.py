import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mp, mpf

from sourcegap.core import (
    EMPTY_SET,
    FULL_LINE,
    IntervalUnion,
    PrecisionConfig,
    SignedLogValue,
    SourceSpec,
    UnboundedSetError,
    ValidationError,
    normalize,
    signed_log_det,
)


def test_normalize_merges_overlap():
    E = normalize([(0, 1), (0.5, 2)])
    assert E.intervals == ((mpf(0), mpf(2)),)


def test_normalize_empty():
    assert normalize([]) is not None
    assert normalize([]).is_empty


def test_normalize_keeps_unbounded():
    E = normalize([("-inf", 0), (1, "inf")])
    assert not E.is_bounded
    assert E.unbounded_below and E.unbounded_above
    assert len(E.intervals) == 2


def test_normalize_rejects_degenerate():
    with pytest.raises(ValidationError):
        normalize([(1, 1)])
    with pytest.raises(ValidationError):
        normalize([(2, 1)])


def test_reflect_examples():
    assert normalize([(0, 1)]).reflect().intervals == ((mpf(-1), mpf(0)),)
    sym = normalize([(-2, -1), (1, 2)])
    assert sym.reflect() == sym
    assert EMPTY_SET.reflect() == EMPTY_SET


def test_complement_examples():
    E = normalize([(-1, 1)])
    assert E.complement().intervals == ((mp.ninf, mpf(-1)), (mpf(1), mp.inf))
    assert FULL_LINE.complement().is_empty
    assert EMPTY_SET.complement() == FULL_LINE


def test_finite_endpoints_rejects_unbounded():
    with pytest.raises(UnboundedSetError):
        normalize([("-inf", 0)]).finite_endpoints()
    assert normalize([(-1, 0.5), (1, 2)]).finite_endpoints() == (
        mpf(-1), mpf(0.5), mpf(1), mpf(2))


interval_lists = st.lists(
    st.tuples(st.integers(-40, 39), st.integers(1, 12)).map(
        lambda p: (p[0] / 4, p[0] / 4 + p[1] / 4)
    ),
    min_size=0, max_size=5,
)


@settings(max_examples=200, deadline=None)
@given(interval_lists)
def test_complement_involution(raw):
    E = normalize(raw)
    assert E.complement().complement() == E


@settings(max_examples=200, deadline=None)
@given(interval_lists)
def test_reflect_involution_and_normalize_idempotent(raw):
    E = normalize(raw)
    assert E.reflect().reflect() == E
    assert normalize(E.intervals) == E


@settings(max_examples=100, deadline=None)
@given(interval_lists, st.integers(-12, 12))
def test_membership_consistent_with_complement(raw, xq):
    E = normalize(raw)
    x = xq / 3
    on_boundary = any(x == lo or x == hi for lo, hi in E.intervals)
    if not on_boundary:
        assert E.contains(x) != E.complement().contains(x)


def test_source_spec_validation():
    with pytest.raises(ValidationError):
        SourceSpec(1, 0, 0)
    with pytest.raises(ValidationError):
        SourceSpec(1, -1, 2)
    s = SourceSpec(1.5, 2, 1)
    assert s.n == 3
    assert s.swapped() == SourceSpec(-1.5, 1, 2)
    assert not s.degenerate
    assert SourceSpec(0, 1, 1).degenerate
    assert not SourceSpec(0, 1, 0).degenerate


def test_precision_config_floor():
    with pytest.raises(ValidationError):
        PrecisionConfig(10)
    assert PrecisionConfig(30).with_digits(60).significant_digits == 60


class TestSignedLogValue:
    def test_roundtrip(self):
        with mp.workdps(30):
            for x in (3.5, -0.25, 1e-200, -2e150):
                v = SignedLogValue.from_number(x)
                assert abs(v.to_mpf() - mpf(x)) <= abs(mpf(x)) * mpf("1e-25")

    def test_zero(self):
        z = SignedLogValue.zero()
        assert z.sign == 0 and z.to_mpf() == 0
        assert (z * SignedLogValue.from_number(5)).sign == 0

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-50, 50), st.floats(-50, 50))
    def test_mul_add_match_floats(self, x, y):
        X, Y = SignedLogValue.from_number(x), SignedLogValue.from_number(y)
        assert abs((X * Y).to_mpf() - mpf(x) * mpf(y)) < 1e-10
        assert abs((X + Y).to_mpf() - (mpf(x) + mpf(y))) < 1e-10
        assert abs((X - Y).to_mpf() - (mpf(x) - mpf(y))) < 1e-10

    def test_huge_dynamic_range(self):
        big = SignedLogValue(1, mpf(10000))     # e^10000
        small = SignedLogValue(1, mpf(-10000))
        assert (big * small).log_abs == 0
        assert (big / big).to_mpf() == 1

    def test_cancellation(self):
        a = SignedLogValue.from_number(1)
        b = SignedLogValue.from_number(-1)
        assert (a + b).sign == 0

    def test_pow(self):
        v = SignedLogValue.from_number(-2)
        assert abs((v ** 3).to_mpf() + 8) < 1e-12
        assert abs((v ** 2).to_mpf() - 4) < 1e-12


class TestSignedLogDet:
    def test_identity(self):
        det, _ = signed_log_det([[mpf(1), mpf(0)], [mpf(0), mpf(1)]])
        assert det.sign == 1 and det.log_abs == 0

    def test_sign_and_value(self):
        det, _ = signed_log_det([[mpf(0), mpf(1)], [mpf(1), mpf(0)]])
        assert det.sign == -1 and abs(det.to_mpf() + 1) < 1e-25

    def test_singular(self):
        det, _ = signed_log_det([[mpf(1), mpf(2)], [mpf(2), mpf(4)]])
        assert det.sign == 0

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-3, 3).filter(lambda x: abs(x) > 1e-3),
                    min_size=9, max_size=9))
    def test_matches_reference(self, vals):
        import mpmath
        with mp.workdps(30):
            rows = [[mpf(v) for v in vals[i * 3:(i + 1) * 3]] for i in range(3)]
            ours, _ = signed_log_det(rows)
            ref = mpmath.det(mpmath.matrix(rows))
            assert abs(ours.to_mpf() - ref) <= abs(ref) * mpf("1e-20") + mpf("1e-20")

    def test_huge_scale_matrix(self):
        # entries spanning e^+-400: the log-domain result stays accurate
        with mp.workdps(30):
            rows = [[mp.exp(400), mpf(1)], [mpf(1), mp.exp(-400)]]
            det, _ = signed_log_det(rows)
            # det = 1 - 1 = 0 up to precision -> dominated by the exp(0) term
            assert det.sign == 0 or det.log_abs < -20
