import numpy as np
import pytest
from hypothesis import given, strategies as st

from pointtilt import InvariantError
from pointtilt.families import (
    AbsLink,
    AffineSeq,
    AlphaFamily,
    ClippedLinearLink,
    ConstantSeq,
    ExplicitSeq,
    GeometricSeq,
    PolynomialSeq,
    ReluLink,
    link_dominated_by_abs,
    link_identity_on_nonneg,
    seq_always_positive,
    seq_never_zero,
)


class TestSequences:
    def test_values(self):
        assert ConstantSeq(2.0).value(7) == 2.0
        assert AffineSeq(1.0, 0.5).value(4) == 3.0
        assert PolynomialSeq(2.0, 2.0).value(2) == 18.0
        assert GeometricSeq(1.0, 2.0).value(3) == 8.0

    def test_vectorized(self):
        vals = GeometricSeq(1.0, 2.0).value(np.arange(4))
        assert list(vals) == [1.0, 2.0, 4.0, 8.0]

    def test_explicit_head_then_tail(self):
        s = ExplicitSeq(head=(5.0, 7.0), tail=ConstantSeq(1.0))
        assert s.value(0) == 5.0
        assert s.value(1) == 7.0
        assert s.value(2) == 1.0
        assert list(s.value(np.array([0, 1, 2, 9]))) == [5.0, 7.0, 1.0, 1.0]

    def test_positivity_classification(self):
        assert seq_always_positive(AffineSeq(1.0, 1.0))
        assert not seq_always_positive(AffineSeq(1.0, -0.1))
        assert not seq_always_positive(ConstantSeq(0.0))
        assert seq_always_positive(ExplicitSeq((2.0,), GeometricSeq(1.0, 0.5)))
        assert not seq_always_positive(ExplicitSeq((2.0, -1.0), ConstantSeq(1.0)))

    def test_never_zero_affine_integer_root(self):
        assert not seq_never_zero(AffineSeq(-2.0, 1.0))   # zero at n = 2
        assert seq_never_zero(AffineSeq(-2.5, 1.0))
        assert seq_never_zero(AffineSeq(1.0, 0.0))
        assert not seq_never_zero(ConstantSeq(0.0))


class TestAlphaFamily:
    def test_accepts_positive(self):
        fam = AlphaFamily(GeometricSeq(1.0, 2.0))
        assert fam.value(3) == 8.0

    def test_rejects_nonpositive(self):
        with pytest.raises(InvariantError):
            AlphaFamily(ConstantSeq(0.0))
        with pytest.raises(InvariantError):
            AlphaFamily(AffineSeq(1.0, -1.0))

    @given(st.floats(0.01, 100.0), st.floats(0.0, 10.0), st.integers(0, 10_000))
    def test_affine_positive_everywhere(self, a, b, n):
        fam = AlphaFamily(AffineSeq(a, b))
        assert fam.value(n) > 0


class TestLinks:
    def test_values(self):
        assert AbsLink()(-2.0) == 2.0
        assert ReluLink()(-2.0) == 0.0
        link = ClippedLinearLink(slope=0.5, cap=3.0)
        assert link(2.0) == 1.0
        assert link(100.0) == 3.0
        assert link(-5.0) == 0.0

    def test_certificates(self):
        assert link_dominated_by_abs(AbsLink())
        assert link_dominated_by_abs(ReluLink())
        assert link_dominated_by_abs(ClippedLinearLink(1.0, 5.0))
        assert not link_dominated_by_abs(ClippedLinearLink(2.0, 5.0))

    def test_identity_on_nonneg(self):
        assert link_identity_on_nonneg(AbsLink())
        assert link_identity_on_nonneg(ReluLink())
        assert not link_identity_on_nonneg(ClippedLinearLink(1.0, 5.0))

    def test_negative_slope_rejected(self):
        with pytest.raises(InvariantError):
            ClippedLinearLink(-1.0, 5.0)

    @given(st.floats(-1e6, 1e6))
    def test_links_nonnegative(self, x):
        for link in (AbsLink(), ReluLink(), ClippedLinearLink(0.7, 2.0)):
            assert link(x) >= 0.0
