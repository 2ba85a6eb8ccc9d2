import numpy as np
import pytest

from noisesig import (CapacityError, Dataset, NonSigEllipsoid, NonSigInterval,
                      ObjectiveSpec, PValueReport, UsageError, design_matrix,
                      full_subset, is_subset, subset_members, subset_size,
                      subsets_of)


class TestDataset:
    def test_basic_shape(self, stack):
        assert stack.n == 21
        assert stack.k == 3
        assert stack.names == ("Air.Flow", "Water.Temp", "Acid.Conc")
        assert stack.response_name == "stack.loss"

    def test_row_mismatch(self):
        with pytest.raises(UsageError, match="rows"):
            Dataset(np.arange(4.0), np.ones((3, 1)), ("a",))

    def test_too_few_rows(self):
        with pytest.raises(UsageError):
            Dataset(np.array([1.0]), np.ones((1, 1)), ("a",))

    def test_name_count_and_uniqueness(self):
        with pytest.raises(UsageError, match="names"):
            Dataset(np.arange(3.0), np.ones((3, 2)), ("a",))
        with pytest.raises(UsageError, match="unique"):
            Dataset(np.arange(3.0), np.ones((3, 2)), ("a", "a"))

    def test_rejects_non_finite(self):
        y = np.array([1.0, np.nan, 3.0])
        with pytest.raises(UsageError, match="position 1"):
            Dataset(y, np.ones((3, 1)), ("a",))
        X = np.ones((3, 2))
        X[2, 1] = np.inf
        with pytest.raises(UsageError, match="row 2, column 1"):
            Dataset(np.arange(3.0), X, ("a", "b"))

    def test_arrays_write_protected(self, stack):
        with pytest.raises(ValueError):
            stack.y[0] = 99.0
        with pytest.raises(ValueError):
            stack.X[0, 0] = 99.0

    def test_column_lookup(self, stack):
        assert stack.column("Water.Temp") == 1
        with pytest.raises(UsageError, match="unknown covariate"):
            stack.column("Pressure")

    def test_restrict(self, stack):
        r = stack.restrict(0b101)
        assert r.names == ("Air.Flow", "Acid.Conc")
        assert np.array_equal(r.X[:, 1], stack.X[:, 2])
        assert np.array_equal(r.y, stack.y)
        with pytest.raises(UsageError):
            stack.restrict(0)


class TestSubsetCodes:
    def test_enumeration(self):
        assert subsets_of(3) == list(range(8))

    def test_enumeration_capacity(self):
        with pytest.raises(CapacityError):
            subsets_of(25)

    def test_size_and_members(self):
        assert subset_size(0) == 0
        assert subset_size(0b1011) == 3
        assert subset_members(0b101, 3) == [0, 2]
        assert subset_members(0, 3) == []

    def test_membership_roundtrip(self):
        for e in subsets_of(5):
            rebuilt = sum(1 << j for j in subset_members(e, 5))
            assert rebuilt == e

    def test_is_subset(self):
        assert is_subset(0b001, 0b011)
        assert is_subset(0b011, 0b011)
        assert not is_subset(0b100, 0b011)
        assert is_subset(0, 0)

    def test_full_subset(self):
        assert full_subset(3) == 7
        assert full_subset(1) == 1

    def test_design_matrix(self, stack):
        A = design_matrix(stack, 0b110)
        assert A.shape == (21, 3)
        assert np.array_equal(A[:, 0], np.ones(21))
        assert np.array_equal(A[:, 1], stack.X[:, 1])
        assert np.array_equal(A[:, 2], stack.X[:, 2])
        A0 = design_matrix(stack, 0)
        assert A0.shape == (21, 1)


class TestObjectiveSpec:
    @pytest.mark.parametrize("text,kind,c", [
        ("l1", "l1", None),
        ("l2", "l2", None),
        ("huber:1.5", "huber", 1.5),
        ("huber:0.7", "huber", 0.7),
    ])
    def test_parse(self, text, kind, c):
        spec = ObjectiveSpec.parse(text)
        assert spec.kind == kind
        if c is not None:
            assert spec.c == pytest.approx(c)

    def test_parse_default_huber_constant(self):
        assert ObjectiveSpec.parse("huber").c == pytest.approx(1.345)

    @pytest.mark.parametrize("bad", ["L3", "huber:", "huber:x", "huber:-1", ""])
    def test_parse_rejects(self, bad):
        with pytest.raises(UsageError):
            ObjectiveSpec.parse(bad)

    def test_label_roundtrip(self):
        for text in ("l1", "l2", "huber:1.5"):
            spec = ObjectiveSpec.parse(text)
            again = ObjectiveSpec.parse(spec.label())
            assert again.kind == spec.kind


class TestReports:
    def test_best_prefers_raw(self):
        r = PValueReport(subset=3, p_raw=0.2, p_gamma=0.21, p_asymptotic=0.3)
        assert r.best() == 0.2

    def test_best_falls_through(self):
        assert PValueReport(subset=3, p_gamma=0.21).best() == 0.21
        assert PValueReport(subset=3, p_asymptotic=0.3).best() == 0.3
        with pytest.raises(UsageError):
            PValueReport(subset=3).best()

    def test_interval_invariants(self):
        iv = NonSigInterval(1.0, 3.0, alpha=0.95)
        assert iv.length == pytest.approx(2.0)
        assert iv.contains(1.0) and iv.contains(3.0) and iv.contains(2.0)
        assert not iv.contains(0.999)
        with pytest.raises(UsageError):
            NonSigInterval(3.0, 1.0, alpha=0.95)

    def test_ellipsoid_contains_center(self):
        ell = NonSigEllipsoid(center=np.array([1.0, -2.0]),
                              shape=np.eye(2), radius2=0.5, alpha=0.95)
        assert ell.contains([1.0, -2.0])
        assert ell.contains([1.0 + np.sqrt(0.5) - 1e-9, -2.0])
        assert not ell.contains([1.0 + np.sqrt(0.5) + 1e-6, -2.0])

    def test_frozen(self, stack):
        iv = NonSigInterval(0.0, 1.0, alpha=0.9)
        with pytest.raises(AttributeError):
            iv.lower = -1.0
        with pytest.raises(AttributeError):
            stack.y = np.zeros(21)
