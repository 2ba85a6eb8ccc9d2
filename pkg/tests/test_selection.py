import numpy as np
import pytest
from scipy.stats import chi2

from noisesig.calibration import chisq_cutoff_table
from noisesig.errors import CapacityError, UsageError
from noisesig.model import Dataset, ObjectiveSpec, subset_size
from noisesig.pvalues import p_gamma
from noisesig.selection import (bic_noise_experiment, bic_rank,
                                choose_functional, relative_pvalue)


class TestRelativePvalue:
    def test_full_outer_matches_direct_call(self, stack, l2):
        direct = p_gamma(stack, 3, l2, n_sims=200, seed=4).p_gamma
        rel = relative_pvalue(stack, 7, 3, l2, method="gamma", n_sims=200,
                              seed=4)
        assert rel == direct

    def test_restriction_reindexes_inner_code(self, stack, l2):
        # outer {Air.Flow, Water.Temp} = 3, inner {Air.Flow} = 1: after
        # restriction Air.Flow is column 0, so the inner code is still 1
        restricted = stack.restrict(3)
        direct = p_gamma(restricted, 1, l2, n_sims=200, seed=4).p_gamma
        rel = relative_pvalue(stack, 3, 1, l2, method="gamma", n_sims=200,
                              seed=4)
        assert rel == direct

    def test_reindex_shifts_bits(self, stack, l2):
        # outer {Air.Flow, Acid.Conc} = 5, inner {Acid.Conc} = 4: inside
        # the restricted data Acid.Conc is column 1, code 2
        restricted = stack.restrict(5)
        direct = p_gamma(restricted, 2, l2, n_sims=200, seed=4).p_gamma
        rel = relative_pvalue(stack, 5, 4, l2, method="gamma", n_sims=200,
                              seed=4)
        assert rel == direct

    def test_requires_strict_subset(self, stack, l2):
        with pytest.raises(UsageError, match="strict subset"):
            relative_pvalue(stack, 3, 3, l2)
        with pytest.raises(UsageError, match="strict subset"):
            relative_pvalue(stack, 3, 4, l2)


class TestChooseFunctional:
    @pytest.mark.parametrize("alpha", [0.05, 0.10])
    def test_stackloss_picks_airflow_watertemp(self, stack, l1, alpha):
        out = choose_functional(stack, l1, alpha, method="gamma",
                                n_sims=1000, seed=1)
        assert out.chosen == 3

    def test_stackloss_tight_level_drops_to_airflow(self, stack, l1):
        out = choose_functional(stack, l1, 0.01, method="gamma",
                                n_sims=1000, seed=1)
        assert set(out.survivors_step1) == {1, 3, 5}
        assert out.survivors_step2 == (1,)
        assert out.chosen == 1

    def test_numeric_cutoff_is_used_verbatim(self, stack, l2):
        out = choose_functional(stack, l2, 0.05, cutoff_source=0.013,
                                method="gamma", n_sims=200, seed=2)
        assert all(v == 0.013 for v in out.cutoffs.values())

    def test_outcome_carries_reports_and_cutoffs(self, stack, l2):
        out = choose_functional(stack, l2, 0.05, method="gamma", n_sims=200,
                                seed=2, cutoff_sims=20_000)
        assert len(out.reports) == 8
        assert set(out.cutoffs) == {1, 2, 3}
        assert out.alpha == 0.05

    def test_unknown_method_rejected(self, stack, l2):
        with pytest.raises(UsageError, match="unknown method"):
            choose_functional(stack, l2, 0.05, method="bayes")

    def test_bad_cutoff_source_rejected(self, stack, l2):
        with pytest.raises(UsageError, match="bad cutoff source"):
            choose_functional(stack, l2, 0.05, cutoff_source="bogus",
                              method="gamma", n_sims=100)

    def test_capacity_limit(self):
        g = np.random.default_rng(0)
        d = Dataset(g.normal(size=40), g.normal(size=(40, 13)),
                    tuple(f"x{j}" for j in range(13)))
        with pytest.raises(CapacityError):
            choose_functional(d, ObjectiveSpec.parse("l2"), 0.05)

    def test_pure_noise_single_covariate_rate_is_alpha(self, l2,
                                                       dataset_factory):
        # k=1 pure noise: the lone covariate is kept exactly when the
        # empty set looks inadequate inside it, an event calibrated to
        # have probability alpha
        table = chisq_cutoff_table([1], sims=20_000, seed=0, alphas=(0.10,))
        nonempty = 0
        reps = 150
        for r in range(reps):
            d = dataset_factory(seed=2000 + r, n=50, k=1, sigma=1.0,
                                beta=[0.0])
            out = choose_functional(d, l2, 0.10, cutoff_source=table,
                                    method="gamma", n_sims=300, seed=r)
            nonempty += out.chosen != 0
        assert 0.02 <= nonempty / reps <= 0.20

    def test_pure_noise_familywise_rate_compounds(self, l2, dataset_factory):
        # k=3 pure noise: each covariate survives step 2 at rate alpha
        # independently-ish, so a non-empty choice happens at roughly
        # 1 - (1 - alpha)^3 = 0.27, not alpha itself
        table = chisq_cutoff_table([1, 2, 3], sims=20_000, seed=0,
                                   alphas=(0.10,))
        nonempty = 0
        reps = 150
        for r in range(reps):
            d = dataset_factory(seed=1000 + r, n=50, k=3, sigma=1.0,
                                beta=[0.0, 0.0, 0.0])
            out = choose_functional(d, l2, 0.10, cutoff_source=table,
                                    method="gamma", n_sims=300, seed=r)
            nonempty += out.chosen != 0
        assert 0.15 <= nonempty / reps <= 0.40


class TestBicRank:
    def test_matches_least_squares_oracle(self, stack):
        ranked = dict(bic_rank(stack))
        n = stack.n
        for e in range(8):
            cols = [j for j in range(3) if e >> j & 1]
            A = np.column_stack([np.ones(n)] + [stack.X[:, j] for j in cols])
            coef, *_ = np.linalg.lstsq(A, stack.y, rcond=None)
            rss = float(np.sum((stack.y - A @ coef) ** 2))
            expected = n * np.log(rss / n) + (len(cols) + 2) * np.log(n)
            assert ranked[e] == pytest.approx(expected, rel=1e-12)

    def test_order_is_ascending(self, stack):
        vals = [b for _, b in bic_rank(stack)]
        assert vals == sorted(vals)

    def test_stackloss_top_model(self, stack):
        assert bic_rank(stack)[0][0] == 3


class TestBicNoise:
    def test_single_covariate_matches_chisq_law(self):
        # BIC prefers the one-covariate model when n log(RSS0/RSS1)
        # exceeds log n; under pure noise that statistic is chi-squared(1)
        n = 189
        g = np.random.default_rng(3)
        d = Dataset(g.normal(size=n), g.normal(size=(n, 1)), ("z",))
        frac = bic_noise_experiment(d, reps=2000, seed=5)
        assert frac == pytest.approx(chi2.sf(np.log(n), 1), abs=0.015)

    def test_single_replicate_is_binary(self):
        g = np.random.default_rng(4)
        d = Dataset(g.normal(size=30), g.normal(size=(30, 2)), ("a", "b"))
        assert bic_noise_experiment(d, reps=1, seed=0) in (0.0, 1.0)

    def test_thread_count_invariance(self):
        g = np.random.default_rng(6)
        d = Dataset(g.normal(size=40), g.normal(size=(40, 3)),
                    ("a", "b", "c"))
        a = bic_noise_experiment(d, reps=64, seed=9, threads=1)
        b = bic_noise_experiment(d, reps=64, seed=9, threads=4)
        assert a == b
