"""Matching, counterfactual, and McNemar mid-p tests."""

import numpy as np
import pytest

from fairaudit.cv import make_folds, run_cv
from fairaudit.data import PROTECTED, UNPROTECTED, Dataset
from fairaudit.errors import ConfigError, EmptyGroupError, MatrixError
from fairaudit.model import TrainConfig, TrainedModel
from fairaudit.similarity import (
    AGAINST_PROTECTED,
    BALANCED,
    FAVORS_PROTECTED,
    ContingencyTable2x2,
    awareness_contingency_tables,
    build_contingency,
    causal_contingency_tables,
    counterfactual_flip,
    covariance_inverse,
    discordance_direction,
    mahalanobis,
    mcnemar_midp_test,
    nearest_neighbor_match,
)
from fairaudit.stats import binomial_midp
from fairaudit.synth import SynthConfig, generate


def dataset_from(features, protected, outcomes=None, row_ids=None):
    n = len(features)
    return Dataset(
        row_ids=np.asarray(
            row_ids if row_ids is not None else np.arange(n), dtype=np.int64
        ),
        features=np.asarray(features, dtype=np.float64),
        outcome=np.asarray(
            outcomes if outcomes is not None else np.zeros(n), dtype=np.int8
        ),
        is_protected=np.asarray(protected, dtype=bool),
        feature_names=tuple(f"f{i}" for i in range(np.shape(features)[1])),
        outcome_labels=("0", "1"),
        group_labels=("protected", "unprotected"),
    )


class TestCovarianceInverse:
    def test_diagonal_case(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(5000, 3)) * np.array([1.0, 2.0, 0.5])
        inv = covariance_inverse(X)
        off_diag = inv - np.diag(np.diag(inv))
        assert np.allclose(np.diag(inv), [1.0, 0.25, 4.0], rtol=0.1)
        # off-diagonals are pure sampling noise, scaled by the larger
        # inverse variances (up to 4.0 here)
        assert np.all(np.abs(off_diag) < 0.15)

    def test_analytic_two_feature(self):
        # Sample whose covariance is exactly [[2,0],[0,8]]
        X = np.array([[2.0, 0.0], [-2.0, 0.0], [0.0, 4.0], [0.0, -4.0], [0.0, 0.0]])
        cov = np.cov(X, rowvar=False, ddof=1)
        assert np.allclose(cov, [[2, 0], [0, 8]])
        inv = covariance_inverse(X)
        assert np.allclose(inv, [[0.5, 0], [0, 0.125]])

    def test_multiply_back_to_identity(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(200, 5)) @ rng.normal(size=(5, 5))
        inv = covariance_inverse(X)
        cov = np.cov(X, rowvar=False, ddof=1)
        assert np.allclose(inv @ cov, np.eye(5), atol=1e-8)

    def test_singular_one_hot_block_regularized(self):
        rng = np.random.default_rng(1)
        levels = rng.integers(0, 3, 100)
        onehot = np.eye(3)[levels]  # rows sum to 1 -> singular covariance
        X = np.column_stack([rng.normal(size=100), onehot])
        inv = covariance_inverse(X)
        np.linalg.cholesky(inv)  # SPD

    def test_zero_variance_rejected(self):
        with pytest.raises(MatrixError):
            covariance_inverse(np.ones((10, 2)))


class TestMahalanobis:
    def test_identical_points(self):
        inv = np.eye(3)
        assert mahalanobis(np.ones(3), np.ones(3), inv) == 0.0

    def test_identity_reduces_to_euclidean(self):
        x = np.array([1.0, 2.0, 2.0])
        y = np.zeros(3)
        assert mahalanobis(x, y, np.eye(3)) == pytest.approx(3.0)

    def test_analytic_diagonal(self):
        inv = np.linalg.inv(np.diag([2.0, 2.0]))
        assert mahalanobis(np.array([2.0, 0.0]), np.zeros(2), inv) == pytest.approx(
            np.sqrt(2.0)
        )

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            mahalanobis(np.ones(2), np.ones(3), np.eye(3))


class TestNearestNeighborMatch:
    def brute_force(self, features, row_ids, is_protected, inv, direction):
        src = np.flatnonzero(is_protected if direction == PROTECTED else ~is_protected)
        tgt = np.flatnonzero(~is_protected if direction == PROTECTED else is_protected)
        out = {}
        for s in src:
            best = None
            for t in tgt:
                d = mahalanobis(features[s], features[t], inv)
                key = (d, row_ids[t])
                if best is None or key < best:
                    best = key
            out[int(row_ids[s])] = (int(best[1]), float(best[0]))
        return out

    def test_identical_row_matches_at_zero(self):
        features = np.array([[1.0, 2.0], [3.0, 1.0], [1.0, 2.0], [5.0, 5.0]])
        protected = [True, False, False, False]
        inv = covariance_inverse(features)
        pairs = nearest_neighbor_match(
            features, np.arange(4), np.array(protected), inv, PROTECTED
        )
        assert len(pairs) == 1
        assert pairs[0].matched_row_id == 2
        assert pairs[0].distance == 0.0

    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(20)
        for trial in range(20):
            n = int(rng.integers(10, 200))
            d = int(rng.integers(1, 5))
            features = rng.normal(size=(n, d))
            protected = rng.random(n) < 0.5
            if protected.all() or not protected.any():
                protected[0] = True
                protected[1] = False
            row_ids = rng.permutation(n * 3)[:n]  # non-contiguous ids
            inv = covariance_inverse(features)
            direction = PROTECTED if trial % 2 == 0 else UNPROTECTED
            expected = self.brute_force(features, row_ids, protected, inv, direction)
            pairs = nearest_neighbor_match(features, row_ids, protected, inv, direction)
            assert len(pairs) == len(expected)
            for pair in pairs:
                want_id, want_dist = expected[pair.source_row_id]
                assert pair.matched_row_id == want_id
                assert pair.distance == pytest.approx(want_dist, abs=1e-8)

    def test_tie_breaks_to_smallest_row_id(self):
        # two identical targets; the smaller row id must win
        features = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 1.0], [9.0, 9.0]])
        protected = np.array([True, False, False, False])
        row_ids = np.array([10, 42, 7, 99])
        inv = np.eye(2)
        pairs = nearest_neighbor_match(features, row_ids, protected, inv, PROTECTED)
        assert pairs[0].matched_row_id == 7

    def test_empty_target_group(self):
        features = np.ones((3, 2))
        with pytest.raises(EmptyGroupError):
            nearest_neighbor_match(
                features, np.arange(3), np.array([True, True, True]), np.eye(2), PROTECTED
            )

    def test_affine_invariance_with_recomputed_covariance(self):
        rng = np.random.default_rng(31)
        features = rng.normal(size=(40, 3))
        protected = rng.random(40) < 0.4
        if protected.all() or not protected.any():
            protected[:2] = [True, False]
        transform = rng.normal(size=(3, 3)) + 3 * np.eye(3)
        shifted = features @ transform + rng.normal(size=3)
        pairs_a = nearest_neighbor_match(
            features, np.arange(40), protected, covariance_inverse(features), PROTECTED
        )
        pairs_b = nearest_neighbor_match(
            shifted, np.arange(40), protected, covariance_inverse(shifted), PROTECTED
        )
        for a, b in zip(pairs_a, pairs_b):
            assert a.matched_row_id == b.matched_row_id
            assert a.distance == pytest.approx(b.distance, abs=1e-6)


class TestCounterfactualFlip:
    def _cv(self, dataset, include_group=True):
        plan = make_folds(dataset, k=2, seed=0)
        return run_cv(dataset, plan, TrainConfig(iterations=60), include_group=include_group)

    def test_zero_group_weight_means_no_discordance(self):
        d = generate(SynthConfig(n=200, seed=5))
        cv_result = self._cv(d)
        # force the group weight (last feature column) to zero in every fold model
        from dataclasses import replace

        models = []
        for m in cv_result.models:
            w = m.weights.copy()
            w[-2] = 0.0
            models.append(replace(m, weights=w))
        blind = replace(cv_result, models=tuple(models))
        flip = counterfactual_flip(d, blind)
        assert np.array_equal(flip.original, flip.flipped)
        tables = causal_contingency_tables(flip)
        assert tables[PROTECTED].n_discordant == 0
        assert tables[UNPROTECTED].n_discordant == 0

    def test_hand_built_model_flips_exactly_one_row(self):
        # Feature weight 0, group weight +2: flipping a protected row to
        # unprotected moves its logit from +1 to -1 (favorable), flipping an
        # unprotected row from -1 to +1. With logits +-1 every row is
        # discordant; shrink the group weight for one row via its feature.
        d = dataset_from(
            features=[[0.0], [0.0], [3.0]],
            protected=[True, False, False],
            outcomes=[1, 0, 0],
        )
        model = TrainedModel(
            weights=np.array([1.0, 2.0, -1.0]),  # feature, group, intercept
            threshold=0.5,
            iterations=0,
            initial_loss=0.0,
            final_loss=0.0,
        )

        class FakeCv:
            models = (model, model)
            include_group = True
            threshold = 0.5

            class predictions:
                row_ids = np.array([0, 1, 2])
                fold_ids = np.array([0, 1, 0])

        flip = counterfactual_flip(d, FakeCv)
        # row 0 (protected): logit 2*1-1=+1 -> unfav; flipped: -1 -> fav
        # row 1 (unprotected): logit -1 -> fav; flipped: +1 -> unfav
        # row 2 (unprotected): logit 3-1=2 -> unfav; flipped: 3+2-1=4 -> unfav
        assert flip.original.tolist() == [1, 0, 1]
        assert flip.flipped.tolist() == [0, 1, 1]

    def test_flip_twice_restores(self):
        d = generate(SynthConfig(n=120, seed=6))
        cv_result = self._cv(d)
        flip_once = counterfactual_flip(d, cv_result)
        # flipping the flipped dataset: rebuild dataset with inverted groups
        inverted = Dataset(
            row_ids=d.row_ids.copy(),
            features=d.features.copy(),
            outcome=d.outcome.copy(),
            is_protected=~d.is_protected,
            feature_names=d.feature_names,
            outcome_labels=d.outcome_labels,
            group_labels=d.group_labels,
        )
        flip_back = counterfactual_flip(inverted, cv_result)
        assert np.array_equal(flip_back.flipped, flip_once.original)

    def test_requires_group_feature(self):
        d = generate(SynthConfig(n=100, seed=7))
        cv_result = self._cv(d, include_group=False)
        with pytest.raises(ConfigError, match="include-group"):
            counterfactual_flip(d, cv_result)


class TestContingency:
    def test_counting(self):
        table = build_contingency([0, 1, 0, 1, 1], [0, 1, 1, 0, 0])
        assert (table.n00, table.n11, table.n01, table.n10) == (1, 1, 1, 2)

    def test_all_agreeing(self):
        table = build_contingency([0, 1, 1], [0, 1, 1])
        assert table.n01 == table.n10 == 0

    def test_total(self):
        rng = np.random.default_rng(2)
        a = rng.integers(0, 2, 57)
        b = rng.integers(0, 2, 57)
        assert build_contingency(a, b).total == 57


class TestMcnemarMidp:
    def test_balanced_large(self):
        table = ContingencyTable2x2(n00=10, n01=177, n10=177, n11=10)
        result = mcnemar_midp_test(table)
        assert result.p_value == pytest.approx(1.0)

    def test_all_one_direction_354(self):
        table = ContingencyTable2x2(n00=4673, n01=0, n10=354, n11=9774)
        result = mcnemar_midp_test(table)
        assert result.p_value < 1e-100
        assert result.extra == {"k": 0, "n_minus_k": 354, "n_discordant": 354}

    def test_all_one_direction_265(self):
        table = ContingencyTable2x2(n00=4257, n01=265, n10=0, n11=6427)
        result = mcnemar_midp_test(table)
        assert result.p_value < 1e-50

    def test_transpose_symmetry(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            n01, n10 = int(rng.integers(0, 50)), int(rng.integers(0, 50))
            a = mcnemar_midp_test(ContingencyTable2x2(0, n01, n10, 0))
            b = mcnemar_midp_test(ContingencyTable2x2(0, n10, n01, 0))
            assert a.p_value == b.p_value

    def test_degenerate_no_discordance(self):
        result = mcnemar_midp_test(ContingencyTable2x2(5, 0, 0, 7))
        assert result.degenerate
        assert result.p_value == 1.0

    def test_matches_kernel(self):
        table = ContingencyTable2x2(0, 13, 15, 0)
        assert mcnemar_midp_test(table).p_value == binomial_midp(13, 28)


class TestDirection:
    def test_protected_table_comparator_better(self):
        # protected source, flipping to unprotected fares better -> bias
        table = ContingencyTable2x2(n00=50, n01=2, n10=20, n11=50)
        assert discordance_direction(table, True) == AGAINST_PROTECTED

    def test_protected_table_comparator_worse(self):
        table = ContingencyTable2x2(n00=50, n01=20, n10=2, n11=50)
        assert discordance_direction(table, True) == FAVORS_PROTECTED

    def test_unprotected_table_mirrors(self):
        table = ContingencyTable2x2(n00=50, n01=2, n10=20, n11=50)
        assert discordance_direction(table, False) == FAVORS_PROTECTED

    def test_balanced(self):
        table = ContingencyTable2x2(n00=50, n01=5, n10=5, n11=50)
        assert discordance_direction(table, True) == BALANCED


class TestAwarenessTables:
    def test_tables_cover_each_group_once(self):
        d = generate(SynthConfig(n=150, seed=8))
        plan = make_folds(d, k=3, seed=0)
        cv_result = run_cv(d, plan, TrainConfig(iterations=60))
        tables = awareness_contingency_tables(d, cv_result.predictions)
        assert tables[PROTECTED].total == d.n_protected
        assert tables[UNPROTECTED].total == d.n_unprotected

    def test_missing_predictions_rejected(self):
        d = generate(SynthConfig(n=60, seed=9))
        plan = make_folds(d, k=2, seed=0)
        cv_result = run_cv(d, plan, TrainConfig(iterations=30))
        smaller = d.take(np.arange(50))
        bigger_preds = cv_result.predictions
        with pytest.raises(ValueError, match="no prediction"):
            awareness_contingency_tables(
                dataset_from(
                    np.vstack([d.features, np.zeros((1, d.features.shape[1]))]),
                    list(d.is_protected) + [True],
                ),
                bigger_preds,
            )
