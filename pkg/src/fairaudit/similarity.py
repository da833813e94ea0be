"""Counterfactual group flips, Mahalanobis nearest-neighbor matching,
and the exact McNemar mid-p test over discordant prediction pairs.

The distance metric is computed on the base feature matrix only: the
group attribute and the outcome never enter matching, so neighbors are
"similar individuals" in covariate space. Matching is with replacement
and pooled-covariance based; ties go to the smallest row id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PROTECTED, UNPROTECTED, Dataset
from .errors import ConfigError, EmptyGroupError, MatrixError
from .model import PredictionSet, design_matrix, predict_labels
from .stats import TWO_SIDED, TestResult, binomial_midp

AGAINST_PROTECTED = "against_protected"
FAVORS_PROTECTED = "favors_protected"
BALANCED = "balanced"

_MATCH_CHUNK = 256


@dataclass(frozen=True)
class ContingencyTable2x2:
    """Counts of (original, comparator) prediction pairs.

    ``n_ab`` counts pairs where the original prediction was a and the
    comparator prediction was b, in the encoded label space (0 is the
    favorable prediction).
    """

    n00: int
    n01: int
    n10: int
    n11: int
    original_label: str = "original"
    comparator_label: str = "comparator"

    def __post_init__(self):
        if min(self.n00, self.n01, self.n10, self.n11) < 0:
            raise ValueError("contingency counts must be non-negative")

    @property
    def n_discordant(self) -> int:
        return self.n01 + self.n10

    @property
    def total(self) -> int:
        return self.n00 + self.n01 + self.n10 + self.n11


@dataclass(frozen=True)
class MatchPair:
    source_row_id: int
    matched_row_id: int
    distance: float


def covariance_inverse(features: np.ndarray) -> np.ndarray:
    """Inverse of the pooled sample covariance, ridge-regularized if needed.

    One-hot blocks make the raw covariance singular, so a singular
    matrix gets eps * I added with eps = 1e-6 * trace / dim before
    inversion. The result is symmetrized and checked positive definite.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise MatrixError("covariance needs a 2-D matrix with at least 2 rows")
    cov = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))

    def _is_spd(m: np.ndarray) -> bool:
        try:
            np.linalg.cholesky(m)
            return True
        except np.linalg.LinAlgError:
            return False

    if not _is_spd(cov):
        eps = 1e-6 * float(np.trace(cov)) / cov.shape[0]
        if eps <= 0:
            raise MatrixError("covariance matrix has zero variance everywhere")
        cov = cov + eps * np.eye(cov.shape[0])
        if not _is_spd(cov):
            raise MatrixError("covariance matrix is singular even after regularization")
    inverse = np.linalg.inv(cov)
    inverse = (inverse + inverse.T) / 2.0
    if not _is_spd(inverse):
        raise MatrixError("covariance inverse is not positive definite")
    return inverse


def mahalanobis(x: np.ndarray, y: np.ndarray, inv_cov: np.ndarray) -> float:
    """Mahalanobis distance sqrt((x-y)^T S^{-1} (x-y))."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or inv_cov.shape != (x.size, x.size):
        raise ValueError("dimension mismatch between vectors and inverse covariance")
    d = x - y
    q = float(d @ inv_cov @ d)
    if q < 0:
        if q > -1e-10:
            q = 0.0
        else:
            raise MatrixError(f"negative quadratic form {q}; inverse not PSD")
    return float(np.sqrt(q))


def nearest_neighbor_match(
    features: np.ndarray,
    row_ids: np.ndarray,
    is_protected: np.ndarray,
    inv_cov: np.ndarray,
    direction: str,
) -> list[MatchPair]:
    """Match every source-group row to its closest opposite-group row.

    ``direction`` names the source group; targets are the other group.
    Matching is with replacement. Exact distance ties resolve to the
    smallest target row id.
    """
    if direction not in (PROTECTED, UNPROTECTED):
        raise ValueError(f"direction must be {PROTECTED!r} or {UNPROTECTED!r}")
    X = np.asarray(features, dtype=np.float64)
    src_mask = is_protected if direction == PROTECTED else ~is_protected
    tgt_mask = ~src_mask
    if not src_mask.any():
        raise EmptyGroupError(f"no rows in source group {direction!r}")
    if not tgt_mask.any():
        raise EmptyGroupError("no rows in target group to match against")

    src_idx = np.flatnonzero(src_mask)
    tgt_idx = np.flatnonzero(tgt_mask)
    tgt_idx = tgt_idx[np.argsort(row_ids[tgt_idx], kind="stable")]

    # Factor the metric so squared distances are plain squared norms in
    # the whitened space; argmin then picks the first (= smallest row id)
    # among exactly tied targets.
    chol = np.linalg.cholesky(inv_cov)
    Z = X @ chol
    z_tgt = Z[tgt_idx]
    tgt_sq = np.einsum("ij,ij->i", z_tgt, z_tgt)

    pairs: list[MatchPair] = []
    for start in range(0, src_idx.size, _MATCH_CHUNK):
        chunk = src_idx[start : start + _MATCH_CHUNK]
        z_src = Z[chunk]
        src_sq = np.einsum("ij,ij->i", z_src, z_src)
        d2 = src_sq[:, None] + tgt_sq[None, :] - 2.0 * (z_src @ z_tgt.T)
        np.maximum(d2, 0.0, out=d2)
        best = np.argmin(d2, axis=1)
        for local, src in enumerate(chunk):
            tgt = tgt_idx[best[local]]
            pairs.append(
                MatchPair(
                    source_row_id=int(row_ids[src]),
                    matched_row_id=int(row_ids[tgt]),
                    distance=float(np.sqrt(d2[local, best[local]])),
                )
            )
    return pairs


@dataclass(frozen=True)
class FlipResult:
    """Original vs group-flipped predictions, aligned by row."""

    row_ids: np.ndarray
    is_protected: np.ndarray
    original: np.ndarray
    flipped: np.ndarray


def counterfactual_flip(dataset: Dataset, cv_result) -> FlipResult:
    """Re-score every row with its group attribute toggled.

    Each row is scored by the model of the fold that held it out, on a
    feature vector identical except for the group indicator. Requires
    the group attribute to have been a model feature.
    """
    if not cv_result.include_group:
        raise ConfigError(
            "counterfactual flip needs the group attribute as a model feature; "
            "rerun with the include-group switch enabled"
        )
    X = design_matrix(dataset, include_group=True)
    X_flipped = X.copy()
    X_flipped[:, -1] = 1.0 - X_flipped[:, -1]

    predictions = cv_result.predictions
    fold_by_row = dict(zip(predictions.row_ids.tolist(), predictions.fold_ids.tolist()))
    original = np.zeros(dataset.n, dtype=np.int8)
    flipped = np.zeros(dataset.n, dtype=np.int8)
    folds = np.array([fold_by_row[int(r)] for r in dataset.row_ids], dtype=np.int64)
    for fold in np.unique(folds):
        rows = folds == fold
        model = cv_result.models[int(fold)]
        original[rows] = predict_labels(model, X[rows])
        flipped[rows] = predict_labels(model, X_flipped[rows])
    return FlipResult(
        row_ids=dataset.row_ids.copy(),
        is_protected=dataset.is_protected.copy(),
        original=original,
        flipped=flipped,
    )


def build_contingency(
    original,
    comparator,
    original_label: str = "original",
    comparator_label: str = "comparator",
) -> ContingencyTable2x2:
    """Count binary (original, comparator) prediction pairs."""
    orig = np.asarray(original)
    comp = np.asarray(comparator)
    if orig.shape != comp.shape:
        raise ValueError("paired predictions must have equal length")
    return ContingencyTable2x2(
        n00=int(np.sum((orig == 0) & (comp == 0))),
        n01=int(np.sum((orig == 0) & (comp == 1))),
        n10=int(np.sum((orig == 1) & (comp == 0))),
        n11=int(np.sum((orig == 1) & (comp == 1))),
        original_label=original_label,
        comparator_label=comparator_label,
    )


def mcnemar_midp_test(table: ContingencyTable2x2, alpha: float = 0.05) -> TestResult:
    """Exact binomial mid-p test on the table's discordant pairs.

    The p-value is symmetric in (n01, n10); the signed statistic
    n01 - n10 carries the direction. Zero discordant pairs is a
    degenerate no-evidence result (p = 1).
    """
    k = table.n01
    n = table.n_discordant
    p = binomial_midp(k, n)
    return TestResult(
        statistic=float(table.n01 - table.n10),
        df=None,
        tail=TWO_SIDED,
        p_value=p,
        alpha=alpha,
        degenerate=n == 0,
        extra={"k": k, "n_minus_k": n - k, "n_discordant": n},
    )


def discordance_direction(table: ContingencyTable2x2, source_is_protected: bool) -> str:
    """Which group the discordance favors.

    The comparator prediction belongs to the opposite group (a flipped
    counterfactual or a matched neighbor). In encoded labels the n10
    cell means the comparator fared better (original unfavorable,
    comparator favorable) and n01 that it fared worse.
    """
    comparator_better = table.n10
    comparator_worse = table.n01
    if comparator_better == comparator_worse:
        return BALANCED
    opposite_group_advantaged = comparator_better > comparator_worse
    if source_is_protected:
        return AGAINST_PROTECTED if opposite_group_advantaged else FAVORS_PROTECTED
    return FAVORS_PROTECTED if opposite_group_advantaged else AGAINST_PROTECTED


def causal_contingency_tables(
    flip: FlipResult,
) -> dict[str, ContingencyTable2x2]:
    """Per-group original-vs-flipped tables, keyed by source group."""
    tables = {}
    for group, mask in (
        (PROTECTED, flip.is_protected),
        (UNPROTECTED, ~flip.is_protected),
    ):
        tables[group] = build_contingency(
            flip.original[mask],
            flip.flipped[mask],
            original_label=f"original ({group})",
            comparator_label="group-flipped",
        )
    return tables


def awareness_contingency_tables(
    dataset: Dataset, predictions: PredictionSet, inv_cov: np.ndarray | None = None
) -> dict[str, ContingencyTable2x2]:
    """Per-group original-vs-nearest-neighbor prediction tables.

    Every row of each group is matched to its closest opposite-group
    row by Mahalanobis distance over the base features; the two rows'
    predicted labels form one pair.
    """
    if inv_cov is None:
        inv_cov = covariance_inverse(dataset.features)
    pred_by_row = dict(zip(predictions.row_ids.tolist(), predictions.y_pred.tolist()))
    missing = [int(r) for r in dataset.row_ids if int(r) not in pred_by_row]
    if missing:
        raise ValueError(
            f"{len(missing)} dataset rows have no prediction (first: {missing[:5]})"
        )
    tables = {}
    for group in (PROTECTED, UNPROTECTED):
        pairs = nearest_neighbor_match(
            dataset.features, dataset.row_ids, dataset.is_protected, inv_cov, group
        )
        original = np.array([pred_by_row[p.source_row_id] for p in pairs], dtype=np.int8)
        neighbor = np.array([pred_by_row[p.matched_row_id] for p in pairs], dtype=np.int8)
        tables[group] = build_contingency(
            original,
            neighbor,
            original_label=f"original ({group})",
            comparator_label="nearest neighbor",
        )
    return tables
