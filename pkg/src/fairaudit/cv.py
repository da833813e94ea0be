"""K-fold cross-validation engine and per-fold group statistics.

Every row is held out exactly once; the per-fold, per-group statistics
of the held-out predictions form the sampling distributions that the
t-test metrics compare. A statistic whose denominator count is zero in
some fold is undefined there (None) and simply absent from that fold's
contribution — it is never imputed as zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FAVORABLE, PROTECTED, UNPROTECTED, Dataset
from .errors import FoldError
from .model import (
    PredictionSet,
    TrainConfig,
    TrainedModel,
    design_matrix,
    predict_scores,
    train_logistic,
)

# Statistic keys exposed to the metric registry. Confusion counts use the
# favorable coding: a "positive" prediction/outcome is the favorable one.
STAT_KEYS = (
    "ppr",
    "tpr",
    "fpr",
    "fnr",
    "ppv",
    "npv",
    "accuracy",
    "fn_fp_ratio",
    "mean_score_favorable",
    "mean_score_unfavorable",
)


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of every row id to one of k folds."""

    k: int
    row_ids: np.ndarray
    assignments: np.ndarray
    seed: int
    stratified: bool = False

    def __post_init__(self):
        if self.row_ids.shape != self.assignments.shape:
            raise ValueError("row_ids and assignments must align")
        sizes = np.bincount(self.assignments, minlength=self.k)
        if sizes.size != self.k or sizes.max() - sizes.min() > 1 or sizes.min() == 0:
            raise ValueError("fold sizes must differ by at most one and be non-empty")
        self.row_ids.setflags(write=False)
        self.assignments.setflags(write=False)

    def fold_of(self, row_ids: np.ndarray) -> np.ndarray:
        """Fold index for each requested row id."""
        order = np.argsort(self.row_ids)
        sorted_ids = self.row_ids[order]
        pos = np.minimum(np.searchsorted(sorted_ids, row_ids), sorted_ids.size - 1)
        if np.any(sorted_ids[pos] != row_ids):
            raise KeyError("row id not covered by this fold plan")
        return self.assignments[order[pos]]


def make_folds(
    dataset: Dataset, k: int, seed: int, stratified: bool = False
) -> FoldPlan:
    """Randomly partition the dataset into k folds of near-equal size.

    Plain mode shuffles once and chunks contiguously, with the first
    (n mod k) folds one row larger. Stratified mode deals shuffled
    members of each (outcome, group) cell cyclically instead; it is off
    by default.
    """
    n = dataset.n
    if not 2 <= k <= n:
        raise ValueError(f"fold count must satisfy 2 <= k <= {n}, got {k}")
    rng = np.random.default_rng(seed)
    assignments = np.empty(n, dtype=np.int64)
    if not stratified:
        perm = rng.permutation(n)
        base, extra = divmod(n, k)
        start = 0
        for fold in range(k):
            size = base + (1 if fold < extra else 0)
            assignments[perm[start : start + size]] = fold
            start += size
    else:
        counter = 0
        strata = dataset.outcome.astype(np.int64) * 2 + dataset.is_protected
        for stratum in np.unique(strata):
            members = np.flatnonzero(strata == stratum)
            members = members[rng.permutation(members.size)]
            for idx in members:
                assignments[idx] = counter % k
                counter += 1
    return FoldPlan(
        k=k,
        row_ids=dataset.row_ids.copy(),
        assignments=assignments,
        seed=seed,
        stratified=stratified,
    )


@dataclass(frozen=True)
class CvResult:
    """Held-out predictions plus the per-fold models that produced them."""

    predictions: PredictionSet
    models: tuple[TrainedModel, ...]
    include_group: bool
    threshold: float


def run_cv(
    dataset: Dataset,
    plan: FoldPlan,
    config: TrainConfig = TrainConfig(),
    include_group: bool = True,
    threshold: float = 0.5,
) -> CvResult:
    """Train on k-1 folds and score the held-out fold, k times.

    Rows are processed in row_id order inside every fold, so the output
    (including float rounding) is a pure function of the row_id -> data
    mapping and the plan: shuffling dataset rows yields bit-identical
    records. Raises FoldError when some training split lacks one of the
    outcome classes.
    """
    if plan.row_ids.shape[0] != dataset.n or np.any(plan.row_ids != dataset.row_ids):
        raise FoldError("fold plan does not cover this dataset")
    X = design_matrix(dataset, include_group)
    y = dataset.outcome.astype(np.float64)
    folds = plan.assignments

    def by_row_id(indices: np.ndarray) -> np.ndarray:
        return indices[np.argsort(dataset.row_ids[indices], kind="stable")]

    models: list[TrainedModel] = []
    parts: list[tuple[np.ndarray, np.ndarray]] = []
    for fold in range(plan.k):
        held_idx = by_row_id(np.flatnonzero(folds == fold))
        train_idx = by_row_id(np.flatnonzero(folds != fold))
        y_train = y[train_idx]
        if y_train.min() == y_train.max():
            raise FoldError(
                f"fold {fold}: training split contains a single outcome class"
            )
        model = train_logistic(X[train_idx], y_train, config, threshold)
        scores = predict_scores(model, X[held_idx])
        models.append(model)
        parts.append((held_idx, scores))

    order = np.concatenate([idx for idx, _ in parts])
    scores = np.concatenate([s for _, s in parts])
    fold_ids = np.concatenate(
        [np.full(idx.size, fold, dtype=np.int64) for fold, (idx, _) in enumerate(parts)]
    )
    predictions = PredictionSet(
        row_ids=dataset.row_ids[order].copy(),
        fold_ids=fold_ids,
        y_true=dataset.outcome[order].copy(),
        y_pred=(scores >= threshold).astype(np.int8),
        scores=scores,
        is_protected=dataset.is_protected[order].copy(),
    )
    return CvResult(
        predictions=predictions,
        models=tuple(models),
        include_group=include_group,
        threshold=threshold,
    )


@dataclass(frozen=True)
class GroupFoldStats:
    """Confusion-derived statistics for one group in one fold.

    Fields are None exactly when their denominator count is zero.
    Counts follow the favorable coding: tp = predicted favorable and
    actually favorable, fp = predicted favorable but unfavorable, etc.
    """

    fold_id: int
    group: str
    tp: int
    fp: int
    tn: int
    fn: int
    ppr: float | None
    tpr: float | None
    fpr: float | None
    fnr: float | None
    ppv: float | None
    npv: float | None
    accuracy: float | None
    fn_fp_ratio: float | None
    mean_score_favorable: float | None
    mean_score_unfavorable: float | None

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def value(self, key: str) -> float | None:
        if key not in STAT_KEYS:
            raise KeyError(key)
        return getattr(self, key)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def _group_stats(
    fold_id: int, group: str, y_true: np.ndarray, y_pred: np.ndarray, scores: np.ndarray
) -> GroupFoldStats:
    pred_fav = y_pred == FAVORABLE
    true_fav = y_true == FAVORABLE
    tp = int(np.sum(pred_fav & true_fav))
    fp = int(np.sum(pred_fav & ~true_fav))
    tn = int(np.sum(~pred_fav & ~true_fav))
    fn = int(np.sum(~pred_fav & true_fav))
    total = tp + fp + tn + fn
    fav_scores = scores[true_fav]
    unfav_scores = scores[~true_fav]
    return GroupFoldStats(
        fold_id=fold_id,
        group=group,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        ppr=_ratio(tp + fp, total),
        tpr=_ratio(tp, tp + fn),
        fpr=_ratio(fp, fp + tn),
        fnr=_ratio(fn, tp + fn),
        ppv=_ratio(tp, tp + fp),
        npv=_ratio(tn, tn + fn),
        accuracy=_ratio(tp + tn, total),
        fn_fp_ratio=_ratio(fn, fp),
        mean_score_favorable=float(fav_scores.mean()) if fav_scores.size else None,
        mean_score_unfavorable=float(unfav_scores.mean()) if unfav_scores.size else None,
    )


def grouped_confusion_stats(
    fold_predictions: PredictionSet,
) -> tuple[GroupFoldStats, GroupFoldStats]:
    """Per-group statistics for the records of a single fold."""
    fold_ids = np.unique(fold_predictions.fold_ids)
    if fold_ids.size > 1:
        raise ValueError(f"records span several folds: {fold_ids.tolist()}")
    fold_id = int(fold_ids[0]) if fold_ids.size else 0
    out = []
    for group, mask in (
        (PROTECTED, fold_predictions.is_protected),
        (UNPROTECTED, ~fold_predictions.is_protected),
    ):
        out.append(
            _group_stats(
                fold_id,
                group,
                fold_predictions.y_true[mask],
                fold_predictions.y_pred[mask],
                fold_predictions.scores[mask],
            )
        )
    return out[0], out[1]


@dataclass(frozen=True)
class StatSamples:
    """Across-fold sample of one statistic, per group.

    Folds where the statistic is undefined are dropped; the counts of
    retained folds are reported alongside. ``insufficient_reason`` marks
    statistics that ended up with fewer than two defined folds for
    either group and therefore cannot feed a t-test.
    """

    key: str
    protected: np.ndarray
    unprotected: np.ndarray
    fold_count: int

    @property
    def insufficient_reason(self) -> str | None:
        bad = [
            f"{name} sample has {arr.size} defined fold(s)"
            for name, arr in (
                ("protected", self.protected),
                ("unprotected", self.unprotected),
            )
            if arr.size < 2
        ]
        if bad:
            return f"{self.key}: " + " and ".join(bad) + f" out of {self.fold_count}"
        return None


DistributionSet = dict[str, StatSamples]


def collect_metric_distributions(
    predictions: PredictionSet, plan: FoldPlan
) -> DistributionSet:
    """Per-statistic sampling distributions over folds, per group."""
    fold_of_rows = plan.fold_of(predictions.row_ids)
    if np.any(fold_of_rows != predictions.fold_ids):
        raise FoldError("prediction fold_ids disagree with the fold plan")
    per_key: dict[str, dict[str, list[float]]] = {
        key: {"protected": [], "unprotected": []} for key in STAT_KEYS
    }
    for fold in range(plan.k):
        prot, unprot = grouped_confusion_stats(predictions.for_fold(fold))
        for key in STAT_KEYS:
            for group, stats in (("protected", prot), ("unprotected", unprot)):
                value = stats.value(key)
                if value is not None:
                    per_key[key][group].append(value)
    return {
        key: StatSamples(
            key=key,
            protected=np.asarray(samples["protected"], dtype=np.float64),
            unprotected=np.asarray(samples["unprotected"], dtype=np.float64),
            fold_count=plan.k,
        )
        for key, samples in per_key.items()
    }
