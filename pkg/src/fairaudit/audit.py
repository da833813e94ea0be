"""End-to-end audit pipelines for datasets and external prediction files."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibration import bin_scores
from .cv import (
    STAT_KEYS,
    DistributionSet,
    StatSamples,
    collect_metric_distributions,
    grouped_confusion_stats,
    make_folds,
    run_cv,
)
from .data import Dataset
from .errors import AuditError
from .metrics import AuditInputs, evaluate_all
from .model import PredictionSet, TrainConfig
from .report import AuditReport, stamp_timestamp
from .similarity import (
    awareness_contingency_tables,
    causal_contingency_tables,
    counterfactual_flip,
)


@dataclass(frozen=True)
class AuditOptions:
    k: int = 250
    alpha: float = 0.05
    bins: int = 10
    seed: int = 0
    threshold: float = 0.5
    include_group: bool = True
    stratified: bool = False
    train: TrainConfig = TrainConfig()

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")


def _fold_accuracies(predictions: PredictionSet) -> tuple[float, ...]:
    correct = predictions.y_true == predictions.y_pred
    out = []
    for fold in range(predictions.fold_count):
        mask = predictions.fold_ids == fold
        if mask.any():
            out.append(float(correct[mask].mean()))
    return tuple(out)


def _samples_payload(distributions: DistributionSet) -> dict:
    return {
        key: {
            "protected": [float(v) for v in s.protected],
            "unprotected": [float(v) for v in s.unprotected],
            "fold_count": s.fold_count,
        }
        for key, s in distributions.items()
    }


def _config_payload(options: AuditOptions, dataset: Dataset | None, k: int) -> dict:
    config = {
        "k": k,
        "alpha": options.alpha,
        "bins": options.bins,
        "seed": options.seed,
        "threshold": options.threshold,
        "include_group_feature": options.include_group,
        "stratified": options.stratified,
        "learning_rate": options.train.learning_rate,
        "iterations": options.train.iterations,
        "l2": options.train.l2,
    }
    if dataset is not None:
        config.update(
            {
                "n_rows": dataset.n,
                "n_protected": dataset.n_protected,
                "n_unprotected": dataset.n_unprotected,
                "outcome_labels": list(dataset.outcome_labels),
                "group_labels": list(dataset.group_labels),
            }
        )
    return config


def audit_dataset(
    dataset: Dataset,
    options: AuditOptions = AuditOptions(),
    model_id: str = "builtin_logistic",
    dropped_rows: int | None = None,
    drop_reasons: dict | None = None,
) -> AuditReport:
    """Full audit of the built-in model on a dataset: CV, all 14 metrics."""
    plan = make_folds(dataset, options.k, options.seed, options.stratified)
    cv_result = run_cv(
        dataset, plan, options.train, options.include_group, options.threshold
    )
    predictions = cv_result.predictions
    distributions = collect_metric_distributions(predictions, plan)
    calibration_table = bin_scores(predictions, options.bins)

    causal_tables = None
    causal_reason = None
    if options.include_group:
        causal_tables = causal_contingency_tables(
            counterfactual_flip(dataset, cv_result)
        )
    else:
        causal_reason = (
            "group attribute excluded from model features; rerun with the "
            "include-group switch to score counterfactuals"
        )
    awareness_tables = awareness_contingency_tables(dataset, predictions)

    inputs = AuditInputs(
        distributions=distributions,
        calibration_table=calibration_table,
        causal_tables=causal_tables,
        awareness_tables=awareness_tables,
        causal_unavailable_reason=causal_reason,
    )
    verdicts = evaluate_all(inputs, options.alpha)
    fold_acc = _fold_accuracies(predictions)
    report = AuditReport(
        model_id=model_id,
        config=_config_payload(options, dataset, plan.k),
        verdicts=tuple(verdicts),
        samples=_samples_payload(distributions),
        model_accuracy=float(np.mean(fold_acc)) if fold_acc else None,
        fold_accuracies=fold_acc,
        calibration_table=calibration_table,
        causal_tables=causal_tables,
        awareness_tables=awareness_tables,
        dropped_rows=dropped_rows,
        drop_reasons=drop_reasons,
    )
    return stamp_timestamp(report)


def audit_predictions(
    predictions: PredictionSet,
    options: AuditOptions = AuditOptions(),
    dataset: Dataset | None = None,
    model_id: str = "external",
) -> AuditReport:
    """Audit an externally produced prediction file.

    The fold structure comes from the file's fold_id column. The
    counterfactual metric needs a trainable model and is never
    evaluable here; the matching metric runs when the covariate data
    is supplied alongside.
    """
    k = predictions.fold_count
    if k < 2:
        raise AuditError(
            f"prediction file defines {k} fold(s); need at least 2 to build "
            "sampling distributions"
        )
    distributions = _collect_from_records(predictions, k)
    calibration_table = bin_scores(predictions, options.bins)

    awareness_tables = None
    awareness_reason = None
    if dataset is not None:
        awareness_tables = awareness_contingency_tables(dataset, predictions)
    else:
        awareness_reason = (
            "matching needs covariates; pass the data file and schema along with "
            "the predictions"
        )
    inputs = AuditInputs(
        distributions=distributions,
        calibration_table=calibration_table,
        causal_tables=None,
        awareness_tables=awareness_tables,
        causal_unavailable_reason=(
            "external predictions carry no trainable model to score "
            "group-flipped rows"
        ),
        awareness_unavailable_reason=awareness_reason,
    )
    verdicts = evaluate_all(inputs, options.alpha)
    fold_acc = _fold_accuracies(predictions)
    report = AuditReport(
        model_id=model_id,
        config=_config_payload(options, dataset, k),
        verdicts=tuple(verdicts),
        samples=_samples_payload(distributions),
        model_accuracy=float(np.mean(fold_acc)) if fold_acc else None,
        fold_accuracies=fold_acc,
        calibration_table=calibration_table,
        causal_tables=None,
        awareness_tables=awareness_tables,
    )
    return stamp_timestamp(report)


def _collect_from_records(predictions: PredictionSet, k: int) -> DistributionSet:
    """Distributions keyed by the records' own fold ids (external files)."""
    per_key: dict[str, dict[str, list[float]]] = {
        key: {"protected": [], "unprotected": []} for key in STAT_KEYS
    }
    for fold in range(k):
        fold_preds = predictions.for_fold(fold)
        if fold_preds.n == 0:
            continue
        prot, unprot = grouped_confusion_stats(fold_preds)
        for key in STAT_KEYS:
            for group, stats in (("protected", prot), ("unprotected", unprot)):
                value = stats.value(key)
                if value is not None:
                    per_key[key][group].append(value)
    return {
        key: StatSamples(
            key=key,
            protected=np.asarray(vals["protected"], dtype=np.float64),
            unprotected=np.asarray(vals["unprotected"], dtype=np.float64),
            fold_count=k,
        )
        for key, vals in per_key.items()
    }
