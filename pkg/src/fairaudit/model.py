"""Classifier abstraction: a built-in logistic model and a prediction-file loader.

Scores always mean the predicted probability of the *unfavorable*
outcome, so a higher score is a worse prediction for the individual.
The predicted label is 1 (unfavorable) when the score reaches the
decision threshold.

External models are audited through the prediction wire format instead
of being re-trained here: a CSV with header
``row_id,fold_id,y_true,y_pred,score,group`` where y values use the
internal coding (0 favorable, 1 unfavorable), score is in [0, 1], and
group is the literal word ``protected`` or ``unprotected``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .data import FAVORABLE, PROTECTED, UNFAVORABLE, UNPROTECTED, Dataset
from .errors import PredictionFormatError, TrainingError

GROUP_FEATURE = "is_protected"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.2
    iterations: int = 600
    l2: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")


@dataclass(frozen=True)
class TrainedModel:
    """Logistic model: weights per feature plus a trailing intercept."""

    weights: np.ndarray  # shape (n_features + 1,), intercept last
    threshold: float
    iterations: int
    initial_loss: float
    final_loss: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.weights)):
            raise TrainingError("model weights are not finite")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")
        self.weights.setflags(write=False)

    @property
    def feature_weights(self) -> np.ndarray:
        return self.weights[:-1]

    @property
    def intercept(self) -> float:
        return float(self.weights[-1])


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _loss(X: np.ndarray, y: np.ndarray, w: np.ndarray, l2: float) -> float:
    z = X @ w[:-1] + w[-1]
    # log(1 + e^z) - y*z, computed stably via logaddexp
    nll = float(np.mean(np.logaddexp(0.0, z) - y * z))
    return nll + 0.5 * l2 * float(w[:-1] @ w[:-1])


def train_logistic(
    X: np.ndarray,
    y: np.ndarray,
    config: TrainConfig = TrainConfig(),
    threshold: float = 0.5,
) -> TrainedModel:
    """Fit a regularized logistic model by full-batch gradient descent.

    ``y`` holds targets in the internal coding (1 = unfavorable), so the
    fitted score is the unfavorable-outcome probability. The intercept
    is not regularized. Training is deterministic: weights start at zero
    and the configured seed is recorded for provenance only.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise TrainingError(f"need at least 2 training rows, got {n}")
    if y.min() == y.max():
        raise TrainingError("training data contains a single outcome class")
    w = np.zeros(X.shape[1] + 1, dtype=np.float64)
    initial_loss = _loss(X, y, w, config.l2)
    lr = config.learning_rate
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(config.iterations):
            z = X @ w[:-1] + w[-1]
            resid = _sigmoid(z) - y
            grad_w = X.T @ resid / n + config.l2 * w[:-1]
            grad_b = float(resid.mean())
            w[:-1] -= lr * grad_w
            w[-1] -= lr * grad_b
            if not np.all(np.isfinite(w)):
                break
        final_loss = _loss(X, y, w, config.l2) if np.all(np.isfinite(w)) else math.inf
    if not np.isfinite(final_loss):
        raise TrainingError(
            "training diverged (non-finite loss); try a smaller learning rate"
        )
    return TrainedModel(
        weights=w,
        threshold=threshold,
        iterations=config.iterations,
        initial_loss=initial_loss,
        final_loss=final_loss,
    )


def predict_scores(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Unfavorable-outcome probabilities in the open interval (0, 1)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.feature_weights.shape[0]:
        raise ValueError(
            f"feature dimension mismatch: model expects "
            f"{model.feature_weights.shape[0]}, rows have "
            f"{X.shape[1] if X.ndim == 2 else X.shape}"
        )
    scores = _sigmoid(X @ model.feature_weights + model.intercept)
    # sigmoid saturates to exactly 0.0/1.0 in float64 for |z| > ~37
    return np.clip(scores, 5e-324, 1.0 - 2.220446049250313e-16)


def predict_labels(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Predicted labels: 1 (unfavorable) where score >= threshold."""
    return (predict_scores(model, X) >= model.threshold).astype(np.int8)


class PredictionRecord(NamedTuple):
    row_id: int
    fold_id: int
    y_true: int
    y_pred: int
    score: float
    group: str


@dataclass(frozen=True)
class PredictionSet:
    """Column-oriented store of one prediction per audited row."""

    row_ids: np.ndarray
    fold_ids: np.ndarray
    y_true: np.ndarray
    y_pred: np.ndarray
    scores: np.ndarray
    is_protected: np.ndarray

    def __post_init__(self):
        n = self.row_ids.shape[0]
        for arr in (self.fold_ids, self.y_true, self.y_pred, self.scores, self.is_protected):
            if arr.shape != (n,):
                raise ValueError("all prediction columns must have equal length")
        if len(np.unique(self.row_ids)) != n:
            raise PredictionFormatError("duplicate row_id in predictions")
        for arr in (
            self.row_ids,
            self.fold_ids,
            self.y_true,
            self.y_pred,
            self.scores,
            self.is_protected,
        ):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return int(self.row_ids.shape[0])

    @property
    def fold_count(self) -> int:
        return int(self.fold_ids.max()) + 1 if self.n else 0

    def records(self) -> list[PredictionRecord]:
        return [
            PredictionRecord(
                int(self.row_ids[i]),
                int(self.fold_ids[i]),
                int(self.y_true[i]),
                int(self.y_pred[i]),
                float(self.scores[i]),
                PROTECTED if self.is_protected[i] else UNPROTECTED,
            )
            for i in range(self.n)
        ]

    def for_fold(self, fold_id: int) -> "PredictionSet":
        mask = self.fold_ids == fold_id
        return PredictionSet(
            row_ids=self.row_ids[mask].copy(),
            fold_ids=self.fold_ids[mask].copy(),
            y_true=self.y_true[mask].copy(),
            y_pred=self.y_pred[mask].copy(),
            scores=self.scores[mask].copy(),
            is_protected=self.is_protected[mask].copy(),
        )


PREDICTION_HEADER = ["row_id", "fold_id", "y_true", "y_pred", "score", "group"]


def write_predictions_csv(predictions: PredictionSet, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTION_HEADER)
        for rec in predictions.records():
            writer.writerow(
                [rec.row_id, rec.fold_id, rec.y_true, rec.y_pred, repr(rec.score), rec.group]
            )


def load_external_predictions(path: str | Path) -> PredictionSet:
    """Read and validate a prediction CSV produced by an external model.

    y_pred is *not* checked against score and threshold: external models
    own their decision rule. Scores outside [0, 1], unknown group
    labels, malformed values, and duplicate row ids are rejected with
    the offending line number.
    """
    path = Path(path)
    if not path.exists():
        raise PredictionFormatError(f"prediction file not found: {path}")
    rows = []
    seen_ids: set[int] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise PredictionFormatError(f"{path}: file is empty") from None
        if header != PREDICTION_HEADER:
            raise PredictionFormatError(
                f"{path}: header must be {','.join(PREDICTION_HEADER)}, got "
                f"{','.join(header)}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or all(c.strip() == "" for c in row):
                continue
            if len(row) != len(PREDICTION_HEADER):
                raise PredictionFormatError(
                    f"{path}: line {line_no} has {len(row)} cells, expected "
                    f"{len(PREDICTION_HEADER)}"
                )
            cells = [c.strip() for c in row]
            try:
                row_id = int(cells[0])
                fold_id = int(cells[1])
                y_true = int(cells[2])
                y_pred = int(cells[3])
                score = float(cells[4])
            except ValueError as exc:
                raise PredictionFormatError(
                    f"{path}: line {line_no}: {exc}"
                ) from None
            if y_true not in (FAVORABLE, UNFAVORABLE) or y_pred not in (
                FAVORABLE,
                UNFAVORABLE,
            ):
                raise PredictionFormatError(
                    f"{path}: line {line_no}: y values must be 0 or 1"
                )
            if not 0.0 <= score <= 1.0:
                raise PredictionFormatError(
                    f"{path}: line {line_no}: score {score} outside [0, 1]"
                )
            if fold_id < 0:
                raise PredictionFormatError(
                    f"{path}: line {line_no}: fold_id must be non-negative"
                )
            group = cells[5]
            if group not in (PROTECTED, UNPROTECTED):
                raise PredictionFormatError(
                    f"{path}: line {line_no}: unknown group label {group!r} "
                    f"(expected {PROTECTED!r} or {UNPROTECTED!r})"
                )
            if row_id in seen_ids:
                raise PredictionFormatError(
                    f"{path}: line {line_no}: duplicate row_id {row_id}"
                )
            seen_ids.add(row_id)
            rows.append((row_id, fold_id, y_true, y_pred, score, group == PROTECTED))
    if not rows:
        raise PredictionFormatError(f"{path}: no prediction rows")
    cols = list(zip(*rows))
    return PredictionSet(
        row_ids=np.array(cols[0], dtype=np.int64),
        fold_ids=np.array(cols[1], dtype=np.int64),
        y_true=np.array(cols[2], dtype=np.int8),
        y_pred=np.array(cols[3], dtype=np.int8),
        scores=np.array(cols[4], dtype=np.float64),
        is_protected=np.array(cols[5], dtype=bool),
    )


def design_matrix(dataset: Dataset, include_group: bool) -> np.ndarray:
    """Model input matrix; appends the is-protected indicator as the last
    column when the group attribute is a model feature."""
    if not include_group:
        return dataset.features
    return np.column_stack(
        [dataset.features, dataset.is_protected.astype(np.float64)]
    )
