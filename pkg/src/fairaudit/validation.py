"""Replicate studies that validate the tests against synthetic ground truth.

A replicate generates a population from a known logistic model, runs
the CV pipeline, and records which metrics flagged a violation. With a
zero group shift and a group-blind model every flag is a false alarm,
so the flag rate estimates the per-metric Type-I error; with a positive
shift the flag rate estimates power.

Fold statistics come from overlapping training sets, so the per-fold
samples are not strictly independent; no correction is applied, which
is why Type-I rates are checked against a loose band rather than the
nominal level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cv import collect_metric_distributions, make_folds, run_cv
from .metrics import T_TEST, VIOLATION, AuditInputs, evaluate_all, registry
from .model import TrainConfig
from .stats import TWO_SIDED
from .synth import SynthConfig, generate

# Trainer sized for the replicate scale (a few thousand rows, a handful
# of features); studies run hundreds of replicates so iterations matter.
REPLICATE_TRAIN = TrainConfig(learning_rate=0.5, iterations=250, l2=1e-4)


def one_sided_t_metric_ids() -> tuple[str, ...]:
    """Metrics whose violation flag comes from one-sided t components."""
    out = []
    for spec in registry():
        if spec.test_kind != T_TEST:
            continue
        if all(c.tail != TWO_SIDED for c in spec.components):
            out.append(spec.id)
    return tuple(out)


@dataclass
class StudyResult:
    replicates: int
    counts: dict[str, int] = field(default_factory=dict)

    def rate(self, metric_id: str) -> float:
        return self.counts.get(metric_id, 0) / self.replicates

    def rates(self) -> dict[str, float]:
        return {m: c / self.replicates for m, c in sorted(self.counts.items())}


def replicate_verdicts(
    seed: int,
    n: int = 5000,
    k: int = 25,
    delta: float = 0.0,
    include_group: bool = False,
    alpha: float = 0.05,
    train: TrainConfig = REPLICATE_TRAIN,
) -> dict[str, str]:
    """One synthetic CV run; returns metric id -> verdict for the t-metrics."""
    dataset = generate(SynthConfig(n=n, group_intercept_shift=delta, seed=seed))
    plan = make_folds(dataset, k, seed)
    cv_result = run_cv(dataset, plan, train, include_group=include_group)
    distributions = collect_metric_distributions(cv_result.predictions, plan)
    verdicts = evaluate_all(AuditInputs(distributions=distributions), alpha)
    return {v.metric_id: v.verdict for v in verdicts}


def flag_rate_study(
    replicates: int,
    base_seed: int = 0,
    metric_ids: tuple[str, ...] | None = None,
    **replicate_kwargs,
) -> StudyResult:
    """Violation-flag counts per metric over seeded replicates."""
    if metric_ids is None:
        metric_ids = one_sided_t_metric_ids()
    counts = {m: 0 for m in metric_ids}
    for i in range(replicates):
        verdicts = replicate_verdicts(seed=base_seed + i, **replicate_kwargs)
        for metric_id in metric_ids:
            if verdicts.get(metric_id) == VIOLATION:
                counts[metric_id] += 1
    return StudyResult(replicates=replicates, counts=counts)
