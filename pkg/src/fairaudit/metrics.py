"""The fairness metric registry and verdict evaluation.

Each metric binds one or more statistics to a test and a tail. The
disparity sign convention is fixed everywhere as
``unprotected mean - protected mean``, and each one-sided test declares
the tail in which a disparity counts as discrimination against the
protected group; the opposite tail is always evaluated too so that a
significant disparity favoring the protected group is reported as
``reverse_disparity`` instead of disappearing.

Joint metrics (several simultaneous tests) divide the significance
level by their component count.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .calibration import CalibrationTable, calibration_chi2, well_calibration_chi2
from .cv import DistributionSet
from .data import PROTECTED, UNPROTECTED
from .errors import InsufficientBinsError
from .similarity import (
    AGAINST_PROTECTED,
    FAVORS_PROTECTED,
    ContingencyTable2x2,
    discordance_direction,
    mcnemar_midp_test,
)
from .stats import (
    LEFT,
    RIGHT,
    TWO_SIDED,
    TestResult,
    opposite_tail,
    p_from_tail,
    welch_t,
)

VIOLATION = "violation"
NO_VIOLATION = "no_violation"
REVERSE_DISPARITY = "reverse_disparity"
NOT_EVALUABLE = "not_evaluable"

T_TEST = "welch_t"
CHI2_CALIBRATION = "calibration_chi2"
CHI2_WELL_CALIBRATION = "well_calibration_chi2"
MCNEMAR_CAUSAL = "mcnemar_counterfactual"
MCNEMAR_AWARENESS = "mcnemar_matching"


@dataclass(frozen=True)
class TComponent:
    """One statistic/tail pair of a t-test metric."""

    stat_key: str
    tail: str


@dataclass(frozen=True)
class MetricSpec:
    id: str
    test_kind: str
    components: tuple[TComponent, ...] = ()
    alpha_divisor: int = 1

    def __post_init__(self):
        if self.test_kind == T_TEST and not self.components:
            raise ValueError(f"{self.id}: t-test metric declares no components")
        if len(self.components) >= 2 and self.alpha_divisor != len(self.components):
            raise ValueError(f"{self.id}: joint metric must divide alpha by component count")


@dataclass(frozen=True)
class ComponentResult:
    """One evaluated test inside a metric verdict."""

    label: str
    test: TestResult
    disparity: float | None = None
    opposite_p: float | None = None
    direction: str | None = None
    n_protected: int | None = None
    n_unprotected: int | None = None


@dataclass(frozen=True)
class MetricVerdict:
    metric_id: str
    verdict: str
    alpha: float  # per-component level after the Bonferroni division
    components: tuple[ComponentResult, ...] = ()
    reason: str | None = None


def registry() -> tuple[MetricSpec, ...]:
    """The fixed battery of fairness metrics, in report order.

    Statistics use the favorable coding (a positive prediction is the
    favorable one) and tails are oriented so the named tail flags
    discrimination against the protected group:

    - group_fairness: favorable-prediction rate lower for protected.
    - predictive_parity: favorable predictions less reliable for
      unprotected (their PPV lower) is the violation direction.
    - predictive_equality: unprotected wrongly get favorable predictions
      more often (higher FPR).
    - equal_opportunity: protected wrongly denied favorable predictions
      more often (higher FNR).
    - equalized_odds: TPR and FPR jointly, each right-tailed.
    - conditional_use_accuracy: PPV and NPV jointly.
    - overall_accuracy: two-sided accuracy gap.
    - treatment_equality: FN/FP ratio higher for protected.
    - calibration / well_calibration: chi-squared over score bins.
    - balance_positive / balance_negative: mean score conditioned on the
      true outcome, higher for protected.
    - causal_discrimination / fairness_through_awareness: McNemar mid-p
      over per-group discordant pairs.
    """
    return (
        MetricSpec("group_fairness", T_TEST, (TComponent("ppr", RIGHT),)),
        MetricSpec("predictive_parity", T_TEST, (TComponent("ppv", LEFT),)),
        MetricSpec("predictive_equality", T_TEST, (TComponent("fpr", RIGHT),)),
        MetricSpec("equal_opportunity", T_TEST, (TComponent("fnr", LEFT),)),
        MetricSpec(
            "equalized_odds",
            T_TEST,
            (TComponent("tpr", RIGHT), TComponent("fpr", RIGHT)),
            alpha_divisor=2,
        ),
        MetricSpec(
            "conditional_use_accuracy",
            T_TEST,
            (TComponent("ppv", LEFT), TComponent("npv", RIGHT)),
            alpha_divisor=2,
        ),
        MetricSpec("overall_accuracy", T_TEST, (TComponent("accuracy", TWO_SIDED),)),
        MetricSpec("treatment_equality", T_TEST, (TComponent("fn_fp_ratio", LEFT),)),
        MetricSpec("calibration", CHI2_CALIBRATION),
        MetricSpec("well_calibration", CHI2_WELL_CALIBRATION),
        MetricSpec("balance_positive", T_TEST, (TComponent("mean_score_favorable", LEFT),)),
        MetricSpec("balance_negative", T_TEST, (TComponent("mean_score_unfavorable", LEFT),)),
        MetricSpec("causal_discrimination", MCNEMAR_CAUSAL, alpha_divisor=2),
        MetricSpec("fairness_through_awareness", MCNEMAR_AWARENESS, alpha_divisor=2),
    )


@dataclass(frozen=True)
class AuditInputs:
    """Everything evaluate_all may consume. Missing pieces downgrade the
    metrics that need them to not_evaluable instead of failing the run;
    the *_unavailable_reason fields let the pipeline say why."""

    distributions: DistributionSet | None = None
    calibration_table: CalibrationTable | None = None
    causal_tables: dict[str, ContingencyTable2x2] | None = None
    awareness_tables: dict[str, ContingencyTable2x2] | None = None
    causal_unavailable_reason: str | None = None
    awareness_unavailable_reason: str | None = None


_TestCache = dict[tuple[str, str], tuple[ComponentResult | None, str | None]]


def _t_component(
    component: TComponent,
    distributions: DistributionSet,
    alpha: float,
    cache: _TestCache,
) -> tuple[ComponentResult | None, str | None]:
    """Evaluate (or reuse) one statistic/tail t-test; None with a reason
    when the samples cannot support it.

    Cached results are re-stamped with the caller's significance level:
    the statistic and p-values are shared across metrics, the level is
    not.
    """
    cache_key = (component.stat_key, component.tail)
    if cache_key in cache:
        result, reason = cache[cache_key]
        if result is not None and result.test.alpha != alpha:
            result = replace(result, test=replace(result.test, alpha=alpha))
        return result, reason
    samples = distributions.get(component.stat_key)
    if samples is None:
        result = (None, f"no samples collected for {component.stat_key}")
    elif samples.insufficient_reason is not None:
        result = (None, samples.insufficient_reason)
    else:
        unprot = samples.unprotected
        prot = samples.protected
        test = welch_t(unprot, prot, component.tail, alpha)
        if test.degenerate:
            opposite = 1.0 if component.tail != TWO_SIDED else None
            if test.statistic != 0.0 and component.tail != TWO_SIDED:
                opposite = 1.0 - test.p_value
        else:
            opp_tail = opposite_tail(component.tail)
            opposite = (
                p_from_tail(test.statistic, test.df, opp_tail)
                if opp_tail is not None
                else None
            )
        result = (
            ComponentResult(
                label=component.stat_key,
                test=test,
                disparity=float(unprot.mean() - prot.mean()),
                opposite_p=opposite,
                n_protected=int(prot.size),
                n_unprotected=int(unprot.size),
            ),
            None,
        )
    cache[cache_key] = result
    return result


def _verdict_from_components(
    spec: MetricSpec, components: list[ComponentResult], corrected_alpha: float
) -> str:
    if any(c.test.p_value < corrected_alpha for c in components):
        return VIOLATION
    if any(
        c.opposite_p is not None and c.opposite_p < corrected_alpha for c in components
    ):
        return REVERSE_DISPARITY
    return NO_VIOLATION


def _evaluate_t_metric(
    spec: MetricSpec, inputs: AuditInputs, alpha: float, cache: _TestCache
) -> MetricVerdict:
    corrected = alpha / spec.alpha_divisor
    if inputs.distributions is None:
        return MetricVerdict(
            spec.id, NOT_EVALUABLE, corrected, reason="no fold distributions provided"
        )
    components = []
    for comp in spec.components:
        result, reason = _t_component(comp, inputs.distributions, corrected, cache)
        if result is None:
            return MetricVerdict(spec.id, NOT_EVALUABLE, corrected, reason=reason)
        components.append(result)
    return MetricVerdict(
        spec.id,
        _verdict_from_components(spec, components, corrected),
        corrected,
        components=tuple(components),
    )


def _evaluate_chi2_metric(
    spec: MetricSpec, inputs: AuditInputs, alpha: float
) -> MetricVerdict:
    if inputs.calibration_table is None:
        return MetricVerdict(
            spec.id, NOT_EVALUABLE, alpha, reason="no calibration table provided"
        )
    test_fn = (
        calibration_chi2 if spec.test_kind == CHI2_CALIBRATION else well_calibration_chi2
    )
    try:
        test = test_fn(inputs.calibration_table, alpha)
    except InsufficientBinsError as exc:
        return MetricVerdict(spec.id, NOT_EVALUABLE, alpha, reason=str(exc))
    verdict = VIOLATION if test.p_value < alpha else NO_VIOLATION
    return MetricVerdict(
        spec.id,
        verdict,
        alpha,
        components=(ComponentResult(label="chi2", test=test),),
    )


def _evaluate_mcnemar_metric(
    spec: MetricSpec,
    tables: dict[str, ContingencyTable2x2] | None,
    alpha: float,
    unavailable_reason: str | None = None,
) -> MetricVerdict:
    corrected = alpha / spec.alpha_divisor
    if tables is None:
        kind = "counterfactual" if spec.test_kind == MCNEMAR_CAUSAL else "matching"
        return MetricVerdict(
            spec.id,
            NOT_EVALUABLE,
            corrected,
            reason=unavailable_reason or f"no {kind} tables provided",
        )
    components = []
    significant_directions = []
    for group in (PROTECTED, UNPROTECTED):
        table = tables[group]
        test = mcnemar_midp_test(table, corrected)
        direction = discordance_direction(table, source_is_protected=group == PROTECTED)
        if test.p_value < corrected:
            significant_directions.append(direction)
        components.append(
            ComponentResult(label=group, test=test, direction=direction)
        )
    if AGAINST_PROTECTED in significant_directions:
        verdict = VIOLATION
    elif FAVORS_PROTECTED in significant_directions:
        verdict = REVERSE_DISPARITY
    else:
        verdict = NO_VIOLATION
    return MetricVerdict(spec.id, verdict, corrected, components=tuple(components))


def evaluate_metric(
    spec: MetricSpec,
    inputs: AuditInputs,
    alpha: float = 0.05,
    cache: _TestCache | None = None,
) -> MetricVerdict:
    """Evaluate one metric; never raises for missing or thin inputs."""
    if cache is None:
        cache = {}
    if spec.test_kind == T_TEST:
        return _evaluate_t_metric(spec, inputs, alpha, cache)
    if spec.test_kind in (CHI2_CALIBRATION, CHI2_WELL_CALIBRATION):
        return _evaluate_chi2_metric(spec, inputs, alpha)
    if spec.test_kind == MCNEMAR_CAUSAL:
        return _evaluate_mcnemar_metric(
            spec, inputs.causal_tables, alpha, inputs.causal_unavailable_reason
        )
    if spec.test_kind == MCNEMAR_AWARENESS:
        return _evaluate_mcnemar_metric(
            spec, inputs.awareness_tables, alpha, inputs.awareness_unavailable_reason
        )
    raise ValueError(f"unknown test kind {spec.test_kind!r}")


def evaluate_all(inputs: AuditInputs, alpha: float = 0.05) -> list[MetricVerdict]:
    """One verdict per registry metric, in registry order."""
    cache: _TestCache = {}
    return [evaluate_metric(spec, inputs, alpha, cache) for spec in registry()]
