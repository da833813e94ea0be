"""Score binning and the two calibration goodness-of-fit tests.

Scores are unfavorable-outcome probabilities, while the frequencies the
tests compare count *favorable* outcomes, so a score bin [lower, upper)
corresponds to expected favorable rates between 1-upper and 1-lower.
That inversion is applied in exactly one place (the edge candidates of
the strict test) and echoed into report metadata.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FAVORABLE
from .errors import InsufficientBinsError
from .model import PredictionSet
from .stats import RIGHT, TestResult, chi2_sf


@dataclass(frozen=True)
class CalibrationBin:
    """Per-group counts of one equal-width score bin.

    ``standardized_protected_favorable`` rescales the protected group's
    favorable rate to the unprotected bin population so the two counts
    are directly comparable.
    """

    lower: float
    upper: float
    protected_total: int
    protected_favorable: int
    unprotected_total: int
    unprotected_favorable: int

    def __post_init__(self):
        if self.protected_favorable > self.protected_total:
            raise ValueError("protected favorable count exceeds bin total")
        if self.unprotected_favorable > self.unprotected_total:
            raise ValueError("unprotected favorable count exceeds bin total")

    @property
    def standardized_protected_favorable(self) -> float | None:
        if self.protected_total == 0:
            return None
        return standardized_frequency(
            self.protected_favorable, self.protected_total, self.unprotected_total
        )


@dataclass(frozen=True)
class CalibrationTable:
    bins: tuple[CalibrationBin, ...]

    @property
    def k(self) -> int:
        return len(self.bins)


def standardized_frequency(favorable: int, group_total: int, reference_total: int) -> float:
    """Favorable rate of a group rescaled to another group's population."""
    if group_total <= 0:
        raise ValueError("cannot standardize an empty bin")
    return favorable / group_total * reference_total


def bin_scores(predictions: PredictionSet, k: int = 10) -> CalibrationTable:
    """Tally per-group counts into k equal-width score bins.

    Bins are [i/k, (i+1)/k) with the last bin closed at 1.0.
    """
    if k < 2:
        raise ValueError(f"need at least 2 bins, got {k}")
    edges = np.array([i / k for i in range(k + 1)])
    idx = np.searchsorted(edges, predictions.scores, side="right") - 1
    idx = np.minimum(idx, k - 1)
    favorable = predictions.y_true == FAVORABLE
    protected = predictions.is_protected
    bins = []
    for b in range(k):
        in_bin = idx == b
        bins.append(
            CalibrationBin(
                lower=float(edges[b]),
                upper=float(edges[b + 1]),
                protected_total=int(np.sum(in_bin & protected)),
                protected_favorable=int(np.sum(in_bin & protected & favorable)),
                unprotected_total=int(np.sum(in_bin & ~protected)),
                unprotected_favorable=int(np.sum(in_bin & ~protected & favorable)),
            )
        )
    return CalibrationTable(bins=tuple(bins))


def calibration_chi2(table: CalibrationTable, alpha: float = 0.05) -> TestResult:
    """Group-vs-group calibration test.

    Sums (standardized protected frequency - unprotected frequency)^2 /
    unprotected frequency over usable bins; right-tailed chi-squared
    with (usable bins - 1) degrees of freedom. Bins with no protected
    members or no unprotected favorable outcomes are excluded and
    reported.
    """
    usable = []
    excluded = []
    for i, b in enumerate(table.bins):
        if b.protected_total > 0 and b.unprotected_favorable > 0:
            usable.append((i, b))
        else:
            excluded.append(i)
    if len(usable) < 2:
        raise InsufficientBinsError(
            f"calibration test needs >= 2 usable bins, found {len(usable)}"
        )
    stat = 0.0
    for _, b in usable:
        standardized = b.standardized_protected_favorable
        stat += (standardized - b.unprotected_favorable) ** 2 / b.unprotected_favorable
    df = len(usable) - 1
    return TestResult(
        statistic=stat,
        df=float(df),
        tail=RIGHT,
        p_value=chi2_sf(stat, df),
        alpha=alpha,
        extra={"usable_bins": len(usable), "excluded_bins": excluded},
    )


def _edge_term(observed_rate: float, rate_candidates: tuple[float, float], total: int):
    """One strict-calibration term: compare a group's observed favorable
    rate against the nearer of the bin's two implied rates.

    A zero-rate candidate is only eligible for an exactly-zero observed
    rate (its Pearson term is otherwise undefined); ties prefer the
    candidate yielding the smaller term.
    """
    candidates = [
        r for r in rate_candidates if r > 0.0 or observed_rate == 0.0
    ]
    best = min(
        candidates,
        key=lambda r: (
            abs(observed_rate - r),
            0.0 if r == 0.0 else total * (observed_rate - r) ** 2 / r,
        ),
    )
    if best == 0.0:
        return 0.0, best
    return total * (observed_rate - best) ** 2 / best, best


def well_calibration_chi2(table: CalibrationTable, alpha: float = 0.05) -> TestResult:
    """Strict calibration test: both groups against the bin's own value.

    Each usable bin contributes two terms, one per group, comparing the
    group's standardized favorable frequency against an expected
    frequency taken from the bin edge (mapped to favorable-rate space)
    closest to the observed rate. Right-tailed chi-squared with
    2 * (usable bins) - 1 degrees of freedom.
    """
    usable = []
    excluded = []
    for i, b in enumerate(table.bins):
        if b.protected_total > 0 and b.unprotected_total > 0:
            usable.append((i, b))
        else:
            excluded.append(i)
    if len(usable) < 2:
        raise InsufficientBinsError(
            f"well-calibration test needs >= 2 usable bins, found {len(usable)}"
        )
    stat = 0.0
    chosen_edges = []
    for _, b in usable:
        # Favorable-rate values implied by the score-bin edges.
        rate_candidates = (1.0 - b.upper, 1.0 - b.lower)
        term_p, edge_p = _edge_term(
            b.protected_favorable / b.protected_total,
            rate_candidates,
            b.unprotected_total,
        )
        term_u, edge_u = _edge_term(
            b.unprotected_favorable / b.unprotected_total,
            rate_candidates,
            b.unprotected_total,
        )
        stat += term_p + term_u
        chosen_edges.append({"protected": edge_p, "unprotected": edge_u})
    df = 2 * len(usable) - 1
    return TestResult(
        statistic=stat,
        df=float(df),
        tail=RIGHT,
        p_value=chi2_sf(stat, df),
        alpha=alpha,
        extra={
            "usable_bins": len(usable),
            "excluded_bins": excluded,
            "edge_rule": "favorable rate vs nearest of (1-upper, 1-lower), by absolute difference",
            "chosen_edges": chosen_edges,
        },
    )
