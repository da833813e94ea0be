"""fairaudit: statistical significance testing for group fairness violations.

Builds sampling distributions of group-conditional classifier statistics
with k-fold cross-validation and applies a battery of fourteen fairness
tests (two-sample t-tests, calibration chi-squared tests, and exact
McNemar mid-p tests over counterfactual and nearest-neighbor pairs).
"""

from .audit import AuditOptions, audit_dataset, audit_predictions
from .calibration import (
    CalibrationBin,
    CalibrationTable,
    bin_scores,
    calibration_chi2,
    standardized_frequency,
    well_calibration_chi2,
)
from .cv import (
    CvResult,
    FoldPlan,
    GroupFoldStats,
    StatSamples,
    collect_metric_distributions,
    grouped_confusion_stats,
    make_folds,
    run_cv,
)
from .data import (
    Dataset,
    FeatureSpec,
    LoadResult,
    Schema,
    load_dataset,
    schema_from_dict,
    schema_from_file,
    split_by_group,
    validate_schema,
)
from .errors import (
    AuditError,
    ConfigError,
    EmptyGroupError,
    FoldError,
    InsufficientBinsError,
    MatrixError,
    ParseError,
    PredictionFormatError,
    SchemaError,
)
from .metrics import (
    AuditInputs,
    ComponentResult,
    MetricSpec,
    MetricVerdict,
    evaluate_all,
    evaluate_metric,
    registry,
)
from .model import (
    PredictionRecord,
    PredictionSet,
    TrainConfig,
    TrainedModel,
    load_external_predictions,
    predict_labels,
    predict_scores,
    train_logistic,
    write_predictions_csv,
)
from .report import AuditReport, read_json, render_markdown, render_report, write_json
from .similarity import (
    ContingencyTable2x2,
    MatchPair,
    build_contingency,
    counterfactual_flip,
    covariance_inverse,
    mahalanobis,
    mcnemar_midp_test,
    nearest_neighbor_match,
)
from .stats import TestResult, binomial_midp, bonferroni, chi2_sf, t_sf, welch_t
from .synth import SynthConfig, generate, inject_bias

__version__ = "0.1.0"
