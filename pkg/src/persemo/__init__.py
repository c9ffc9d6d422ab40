"""Personalized and generic emotion classification from facial features.

The package turns per-frame facial descriptors into balanced per-subject
datasets, trains natively implemented classifiers (k-nearest neighbors,
random forest, multilayer perceptron), and compares personalized models
against pooled generic baselines on identical held-out test sets, with a
seeded synthetic cohort generator for end-to-end validation.
"""

from .analysis import (
    CorrelationMatrix,
    Pca,
    SeparabilityReport,
    correlation_matrix,
    importance_comparison,
    rank_features,
    separability_report,
    silhouette_score,
)
from .classifiers import (
    FAMILIES,
    ForestClassifier,
    KnnClassifier,
    MlpClassifier,
    default_grid,
    enumerate_configs,
    make_classifier,
    model_from_json,
    model_to_json,
)
from .curation import (
    CurationPolicy,
    SplitPlan,
    Standardizer,
    SubjectDataset,
    balanced_subsample,
    build_generic,
    datasets_from_table,
    eligible_emotions,
    temporal_split,
)
from .errors import (
    ConfigError,
    DataError,
    NumericalError,
    PersemoError,
)
from .evaluation import (
    CvPlan,
    EvalReport,
    binary_auc,
    confusion_matrix,
    f1_macro,
    holdout_eval,
    nested_cv,
    precision_recall_f1,
    roc_auc_ovr,
    roc_points,
    stratified_folds,
)
from .ingest import (
    ACTUAL_EMOTIONS,
    PROMPT_EMOTIONS,
    FeatureSchema,
    aggregate,
    aggregate_table,
    default_schema,
    label_crosstabs,
    load_frames,
    load_schema,
    load_table,
    save_schema,
)
from .protocol import (
    ComparisonReport,
    ComparisonRow,
    ExperimentConfig,
    evaluate_subject,
    failure_analysis,
    rows_from_f1_table,
    run_experiment,
    summarize,
)
from .seeding import rng_from, subseed
from .synthgen import (
    CohortSpec,
    SubjectProfile,
    benchmark_cohort,
    class_mean,
    cohort_to_table,
    generate,
    low_separability_subjects,
    spec_from_json,
    spec_to_json,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
