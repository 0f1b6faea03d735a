"""Dementia screening from tabular acoustic speech features.

Library plus CLI for three linear/distance-based classifiers with
model-derived feature importances, a permutation-testing feature-selection
protocol with a Wilcoxon signed-rank cutoff, and LOSO/holdout evaluation
with accuracy-versus-feature-count sweeps.
"""

__version__ = "0.1.0"

from .dataset import (  # noqa: F401
    CsvSchema,
    FeatureCatalog,
    Label,
    LabeledDataset,
    NormalizationParams,
    SourceSet,
    apply_minmax,
    fit_minmax,
    fuse,
    load_csv,
    prune,
    write_csv,
)
from .errors import ConfigError, DataError, SpeechScreenError, TrainingError  # noqa: F401
from .evaluation import (  # noqa: F401
    ConfusionMatrix,
    EvalReport,
    GridSearchResult,
    grid_search,
    holdout_eval,
    loso,
    make_grid,
    sweep_feature_counts,
)
from .selection import (  # noqa: F401
    ImportanceLedger,
    SelectionResult,
    rank_and_cut,
    run_protocol,
    select_top_k,
)
from .stats import SignedRankResult, permute_labels, wilcoxon_signed_rank  # noqa: F401
from .synthetic import generate_synthetic  # noqa: F401
