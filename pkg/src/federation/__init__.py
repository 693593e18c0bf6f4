from src.federation.baselines import ConcatProblem, best_model_selection, concat_baseline, majority_vote  # noqa: F401
from src.federation.bundle import (  # noqa: F401
    RepresentationBundle,
    TransferLedger,
    collect_bundle,
    stratified_split,
)
from src.federation.diagnostics import entropy_diagnostic, entropy_histogram  # noqa: F401
from src.federation.knn import knn_graph  # noqa: F401
from src.federation.metrics import MetricsReport, macro_auc, macro_f1, write_reports  # noqa: F401
from src.federation.pipeline import PipelineResult, run_pipeline, vfl_variants  # noqa: F401
from src.federation.trainer import EarlyStopping, fit  # noqa: F401
from src.federation.variants import VARIANT_IDS, VariantConfig  # noqa: F401
