from src.globalmodel.checkpoint import (  # noqa: F401
    export_heatmaps,
    load_global_model,
    save_global_model,
)
from src.globalmodel.model import (  # noqa: F401
    GRAPH_MODES,
    LEARNED_GRAPH_MODES,
    GlobalModel,
    f3_loss,
    global_forward,
    global_logits,
    predict_proba,
)
