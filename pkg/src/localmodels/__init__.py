from src.localmodels.checkpoint import load_client, save_client  # noqa: F401
from src.localmodels.client import (  # noqa: F401
    ClientShard,
    LocalClient,
    LocalTrainingConfig,
    LogisticHead,
    TrainingHistory,
    local_forward,
    pretrain_local,
)
from src.localmodels.embeddings import FcEmbedding, GruEmbedding, make_embedding  # noqa: F401
from src.localmodels.permutation import (  # noqa: F401
    inverse_permutation,
    permutation_matrix,
    permute_client,
    permute_fc,
    permute_gru,
)
