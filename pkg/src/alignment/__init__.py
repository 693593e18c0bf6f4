from src.alignment.alignment_set import ALIGNMENT_MODES, AlignmentSet, apply_alignment  # noqa: F401
from src.alignment.sinkhorn import (  # noqa: F401
    DecayFit,
    SinkhornDiagnostics,
    fit_decay_rate,
    marginal_residual,
    second_singular_value,
    sinkhorn,
)
