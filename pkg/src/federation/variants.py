"""The baseline / variant matrix."""

from dataclasses import dataclass

from src.globalmodel.model import GRAPH_MODES
from src.numcore.errors import ConfigError

VARIANT_IDS = ("B_majority", "D_best_model", "E_mean_pool", "G_concat", "H_no_align",
               "J_tied", "K_align", "L_vfl_graph_align", "M_vfl_scratch")
BASELINE_VARIANTS = ("B_majority", "D_best_model", "G_concat")
VFL_VARIANTS = ("L_vfl_graph_align", "M_vfl_scratch")
GCN_VARIANTS = ("H_no_align", "J_tied", "K_align") + VFL_VARIANTS
DEFAULT_KAPPA = 10


@dataclass(frozen=True)
class VariantConfig:
    """
    One row of the comparison.

    Args:
        variant: one of VARIANT_IDS
        graph_mode: graph used by the gcn variants; forced to ``none`` elsewhere
        kappa: neighbor count for the kappa-NN graph
    """

    variant: str
    graph_mode: str = "icdf"
    kappa: int = DEFAULT_KAPPA

    def __post_init__(self):
        if self.variant not in VARIANT_IDS:
            raise ConfigError(f"Unknown variant '{self.variant}', expected one of {VARIANT_IDS}")
        if self.graph_mode not in GRAPH_MODES:
            raise ConfigError(f"Unknown graph mode '{self.graph_mode}', expected one of {GRAPH_MODES}")
        if self.variant not in GCN_VARIANTS:
            object.__setattr__(self, "graph_mode", "none")
        if self.kappa < 1:
            raise ConfigError(f"kappa must be >= 1, got {self.kappa}")

    @classmethod
    def parse(cls, value, default_graph_mode="icdf", kappa=DEFAULT_KAPPA):
        """Accept ``"K_align"``, ``"K_align@knn"`` or ``{"id": ..., "graph_mode": ..., "kappa": ...}``."""
        if isinstance(value, VariantConfig):
            return value
        if isinstance(value, dict):
            unknown = set(value) - {"id", "graph_mode", "kappa"}
            if unknown or "id" not in value:
                raise ConfigError(f"variant entries take id, graph_mode and kappa, got {sorted(value)}")
            return cls(value["id"], value.get("graph_mode", default_graph_mode), value.get("kappa", kappa))
        if not isinstance(value, str):
            raise ConfigError(f"cannot read variant entry {value!r}")
        name, _, mode = value.partition("@")
        return cls(name, mode or default_graph_mode, kappa)

    @property
    def label(self):
        return self.variant if self.variant not in GCN_VARIANTS else f"{self.variant}@{self.graph_mode}"

    @property
    def is_baseline(self):
        return self.variant in BASELINE_VARIANTS

    @property
    def is_vfl(self):
        return self.variant in VFL_VARIANTS

    @property
    def sends_gradients(self):
        return self.is_vfl

    @property
    def model_variant(self):
        return "mean_pool" if self.variant == "E_mean_pool" else "gcn"

    def alignment_mode(self, aligned_mode="soft"):
        """Alignment used by this variant; ``aligned_mode`` is the configured mode for K, L and M."""
        if self.variant in ("E_mean_pool", "H_no_align"):
            return "none"
        if self.variant == "J_tied":
            return "tied"
        return aligned_mode
