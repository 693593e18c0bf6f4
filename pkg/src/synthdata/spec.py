"""Synthetic dataset description."""

from dataclasses import asdict, dataclass, field
from typing import List, Optional

from src.numcore.errors import ConfigError

GRAPH_KINDS = ("ring", "blocks", "erdos_renyi")
PERMUTATION_PLANTING = ("off", "random_per_client")


@dataclass
class SyntheticSpec:
    """
    A vertically partitioned classification task with a planted consensus graph.

    Clients 0..n-1 each observe a different linear mix of the same per-node
    signal; the last ``gru_clients`` clients see it as length-``sequence_length``
    time series instead of vectors.
    """

    clients: int = 12
    samples: int = 600
    classes: int = 3
    input_dim: int = 8
    heterogeneous_dims: bool = True
    gru_clients: int = 0
    sequence_length: int = 12
    graph: str = "ring"
    graph_p: float = 0.3
    graph_blocks: int = 3
    conflict: float = 0.6
    noise: float = 0.3
    missing_rate: float = 0.1
    permutations: str = "random_per_client"
    latent_dim: int = 16
    seed: int = 0
    input_dims: Optional[List[int]] = field(default=None)

    def validate(self):
        if self.clients < 1:
            raise ConfigError(f"need at least one client, got {self.clients}")
        if self.classes < 2:
            raise ConfigError(f"need at least two classes, got {self.classes}")
        if self.samples < 10 * self.classes:
            raise ConfigError(f"too few samples: {self.samples} < 10 x {self.classes} classes")
        if self.graph not in GRAPH_KINDS:
            raise ConfigError(f"Unknown planted graph '{self.graph}', expected one of {GRAPH_KINDS}")
        if self.permutations not in PERMUTATION_PLANTING:
            raise ConfigError(f"Unknown permutation planting '{self.permutations}', "
                              f"expected one of {PERMUTATION_PLANTING}")
        for name in ("conflict", "missing_rate", "graph_p"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
        if not 0 <= self.gru_clients <= self.clients:
            raise ConfigError(f"gru_clients must lie in [0, {self.clients}], got {self.gru_clients}")
        if self.input_dims is not None and len(self.input_dims) != self.clients:
            raise ConfigError(f"input_dims lists {len(self.input_dims)} clients, spec has {self.clients}")
        if self.graph == "blocks" and not 1 <= self.graph_blocks <= self.clients:
            raise ConfigError(f"graph_blocks must lie in [1, {self.clients}], got {self.graph_blocks}")
        return self

    def client_input_dims(self):
        if self.input_dims is not None:
            return list(self.input_dims)
        if not self.heterogeneous_dims:
            return [self.input_dim] * self.clients
        return [self.input_dim + (i % 3) for i in range(self.clients)]

    def client_kinds(self):
        return ["fc"] * (self.clients - self.gru_clients) + ["gru"] * self.gru_clients

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown dataset keys: {sorted(unknown)}")
        return cls(**data)
