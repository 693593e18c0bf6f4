"""
ExperimentConfig: the full declarative description of a run.

Files are YAML or JSON, picked by extension. The schema is documented in
docs/CONFIG_SCHEMA.md; unknown keys and version mismatches are errors.
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from typing import List, Optional

from src.federation.variants import VFL_VARIANTS, VariantConfig
from src.globalmodel.model import GRAPH_MODES
from src.graphsampler.reference import REFERENCE_KINDS
from src.numcore.errors import ConfigError
from src.synthdata.spec import SyntheticSpec

# Try to import PyYAML for human-editable configs
try:
    import yaml
    YAML_AVAILABLE = True
except ImportError:
    YAML_AVAILABLE = False

SCHEMA_VERSION = 1
ALIGNED_MODES = ("soft", "hard")


@dataclass
class DataConfig:
    path: Optional[str] = None
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)


@dataclass
class ModelConfig:
    latent_dim: int = 16
    gcn_hidden: int = 8
    aligned_dim: Optional[int] = None
    alignment: str = "soft"
    sinkhorn_steps: int = 5
    skip: bool = True
    mean_pool_bias: bool = True
    graph_mode: str = "icdf"
    kappa: int = 10
    symmetric: bool = True
    self_loop: float = 1.0


@dataclass
class SamplerConfig:
    tau: float = 0.5
    reference: str = "standard_normal"
    sigma: float = 1.0
    samples_per_step: int = 1
    sample_at_inference: bool = False
    inference_samples: int = 8


@dataclass
class TrainingConfig:
    local_epochs: int = 200
    local_lr: float = 0.01
    max_epochs: int = 500
    patience: int = 50
    lr_grid: List[float] = field(default_factory=lambda: [0.01, 0.001])
    split: List[float] = field(default_factory=lambda: [0.7, 0.1, 0.2])
    vfl_local_lr: float = 0.001


@dataclass
class ExperimentConfig:
    schema_version: int = SCHEMA_VERSION
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    variants: List[object] = field(default_factory=lambda: ["E_mean_pool", "H_no_align", "K_align"])
    seeds: List[int] = field(default_factory=lambda: [0])
    output_dir: str = "runs/default"
    threads: int = 4

    def variant_configs(self):
        return [VariantConfig.parse(v, self.model.graph_mode, self.model.kappa) for v in self.variants]

    def validate(self):
        """Cross-field checks; raises ConfigError before anything is trained."""
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"config schema_version {self.schema_version} is not supported "
                              f"(expected {SCHEMA_VERSION})")
        if self.data.path is None:
            self.data.synthetic.validate()
            if self.data.synthetic.permutations != "off" and self.data.synthetic.latent_dim != self.model.latent_dim:
                raise ConfigError(f"planted permutations act on {self.data.synthetic.latent_dim} dims, "
                                  f"model.latent_dim is {self.model.latent_dim}")
        elif not os.path.exists(self.data.path):
            raise ConfigError(f"dataset file not found: {self.data.path}")

        m = self.model
        if m.alignment not in ALIGNED_MODES:
            raise ConfigError(f"model.alignment must be one of {ALIGNED_MODES}, got '{m.alignment}'")
        if m.alignment == "hard" and m.aligned_dim not in (None, m.latent_dim):
            raise ConfigError("hard alignment is square: aligned_dim must equal latent_dim")
        if m.graph_mode not in GRAPH_MODES:
            raise ConfigError(f"Unknown graph mode '{m.graph_mode}', expected one of {GRAPH_MODES}")
        for name in ("latent_dim", "gcn_hidden", "sinkhorn_steps"):
            if getattr(m, name) < 1:
                raise ConfigError(f"model.{name} must be >= 1, got {getattr(m, name)}")

        s = self.sampler
        if not s.tau > 0:
            raise ConfigError(f"sampler.tau must be > 0, got {s.tau}")
        if s.reference not in REFERENCE_KINDS:
            raise ConfigError(f"Unknown reference '{s.reference}', expected one of {REFERENCE_KINDS}")
        if not s.sigma > 0 or s.samples_per_step < 1 or s.inference_samples < 1:
            raise ConfigError("sampler.sigma must be > 0 and sample counts >= 1")

        t = self.training
        if len(t.split) != 3 or abs(sum(t.split) - 1.0) > 1e-9 or min(t.split) <= 0:
            raise ConfigError(f"training.split must be three positive fractions summing to 1, got {t.split}")
        if not t.lr_grid or min(t.lr_grid) <= 0:
            raise ConfigError(f"training.lr_grid must list positive learning rates, got {t.lr_grid}")
        if t.local_epochs < 0 or t.max_epochs < 0 or t.patience < 1 or t.local_lr < 0:
            raise ConfigError("training epochs and local_lr must be >= 0 and patience >= 1")

        variants = self.variant_configs()
        if not variants:
            raise ConfigError("no variants configured")
        n = self.data.synthetic.clients if self.data.path is None else None
        for vc in variants:
            if vc.graph_mode == "knn" and n is not None and vc.kappa >= n:
                raise ConfigError(f"{vc.label}: kappa={vc.kappa} must be < {n} clients")
            if vc.variant in VFL_VARIANTS and t.vfl_local_lr < 0:
                raise ConfigError(f"{vc.label} needs training.vfl_local_lr >= 0")
        if not self.seeds or any(not isinstance(seed, int) or seed < 0 for seed in self.seeds):
            raise ConfigError(f"seeds must be a nonempty list of nonnegative integers, got {self.seeds}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        return self

    def to_dict(self):
        data = asdict(self)
        data["variants"] = [v if isinstance(v, (str, dict)) else asdict(v) for v in self.variants]
        return data

    @classmethod
    def from_dict(cls, data):
        return _build(cls, data, "")


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown keys in {where or 'config'}: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = known[name].default_factory() if callable(known[name].default_factory) else None
        if is_dataclass(default) and value is not None:
            if isinstance(default, SyntheticSpec):
                kwargs[name] = SyntheticSpec.from_dict(value)
            else:
                kwargs[name] = _build(type(default), value, f"{where}{name}.")
        else:
            kwargs[name] = value
    return cls(**kwargs)


def load_config(path):
    """Read a YAML or JSON config file (not validated)."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    ext = os.path.splitext(path)[1].lower()
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    if ext in (".yaml", ".yml"):
        if not YAML_AVAILABLE:
            raise ConfigError("PyYAML is not installed; install it or use a .json config")
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse {path}: {e}") from e
    elif ext == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"cannot parse {path}: {e}") from e
    else:
        raise ConfigError(f"config files must be .yaml, .yml or .json, got '{ext}'")
    return ExperimentConfig.from_dict(data or {})


def save_config(cfg, path):
    """Write the resolved config as JSON."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(cfg.to_dict(), f, indent=2)
    return path
