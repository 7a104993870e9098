"""
Run Configuration
Flat, validated description of one experiment: dataset, loss, network,
optimisation, seeds and output location. Defaults come from config.py.
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, List, Mapping, Optional

import config
from src import data
from src.linalg import make_rng
from src.losses import LossConfig, LossVariant
from src.utils.exceptions import ConfigError, CorelError
from src.utils.logger import get_logger

logger = get_logger(__name__)

DATASETS = ("mnist", "fashion", "idx", "csv", "blobs")

# Fields that steer where and how fast a run executes but never change its results
RUNTIME_FIELDS = ("out_dir", "workers")


@dataclass
class RunConfig:
    # Dataset
    dataset: str = "mnist"
    data_dir: str = config.DATA_DIR
    images_path: Optional[str] = None
    labels_path: Optional[str] = None
    test_images_path: Optional[str] = None
    test_labels_path: Optional[str] = None
    num_classes: int = 10
    csv_path: Optional[str] = None
    csv_header: bool = False
    blobs_k: int = 4
    blobs_n_per_class: int = 200
    blobs_dim: int = 16
    blobs_spread: float = 3.0
    blobs_sigma: float = 1.0
    data_seed: int = 0
    val_fraction: float = config.VAL_FRACTION
    test_fraction: float = config.TEST_FRACTION
    val_size: int = config.MNIST_VALIDATION_SIZE
    train_subset: Optional[int] = None

    # Loss
    variant: str = LossVariant.GAUSSIAN.value
    lam: Optional[float] = None
    gamma: float = config.GAMMA
    alpha: float = config.CENTER_ALPHA
    reduction: str = config.REDUCTION
    eps_norm: float = config.NORM_EPSILON

    # Network and optimisation
    hidden_sizes: List[int] = field(default_factory=lambda: list(config.HIDDEN_SIZES))
    slope: float = config.LEAKY_SLOPE
    dropout: float = config.DROPOUT
    epochs: int = config.EPOCHS
    batch_size: int = config.BATCH_SIZE
    lr: float = config.LEARNING_RATE

    # Runs
    seeds: List[int] = field(default_factory=lambda: [0])
    out_dir: str = config.OUTPUT_DIR
    workers: int = 1
    kmeans_restarts: int = config.KMEANS_RESTARTS
    normalize_latents: bool = False
    cluster_after: bool = False

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "RunConfig":
        unknown = sorted(set(values) - set(cls.field_names()))
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}")
        try:
            cfg = cls(**values)
        except TypeError as e:
            raise ConfigError(str(e)) from e
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: Optional[str] = None,
                  overrides: Optional[Mapping[str, Any]] = None) -> "RunConfig":
        """Flat JSON object from `path` (optional), then `overrides` on top."""
        values: Dict[str, Any] = {}
        if path:
            try:
                with open(path, "r", encoding="utf-8") as f:
                    values = json.load(f)
            except FileNotFoundError as e:
                raise ConfigError(f"Config file not found: {path}") from e
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}:{e.lineno}: {e.msg}") from e
            if not isinstance(values, dict):
                raise ConfigError(f"{path} must hold a flat JSON object")
        values.update(overrides or {})
        return cls.from_dict(values)

    def with_overrides(self, **changes) -> "RunConfig":
        cfg = replace(self, **changes)
        cfg.validate()
        return cfg

    def validate(self):
        """Reject anything that would fail later, before any compute starts."""
        if self.dataset not in DATASETS:
            raise ConfigError(f"dataset must be one of {DATASETS}, got '{self.dataset}'")
        try:
            LossVariant(self.variant)
        except ValueError as e:
            raise ConfigError(f"Unknown loss variant '{self.variant}'") from e

        if self.dataset == "idx" and not (self.images_path and self.labels_path):
            raise ConfigError("dataset 'idx' needs images_path and labels_path")
        if self.dataset == "idx" and bool(self.test_images_path) != bool(self.test_labels_path):
            raise ConfigError("test_images_path and test_labels_path go together")
        if self.dataset == "csv" and not self.csv_path:
            raise ConfigError("dataset 'csv' needs csv_path")
        if self.train_subset is not None and self.dataset not in ("mnist", "fashion"):
            raise ConfigError("train_subset applies to the mnist and fashion presets only")

        self._require_int("num_classes", minimum=2)
        self._require_int("blobs_k", minimum=2)
        self._require_int("blobs_n_per_class", minimum=1)
        self._require_int("blobs_dim", minimum=2)
        self._require_int("data_seed", minimum=0)
        self._require_int("val_size", minimum=1)
        self._require_int("epochs", minimum=0)
        self._require_int("batch_size", minimum=1)
        self._require_int("workers", minimum=1)
        self._require_int("kmeans_restarts", minimum=1)
        if self.train_subset is not None:
            self._require_int("train_subset", minimum=1)
        if not self._is_number(self.blobs_sigma) or self.blobs_sigma <= 0:
            raise ConfigError("blobs_sigma must be positive")
        if not self._is_number(self.blobs_spread) or self.blobs_spread <= 0:
            raise ConfigError("blobs_spread must be positive")
        for name in ("val_fraction", "test_fraction"):
            value = getattr(self, name)
            if not self._is_number(value) or not 0.0 <= value < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {value}")
        if self.val_fraction + self.test_fraction >= 1.0:
            raise ConfigError("val_fraction + test_fraction must stay below 1")
        if not self._is_number(self.lr) or self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not self._is_number(self.slope) or self.slope < 0:
            raise ConfigError(f"slope must be non-negative, got {self.slope}")
        if not self._is_number(self.dropout) or not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")

        if (not isinstance(self.hidden_sizes, list) or not self.hidden_sizes
                or not all(self._is_int(h) and h >= 1 for h in self.hidden_sizes)):
            raise ConfigError(f"hidden_sizes must be a non-empty list of positive ints, got {self.hidden_sizes}")
        if (not isinstance(self.seeds, list) or not self.seeds
                or not all(self._is_int(s) and s >= 0 for s in self.seeds)):
            raise ConfigError(f"seeds must be a non-empty list of non-negative ints, got {self.seeds}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"seeds must be distinct, got {self.seeds}")
        if self.lam is not None and not self._is_number(self.lam):
            raise ConfigError(f"lam must be a number or null, got {self.lam!r}")

        # LossConfig checks lambda ranges, gamma, alpha and the reduction
        self.loss_config()

    @staticmethod
    def _is_int(value) -> bool:
        return isinstance(value, int) and not isinstance(value, bool)

    @staticmethod
    def _is_number(value) -> bool:
        return isinstance(value, (int, float)) and not isinstance(value, bool)

    def _require_int(self, name: str, minimum: int):
        value = getattr(self, name)
        if not self._is_int(value) or value < minimum:
            raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")

    def resolved_lambda(self) -> float:
        if self.lam is not None:
            return float(self.lam)
        return float(config.TUNED_LAMBDAS.get(self.dataset, {}).get(self.variant, config.DEFAULT_LAMBDA))

    def loss_config(self) -> LossConfig:
        try:
            return LossConfig(variant=LossVariant(self.variant), lam=self.resolved_lambda(),
                              gamma=float(self.gamma), alpha=float(self.alpha),
                              reduction=self.reduction, eps_norm=float(self.eps_norm))
        except CorelError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid loss settings: {e}") from e

    def to_dict(self) -> Dict[str, Any]:
        """Resolved configuration as embedded in artifacts (lambda filled in, runtime knobs left out)."""
        out = asdict(self)
        out["lam"] = self.resolved_lambda()
        for name in RUNTIME_FIELDS:
            out.pop(name)
        return out

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def layer_sizes(self, input_dim: int) -> List[int]:
        return [int(input_dim)] + [int(h) for h in self.hidden_sizes]

    def load_dataset(self) -> data.Dataset:
        """Dataset with its train/val/test partition, drawn from `data_seed` only."""
        rng = make_rng(self.data_seed)
        if self.dataset in ("mnist", "fashion"):
            ds = data.load_mnist(os.path.join(self.data_dir, self.dataset), name=self.dataset,
                                 rng=rng, val_size=self.val_size, train_subset=self.train_subset)
        elif self.dataset == "idx":
            train = data.load_idx(self.images_path, self.labels_path, self.num_classes, name="idx")
            if self.test_images_path:
                test = data.load_idx(self.test_images_path, self.test_labels_path,
                                     self.num_classes, name="idx")
                ds = data.with_test_set(train, test, self.val_fraction, rng)
            else:
                ds = data.split(train, self.val_fraction, self.test_fraction, rng)
        elif self.dataset == "csv":
            ds = data.split(data.load_csv(self.csv_path, header=self.csv_header),
                            self.val_fraction, self.test_fraction, rng)
        else:
            blobs = data.make_blobs(self.blobs_k, self.blobs_n_per_class, self.blobs_dim,
                                    self.blobs_spread, self.blobs_sigma, rng)
            ds = data.split(blobs, self.val_fraction, self.test_fraction, rng)
        logger.info(f"Dataset {ds.name}: N={ds.n}, D={ds.dim}, K={ds.k}, splits {ds.split_sizes()}")
        return ds
