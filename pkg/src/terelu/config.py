"""Experiment configuration: defaults, ``key = value`` files and activation specs."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from terelu.activations import ActivationSpec, Kind
from terelu.data import default_data_dir


class ConfigError(ValueError):
    pass


ACTIVATION_NAMES = tuple(k.value for k in Kind) + ("maxout",)


@dataclass
class ExperimentConfig:
    activation: str = "terelu"
    alpha: float = 1.0
    beta_init: float = 1.0
    mu: float = 1.0
    lrelu_alpha: float = 0.01
    srelu: str = "1,0.5,-1,0.1"  # t_r, a_r, t_l, a_l
    apl_a: str = "0.5"
    apl_b: str = "1"
    softplus: str = "1,1"  # alpha, beta
    maxout_k: int = 2
    depth: int = 54
    width: int = 64
    bn: bool = True
    dataset: str = "mnist"
    train_size: int = 10000
    val_size: int = 2000
    holdout: int = 10000
    blob_classes: int = 2
    blob_dim: int = 8
    blob_separation: float = 10.0
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    data_dir: str = ""
    out_csv: str = ""

    def __post_init__(self):
        self.activation = self.activation.lower()
        if self.activation not in ACTIVATION_NAMES:
            raise ConfigError(f"unknown activation {self.activation!r}; "
                              f"choose from {', '.join(ACTIVATION_NAMES)}")
        if self.dataset not in ("mnist", "blobs"):
            raise ConfigError(f"dataset must be 'mnist' or 'blobs', got {self.dataset!r}")
        for name in ("depth", "width", "train_size", "val_size", "epochs", "blob_classes",
                     "blob_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.batch_size < 2:
            raise ConfigError("batch-size must be >= 2")
        if self.learning_rate < 0 or not 0 <= self.momentum < 1:
            raise ConfigError("learning-rate must be >= 0 and momentum in [0, 1)")
        if self.activation == "maxout" and self.maxout_k < 2:
            raise ConfigError("maxout-k must be >= 2")
        if not self.data_dir:
            self.data_dir = str(default_data_dir())
        if not self.out_csv:
            self.out_csv = f"runs/{self.activation}-{self.dataset}-depth{self.depth}-seed{self.seed}.csv"
        self.activation_spec()

    def activation_spec(self) -> ActivationSpec | None:
        """The activation for ``build_fcnn``; None for maxout networks."""
        name = self.activation
        try:
            if name == "maxout":
                return None
            if name == "terelu":
                return ActivationSpec.of(name, alpha=self.alpha, beta=self.beta_init, mu=self.mu)
            if name == "elu":
                return ActivationSpec.of(name, alpha=self.alpha)
            if name == "lrelu":
                return ActivationSpec.of(name, alpha=self.lrelu_alpha)
            if name == "srelu":
                t_r, a_r, t_l, a_l = _floats(self.srelu, 4, "srelu")
                return ActivationSpec.of(name, t_r=t_r, a_r=a_r, t_l=t_l, a_l=a_l)
            if name == "apl":
                return ActivationSpec.of(name, a=_floats(self.apl_a, None, "apl-a"),
                                         b=_floats(self.apl_b, None, "apl-b"))
            if name == "softplus":
                alpha, beta = _floats(self.softplus, 2, "softplus")
                return ActivationSpec.of(name, alpha=alpha, beta=beta)
            return ActivationSpec.of(name)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def items(self, exclude=("out_csv",)) -> list[tuple[str, object]]:
        return [(key_name(f.name), getattr(self, f.name)) for f in fields(self)
                if f.name not in exclude]


def _floats(text: str, count: int | None, what: str) -> tuple[float, ...]:
    vals = tuple(float(v) for v in str(text).split(",") if v.strip())
    if count is not None and len(vals) != count:
        raise ConfigError(f"{what} needs {count} comma-separated numbers, got {text!r}")
    return vals


def key_name(field_name: str) -> str:
    return field_name.replace("_", "-")


def field_name(key: str) -> str:
    return key.strip().replace("-", "_")


FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def coerce(name: str, raw: str):
    kind = FIELD_TYPES[name]
    if kind == "bool":
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key_name(name)}: not a boolean: {raw!r}")
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key_name(name)}: cannot parse {raw!r} as {kind}") from None
    return raw.strip()


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file. ``#`` starts a comment line."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = line.split("=", 1)
        name = field_name(key)
        if name not in FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key.strip()!r}")
        values[name] = coerce(name, raw)
    return values


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then file values, then explicitly given flags."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ExperimentConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def replace(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return dataclasses.replace(cfg, **changes)
