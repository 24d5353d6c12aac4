"""Flat key=value experiment configuration.

The config file is a plain text document, one ``key = value`` per line,
``#`` starts a comment, blank lines ignored.  No nesting, no quoting.  Keys
are validated on load and unknown keys are rejected by name.  Command-line
flags override file values.
"""

from dataclasses import dataclass, fields

from .errors import ConfigError

_SIGN_MODES = ("maximize_inlier_score", "minimize_inlier_score")
_AGGREGATIONS = ("mean", "sum")
_ACTIVATIONS = ("sigmoid", "identity")


@dataclass
class ExperimentConfig:
    # data source: a CSV path, or synthetic Gaussian classes when empty
    data_csv: str = ""
    label_column: str = "label"
    classes: int = 10
    dim: int = 64
    separation: float = 6.0
    samples_per_class: int = 150
    train_fraction: float = 0.95
    # network
    hidden_dims: tuple[int, ...] = (32,)
    activation: str = "sigmoid"
    # training
    batch_size: int = 25
    learning_rate: float = 0.01
    epochs: int = 200
    early_stop_patience: int = 20
    lam: float = 0.1
    nusa_sign: str = "maximize_inlier_score"
    nusa_layers: tuple[int, ...] | None = None  # None: every narrowing layer
    aggregation: str = "mean"
    # detection / baselines / evaluation
    threshold_percentile: float = 5.0
    knn_k: int = 5
    pca_components: int | None = None  # None: smallest set explaining 90% variance
    grid_size: int = 101
    histogram_bins: int = 20
    # sweep
    num_known: int = 5
    limit: int = 0  # 0: all combinations
    # misc
    out_dir: str = "results"
    rng_seed: int = 0

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")
        if self.nusa_sign not in _SIGN_MODES:
            raise ConfigError(f"nusa_sign must be one of {_SIGN_MODES}")
        if self.aggregation not in _AGGREGATIONS:
            raise ConfigError(f"aggregation must be one of {_AGGREGATIONS}")
        if self.activation not in _ACTIVATIONS:
            raise ConfigError(f"activation must be one of {_ACTIVATIONS}")
        if not (0.0 <= self.threshold_percentile <= 100.0):
            raise ConfigError("threshold_percentile must be in [0, 100]")
        if not (0.0 < self.train_fraction < 1.0):
            raise ConfigError("train_fraction must be in (0, 1)")
        if not self.hidden_dims or any(d < 1 for d in self.hidden_dims):
            raise ConfigError("hidden_dims must be positive integers")
        if self.classes < 2 or self.dim < 1 or self.samples_per_class < 1:
            raise ConfigError("synthetic data counts out of range")
        if self.separation <= 0:
            raise ConfigError("separation must be positive")
        if self.knn_k < 1:
            raise ConfigError("knn_k must be >= 1")
        if self.pca_components is not None and self.pca_components < 1:
            raise ConfigError("pca_components must be >= 1 or auto")
        if self.grid_size < 2:
            raise ConfigError("grid_size must be >= 2")
        if self.histogram_bins < 1:
            raise ConfigError("histogram_bins must be >= 1")
        if self.num_known < 2:
            raise ConfigError("num_known must be >= 2")
        if self.limit < 0:
            raise ConfigError("limit must be >= 0")


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part.strip()) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated integer list, got {text!r}") from exc


def _cast(key: str, text: str, current):
    if key == "nusa_layers" or key == "pca_components":
        if text == "auto":
            return None
        return _parse_int_tuple(text) if key == "nusa_layers" else _int(key, text)
    if key == "hidden_dims":
        value = _parse_int_tuple(text)
        if not value:
            raise ConfigError("hidden_dims must name at least one width")
        return value
    if isinstance(current, bool):  # pragma: no cover - no bool keys today
        return text.lower() in ("1", "true", "yes")
    if isinstance(current, int):
        return _int(key, text)
    if isinstance(current, float):
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected a number, got {text!r}") from exc
    return text


def _int(key: str, text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from exc


# Friendlier spellings accepted in files and on the command line.
KEY_ALIASES = {"lambda": "lam", "seed": "rng_seed"}


def config_field_names() -> set[str]:
    return {f.name for f in fields(ExperimentConfig)}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse key=value lines into a dict of typed values."""
    names = config_field_names()
    defaults = ExperimentConfig()
    values: dict = {}
    for line_num, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_num}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        key = KEY_ALIASES.get(key, key)
        if key not in names:
            raise ConfigError(f"{source}:{line_num}: unknown key {key!r}")
        values[key] = _cast(key, value.strip(), getattr(defaults, key))
    return values


def load_experiment_config(path: str | None, overrides: dict | None = None) -> ExperimentConfig:
    """Build a validated config from an optional file plus overrides."""
    values: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as handle:
                text = handle.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        values.update(parse_config_text(text, source=path))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg
