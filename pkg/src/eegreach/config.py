"""Plain-text ``key = value`` run configuration with documented defaults."""
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigurationError


@dataclass
class RunConfig:
    """Every key the command line understands.

    Paths left empty are derived from ``out``: ``raw.eegd`` (synth),
    ``epochs.eegd`` (preprocess) and ``<model>.ckpt`` (train).
    """

    # general
    seed: int = 42
    model: str = "inception3d"
    out: str = "run"
    dataset: str = ""
    checkpoint: str = ""
    # synthetic session
    n_trials_per_class: int = 40
    erd_depth: float = 0.8
    fs_hz: float = 1000.0
    trial_s: float = 3.0
    inter_trial_s: float = 2.0
    n_channels: int = 64
    noise_exponent: float = 1.0
    noise_uv: float = 6.0
    mu_uv: float = 10.0
    beta_uv: float = 6.0
    line_uv: float = 5.0
    slow_uv: float = 5.0
    # preprocessing
    decimate_factor: int = 10
    band_low_hz: float = 4.0
    band_high_hz: float = 40.0
    band_order: int = 3
    window_start_s: float = 0.0
    window_end_s: float = 3.0
    # split and training
    train_fraction: float = 0.8
    schedule: str = "reduced"
    epochs: int = 30
    batch_size: int = 16
    lr: float = 3e-3
    patience: int = 10
    val_fraction: float = 0.1
    n_trees: int = 100
    shuffle_labels: bool = False
    # evaluation and comparison
    eval_split: str = "test"
    folds: int = 5
    n_perm: int = 10000

    def validate(self):
        if self.schedule not in ("reduced", "full"):
            raise ConfigurationError(f"schedule must be 'reduced' or 'full', got {self.schedule!r}")
        if self.eval_split not in ("test", "train"):
            raise ConfigurationError(f"eval_split must be 'test' or 'train', got {self.eval_split!r}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigurationError("train_fraction must lie in (0, 1)")
        if self.folds < 2:
            raise ConfigurationError("compare needs at least 2 folds")
        return self

    # -- paths ------------------------------------------------------------------
    @property
    def out_dir(self):
        return Path(self.out)

    def raw_path(self):
        return Path(self.dataset) if self.dataset else self.out_dir / "raw.eegd"

    def checkpoint_path(self):
        return Path(self.checkpoint) if self.checkpoint else self.out_dir / f"{self.model}.ckpt"

    # -- text form --------------------------------------------------------------
    def to_text(self):
        return "".join(f"{f.name} = {_format(getattr(self, f.name))}\n" for f in fields(self))

    def set(self, key, value):
        types = {f.name: f.type for f in fields(self)}
        if key not in types:
            raise ConfigurationError(f"unknown config key {key!r}")
        setattr(self, key, _coerce(key, value, types[key]))


def _format(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _coerce(key, value, typ):
    if not isinstance(value, str):
        return value
    value = value.strip()
    try:
        if typ in (bool, "bool"):
            low = value.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return low in ("true", "1", "yes")
        if typ in (int, "int"):
            return int(value)
        if typ in (float, "float"):
            return float(value)
    except ValueError:
        raise ConfigurationError(f"config key {key!r}: cannot parse {value!r}") from None
    return value


def parse_config_text(text, base=None):
    """Apply ``key = value`` lines (``#`` starts a comment) on top of ``base``."""
    cfg = base or RunConfig()
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {n}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        cfg.set(key.strip(), value)
    return cfg


def load_config(path, base=None):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config_text(text, base)
