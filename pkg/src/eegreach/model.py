"""3-D inception CNN, simple 3-D CNN and shallow CNN: construction, training, inference."""
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import seeding
from .autodiff import (
    Adam,
    AdamState,
    ConvKernel3D,
    Tensor,
    avg_pool3d,
    concat_channels,
    conv3d,
    dense,
    flatten,
    global_avg_pool,
    log,
    max_pool3d,
    no_grad,
    relu,
    softmax,
    softmax_cross_entropy,
    square,
)
from .errors import ConfigurationError, InputError, OptimizationError

MODEL_NAMES = ("inception3d", "simple3d", "shallow")
N_CLASSES = 6


def grow(channels):
    """``round(1.5 * channels)`` with ties rounded up."""
    return int(math.floor(1.5 * channels + 0.5))


@dataclass(frozen=True)
class InceptionBlockSpec:
    """Channel bookkeeping for one four-band inception block."""

    in_channels: int
    band_kernel: tuple = (3, 3, 25)
    pool_window: tuple = (3, 3, 3)

    @property
    def out_channels(self):
        return grow(self.in_channels)

    @property
    def bands(self):
        out = self.out_channels
        b1 = out // 3
        b2 = out // 3
        b3 = out // 6
        return (b1, b2, b3, out - b1 - b2 - b3)


@dataclass(frozen=True)
class ModelSpec:
    """Architecture schedule shared by the inception and simple 3-D CNNs.

    The default is the full-width network on a 3 x 7 grid at 300 samples.
    ``reduced()`` narrows the channels for CPU-scale runs; ``tiny()`` is the
    small variant used for whole-model gradient checks.
    """

    grid: tuple = (3, 7)
    n_times: int = 300
    stem_channels: int = 16
    stem_kernel: tuple = (3, 3, 25)
    band_kernel: tuple = (3, 3, 25)
    stage1_blocks: int = 2
    stage2_blocks: int = 3
    pool: tuple = (1, 1, 3)
    head_kernel: tuple = (3, 3, 11)
    head_channels: tuple = (64, 32)
    n_classes: int = N_CLASSES

    @classmethod
    def reduced(cls, **overrides):
        return cls(**{"stem_channels": 4, "head_channels": (16, 16), **overrides})

    @classmethod
    def tiny(cls, **overrides):
        return cls(**{"grid": (3, 3), "n_times": 20, "stem_channels": 4,
                      "head_channels": (6, 5), **overrides})

    def channel_schedule(self):
        chans = [self.stem_channels]
        for _ in range(self.stage1_blocks + self.stage2_blocks):
            chans.append(grow(chans[-1]))
        return chans

    def block_specs(self):
        chans = self.channel_schedule()
        return [InceptionBlockSpec(c, self.band_kernel) for c in chans[:-1]]

    def validate(self):
        if self.stage1_blocks != 2 or self.stage2_blocks != 3:
            raise ConfigurationError("the inception schedule has exactly 2 + 3 blocks")
        for k in (self.stem_kernel, self.band_kernel, self.head_kernel):
            if any(v % 2 == 0 for v in k):
                raise ConfigurationError(f"kernel extents must be odd, got {k}")
        if self.stem_channels < 4:
            raise ConfigurationError("inception blocks need at least 4 input channels")
        return self


@dataclass
class TrainConfig:
    """Mini-batch Adam schedule with validation early stopping."""

    epochs: int = 150
    batch_size: int = 16
    lr: float = 1e-3
    seed: int = 0
    patience: int = 20
    val_fraction: float = 0.1

    @classmethod
    def reduced(cls, **overrides):
        return cls(**{"epochs": 30, "patience": 10, "lr": 3e-3, **overrides})

    def validate(self):
        if self.epochs < 0 or self.batch_size <= 0 or self.lr <= 0 or self.patience <= 0:
            raise ConfigurationError(f"invalid training configuration {self}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigurationError("val_fraction must lie in [0, 1)")
        return self


# -- layers ---------------------------------------------------------------

class Conv:
    def __init__(self, cin, cout, extents, rng, padding="same", activation=True):
        self.kernel = ConvKernel3D.he_uniform(cin, cout, extents, rng)
        self.padding = padding
        self.activation = activation

    def __call__(self, x):
        y = conv3d(x, self.kernel, self.padding)
        return relu(y) if self.activation else y

    def named_parameters(self, prefix):
        return {f"{prefix}.weight": self.kernel.weight, f"{prefix}.bias": self.kernel.bias}


class InceptionBlock:
    """Four parallel bands concatenated on the channel axis.

    band 1: 1x1x1; band 2: 1x1x1 -> k; band 3: 1x1x1 -> k -> k;
    band 4: 3x3x3 average pool (stride 1, same) -> 1x1x1.
    """

    def __init__(self, spec, rng):
        if spec.in_channels < 4:
            raise ConfigurationError(
                f"inception block needs in_channels >= 4, got {spec.in_channels}")
        self.spec = spec
        c = spec.in_channels
        b1, b2, b3, b4 = spec.bands
        k = spec.band_kernel
        one = (1, 1, 1)
        self.band1 = [Conv(c, b1, one, rng)]
        self.band2 = [Conv(c, b2, one, rng), Conv(b2, b2, k, rng)]
        self.band3 = [Conv(c, b3, one, rng), Conv(b3, b3, k, rng), Conv(b3, b3, k, rng)]
        self.band4 = [Conv(c, b4, one, rng)]
        if sum(spec.bands) != grow(c):
            raise ConfigurationError("band channels do not add up to round(1.5 * in)")

    @property
    def bands(self):
        return [self.band1, self.band2, self.band3, self.band4]

    def __call__(self, x):
        outs = []
        for i, band in enumerate(self.bands):
            h = x
            if i == 3:
                h = avg_pool3d(h, self.spec.pool_window, (1, 1, 1), padding="same")
            for layer in band:
                h = layer(h)
            outs.append(h)
        return concat_channels(outs)

    def named_parameters(self, prefix):
        params = {}
        for i, band in enumerate(self.bands, start=1):
            for j, layer in enumerate(band):
                params.update(layer.named_parameters(f"{prefix}.band{i}.{j}"))
        return params


class MaxPool:
    def __init__(self, window):
        self.window = window

    def __call__(self, x):
        return max_pool3d(x, self.window, self.window)

    def named_parameters(self, prefix):
        return {}


class Dense:
    def __init__(self, n_in, n_out, rng):
        bound = math.sqrt(6.0 / n_in)
        self.weight = Tensor(rng.uniform(-bound, bound, size=(n_out, n_in)), requires_grad=True)
        self.bias = Tensor(np.zeros(n_out), requires_grad=True)

    def __call__(self, x):
        return dense(x, self.weight, self.bias)

    def named_parameters(self, prefix):
        return {f"{prefix}.weight": self.weight, f"{prefix}.bias": self.bias}


class Network:
    """A built model: ``forward`` maps ``[B, 1, R, C, T]`` to logits ``[B, 6]``."""

    def __init__(self, name, spec, layers, forward):
        self.name = name
        self.spec = spec
        self.layers = layers
        self._forward = forward

    def __call__(self, x):
        return self.forward(x)

    def forward(self, x):
        x = x if isinstance(x, Tensor) else Tensor(x)
        if x.ndim == 4:
            x = Tensor(x.data[None])
        expected = (1,) + tuple(self.spec.grid) + (self.spec.n_times,)
        if x.ndim != 5 or x.shape[1:] != expected:
            raise InputError(f"{self.name} expects inputs [B, {expected}], got {x.shape}")
        return self._forward(x)

    def parameters(self):
        params = {}
        for key, layer in self.layers.items():
            params.update(layer.named_parameters(key))
        return params

    def parameter_count(self):
        return int(sum(p.size for p in self.parameters().values()))

    def get_weights(self):
        return {k: p.data.copy() for k, p in self.parameters().items()}

    def set_weights(self, weights):
        params = self.parameters()
        if set(weights) != set(params):
            raise InputError("weight names do not match the model")
        for k, p in params.items():
            if weights[k].shape != p.shape:
                raise InputError(f"weight {k!r} has shape {weights[k].shape}, expected {p.shape}")
            p.data = np.array(weights[k], dtype=np.float64)

    def inception_blocks(self):
        return [l for l in self.layers.values() if isinstance(l, InceptionBlock)]


def _sequential(layers):
    def forward(x):
        h = x
        for layer in layers.values():
            h = layer(h)
        return h

    return forward


class GlobalAvgPool:
    def __call__(self, x):
        return global_avg_pool(x)

    def named_parameters(self, prefix):
        return {}


def _build_3d(name, spec, rng):
    spec.validate()
    chans = spec.channel_schedule()
    layers = {"stem": Conv(1, chans[0], spec.stem_kernel, rng)}
    for i, bspec in enumerate(spec.block_specs()):
        stage = 1 if i < spec.stage1_blocks else 2
        key = f"stage{stage}.{i if stage == 1 else i - spec.stage1_blocks}"
        if name == "inception3d":
            layers[key] = InceptionBlock(bspec, rng)
        else:
            layers[key] = Conv(bspec.in_channels, bspec.out_channels, spec.band_kernel, rng)
        if i == spec.stage1_blocks - 1:
            layers["pool1"] = MaxPool(spec.pool)
    layers["pool2"] = MaxPool(spec.pool)
    h1, h2 = spec.head_channels
    layers["head.conv1"] = Conv(chans[-1], h1, spec.head_kernel, rng)
    layers["head.conv2"] = Conv(h1, h2, (1, 1, 1), rng)
    layers["head.gap"] = GlobalAvgPool()
    layers["head.dense"] = Dense(h2, spec.n_classes, rng)
    return Network(name, spec, layers, _sequential(layers))


def _build_shallow(spec, rng):
    n_filters, temporal, pool, pool_stride = 40, 13, 35, 7
    rows, cols = spec.grid
    t_conv = spec.n_times - temporal + 1
    n_pooled = (t_conv - pool) // pool_stride + 1
    if n_pooled < 1:
        raise ConfigurationError(f"{spec.n_times} samples too short for the shallow CNN")
    layers = {
        "temporal": Conv(1, n_filters, (1, 1, temporal), rng, padding="valid", activation=False),
        "spatial": Conv(n_filters, n_filters, (rows, cols, 1), rng, padding="valid",
                        activation=False),
        "dense": Dense(n_filters * n_pooled, spec.n_classes, rng),
    }

    def forward(x):
        h = layers["spatial"](layers["temporal"](x))
        h = avg_pool3d(square(h), (1, 1, pool), (1, 1, pool_stride))
        return layers["dense"](flatten(log(h)))

    return Network("shallow", spec, layers, forward)


def build_model(name, spec=None, seed=0):
    """Build a freshly He-uniform-initialized network.

    Parameters
    ----------
    name : {"inception3d", "simple3d", "shallow"}
    spec : ModelSpec, optional
        Defaults to the full-width ``ModelSpec()``.
    seed : int
        Root seed; weights come from the "init" stream.
    """
    spec = spec or ModelSpec()
    rng = seeding.rng(seed, "init", name)
    if name in ("inception3d", "simple3d"):
        return _build_3d(name, spec, rng)
    if name == "shallow":
        return _build_shallow(spec, rng)
    raise ConfigurationError(f"unknown model {name!r}; choose from {MODEL_NAMES}")


# -- training ---------------------------------------------------------------

@dataclass
class TrainState:
    """Everything needed to continue training bit-exactly."""

    epoch: int
    weights: dict
    adam: AdamState
    best_weights: dict
    best_val: float
    bad_epochs: int
    history: list = field(default_factory=list)
    stopped: bool = False


def validation_split(labels, fraction, seed):
    """Stratified (train_idx, val_idx) carve-out used for early stopping."""
    labels = np.asarray(labels)
    if fraction <= 0:
        return np.arange(len(labels)), np.array([], dtype=int)
    rng = seeding.rng(seed, "validation")
    val = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        n_val = int(round(fraction * len(idx)))
        val.extend(idx[:n_val].tolist())
    val = np.sort(np.array(val, dtype=int))
    train = np.setdiff1d(np.arange(len(labels)), val)
    return train, val


def _evaluate(model, x, y, batch_size):
    if len(y) == 0:
        return float("nan"), float("nan")
    logits = predict_logits(model, x, batch_size)
    p = softmax(logits)
    loss = float(np.mean(-np.log(np.maximum(p[np.arange(len(y)), y], 1e-300))))
    return loss, float(np.mean(np.argmax(p, axis=1) == y))


def train(model, x, y, config, state=None, log_fn=None):
    """Mini-batch Adam on softmax cross-entropy with early stopping.

    Parameters
    ----------
    model : Network
    x : ndarray, shape (n, 1, rows, cols, time)
    y : ndarray of int, shape (n,)
    config : TrainConfig
    state : TrainState, optional
        Resume from a previous call; training continues to ``config.epochs``.

    Returns
    -------
    model : Network
        Carrying the best-validation weights.
    state : TrainState
        ``state.history`` holds one dict per epoch.
    """
    config.validate()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if len(np.unique(y)) < 2:
        raise InputError("training needs at least two classes")
    tr_idx, va_idx = validation_split(y, config.val_fraction, config.seed)
    params = model.parameters()
    if state is None:
        state = TrainState(0, model.get_weights(), AdamState(), model.get_weights(),
                           float("inf"), 0)
    else:
        model.set_weights(state.weights)
    opt = Adam(params, lr=config.lr, state=state.adam)
    while state.epoch < config.epochs and not state.stopped:
        epoch = state.epoch
        order = tr_idx[seeding.rng(config.seed, "shuffle", epoch).permutation(len(tr_idx))]
        losses, correct = [], 0
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            batch = order[start:start + config.batch_size]
            opt.zero_grad()
            logits = model.forward(Tensor(x[batch]))
            loss = softmax_cross_entropy(logits, y[batch])
            if not np.isfinite(loss.data):
                raise OptimizationError(f"non-finite loss at epoch {epoch}, batch {b}")
            loss.backward()
            opt.step()
            losses.append(float(loss.data) * len(batch))
            correct += int(np.sum(np.argmax(logits.data, axis=1) == y[batch]))
        train_loss = sum(losses) / len(order)
        train_acc = correct / len(order)
        val_loss, val_acc = _evaluate(model, x[va_idx], y[va_idx], config.batch_size)
        monitor = val_loss if len(va_idx) else train_loss
        record = {"epoch": epoch + 1, "train_loss": train_loss, "train_acc": train_acc,
                  "val_loss": val_loss, "val_acc": val_acc}
        state.history.append(record)
        if log_fn is not None:
            log_fn(record)
        if monitor < state.best_val:
            state.best_val = monitor
            state.best_weights = model.get_weights()
            state.bad_epochs = 0
        else:
            state.bad_epochs += 1
            if state.bad_epochs >= config.patience:
                state.stopped = True
        state.epoch = epoch + 1
        state.weights = model.get_weights()
        state.adam = opt.state
    model.set_weights(state.best_weights)
    return model, state


def predict_logits(model, x, batch_size=32):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 4:
        x = x[None]
    out = []
    with no_grad():
        for start in range(0, len(x), batch_size):
            out.append(model.forward(Tensor(x[start:start + batch_size])).data)
    return np.concatenate(out, axis=0) if out else np.zeros((0, model.spec.n_classes))


def predict(model, x, batch_size=32):
    """Softmax class probabilities, shape ``(n, 6)``."""
    return softmax(predict_logits(model, x, batch_size))


def spec_to_dict(spec):
    return asdict(spec)


def spec_from_dict(d):
    return ModelSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


def with_overrides(spec, **kw):
    return replace(spec, **kw)
