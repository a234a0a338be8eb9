"""One fit / predict_proba / checkpoint interface over all five decoders.

``fbcsp`` and ``rf`` consume channel x time trials directly; the CNNs
(``shallow``, ``simple3d``, ``inception3d``) tensorize onto the scalp grid
and z-score with statistics from their own training trials.
"""
import numpy as np

from . import checkpoint, model as nets
from .baselines import FBCSP, ForestClassifier
from .dataset import stack
from .errors import ConfigurationError, FormatError, InputError
from .tensorize import GridLayout, NormStats, default_layout, normalize, to_grid
from .pipeline import grid_arrays

CNN_NAMES = ("shallow", "simple3d", "inception3d")
BASELINE_NAMES = ("fbcsp", "rf")
ALL_MODELS = BASELINE_NAMES + CNN_NAMES


def _dict_to_text(d):
    return "".join(f"{k} = {v}\n" for k, v in d.items())


class CnnClassifier:
    """A grid CNN plus its layout and normalisation statistics."""

    def __init__(self, name, spec=None, train_config=None, layout=None, seed=0):
        self.name = name
        self.spec = spec or nets.ModelSpec.reduced()
        self.train_config = train_config or nets.TrainConfig.reduced(seed=seed)
        self.layout = layout or default_layout()
        self.seed = seed
        self.net = nets.build_model(name, self.spec, seed=seed)
        self.stats = None
        self.state = None

    def fit(self, trials, log_fn=None, state=None):
        x, y, _, _, self.stats = grid_arrays(trials, layout=self.layout)
        if x.shape[-1] != self.spec.n_times or x.shape[2:4] != self.spec.grid:
            raise InputError(f"trials tensorize to {x.shape[1:]}, model expects grid "
                             f"{self.spec.grid} x {self.spec.n_times}")
        _, self.state = nets.train(self.net, x, y, self.train_config, state=state,
                                   log_fn=log_fn)
        return self

    def grids(self, trials):
        if self.stats is None:
            raise ConfigurationError("classifier has no normalisation statistics; fit it first")
        g = normalize([to_grid(t, self.layout) for t in trials], self.stats)
        return np.stack([t.data for t in g])

    def predict_proba(self, trials):
        return nets.predict(self.net, self.grids(trials))

    @property
    def history(self):
        return self.state.history if self.state else []

    def sections(self):
        st = self.state
        out = {"meta/kind": "cnn", "meta/model": self.name, "meta/seed": np.array([self.seed]),
               "spec": _dict_to_text(nets.spec_to_dict(self.spec)),
               "train_config": _dict_to_text(vars(self.train_config)),
               "layout": self.layout.to_text(),
               "norm/mean": self.stats.mean, "norm/std": self.stats.std,
               "norm/mask": self.stats.mask.astype(np.int64)}
        out.update({f"weights/{k}": v for k, v in self.net.get_weights().items()})
        if st is not None:
            out["state/scalars"] = np.array([st.epoch, st.best_val, st.bad_epochs,
                                             float(st.stopped), st.adam.t])
            out.update({f"state/weights/{k}": v for k, v in st.weights.items()})
            out.update({f"state/best/{k}": v for k, v in st.best_weights.items()})
            out.update({f"state/adam_m/{k}": v for k, v in st.adam.m.items()})
            out.update({f"state/adam_v/{k}": v for k, v in st.adam.v.items()})
            out["history"] = history_text(st.history)
        return out

    @classmethod
    def from_sections(cls, s, train_config=None):
        spec = nets.spec_from_dict(_parse_spec(checkpoint.text_to_dict(s["spec"])))
        cfg = train_config or nets.TrainConfig(**_parse_train(checkpoint.text_to_dict(
            s["train_config"])))
        obj = cls(s["meta/model"], spec, cfg, GridLayout.from_text(s["layout"]),
                  int(s["meta/seed"][0]))
        obj.stats = NormStats(s["norm/mean"], s["norm/std"], s["norm/mask"].astype(bool))
        obj.net.set_weights(checkpoint.prefixed(s, "weights"))
        if "state/scalars" in s:
            epoch, best_val, bad, stopped, t = s["state/scalars"]
            adam = nets.AdamState(int(t), checkpoint.prefixed(s, "state/adam_m"),
                                  checkpoint.prefixed(s, "state/adam_v"))
            obj.state = nets.TrainState(int(epoch), checkpoint.prefixed(s, "state/weights"),
                                        adam, checkpoint.prefixed(s, "state/best"),
                                        float(best_val), int(bad),
                                        parse_history(s.get("history", "")), bool(stopped))
        return obj

    def resume(self, trials, log_fn=None):
        """Continue training from the stored state up to ``train_config.epochs``."""
        if self.state is None:
            raise ConfigurationError("checkpoint holds no training state to resume from")
        return self.fit(trials, log_fn=log_fn, state=self.state)


class BaselineClassifier:
    """FBCSP + softmax regression, or a random forest on band log-variance."""

    def __init__(self, name, seed=0, n_trees=100):
        self.name = name
        self.seed = seed
        if name == "fbcsp":
            self.impl = FBCSP()
        elif name == "rf":
            self.impl = ForestClassifier(n_trees=n_trees, seed=seed)
        else:
            raise ConfigurationError(f"unknown baseline {name!r}")
        self.history = []

    def fit(self, trials, log_fn=None, state=None):
        x, y = stack(trials)
        self.impl.fit(x, y)
        return self

    def predict_proba(self, trials):
        x, _ = stack(trials)
        return self.impl.predict_proba(x)

    def sections(self):
        out = {"meta/kind": "baseline", "meta/model": self.name,
               "meta/seed": np.array([self.seed])}
        out.update({f"params/{k}": v for k, v in self.impl.get_state().items()})
        return out

    @classmethod
    def from_sections(cls, s):
        obj = cls(s["meta/model"], int(s["meta/seed"][0]))
        obj.impl.set_state(checkpoint.prefixed(s, "params"))
        return obj


def make_classifier(name, seed=0, spec=None, train_config=None, n_trees=100):
    if name in CNN_NAMES:
        return CnnClassifier(name, spec, train_config, seed=seed)
    if name in BASELINE_NAMES:
        return BaselineClassifier(name, seed, n_trees)
    raise ConfigurationError(f"unknown model {name!r}; choose from {', '.join(ALL_MODELS)}")


def save_classifier(clf, path):
    checkpoint.save(clf.sections(), path)


def load_classifier(path):
    s = checkpoint.load(path)
    kind = s.get("meta/kind")
    if kind == "cnn":
        return CnnClassifier.from_sections(s)
    if kind == "baseline":
        return BaselineClassifier.from_sections(s)
    raise FormatError(f"checkpoint has unknown kind {kind!r}", 0)


# -- text helpers ------------------------------------------------------------------

def history_text(history):
    """One line per epoch and split: ``epoch split loss accuracy``."""
    lines = []
    for h in history:
        lines.append(f"{h['epoch']} train {h['train_loss']!r} {h['train_acc']!r}")
        lines.append(f"{h['epoch']} val {h['val_loss']!r} {h['val_acc']!r}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_history(text):
    rows = {}
    for line in text.splitlines():
        epoch, split, loss, acc = line.split()
        rec = rows.setdefault(int(epoch), {"epoch": int(epoch)})
        rec[f"{split}_loss"] = float(loss)
        rec[f"{split}_acc"] = float(acc)
    return [rows[k] for k in sorted(rows)]


def _literal(v):
    v = v.strip()
    if v.startswith("("):
        inner = [p for p in v.strip("()").split(",") if p.strip()]
        return tuple(_literal(p) for p in inner)
    try:
        return int(v)
    except ValueError:
        return float(v)


def _parse_spec(d):
    return {k: _literal(v) for k, v in d.items()}


def _parse_train(d):
    return {k: _literal(v) for k, v in d.items()}
