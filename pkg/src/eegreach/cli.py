"""Command-line front end: ``python -m eegreach <command> [flags]``.

Commands run one stage each and exchange files through the output
directory::

    synth       -> raw.eegd, ground_truth.txt
    preprocess  -> epochs.eegd, preprocess.txt
    train       -> <model>.ckpt, history.txt
    evaluate    -> metrics.txt, predictions.txt, roc.svg, confusion.svg
    compare     -> compare.txt, table.txt, table.svg
    plot        -> figures re-rendered from predictions.txt / compare.txt

Exit status is 0 on success, 1 for user errors (bad config, bad input
files, diverged training) and 2 for anything unexpected.
"""
import argparse
import logging
import sys
import traceback
from pathlib import Path

import numpy as np

from . import dataset, seeding, synthgen
from .classifiers import ALL_MODELS, history_text, load_classifier, make_classifier, \
    save_classifier
from .config import RunConfig, load_config
from .errors import ConfigurationError, EEGReachError, InputError
from .evaluation import evaluate_scores, permutation_test, render_figures, table_svg, \
    table_text
from .evaluation.figures import confusion_svg, roc_svg
from .model import ModelSpec, TrainConfig
from .pipeline import PreprocessConfig, leakage_probe, preprocess

log = logging.getLogger("eegreach")

LEAKAGE_WARNING = "evaluating on the training partition: accuracy is optimistic (data leakage)"


class UserError(EEGReachError):
    """Raised for command-line misuse so it maps to exit status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UserError(message)


# -- config plumbing -----------------------------------------------------------------

def synth_config(cfg):
    return synthgen.SynthConfig(
        n_trials_per_class=cfg.n_trials_per_class, fs_hz=cfg.fs_hz, trial_s=cfg.trial_s,
        inter_trial_s=cfg.inter_trial_s, n_channels=cfg.n_channels, erd_depth=cfg.erd_depth,
        noise_exponent=cfg.noise_exponent, noise_uv=cfg.noise_uv, mu_uv=cfg.mu_uv,
        beta_uv=cfg.beta_uv, line_uv=cfg.line_uv, slow_uv=cfg.slow_uv, seed=cfg.seed)


def preprocess_config(cfg):
    return PreprocessConfig(cfg.decimate_factor, (cfg.band_low_hz, cfg.band_high_hz),
                            cfg.band_order, window_s=(cfg.window_start_s, cfg.window_end_s))


def model_spec(cfg):
    return ModelSpec.reduced() if cfg.schedule == "reduced" else ModelSpec()


def train_config(cfg, seed=None):
    return TrainConfig(epochs=cfg.epochs, batch_size=cfg.batch_size, lr=cfg.lr,
                       seed=cfg.seed if seed is None else seed, patience=cfg.patience,
                       val_fraction=cfg.val_fraction)


def _epochs_path(cfg):
    return Path(cfg.dataset) if cfg.dataset else cfg.out_dir / "epochs.eegd"


def _load_trials(path):
    data = dataset.read_dataset(path)
    if isinstance(data, dataset.Recording):
        raise InputError(f"{path} holds a continuous recording; run 'preprocess' first")
    return data


def _split(trials, cfg, seed):
    return dataset.split_indices([t.label for t in trials],
                                 dataset.SplitSpec(cfg.train_fraction, seed))


def _maybe_shuffle(trials, cfg, seed):
    """Label-permutation control: training labels are shuffled, test labels untouched."""
    if not cfg.shuffle_labels:
        return trials
    perm = seeding.rng(seed, "label-shuffle").permutation(len(trials))
    return [dataset.Trial(t.channels, t.data, t.fs_hz, trials[j].label)
            for t, j in zip(trials, perm)]


def _write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


# -- commands ---------------------------------------------------------------------------

def cmd_synth(cfg):
    scfg = synth_config(cfg)
    rec = synthgen.generate_session(scfg)
    path = cfg.raw_path()
    dataset.write_dataset(rec, path)
    synthgen.write_ground_truth(scfg, rec, cfg.out_dir / "ground_truth.txt")
    log.info("wrote %s: %d events, %d channels at %g Hz", path, len(rec.events),
             len(rec.channels), rec.fs_hz)
    return path


def cmd_preprocess(cfg):
    pcfg = preprocess_config(cfg)
    data = dataset.read_dataset(cfg.raw_path())
    trials = preprocess(data, pcfg)
    if not trials:
        raise InputError("no trials to write")
    path = cfg.out_dir / "epochs.eegd"
    dataset.write_dataset(trials, path)
    src_fs = data.fs_hz if isinstance(data, dataset.Recording) else trials[0].fs_hz * \
        pcfg.decimate_factor
    ratio = leakage_probe(pcfg, src_fs)
    _write(cfg.out_dir / "preprocess.txt",
           f"n_trials = {len(trials)}\nfs_hz = {trials[0].fs_hz!r}\n"
           f"samples_per_trial = {trials[0].data.shape[1]}\n"
           f"leakage_ratio_2hz_12hz = {ratio:.6e}\n")
    if ratio >= 0.05:
        log.warning("band-pass leaks: 2 Hz probe keeps %.1f%% of 12 Hz power", 100 * ratio)
    log.info("wrote %s: %d trials x %d samples at %g Hz", path, len(trials),
             trials[0].data.shape[1], trials[0].fs_hz)
    return path


def cmd_train(cfg, resume=False):
    trials = _load_trials(_epochs_path(cfg))
    train_idx, _ = _split(trials, cfg, cfg.seed)
    train = _maybe_shuffle([trials[i] for i in train_idx], cfg, cfg.seed)
    ckpt = cfg.checkpoint_path()
    log_fn = lambda r: log.info("epoch %d train_loss %.4f train_acc %.3f val_loss %.4f "
                                "val_acc %.3f", r["epoch"], r["train_loss"], r["train_acc"],
                                r["val_loss"], r["val_acc"])
    if resume:
        clf = load_classifier(ckpt)
        if not hasattr(clf, "resume"):
            raise ConfigurationError(f"model {clf.name!r} has no resumable training state")
        clf.train_config = train_config(cfg)
        clf.resume(train, log_fn=log_fn)
    else:
        clf = make_classifier(cfg.model, cfg.seed, model_spec(cfg), train_config(cfg),
                              cfg.n_trees)
        clf.fit(train, log_fn=log_fn)
    save_classifier(clf, ckpt)
    _write(cfg.out_dir / "history.txt", history_text(clf.history))
    log.info("wrote %s", ckpt)
    return ckpt


def predictions_text(indices, labels, scores):
    lines = ["# trial label p0 p1 p2 p3 p4 p5"]
    for i, y, row in zip(indices, labels, scores):
        lines.append(f"{int(i)} {int(y)} " + " ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def parse_predictions(text):
    rows = [line.split() for line in text.splitlines() if line and not line.startswith("#")]
    idx = np.array([int(r[0]) for r in rows], dtype=int)
    labels = np.array([int(r[1]) for r in rows], dtype=int)
    scores = np.array([[float(v) for v in r[2:]] for r in rows])
    return idx, labels, scores


def cmd_evaluate(cfg):
    trials = _load_trials(_epochs_path(cfg))
    clf = load_classifier(cfg.checkpoint_path())
    train_idx, test_idx = _split(trials, cfg, cfg.seed)
    extra = {"split": cfg.eval_split}
    if cfg.eval_split == "train":
        log.warning(LEAKAGE_WARNING)
        extra["leakage_warning"] = "true"
        idx = train_idx
    else:
        idx = test_idx
    part = [trials[i] for i in idx]
    scores = clf.predict_proba(part)
    labels = np.array([t.label for t in part])
    metrics = evaluate_scores(clf.name, scores, labels, extra)
    out = cfg.out_dir
    _write(out / "predictions.txt", predictions_text(idx, labels, scores))
    _write(out / "metrics.txt", metrics.to_text())
    render_figures(metrics, out)
    log.info("%s accuracy on %s split: %.4f", clf.name, cfg.eval_split, metrics.accuracy)
    return metrics


def fold_seed(seed, fold):
    return seeding.derive_seed(seed, "fold", fold) & 0xFFFFFFFF


def compare_text(grid, pvalues, folds):
    lines = []
    for model, accs in grid.items():
        for k, a in enumerate(accs):
            lines.append(f"acc.{model}.{k} = {a!r}")
        lines.append(f"acc.{model}.mean = {float(np.mean(accs))!r}")
    for (a, b), p in pvalues.items():
        lines.append(f"p.{a}.{b} = {p!r}")
    lines.append(f"folds = {folds}")
    return "\n".join(lines) + "\n"


def parse_compare(text):
    grid, pvalues = {}, {}
    for line in text.splitlines():
        if "=" not in line:
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        parts = key.split(".")
        if parts[0] == "acc" and parts[2] != "mean":
            grid.setdefault(parts[1], []).append(float(value))
        elif parts[0] == "p":
            pvalues[(parts[1], parts[2])] = float(value)
    return grid, pvalues


def _table(grid):
    folds = len(next(iter(grid.values())))
    columns = [f"F{k + 1}" for k in range(folds)] + ["Avg."]
    rows = {m: list(v) + [float(np.mean(v))] for m, v in grid.items()}
    return rows, columns


def run_compare(trials, cfg, models=ALL_MODELS):
    """Train every model on the same seeded splits; returns ``(grid, pvalues)``."""
    grid = {m: [] for m in models}
    for k in range(cfg.folds):
        seed = fold_seed(cfg.seed, k)
        train_idx, test_idx = _split(trials, cfg, seed)
        train = _maybe_shuffle([trials[i] for i in train_idx], cfg, seed)
        test = [trials[i] for i in test_idx]
        labels = np.array([t.label for t in test])
        for m in models:
            clf = make_classifier(m, seed, model_spec(cfg), train_config(cfg, seed), cfg.n_trees)
            clf.fit(train)
            acc = float(np.mean(np.argmax(clf.predict_proba(test), axis=1) == labels))
            grid[m].append(acc)
            log.info("fold %d %s accuracy %.4f", k, m, acc)
    pvalues = {}
    for i, a in enumerate(models):
        for b in models[i + 1:]:
            pvalues[(a, b)] = permutation_test(grid[a], grid[b], cfg.n_perm, cfg.seed)
    return grid, pvalues


def cmd_compare(cfg):
    trials = _load_trials(_epochs_path(cfg))
    grid, pvalues = run_compare(trials, cfg)
    out = cfg.out_dir
    _write(out / "compare.txt", compare_text(grid, pvalues, cfg.folds))
    rows, columns = _table(grid)
    _write(out / "table.txt", table_text(rows, columns))
    _write(out / "table.svg", table_svg(rows, columns))
    return grid, pvalues


def cmd_plot(cfg):
    out = cfg.out_dir
    written = []
    pred = out / "predictions.txt"
    if pred.exists():
        _, labels, scores = parse_predictions(pred.read_text())
        metrics = evaluate_scores(cfg.model, scores, labels)
        written.append(_write(out / "roc.svg",
                              roc_svg(metrics.curves, f"One-vs-rest ROC ({cfg.model})")))
        written.append(_write(out / "confusion.svg", confusion_svg(
            metrics.confusion, f"Confusion matrix ({cfg.model})")))
    comp = out / "compare.txt"
    if comp.exists():
        rows, columns = _table(parse_compare(comp.read_text())[0])
        written.append(_write(out / "table.txt", table_text(rows, columns)))
        written.append(_write(out / "table.svg", table_svg(rows, columns)))
    if not written:
        raise InputError(f"nothing to plot in {out} (no predictions.txt or compare.txt)")
    return written


COMMANDS = {"synth": cmd_synth, "preprocess": cmd_preprocess, "train": cmd_train,
            "evaluate": cmd_evaluate, "compare": cmd_compare, "plot": cmd_plot}


def build_parser():
    p = _Parser(prog="eegreach", description="Synthetic six-class reaching EEG decoding.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--model", choices=ALL_MODELS)
    p.add_argument("--out", help="output directory")
    p.add_argument("--dataset", help="input dataset (output file for synth)")
    p.add_argument("--trials-per-class", type=int, dest="n_trials_per_class")
    p.add_argument("--resume", action="store_true", help="train: continue from the checkpoint")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    p.add_argument("-q", "--quiet", action="store_true")
    return p


def resolve_config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    for item in args.set:
        if "=" not in item:
            raise UserError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        cfg.set(k.strip(), v)
    for key in ("seed", "model", "out", "dataset", "n_trials_per_class"):
        value = getattr(args, key)
        if value is not None:
            cfg.set(key, value)
    return cfg.validate()


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s",
                        stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
        log.setLevel(logging.WARNING if args.quiet else logging.INFO)
        cfg = resolve_config(args)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        _write(cfg.out_dir / "effective_config.txt", cfg.to_text())
        if args.command == "train":
            cmd_train(cfg, resume=args.resume)
        else:
            COMMANDS[args.command](cfg)
    except (EEGReachError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:  # noqa: BLE001 - last-resort guard, reported as internal
        traceback.print_exc()
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
