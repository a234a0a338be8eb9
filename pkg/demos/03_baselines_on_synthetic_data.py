"""Fit the FBCSP and random-forest baselines on clean and null synthetic data.

Run with ``python demos/03_baselines_on_synthetic_data.py``.
"""
import numpy as np

from eegreach import dataset, synthgen
from eegreach.classifiers import make_classifier
from eegreach.evaluation import evaluate_scores
from eegreach.pipeline import preprocess


def held_out(erd_depth, name):
    rec = synthgen.generate_session(
        synthgen.SynthConfig(n_trials_per_class=20, erd_depth=erd_depth, seed=1))
    trials = preprocess(rec)
    train_idx, test_idx = dataset.split_indices([t.label for t in trials],
                                                dataset.SplitSpec(0.8, seed=1))
    clf = make_classifier(name, seed=1, n_trees=50)
    clf.fit([trials[i] for i in train_idx])
    test = [trials[i] for i in test_idx]
    scores = clf.predict_proba(test)
    return evaluate_scores(name, scores, np.array([t.label for t in test]))


for depth in (0.8, 0.0):
    for name in ("fbcsp", "rf"):
        m = held_out(depth, name)
        print(f"erd_depth {depth:.1f}  {name:6s} accuracy {m.accuracy:.3f}  "
              f"mean AUC {np.mean(m.aucs):.3f}  (chance 0.167)")
