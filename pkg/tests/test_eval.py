import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eegreach.errors import InputError
from eegreach.evaluation import (
    accuracy, auc_identity_error, confusion, evaluate_scores, pairwise_auc, parse_metrics,
    permutation_test, render_figures, roc_curve, roc_ovr, table_text,
)

SVG = "{http://www.w3.org/2000/svg}"


def random_scores(n=240, seed=0, signal=0.0):
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(6), n // 6)
    scores = rng.random((n, 6))
    scores[np.arange(n), labels] += signal
    return scores / scores.sum(axis=1, keepdims=True), labels


# -- accuracy and confusion ----------------------------------------------------------

def test_accuracy_basics():
    assert accuracy([0, 1, 2], [0, 1, 2]) == 1.0
    # tied score rows resolve to the lowest class id
    assert accuracy([[0.5, 0.5, 0, 0, 0, 0]], [0]) == 1.0
    with pytest.raises(InputError):
        accuracy([0, 1], [0])


def test_uniform_random_predictor_near_chance():
    rng = np.random.default_rng(1)
    labels = np.repeat(np.arange(6), 40)
    assert abs(accuracy(rng.integers(0, 6, 240), labels) - 1 / 6) <= 0.08


def test_confusion_perfect_and_constant():
    labels = np.repeat(np.arange(6), 3)
    np.testing.assert_array_equal(confusion(labels, labels).normalized, np.eye(6))
    cm = confusion(np.zeros(18, dtype=int), labels)
    np.testing.assert_array_equal(cm.normalized[:, 0], np.ones(6))
    assert cm.normalized[:, 1:].sum() == 0


def test_confusion_hand_case():
    labels = [0, 1, 2, 3, 4, 5]
    pred = [0, 2, 2, 3, 5, 5]
    expected = np.eye(6, dtype=int)
    expected[1] = [0, 0, 1, 0, 0, 0]
    expected[4] = [0, 0, 0, 0, 0, 1]
    cm = confusion(pred, labels)
    np.testing.assert_array_equal(cm.counts, expected)
    assert cm.accuracy == accuracy(pred, labels) == 4 / 6
    np.testing.assert_array_equal(cm.recall, [1, 0, 1, 1, 0, 1])


def test_confusion_rows_without_support_are_undefined():
    cm = confusion([0, 0], [0, 1])
    assert np.isnan(cm.normalized[2]).all()
    np.testing.assert_allclose(cm.normalized[:2].sum(axis=1), 1.0)
    with pytest.raises(InputError, match="label 6"):
        confusion([0], [6])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=80))
def test_confusion_conserves_trials(pairs):
    pred, labels = map(np.array, zip(*pairs))
    cm = confusion(pred, labels)
    assert cm.total == len(labels)
    np.testing.assert_array_equal(cm.counts.sum(axis=1), np.bincount(labels, minlength=6))
    assert cm.accuracy == accuracy(pred, labels)


# -- ROC ---------------------------------------------------------------------------------

def test_perfect_separation_auc_one():
    c = roc_curve([0.9, 0.8, 0.3, 0.1], [True, True, False, False])
    assert c.auc == 1.0
    assert (c.fpr[0], c.tpr[0], c.fpr[-1], c.tpr[-1]) == (0, 0, 1, 1)


def test_shuffled_scores_auc_near_half():
    scores, labels = random_scores(seed=2)
    for c in roc_ovr(scores, np.random.default_rng(3).permutation(labels)):
        assert abs(c.auc - 0.5) <= 0.1


@pytest.mark.parametrize("seed", range(5))
def test_auc_identity_random_and_tied(seed):
    scores, labels = random_scores(seed=seed, signal=0.5)
    assert auc_identity_error(scores, labels) < 1e-12
    coarse = np.round(scores * 10) / 10  # many ties
    curves = roc_ovr(coarse, labels)
    for c in curves:
        assert abs(c.auc - pairwise_auc(coarse[:, c.cls], labels == c.cls)) < 1e-12
        assert np.all(np.diff(c.fpr) >= 0) and np.all(np.diff(c.tpr) >= 0)


def test_single_class_support_is_flagged():
    scores, _ = random_scores(12)
    curves = roc_ovr(scores, np.zeros(12, dtype=int))
    assert not curves[0].defined and np.isnan(curves[0].auc)
    with pytest.raises(InputError):
        roc_ovr(scores[:, :5], np.zeros(12, dtype=int))


# -- permutation test -----------------------------------------------------------------

def test_permutation_identical_lists():
    assert permutation_test([0.5, 0.6, 0.7], [0.5, 0.6, 0.7]) == 1.0


def test_permutation_constant_shift_exact():
    rng = np.random.default_rng(0)
    b = rng.uniform(0.3, 0.6, 10)
    p = permutation_test(b + 0.2, b, method="exact")
    # only the all-plus and all-minus patterns reach the observed mean
    assert p == pytest.approx(2 / 1024, abs=1e-15)
    assert p < 0.01
    assert permutation_test(b, b + 0.2, method="exact") == p


@pytest.mark.parametrize("seed", range(4))
def test_permutation_sampled_matches_exact(seed):
    # 1e5 draws put the Monte Carlo standard error near 0.0016
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(0.4, 0.7, 10), rng.uniform(0.35, 0.65, 10)
    exact = permutation_test(a, b, method="exact")
    sampled = permutation_test(a, b, n_perm=100_000, seed=1, method="sample")
    assert abs(exact - sampled) <= 0.01
    assert sampled == permutation_test(a, b, n_perm=100_000, seed=1, method="sample")


def test_permutation_rejects_bad_folds():
    with pytest.raises(InputError):
        permutation_test([0.1, 0.2], [0.1])
    with pytest.raises(InputError):
        permutation_test([0.1], [0.2])


# -- metrics dump and figures ---------------------------------------------------------

def test_metrics_text_round_trip():
    scores, labels = random_scores(60, signal=1.0)
    m = evaluate_scores("demo", scores, labels, {"split": "test"})
    d = parse_metrics(m.to_text())
    assert float(d["accuracy"]) == pytest.approx(m.accuracy, abs=1e-6)
    assert d["split"] == "test" and d["n_trials"] == "60"
    assert [int(v) for v in d["confusion.2"].split()] == list(m.confusion.counts[2])
    assert float(d["auc.identity_max_error"]) < 1e-12


def test_figures_are_valid_svg(tmp_path):
    scores, labels = random_scores(60, signal=0.7)
    m = evaluate_scores("demo", scores, labels)
    grid = {"fbcsp": [0.3, 0.31], "inception3d": [0.8, 0.82]}
    paths = render_figures(m, tmp_path, grid, ["fold0", "fold1"])
    assert sorted(p.name for p in paths) == ["confusion.svg", "roc.svg", "table.svg", "table.txt"]
    for p in paths:
        if p.suffix == ".svg":
            root = ET.parse(p).getroot()
            assert root.tag == SVG + "svg" and root.get("version") == "1.1"
    roc = ET.parse(tmp_path / "roc.svg").getroot()
    legend = [float(t.get("data-auc")) for t in roc.iter(SVG + "text") if t.get("class") == "auc"]
    assert legend == m.aucs
    assert len([e for e in roc.iter(SVG + "polyline")]) == 6
    cells = [t.text for t in ET.parse(tmp_path / "confusion.svg").getroot().iter(SVG + "text")
             if t.get("class") == "cell"]
    assert len(cells) == 36 and all(len(c.split(".")[1]) == 2 for c in cells)
    assert (tmp_path / "table.txt").read_text() == table_text(grid, ["fold0", "fold1"])


def test_figures_are_byte_stable(tmp_path):
    scores, labels = random_scores(60, signal=0.7)
    m = evaluate_scores("demo", scores, labels)
    a = [p.read_bytes() for p in render_figures(m, tmp_path / "a")]
    b = [p.read_bytes() for p in render_figures(m, tmp_path / "b")]
    assert a == b


def test_unwritable_figure_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    scores, labels = random_scores(12)
    with pytest.raises(OSError):
        render_figures(evaluate_scores("m", scores, labels), blocker / "sub")
