import numpy as np
import pytest

from eegreach import baselines as B
from eegreach.errors import InputError, NumericError, StateError


def random_spd(n, rng):
    a = rng.standard_normal((n, n))
    return a @ a.T + n * np.eye(n)


# -- generalized eigenproblem ------------------------------------------------------

def test_eig_identity_b_gives_sorted_diagonal():
    lam, v = B.eig_sym_pair(np.diag([2.0, 5.0, -1.0]), np.eye(3))
    np.testing.assert_allclose(lam, [5.0, 2.0, -1.0], atol=1e-14)
    np.testing.assert_allclose(np.abs(v), np.eye(3)[:, [1, 0, 2]], atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_eig_random_spd_residual(seed):
    rng = np.random.default_rng(seed)
    a, b = random_spd(5, rng), random_spd(5, rng)
    lam, v = B.eig_sym_pair(a, b)
    assert np.all(np.diff(lam) <= 0)
    for k in range(5):
        assert np.linalg.norm(a @ v[:, k] - lam[k] * b @ v[:, k]) < 1e-8
    np.testing.assert_allclose(v.T @ b @ v, np.eye(5), atol=1e-10)


def test_eig_2x2_closed_form():
    a = np.array([[3.0, 1.0], [1.0, 2.0]])
    b = np.array([[2.0, 0.5], [0.5, 1.0]])
    # det(A - lam B) = 0 as a quadratic in lam
    qa = np.linalg.det(b)
    qb = -(a[0, 0] * b[1, 1] + a[1, 1] * b[0, 0] - 2 * a[0, 1] * b[0, 1])
    qc = np.linalg.det(a)
    disc = np.sqrt(qb * qb - 4 * qa * qc)
    roots = sorted([(-qb + disc) / (2 * qa), (-qb - disc) / (2 * qa)], reverse=True)
    lam, _ = B.eig_sym_pair(a, b)
    np.testing.assert_allclose(lam, roots, atol=1e-10)


def test_eig_rejects_indefinite_b():
    with pytest.raises(NumericError):
        B.eig_sym_pair(np.eye(2), np.diag([1.0, -1.0]))


# -- CSP -----------------------------------------------------------------------------

def two_channel_trials(var_a, n=20, t=200, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, 2, t)) * np.sqrt(np.asarray(var_a))[None, :, None]


def test_csp_recovers_analytic_direction():
    a = two_channel_trials([1.0, 0.0], seed=0)
    rest = two_channel_trials([0.0, 1.0], seed=1)
    csp = B.csp_fit(a, rest, m=1)
    w = csp.filters[0]
    assert abs(w[0]) / np.linalg.norm(w) > 0.99
    assert csp.eigvals[0] > 0.9
    assert csp.whitening_residual() < 1e-6


def test_csp_identical_classes_give_half():
    rng = np.random.default_rng(3)
    mix = rng.standard_normal((4, 4))
    x = np.einsum("cd,ndt->nct", mix, rng.standard_normal((400, 4, 300)))
    csp = B.csp_fit(x[:200], x[200:], m=1)
    np.testing.assert_allclose(csp.eigvals, 0.5, atol=0.03)
    assert csp.filters.shape == (2, 4)


def test_csp_whitening_on_random_data():
    rng = np.random.default_rng(4)
    csp = B.csp_fit(rng.standard_normal((10, 20, 300)), rng.standard_normal((30, 20, 300)))
    assert csp.filters.shape == (4, 20)
    assert csp.whitening_residual() < 1e-6


def test_csp_rejects_too_few_trials():
    with pytest.raises(InputError):
        B.csp_fit(np.ones((1, 2, 10)), np.ones((3, 2, 10)))


def test_log_variance_floor():
    proj = np.zeros((2, 50))
    proj[0] = np.sin(np.arange(50))
    lv = B.log_variance_ratio(proj)
    assert lv[0] == pytest.approx(0.0)
    assert lv[1] == pytest.approx(np.log(1e-12))


# -- FBCSP -----------------------------------------------------------------------------

def band_signal_trials(n_per_class=12, seed=0):
    """Each class carries extra 10 Hz power on one of six channels."""
    rng = np.random.default_rng(seed)
    t = np.arange(300) / 100.0
    y = np.repeat(np.arange(6), n_per_class)
    x = rng.standard_normal((len(y), 8, 300))
    for i, c in enumerate(y):
        x[i, c] += 3 * np.sin(2 * np.pi * 10 * t + rng.uniform(0, 2 * np.pi))
    return x, y


@pytest.fixture(scope="module")
def fbcsp_fitted():
    x, y = band_signal_trials()
    return B.FBCSP().fit(x, y), x, y


def test_fbcsp_feature_length_and_scale_invariance(fbcsp_fitted):
    model, x, _ = fbcsp_fitted
    f = model.features(x[:3])
    assert f.shape == (3, 216) and model.n_features == 216
    np.testing.assert_allclose(model.features(7.5 * x[:3]), f, atol=1e-9)


def test_fbcsp_learns_and_probabilities_sum_to_one(fbcsp_fitted):
    model, x, y = fbcsp_fitted
    p = model.predict_proba(x)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert np.mean(model.predict(x) == y) == 1.0
    xt, yt = band_signal_trials(6, seed=9)
    assert np.mean(model.predict(xt) == yt) > 0.8


def test_fbcsp_state_round_trip(fbcsp_fitted):
    model, x, _ = fbcsp_fitted
    clone = B.FBCSP().set_state(model.get_state())
    np.testing.assert_array_equal(clone.predict_proba(x), model.predict_proba(x))


def test_fbcsp_unfitted_raises():
    with pytest.raises(StateError):
        B.FBCSP().features(np.zeros((8, 300)))


def test_softmax_regression_separable_and_chance():
    rng = np.random.default_rng(0)
    x = np.r_[rng.normal(-3, 1, (30, 2)), rng.normal(3, 1, (30, 2))]
    y = np.repeat([0, 1], 30)
    clf = B.SoftmaxRegression(n_classes=2).fit(x, y)
    assert np.mean(np.argmax(clf.predict_proba(x), axis=1) == y) == 1.0
    xr = rng.standard_normal((240, 10))
    yr = rng.integers(0, 6, 240)
    clf = B.SoftmaxRegression().fit(xr[:120], yr[:120])
    acc = np.mean(np.argmax(clf.predict_proba(xr[120:]), axis=1) == yr[120:])
    assert abs(acc - 1 / 6) <= 0.08 + 0.04  # 120 held-out trials


def test_softmax_regression_rejects_nan():
    x = np.ones((4, 2))
    x[1, 1] = np.nan
    with pytest.raises(InputError):
        B.SoftmaxRegression().fit(x, [0, 1, 2, 3])


# -- random forest ---------------------------------------------------------------------

def test_forest_threshold_separable():
    x = np.linspace(0, 1, 60)[:, None]
    y = (x[:, 0] > 0.5).astype(int)
    rf = B.RandomForest(n_trees=10, seed=0).fit(x, y)
    assert np.mean(rf.predict(x) == y) == 1.0
    assert 0.0 <= rf.oob_accuracy <= 1.0


def test_forest_permuted_labels_oob_near_chance():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((240, 20))
    y = rng.permutation(np.repeat(np.arange(6), 40))
    rf = B.RandomForest(n_trees=100, seed=2).fit(x, y)
    assert abs(rf.oob_accuracy - 1 / 6) <= 0.08


def test_forest_is_deterministic_and_round_trips():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((60, 5))
    y = np.repeat(np.arange(6), 10)
    a = B.RandomForest(n_trees=8, seed=5).fit(x, y)
    b = B.RandomForest(n_trees=8, seed=5).fit(x, y)
    np.testing.assert_array_equal(a.predict_proba(x), b.predict_proba(x))
    c = B.RandomForest().set_state(a.get_state())
    np.testing.assert_array_equal(c.predict_proba(x), a.predict_proba(x))
    assert c.oob_accuracy == a.oob_accuracy


def test_forest_splits_strictly_reduce_gini():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((80, 6))
    y = rng.integers(0, 6, 80)
    tree = B.grow_tree(x, y, rng, 6, 3)
    gini = B._gini_counts(tree.counts) * tree.counts.sum(axis=1)
    for i in np.flatnonzero(tree.left >= 0):
        assert gini[tree.left[i]] + gini[tree.right[i]] < gini[i]


def test_deeper_trees_never_fit_worse():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((120, 8))
    y = rng.integers(0, 6, 120)
    accs = [np.mean(B.RandomForest(n_trees=15, seed=0, max_depth=d).fit(x, y).predict(x) == y)
            for d in (1, 3, 6, None)]
    assert accs == sorted(accs)


def test_forest_ties_go_to_lowest_class():
    tree = B.Tree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]),
                  np.array([[0, 2, 2, 0, 0, 0]]))
    assert tree.predict(np.zeros((1, 1)))[0] == 1


def test_forest_single_class_rejected():
    with pytest.raises(InputError):
        B.RandomForest().fit(np.zeros((4, 2)), [3, 3, 3, 3])


def test_band_log_variance_shape():
    bank = B.FilterBank()
    assert len(bank) == 9 and bank.bands[0] == (4.0, 8.0) and bank.bands[-1] == (36.0, 40.0)
    f = B.band_log_variance(np.random.default_rng(0).standard_normal((3, 20, 300)), bank)
    assert f.shape == (3, 180)
