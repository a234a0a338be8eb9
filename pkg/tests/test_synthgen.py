import numpy as np
import pytest
import scipy.stats

from eegreach import dsp, synthgen as S
from eegreach.baselines import FBCSP, ForestClassifier
from eegreach.errors import ConfigurationError
from eegreach.pipeline import PreprocessConfig, preprocess
from eegreach.tensorize import MOTOR_CHANNELS


def arrays(trials):
    return np.stack([t.data for t in trials]), np.array([t.label for t in trials])


def cv_accuracy(make, x, y, folds=5, seed=0):
    """Stratified k-fold accuracy pooled over all trials."""
    order = np.random.default_rng(seed).permutation(len(y))
    fold = np.empty(len(y), dtype=int)
    for c in range(6):
        members = order[y[order] == c]
        fold[members] = np.arange(len(members)) % folds
    hits = 0
    for k in range(folds):
        tr, te = fold != k, fold == k
        hits += np.sum(make().fit(x[tr], y[tr]).predict(x[te]) == y[te])
    return hits / len(y)


@pytest.fixture(scope="module")
def session():
    return S.generate_session(S.SynthConfig(seed=42))


def test_default_session_has_240_balanced_events(session):
    labels = np.array([c for _, c in session.events])
    assert len(labels) == 240
    assert np.all(np.bincount(labels, minlength=6) == 40)
    assert len(session.channels) == 64
    assert session.fs_hz == 1000.0
    # classes arrive in a shuffled order
    assert not np.all(np.diff(labels) >= 0)


def test_signatures_pairwise_distinct():
    cells = {c: {(ch, b): m for ch, b, m in S.SIGNATURES[c]} for c in range(6)}
    for a in range(6):
        for b in range(a + 1, 6):
            keys = set(cells[a]) | set(cells[b])
            differ = [k for k in keys if cells[a].get(k, 0.0) != cells[b].get(k, 0.0)]
            assert len(differ) >= 2, (a, b)
    for c in range(6):
        assert all(ch in MOTOR_CHANNELS and band in S.BANDS for ch, band, _ in S.SIGNATURES[c])


def test_left_class_mu_drops_below_half(session):
    idx = {c: i for i, c in enumerate(session.channels)}
    left = 3
    onsets = [o for o, c in session.events if c == left]
    for ch, band, _ in S.SIGNATURES[left]:
        row = session.samples[idx[ch]]
        trial = np.stack([row[o:o + 3000] for o in onsets])
        rest = np.stack([row[o - 1500:o] for o in onsets])
        ratio = dsp.band_power(trial, 1000.0, S.BANDS["mu"]).mean() / \
            dsp.band_power(rest, 1000.0, S.BANDS["mu"]).mean()
        assert ratio < 0.5, ch


def test_spectral_report(session):
    report = S.spectral_check(session)
    assert all(-1.4 <= s <= -0.6 for s in report.psd_slope.values())
    # the 10 Hz reference peak only exists where the idle rhythm is placed
    assert all(report.line_residual_db[c] < -30.0 for c in MOTOR_CHANNELS)
    assert report.erd_signs_match()
    assert len(report.erd_index) == sum(len(v) for v in S.SIGNATURES.values())


def test_generation_is_bit_identical_per_seed():
    cfg = S.SynthConfig(n_trials_per_class=2, n_channels=20, seed=7)
    a, b = S.generate_session(cfg), S.generate_session(cfg)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert a.events == b.events
    c = S.generate_session(S.SynthConfig(n_trials_per_class=2, n_channels=20, seed=8))
    assert not np.array_equal(a.samples, c.samples)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        S.SynthConfig(erd_depth=1.5).validate()
    with pytest.raises(ConfigurationError):
        S.SynthConfig(trial_s=0).validate()
    with pytest.raises(ConfigurationError):
        S.SynthConfig(n_channels=10).validate()


def test_ground_truth_sidecar(session):
    text = S.ground_truth_text(S.SynthConfig(seed=42), session)
    assert sum(1 for line in text.splitlines() if line.startswith("event ")) == 240
    assert "signature 3 Left" in text


def test_null_session_has_no_class_effect():
    rec = S.generate_session(S.SynthConfig(n_trials_per_class=10, erd_depth=0.0, seed=3))
    x, y = arrays(preprocess(rec))
    for band in ("mu", "beta"):
        power = np.log(dsp.band_power(x, 100.0, S.BANDS[band]).mean(axis=1))
        p = scipy.stats.f_oneway(*[power[y == c] for c in range(6)]).pvalue
        assert p > 0.01, band


def test_unplaced_channels_carry_no_label(session):
    unplaced = tuple(c for c in session.channels if c not in MOTOR_CHANNELS)[:20]
    x, y = arrays(preprocess(session, PreprocessConfig(channels=unplaced)))
    forest = ForestClassifier(n_trees=100, seed=0).fit(x, y).forest
    assert abs(forest.oob_accuracy - 1 / 6) <= 0.08
    assert abs(cv_accuracy(FBCSP, x, y) - 1 / 6) <= 0.08


def test_decoder_accuracy_grows_with_depth():
    accs = []
    for depth in (0.0, 0.3, 0.6, 0.9):
        rec = S.generate_session(S.SynthConfig(n_trials_per_class=20, erd_depth=depth, seed=11))
        x, y = arrays(preprocess(rec))
        accs.append(cv_accuracy(FBCSP, x, y))
    inversions = [a - b for a, b in zip(accs, accs[1:]) if b < a]
    assert len(inversions) <= 1 and all(d <= 0.03 for d in inversions), accs
    assert accs[-1] > accs[0] + 0.3, accs
