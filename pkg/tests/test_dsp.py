import numpy as np
import pytest
import scipy.signal
from hypothesis import given, settings, strategies as st

from eegreach import dsp
from eegreach.errors import DesignError, InputError

from oracles import butterworth_bandpass_gain


@pytest.fixture(scope="module")
def bp():
    return dsp.design_butterworth_bandpass(3, 4.0, 40.0, 100.0)


def test_bandpass_edges_at_minus_3db(bp):
    g = bp.gain_db([4.0, 40.0])
    np.testing.assert_allclose(g, -3.0103, atol=0.1)
    # closed form uses exactly the pre-warped analog prototype
    np.testing.assert_allclose(g, 20 * np.log10(butterworth_bandpass_gain([4.0, 40.0], 4, 40,
                                                                          3, 100.0)), atol=1e-9)


def test_bandpass_matches_closed_form_everywhere(bp):
    f = np.linspace(0.5, 49.5, 199)
    np.testing.assert_allclose(np.abs(bp.response(f)),
                               butterworth_bandpass_gain(f, 4.0, 40.0, 3, 100.0), atol=1e-10)


def test_bandpass_agrees_with_scipy_design(bp):
    ref = scipy.signal.butter(3, [4.0, 40.0], "bandpass", fs=100.0, output="sos")
    f = np.linspace(0.1, 49.9, 300)
    _, h_ref = scipy.signal.sosfreqz(ref, worN=f, fs=100.0)
    np.testing.assert_allclose(np.abs(bp.response(f)), np.abs(h_ref), atol=1e-9)
    assert bp.n_sections == 3


def test_lowpass_cutoff_and_dc():
    lp = dsp.design_butterworth_lowpass(4, 40.0, 1000.0)
    assert lp.gain_db([40.0])[0] == pytest.approx(-3.0103, abs=1e-3)
    assert abs(lp.response([0.0])[0]) == pytest.approx(1.0, abs=1e-12)
    ref = scipy.signal.butter(4, 40.0, fs=1000.0, output="sos")
    f = np.linspace(1, 499, 100)
    np.testing.assert_allclose(np.abs(lp.response(f)),
                               np.abs(scipy.signal.sosfreqz(ref, worN=f, fs=1000.0)[1]),
                               atol=1e-9)


def test_odd_order_lowpass_has_first_order_section():
    lp = dsp.design_butterworth_lowpass(3, 10.0, 100.0)
    assert lp.n_sections == 2 and lp.is_stable()


def test_acquisition_bandpass_is_stable():
    f = dsp.design_butterworth_bandpass(8, 0.01, 100.0, 1000.0)
    assert f.is_stable()
    assert np.max(np.abs(f.poles())) < 1.0


def test_notch_attenuates_line_only():
    n = dsp.design_notch(60.0, 30.0, 1000.0)
    assert n.gain_db([60.0])[0] < -100
    assert abs(n.gain_db([10.0])[0]) < 0.01
    b, a = scipy.signal.iirnotch(60.0, 30.0, 1000.0)
    np.testing.assert_allclose(n.sections[0], [b[0], b[1], b[2], a[1], a[2]], atol=1e-14)


@pytest.mark.parametrize("args", [(0, 4, 40, 100), (3, 40, 4, 100), (3, 4, 50, 100),
                                  (3, 0, 40, 100)])
def test_bad_designs_rejected(args):
    with pytest.raises(DesignError):
        dsp.design_butterworth_bandpass(*args)


def test_steady_state_matches_scipy(bp):
    np.testing.assert_allclose(dsp.steady_state(bp), scipy.signal.sosfilt_zi(bp.as_scipy()),
                               atol=1e-12)


def test_filtfilt_matches_scipy(bp):
    x = np.random.default_rng(0).standard_normal((3, 500))
    ref = scipy.signal.sosfiltfilt(bp.as_scipy(), x, axis=-1, padtype="odd",
                                   padlen=dsp.padlen(bp))
    np.testing.assert_allclose(dsp.filtfilt(x, bp), ref, atol=1e-12)
    np.testing.assert_allclose(dsp.filtfilt(x.T, bp, axis=0), ref.T, atol=1e-12)


@pytest.mark.parametrize("freq", [6.0, 10.0, 17.0, 25.0, 33.0])
def test_filtfilt_is_zero_phase(bp, freq):
    t = np.arange(3000) / 100.0
    x = np.sin(2 * np.pi * freq * t + 0.3)
    y = dsp.filtfilt(x, bp)
    core = slice(500, 2500)
    half = int(np.ceil(100.0 / freq / 2)) - 1  # within half a period the peak is unique
    lags = np.arange(-half, half + 1)
    xc = [np.dot(x[core], np.roll(y, k)[core]) for k in lags]
    assert lags[int(np.argmax(xc))] == 0


def test_filtfilt_too_short_rejected(bp):
    with pytest.raises(InputError):
        dsp.filtfilt(np.zeros(3 * dsp.padlen(bp)), bp)


def test_decimate_rate_length_and_alias_rejection():
    fs = 1000.0
    t = np.arange(20000) / fs
    x = np.sin(2 * np.pi * 10 * t) + np.sin(2 * np.pi * 140 * t)
    y = dsp.decimate(x, 10, fs)
    assert len(y) == 2000
    ty = t[::10]
    # 140 Hz would alias to 40 Hz; it must be gone, 10 Hz kept
    core = slice(200, 1800)
    resid = y[core] - np.sin(2 * np.pi * 10 * ty[core])
    assert np.sqrt(np.mean(resid ** 2)) < 0.01
    np.testing.assert_array_equal(dsp.decimate(x, 1, fs), x)


def test_cascade_multiplies_responses(bp):
    n = dsp.design_notch(25.0, 10.0, 100.0)
    c = dsp.cascade(bp, n)
    f = np.array([7.0, 25.0, 31.0])
    np.testing.assert_allclose(c.response(f), bp.response(f) * n.response(f), atol=1e-12)
    with pytest.raises(DesignError):
        dsp.cascade(bp, dsp.design_notch(60.0, 30.0, 1000.0))


@settings(max_examples=20, deadline=None)
@given(order=st.integers(1, 6), low=st.floats(1.0, 20.0), width=st.floats(2.0, 25.0))
def test_bandpass_edges_property(order, low, width):
    f = dsp.design_butterworth_bandpass(order, low, low + width, 100.0)
    assert f.is_stable()
    np.testing.assert_allclose(f.gain_db([low, low + width]), -3.0103, atol=1e-6)


def test_band_power_locates_tone():
    t = np.arange(5000) / 100.0
    x = np.sin(2 * np.pi * 10 * t)
    assert dsp.band_power(x, 100.0, (8, 12)) > 100 * dsp.band_power(x, 100.0, (18, 26))
