"""Offline conditioning chain: decimate -> band-pass -> channel selection -> epoching."""
from dataclasses import dataclass, replace

import numpy as np

from . import dsp
from .dataset import Recording, epoch, select_channels
from .errors import InputError
from .tensorize import MOTOR_CHANNELS, fit_normalizer, normalize, stack_grids, to_grid


@dataclass(frozen=True)
class PreprocessConfig:
    decimate_factor: int = 10
    band_hz: tuple = (4.0, 40.0)
    band_order: int = 3
    channels: tuple = MOTOR_CHANNELS
    window_s: tuple = (0.0, 3.0)


def _bandpass(cfg, fs_hz):
    return dsp.design_butterworth_bandpass(cfg.band_order, cfg.band_hz[0], cfg.band_hz[1], fs_hz)


def _condition_rows(rows, fs_hz, cfg):
    """Decimate then zero-phase band-pass each row of a (channels, time) block."""
    factor = int(cfg.decimate_factor)
    fs = fs_hz / factor
    bp = _bandpass(cfg, fs)
    out = np.empty((rows.shape[0], -(-rows.shape[1] // factor)))
    for i, row in enumerate(rows):
        out[i] = dsp.filtfilt(dsp.decimate(row, factor, fs_hz), bp)
    return out, fs


def condition(recording, cfg=PreprocessConfig()):
    """Decimate and band-pass a continuous recording, one channel at a time."""
    rec = select_channels(recording, cfg.channels)
    factor = int(cfg.decimate_factor)
    if any(onset % factor for onset, _ in rec.events):
        raise InputError(f"event onsets are not multiples of the decimation factor {factor}")
    out, fs = _condition_rows(rec.samples, rec.fs_hz, cfg)
    events = [(onset // factor, cls) for onset, cls in rec.events]
    return Recording(fs, rec.channels, out, events)


def preprocess(data, cfg=PreprocessConfig()):
    """Continuous Recording or list of Trials -> list of conditioned Trials.

    Continuous input is filtered before epoching, so no trial sees filter
    edge effects. Already-epoched input is conditioned trial by trial and
    keeps its length (the window setting does not apply).
    """
    if isinstance(data, Recording):
        return epoch(condition(data, cfg), cfg.window_s)
    out = []
    for t in data:
        t = select_channels(t, cfg.channels)
        rows, fs = _condition_rows(t.data, t.fs_hz, cfg)
        out.append(replace(t, data=rows, fs_hz=fs))
    return out


def leakage_probe(cfg=PreprocessConfig(), fs_hz=1000.0, seconds=20.0, tones_hz=(2.0, 12.0)):
    """Run equal-amplitude tones through the chain; return output power ratio P(2 Hz)/P(12 Hz)."""
    t = np.arange(int(seconds * fs_hz)) / fs_hz
    lo, hi = tones_hz
    x = np.sin(2 * np.pi * lo * t) + np.sin(2 * np.pi * hi * t)
    y, fs = _condition_rows(x[None], fs_hz, cfg)
    y = y[0]
    n = len(y)
    spec = np.abs(np.fft.rfft(y * np.hanning(n))) ** 2
    f = np.fft.rfftfreq(n, 1.0 / fs)
    return float(spec[np.argmin(np.abs(f - lo))] / spec[np.argmin(np.abs(f - hi))])


def grid_arrays(train_trials, other_trials=(), layout=None):
    """Tensorize and z-score with statistics from ``train_trials`` only.

    Returns ``(x_train, y_train, x_other, y_other, stats)``.
    """
    g_train = [to_grid(t, layout) for t in train_trials]
    stats = fit_normalizer(g_train)
    x_tr, y_tr = stack_grids(normalize(g_train, stats))
    g_other = [to_grid(t, layout) for t in other_trials]
    x_ot, y_ot = stack_grids(normalize(g_other, stats)) if g_other else (None, None)
    return x_tr, y_tr, x_ot, y_ot, stats
