"""Seeded synthetic six-class reaching EEG with known ground truth.

Background on every channel is 1/f noise plus 60 Hz mains pickup; the 20
motor-strip channels also carry a mu (~10 Hz) and a weaker beta (~22 Hz)
idle rhythm, each a mix of one shared source and a channel-specific one.
During a trial, the cued class attenuates the rhythm on its signature cells
by ``1 - erd_depth * multiplier`` and adds a slow (< 1 Hz) cue-locked bump.
The amplifier is modeled by a causal 8th-order 0.01-100 Hz band-pass and a
60 Hz notch.

Signature table version 1. Regions: L = left-hemisphere cells (FC5 FC3 FC1
C5 C3 C1 CP5 CP3 CP1), R = their right-hemisphere mirror, M = the whole
strip, Crow = C5 ... C6. Cells on the C row get multiplier ``core`` and the
rest ``edge``; a negative multiplier means power rises (ERS).

=========  ======  ======  =====  =====
class      band    region  core   edge
=========  ======  ======  =====  =====
Backward   beta    L       1.0    0.7
Up         beta    R       1.0    0.7
Down       mu      M       -0.8   -0.5
Left       mu      R       1.0    0.7
Right      mu      L       1.0    0.7
Forward    mu      Crow    1.0    1.0
Forward    beta    Crow    1.0    1.0
=========  ======  ======  =====  =====

Hemispheric classes differ from their mirror partner by the sign of the
power step across the midline, a local feature that survives global
pooling; the others shift total mu / beta power.
"""
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.signal

from . import dsp, seeding
from .dataset import CLASS_NAMES, N_CLASSES, Recording
from .errors import ConfigurationError
from .tensorize import MOTOR_CHANNELS

SIGNATURE_VERSION = 1
BANDS = {"mu": (8.0, 12.0), "beta": (18.0, 26.0)}
RHYTHM_CENTRE_HZ = {"mu": 10.0, "beta": 22.0}
RHYTHM_WIDTH_HZ = {"mu": 1.0, "beta": 1.6}

LEFT = ("FC5", "FC3", "FC1", "C5", "C3", "C1", "CP5", "CP3", "CP1")
RIGHT = ("FC2", "FC4", "FC6", "C2", "C4", "C6", "CP2", "CP4", "CP6")
C_ROW = ("C5", "C3", "C1", "Cz", "C2", "C4", "C6")


def _region(channels, band, core, edge):
    return tuple((ch, band, core if ch in C_ROW else edge) for ch in channels)


SIGNATURES = {
    0: _region(LEFT, "beta", 1.0, 0.7),
    1: _region(RIGHT, "beta", 1.0, 0.7),
    2: _region(MOTOR_CHANNELS, "mu", -0.8, -0.5),
    3: _region(RIGHT, "mu", 1.0, 0.7),
    4: _region(LEFT, "mu", 1.0, 0.7),
    5: _region(C_ROW, "mu", 1.0, 1.0) + _region(C_ROW, "beta", 1.0, 1.0),
}
SLOW_SIGN = {0: 1.0, 1: -1.0, 2: 1.0, 3: -1.0, 4: 1.0, 5: -1.0}

CHANNELS_64 = (
    "Fp1", "Fp2", "AF7", "AF3", "AFz", "AF4", "AF8", "F7", "F5", "F3", "F1", "Fz", "F2", "F4",
    "F6", "F8", "FT9", "FT7", "FC5", "FC3", "FC1", "FC2", "FC4", "FC6", "FT8", "FT10", "T7",
    "C5", "C3", "C1", "Cz", "C2", "C4", "C6", "T8", "TP9", "TP7", "CP5", "CP3", "CP1", "CPz",
    "CP2", "CP4", "CP6", "TP8", "TP10", "P7", "P5", "P3", "P1", "Pz", "P2", "P4", "P6", "P8",
    "PO7", "PO3", "POz", "PO4", "PO8", "O1", "Oz", "O2", "Iz",
)


@dataclass
class SynthConfig:
    n_trials_per_class: int = 40
    fs_hz: float = 1000.0
    trial_s: float = 3.0
    inter_trial_s: float = 2.0
    lead_s: float = 2.0
    n_channels: int = 64
    erd_depth: float = 0.8
    noise_exponent: float = 1.0
    noise_uv: float = 6.0
    mu_uv: float = 10.0
    beta_uv: float = 6.0
    shared_fraction: float = 0.6
    line_uv: float = 5.0
    slow_uv: float = 5.0
    ramp_s: float = 0.2
    seed: int = 0

    def validate(self):
        if not 0.0 <= self.erd_depth <= 1.0:
            raise ConfigurationError(f"erd_depth must lie in [0, 1], got {self.erd_depth}")
        for name in ("fs_hz", "trial_s", "inter_trial_s", "lead_s"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.n_trials_per_class < 1:
            raise ConfigurationError("n_trials_per_class must be >= 1")
        if not len(MOTOR_CHANNELS) <= self.n_channels <= len(CHANNELS_64):
            raise ConfigurationError(
                f"n_channels must lie in [{len(MOTOR_CHANNELS)}, {len(CHANNELS_64)}]")
        if self.fs_hz <= 2 * 100.0:
            raise ConfigurationError("fs_hz must exceed 200 Hz for the acquisition filter")
        return self


def channel_names(n_channels=64):
    """Motor-strip channels always included; others taken in montage order."""
    extra = [c for c in CHANNELS_64 if c not in MOTOR_CHANNELS][:n_channels - len(MOTOR_CHANNELS)]
    keep = set(MOTOR_CHANNELS) | set(extra)
    return [c for c in CHANNELS_64 if c in keep]


def signature_cells(cls):
    return SIGNATURES[cls]


def _shaped_noise(rng, n, fs, gain):
    """White Gaussian noise coloured by amplitude response ``gain(f)``, unit target variance."""
    f = np.fft.rfftfreq(n, 1.0 / fs)
    g = gain(f)
    spec = np.fft.rfft(rng.standard_normal(n)) * g
    # expected variance of irfft(white_rfft * g) is (2/n) * sum(g^2) (DC/Nyquist aside)
    scale = np.sqrt(2.0 / n * np.sum(g * g))
    return np.fft.irfft(spec, n) / scale


def _pink_noise(rng, n, fs, exponent, band_uv):
    """1/f^exponent noise scaled so its 1-40 Hz content has RMS ``band_uv``."""
    f = np.fft.rfftfreq(n, 1.0 / fs)
    g = np.maximum(f, 0.5) ** (-exponent / 2.0)
    spec = np.fft.rfft(rng.standard_normal(n)) * g
    sel = (f >= 1.0) & (f <= 40.0)
    scale = np.sqrt(2.0 / n * np.sum(g[sel] ** 2))
    return np.fft.irfft(spec, n) * (band_uv / scale)


def _rhythm(rng, n, fs, band):
    fc, sd = RHYTHM_CENTRE_HZ[band], RHYTHM_WIDTH_HZ[band]
    return _shaped_noise(rng, n, fs, lambda f: np.exp(-0.5 * ((f - fc) / sd) ** 2))


def trial_onsets(cfg):
    fs = cfg.fs_hz
    n_total = cfg.n_trials_per_class * N_CLASSES
    period = int(round((cfg.trial_s + cfg.inter_trial_s) * fs))
    lead = int(round(cfg.lead_s * fs))
    onsets = lead + period * np.arange(n_total)
    n_samples = lead + period * n_total + lead
    return onsets, n_samples


def _trial_envelope(fs, trial_s, ramp_s):
    """1 inside each trial window (raised-cosine ramps at both ends), 0 elsewhere."""
    length = int(round(trial_s * fs))
    ramp = max(1, int(round(ramp_s * fs)))
    w = np.ones(length)
    edge = 0.5 * (1.0 - np.cos(np.pi * (np.arange(ramp) + 0.5) / ramp))
    w[:ramp] = edge
    w[-ramp:] = edge[::-1]
    return w, length


def acquisition_filter(fs_hz):
    """Amplifier model: 8th-order 0.01-100 Hz Butterworth band-pass then a 60 Hz notch."""
    return dsp.cascade(dsp.design_butterworth_bandpass(8, 0.01, 100.0, fs_hz),
                       dsp.design_notch(60.0, 30.0, fs_hz))


def generate_session(config=None):
    """Simulate one continuous session; events are ``(onset_sample, class_id)``."""
    cfg = (config or SynthConfig()).validate()
    fs = cfg.fs_hz
    names = channel_names(cfg.n_channels)
    onsets, n = trial_onsets(cfg)
    labels = np.repeat(np.arange(N_CLASSES), cfg.n_trials_per_class)
    labels = labels[seeding.rng(cfg.seed, "class-order").permutation(len(labels))]
    window, length = _trial_envelope(fs, cfg.trial_s, cfg.ramp_s)
    slow_len = int(round(2.0 * fs))
    slow = 0.5 * (1.0 - np.cos(2.0 * np.pi * 0.5 * np.arange(slow_len) / fs))
    t = np.arange(n) / fs
    amp = {"mu": cfg.mu_uv, "beta": cfg.beta_uv}
    shared = {b: _rhythm(seeding.rng(cfg.seed, "rhythm", b, "shared"), n, fs, b) for b in BANDS}
    acq = acquisition_filter(fs)
    samples = np.empty((len(names), n))
    for ci, name in enumerate(names):
        x = _pink_noise(seeding.rng(cfg.seed, "noise", name), n, fs, cfg.noise_exponent,
                        cfg.noise_uv)
        phase = seeding.rng(cfg.seed, "line", name).uniform(0, 2 * np.pi)
        x += cfg.line_uv * np.sin(2 * np.pi * 60.0 * t + phase)
        if name in MOTOR_CHANNELS:
            for band in BANDS:
                own = _rhythm(seeding.rng(cfg.seed, "rhythm", band, name), n, fs, band)
                r = np.sqrt(cfg.shared_fraction) * shared[band] + \
                    np.sqrt(1.0 - cfg.shared_fraction) * own
                env = np.ones(n)
                for onset, cls in zip(onsets, labels):
                    for ch, b, mult in SIGNATURES[cls]:
                        if ch == name and b == band:
                            env[onset:onset + length] -= cfg.erd_depth * mult * window
                x += amp[band] * env * r
            for onset, cls in zip(onsets, labels):
                if any(ch == name for ch, _, _ in SIGNATURES[cls]):
                    x[onset:onset + slow_len] += SLOW_SIGN[cls] * cfg.slow_uv * slow
        samples[ci] = dsp.lfilter_sos(acq, x)
    events = list(zip(onsets.tolist(), labels.tolist()))
    return Recording(fs, names, samples, events)


def ground_truth_text(config, recording):
    """Plain-text sidecar: config, signature table and the event list."""
    lines = [f"# synthetic session, signature table v{SIGNATURE_VERSION}"]
    for k, v in asdict(config).items():
        lines.append(f"config {k} = {v}")
    for cls in range(N_CLASSES):
        cells = ", ".join(f"{ch}:{band}:{m}" for ch, band, m in SIGNATURES[cls])
        lines.append(f"signature {cls} {CLASS_NAMES[cls]} slow_sign={SLOW_SIGN[cls]:+.0f} {cells}")
    lines.append("# onset_sample class_id class_name")
    for onset, cls in recording.events:
        lines.append(f"event {onset} {cls} {CLASS_NAMES[cls]}")
    return "\n".join(lines) + "\n"


def write_ground_truth(config, recording, path):
    Path(path).write_text(ground_truth_text(config, recording))


@dataclass
class SpectralReport:
    psd_slope: dict = field(default_factory=dict)
    line_residual_db: dict = field(default_factory=dict)
    erd_index: dict = field(default_factory=dict)

    def erd_signs_match(self):
        """Power drops on ERD cells (positive multiplier) and rises on ERS cells."""
        mult = {(cls, ch, band): m for cls, cells in SIGNATURES.items() for ch, band, m in cells}
        return all(np.sign(v) == -np.sign(mult[key]) for key, v in self.erd_index.items())


def _welch(x, fs):
    return scipy.signal.welch(x, fs=fs, nperseg=int(fs), axis=-1)


def spectral_check(recording, trial_s=3.0, channels=None):
    """PSD slope (1-40 Hz, log-log), 60 Hz residual vs the 10 Hz peak, and ERD indices.

    The ERD index of a signature cell is ``(P_trial - P_rest) / P_rest`` where
    P is band power averaged over that class's trials and rest is the 1.5 s
    preceding each cue.
    """
    fs = recording.fs_hz
    names = channels or recording.channels
    index = {c: i for i, c in enumerate(recording.channels)}
    report = SpectralReport()
    for name in names:
        f, p = _welch(recording.samples[index[name]], fs)
        sel = (f >= 1.0) & (f <= 40.0)
        slope = np.polyfit(np.log10(f[sel]), np.log10(p[sel]), 1)[0]
        report.psd_slope[name] = float(slope)
        p10 = p[np.argmin(np.abs(f - 10.0))]
        p60 = p[np.argmin(np.abs(f - 60.0))]
        report.line_residual_db[name] = float(10.0 * np.log10(p60 / p10))
    length = int(round(trial_s * fs))
    rest = int(round(1.5 * fs))
    for cls in range(N_CLASSES):
        ons = [o for o, c in recording.events if c == cls and o - rest >= 0
               and o + length <= recording.n_samples]
        if not ons:
            continue
        for ch, band, _ in SIGNATURES[cls]:
            if ch not in index:
                continue
            row = recording.samples[index[ch]]
            act = np.stack([row[o:o + length] for o in ons])
            pre = np.stack([row[o - rest:o] for o in ons])
            pa = dsp.band_power(act, fs, BANDS[band]).mean()
            pr = dsp.band_power(pre, fs, BANDS[band]).mean()
            report.erd_index[(cls, ch, band)] = float((pa - pr) / pr)
    return report
