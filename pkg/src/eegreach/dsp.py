"""Butterworth / notch IIR design and zero-phase filtering in second-order sections.

Designs go analog Butterworth prototype -> frequency transform (with
bilinear pre-warping of the band edges) -> bilinear transform, and are
realized as cascaded biquads.  The per-pass recursion is delegated to
:func:`scipy.signal.sosfilt`; padding, initial conditions and the
forward/backward schedule live here.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.signal

from .errors import DesignError, InputError


@dataclass(frozen=True)
class SosFilter:
    """Cascade of biquads ``(b0, b1, b2, a1, a2)`` with ``a0 == 1``."""

    sections: np.ndarray
    kind: str = ""
    order: int = 0
    edges_hz: tuple = ()
    fs_hz: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        sec = np.asarray(self.sections, dtype=np.float64).reshape(-1, 5)
        object.__setattr__(self, "sections", sec)

    @property
    def n_sections(self):
        return len(self.sections)

    def as_scipy(self):
        """``(n, 6)`` array in scipy's ``[b0, b1, b2, 1, a1, a2]`` layout."""
        s = self.sections
        return np.column_stack([s[:, 0], s[:, 1], s[:, 2], np.ones(len(s)), s[:, 3], s[:, 4]])

    def poles(self):
        return np.concatenate([np.roots([1.0, a1, a2]) for a1, a2 in self.sections[:, 3:]])

    def is_stable(self, margin=1e-9):
        return bool(np.all(np.abs(self.poles()) < 1.0 - margin))

    def response(self, freqs_hz):
        """Complex frequency response at ``freqs_hz``."""
        z = np.exp(-1j * 2 * np.pi * np.asarray(freqs_hz, dtype=np.float64) / self.fs_hz)
        h = np.ones_like(z)
        for b0, b1, b2, a1, a2 in self.sections:
            h *= (b0 + b1 * z + b2 * z * z) / (1.0 + a1 * z + a2 * z * z)
        return h

    def gain_db(self, freqs_hz):
        return 20.0 * np.log10(np.maximum(np.abs(self.response(freqs_hz)), 1e-300))


def _prototype_poles(order):
    k = np.arange(1, order + 1)
    return np.exp(1j * np.pi * (2 * k + order - 1) / (2 * order))


def _prewarp(f_hz, fs_hz):
    return 2.0 * fs_hz * np.tan(np.pi * f_hz / fs_hz)


def _quadratic_roots(b, c):
    """Both roots of ``s^2 + b s + c`` without cancellation."""
    disc = np.sqrt(b * b - 4.0 * c + 0j)
    q1 = -(b + disc) / 2.0
    q2 = -(b - disc) / 2.0
    q = q1 if abs(q1) >= abs(q2) else q2
    return q, c / q


def _bilinear(p, fs_hz):
    k = 2.0 * fs_hz
    return (k + p) / (k - p)


def _pair_poles(poles):
    """Group digital poles into conjugate pairs (or pairs of reals)."""
    poles = np.asarray(poles)
    tol = 1e-12
    cplx = poles[poles.imag > tol]
    reals = np.sort(poles[np.abs(poles.imag) <= tol].real)
    pairs = [(p, np.conj(p)) for p in cplx]
    for i in range(0, len(reals) - 1, 2):
        pairs.append((reals[i], reals[i + 1]))
    leftover = reals[-1] if len(reals) % 2 else None
    return pairs, leftover


def _check_edges(edges, fs_hz):
    nyq = fs_hz / 2.0
    for f in edges:
        if not 0.0 < f < nyq:
            raise DesignError(f"edge {f} Hz must lie strictly between 0 and Nyquist ({nyq} Hz)")


def design_butterworth_bandpass(order, low_hz, high_hz, fs_hz):
    """Digital Butterworth band-pass with ``order`` biquads (2*order poles).

    Both edges sit at -3 dB.
    """
    order = int(order)
    if order < 1:
        raise DesignError(f"order must be >= 1, got {order}")
    _check_edges((low_hz, high_hz), fs_hz)
    if not low_hz < high_hz:
        raise DesignError(f"low edge {low_hz} Hz must be below high edge {high_hz} Hz")
    w1, w2 = _prewarp(low_hz, fs_hz), _prewarp(high_hz, fs_hz)
    w0sq, bw = w1 * w2, w2 - w1
    analog = []
    for p in _prototype_poles(order):
        analog.extend(_quadratic_roots(-p * bw, w0sq))
    digital = _bilinear(np.array(analog), fs_hz)
    pairs, leftover = _pair_poles(digital)
    if leftover is not None or len(pairs) != order:
        raise DesignError("pole pairing failed")
    sections = [[1.0, 0.0, -1.0, -(p1 + p2).real, (p1 * p2).real] for p1, p2 in pairs]
    sos = np.array(sections)
    # normalize to unit gain at the (digital) geometric centre frequency
    f0 = fs_hz / np.pi * np.arctan(np.sqrt(w0sq) / (2.0 * fs_hz))
    probe = SosFilter(sos, fs_hz=fs_hz)
    g = abs(probe.response([f0])[0]) ** (1.0 / order)
    sos[:, :3] /= g
    return SosFilter(sos, "bandpass", order, (float(low_hz), float(high_hz)), float(fs_hz))


def design_butterworth_lowpass(order, cutoff_hz, fs_hz):
    """Digital Butterworth low-pass, -3 dB at ``cutoff_hz``."""
    order = int(order)
    if order < 1:
        raise DesignError(f"order must be >= 1, got {order}")
    _check_edges((cutoff_hz,), fs_hz)
    wc = _prewarp(cutoff_hz, fs_hz)
    digital = _bilinear(_prototype_poles(order) * wc, fs_hz)
    pairs, leftover = _pair_poles(digital)
    sections = [[1.0, 2.0, 1.0, -(p1 + p2).real, (p1 * p2).real] for p1, p2 in pairs]
    if leftover is not None:
        sections.append([1.0, 1.0, 0.0, -leftover, 0.0])
    sos = np.array(sections)
    for s in sos:
        s[:3] *= (1.0 + s[3] + s[4]) / (s[0] + s[1] + s[2])
    return SosFilter(sos, "lowpass", order, (float(cutoff_hz),), float(fs_hz))


def design_notch(center_hz, q, fs_hz):
    """Single-biquad notch with -3 dB bandwidth ``center_hz / q``."""
    _check_edges((center_hz,), fs_hz)
    if q <= 0:
        raise DesignError(f"quality factor must be positive, got {q}")
    w0 = 2.0 * np.pi * center_hz / fs_hz
    beta = np.tan(w0 / q / 2.0)
    gain = 1.0 / (1.0 + beta)
    c = np.cos(w0)
    sos = np.array([[gain, -2.0 * gain * c, gain, -2.0 * gain * c, 2.0 * gain - 1.0]])
    return SosFilter(sos, "notch", 2, (float(center_hz),), float(fs_hz), {"q": float(q)})


def cascade(*filters):
    """Series connection of several filters at the same rate."""
    fs = {f.fs_hz for f in filters}
    if len(fs) != 1:
        raise DesignError("cannot cascade filters with different sampling rates")
    return SosFilter(np.vstack([f.sections for f in filters]), "cascade",
                     sum(f.order for f in filters), (), fs.pop())


def steady_state(filt):
    """Initial state for a unit-step input, shape ``(n_sections, 2)`` (scipy layout)."""
    zi = np.zeros((filt.n_sections, 2))
    scale = 1.0
    for k, (b0, b1, b2, a1, a2) in enumerate(filt.sections):
        # transposed direct form II at rest under constant input u and output y = H(1) u
        dc = (b0 + b1 + b2) / (1.0 + a1 + a2)
        y = dc
        z1 = y - b0
        z2 = b2 - a2 * y
        zi[k] = scale * np.array([z1, z2])
        scale *= dc
    return zi


def lfilter_sos(filt, x, axis=-1, zi=None):
    """Causal single pass (used to model the amplifier chain)."""
    if zi is None:
        return scipy.signal.sosfilt(filt.as_scipy(), x, axis=axis)
    return scipy.signal.sosfilt(filt.as_scipy(), x, axis=axis, zi=zi)[0]


def padlen(filt):
    """Reflection-padding length: 3 x digital filter order."""
    return 3 * 2 * filt.n_sections


def filtfilt(x, filt, axis=-1):
    """Zero-phase filtering: forward pass, reverse, backward pass, reverse.

    The signal is extended at both ends by odd-symmetric reflection of
    ``padlen(filt)`` samples; each pass starts from the steady state matching
    its first sample. Effective magnitude response is ``|H|^2``.
    """
    x = np.asarray(x, dtype=np.float64)
    x = np.moveaxis(x, axis, -1)
    n = x.shape[-1]
    pad = padlen(filt)
    if n <= 3 * pad:
        raise InputError(f"signal of {n} samples too short for this filter (needs > {3 * pad})")
    left = 2.0 * x[..., :1] - x[..., pad:0:-1]
    right = 2.0 * x[..., -1:] - x[..., -2:-pad - 2:-1]
    ext = np.concatenate([left, x, right], axis=-1)
    zi = steady_state(filt)
    sos = filt.as_scipy()
    zshape = (filt.n_sections,) + ext.shape[:-1] + (2,)

    def run(sig):
        init = np.broadcast_to(zi.reshape((filt.n_sections,) + (1,) * (sig.ndim - 1) + (2,)),
                               zshape) * sig[..., :1][None]
        return scipy.signal.sosfilt(sos, sig, axis=-1, zi=init)[0]

    y = run(ext)
    y = run(y[..., ::-1])[..., ::-1]
    return np.moveaxis(np.ascontiguousarray(y[..., pad:pad + n]), -1, axis)


def decimate(x, factor, fs_hz, axis=-1, order=4):
    """Zero-phase Butterworth anti-alias low-pass, then keep every ``factor``-th sample.

    The cutoff is ``0.4 * fs_hz / factor`` (40 Hz when going 1000 -> 100 Hz).
    Output length is ``ceil(n / factor)``, starting at sample 0. A factor of
    1 returns an unfiltered copy.
    """
    factor = int(factor)
    if factor <= 0:
        raise InputError(f"decimation factor must be >= 1, got {factor}")
    x = np.asarray(x, dtype=np.float64)
    if factor == 1:
        return x.copy()
    if x.shape[axis] < factor:
        raise InputError("signal shorter than the decimation factor")
    lp = design_butterworth_lowpass(order, 0.4 * fs_hz / factor, fs_hz)
    y = filtfilt(x, lp, axis=axis)
    idx = [slice(None)] * y.ndim
    idx[axis] = slice(None, None, factor)
    return np.ascontiguousarray(y[tuple(idx)])


def band_power(x, fs_hz, band):
    """Mean Welch PSD (1 s segments) of ``x`` inside ``band = (lo, hi)`` Hz, along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    nper = min(int(fs_hz), x.shape[-1])
    f, p = scipy.signal.welch(x, fs=fs_hz, nperseg=nper, axis=-1)
    sel = (f >= band[0]) & (f <= band[1])
    return p[..., sel].mean(axis=-1)
