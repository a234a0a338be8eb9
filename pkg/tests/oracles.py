"""Independent brute-force references used by several test modules."""
import itertools

import numpy as np


def conv3d_loop(x, w, b, padding):
    """Direct-summation cross-correlation of one volume ``x`` [Ci,R,C,T]."""
    co, ci, kr, kc, kt = w.shape
    if padding == "same":
        pads = [(k // 2, k // 2) for k in (kr, kc, kt)]
        x = np.pad(x, [(0, 0)] + pads)
    _, rp, cp, tp = x.shape
    out = np.zeros((co, rp - kr + 1, cp - kc + 1, tp - kt + 1))
    for o in range(co):
        for r, c, t in itertools.product(*(range(n) for n in out.shape[1:])):
            acc = b[o]
            for i in range(ci):
                for dr, dc, dt in itertools.product(range(kr), range(kc), range(kt)):
                    acc += w[o, i, dr, dc, dt] * x[i, r + dr, c + dc, t + dt]
            out[o, r, c, t] = acc
    return out


def pool_loop(x, window, stride, reduce, padding="valid"):
    """Windowed reduction of [C,R,Cc,T]; 'same' padding excludes padded cells."""
    ch, *ext = x.shape
    if padding == "same":
        lo = [w // 2 for w in window]
        outs = [(n - 1) // s + 1 for n, s in zip(ext, stride)]
    else:
        lo = [0, 0, 0]
        outs = [(n - w) // s + 1 for n, w, s in zip(ext, window, stride)]
    out = np.zeros((ch, *outs))
    for c in range(ch):
        for idx in itertools.product(*(range(n) for n in outs)):
            sl = []
            for k in range(3):
                start = idx[k] * stride[k] - lo[k]
                sl.append(slice(max(start, 0), min(start + window[k], ext[k])))
            out[(c, *idx)] = reduce(x[(c, *sl)])
    return out


def butterworth_bandpass_gain(f, low, high, order, fs):
    """Closed-form magnitude of the bilinear-transformed Butterworth band-pass.

    With pre-warped edges ``w1, w2`` and ``W(f) = 2 fs tan(pi f / fs)``, the
    analog band-pass response is ``1 / sqrt(1 + ((W^2 - w1 w2) / (W (w2 - w1)))^(2n))``.
    """
    warp = lambda v: 2 * fs * np.tan(np.pi * v / fs)
    w1, w2 = warp(low), warp(high)
    w = warp(np.asarray(f, dtype=float))
    q = (w * w - w1 * w2) / (w * (w2 - w1))
    return 1.0 / np.sqrt(1.0 + q ** (2 * order))
