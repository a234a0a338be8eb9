"""Network layers with hand-written backward rules.

Volumetric tensors are laid out ``[batch, channel, row, col, time]``; the
batch axis may be omitted (``[channel, row, col, time]``) for single inputs.
"""
import math

import numpy as np
import scipy.fft
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigurationError, DimensionError, InputError
from .tensor import Tensor, as_tensor


class ConvKernel3D:
    """Weights and bias of one 3-D convolution.

    ``weight`` has shape ``[out_channels, in_channels, k_rows, k_cols, k_time]``.
    Every extent must be odd so that "same" padding is symmetric.
    """

    def __init__(self, weight, bias=None):
        weight = as_tensor(weight)
        if weight.ndim != 5:
            raise DimensionError(f"kernel weight must be 5-D, got shape {weight.shape}")
        extents = weight.shape[2:]
        if any(k % 2 == 0 for k in extents):
            raise ConfigurationError(f"kernel extents must be odd, got {extents}")
        if bias is None:
            bias = Tensor(np.zeros(weight.shape[0]))
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[0],):
            raise DimensionError(f"bias shape {bias.shape} != ({weight.shape[0]},)")
        self.weight = weight
        self.bias = bias

    @classmethod
    def he_uniform(cls, in_channels, out_channels, extents, rng):
        extents = tuple(int(k) for k in extents)
        if any(k % 2 == 0 for k in extents):
            raise ConfigurationError(f"kernel extents must be odd, got {extents}")
        fan_in = in_channels * math.prod(extents)
        bound = math.sqrt(6.0 / fan_in)
        w = rng.uniform(-bound, bound, size=(out_channels, in_channels) + extents)
        return cls(Tensor(w, requires_grad=True), Tensor(np.zeros(out_channels), requires_grad=True))

    @property
    def extents(self):
        return self.weight.shape[2:]

    @property
    def in_channels(self):
        return self.weight.shape[1]

    @property
    def out_channels(self):
        return self.weight.shape[0]

    def parameters(self):
        return [self.weight, self.bias]


def _batched(x):
    if x.ndim == 4:
        return x.data[None], True
    if x.ndim == 5:
        return x.data, False
    raise DimensionError(f"expected a 4-D or 5-D volume, got shape {x.shape}")


def _correlate(xp, w):
    """Valid cross-correlation of padded ``xp`` [B,Ci,R',C',T'] with ``w`` [Co,Ci,kr,kc,kt]."""
    b, _, rp, cp, tp = xp.shape
    co, _, kr, kc, kt = w.shape
    r, c, t = rp - kr + 1, cp - kc + 1, tp - kt + 1
    out = np.zeros((b, r, c, t, co))
    for i in range(kr):
        for j in range(kc):
            slab = xp[:, :, i:i + r, j:j + c, :]
            if kt == 1:
                out += np.tensordot(slab, w[:, :, i, j, 0], axes=([1], [1]))
            else:
                win = sliding_window_view(slab, kt, axis=4)
                out += np.tensordot(win, w[:, :, i, j, :], axes=([1, 5], [1, 2]))
    return out.transpose(0, 4, 1, 2, 3)


def _correlate_adjoint(g, w, xshape):
    """Gradient w.r.t. the padded input of :func:`_correlate`, by scattering ``g``."""
    b, ci, rp, cp, tp = xshape
    _, _, kr, kc, kt = w.shape
    _, _, r, c, t = g.shape
    gx = np.zeros((b, rp, cp, tp, ci))
    for i in range(kr):
        for j in range(kc):
            for k in range(kt):
                gx[:, i:i + r, j:j + c, k:k + t, :] += np.tensordot(
                    g, w[:, :, i, j, k], axes=([1], [0]))
    return gx.transpose(0, 4, 1, 2, 3)


def _weight_grad(xp, g, extents):
    """d(loss)/d(weight) given padded input and output gradient [B,Co,R,C,T]."""
    kr, kc, kt = extents
    _, co, r, c, t = g.shape
    ci = xp.shape[1]
    gw = np.empty((co, ci, kr, kc, kt))
    for i in range(kr):
        for j in range(kc):
            slab = xp[:, :, i:i + r, j:j + c, :]
            if kt == 1:
                gw[:, :, i, j, 0] = np.tensordot(g, slab, axes=([0, 2, 3, 4], [0, 2, 3, 4]))
            else:
                win = sliding_window_view(slab, kt, axis=4)
                gw[:, :, i, j, :] = np.tensordot(g, win, axes=([0, 2, 3, 4], [0, 2, 3, 4]))
    return gw


# Temporal kernels at least this long are applied in the frequency domain.
FFT_MIN_TAPS = 7


def _to_freq(a, n):
    """[B, Ch, R, C, T] real -> [F, B, R, C, Ch] spectrum along time, zero-padded to n."""
    return np.ascontiguousarray(scipy.fft.rfft(a, n=n, axis=4).transpose(4, 0, 2, 3, 1))


class _SpectralConv:
    """Frequency-domain evaluation of a long-kernel correlation and its adjoints.

    Along time the circular correlation of length ``n >= T_padded`` equals the
    linear one for every valid output, so no wrap-around correction is needed.
    The spatial offsets are handled directly.
    """

    def __init__(self, xp, w):
        self.xshape = xp.shape
        self.w = w
        b, ci, rp, cp, tp = xp.shape
        co, _, kr, kc, kt = w.shape
        self.n = scipy.fft.next_fast_len(tp, real=True)
        self.out = (b, co, rp - kr + 1, cp - kc + 1, tp - kt + 1)
        self.xf = _to_freq(xp, self.n)
        self.wf = scipy.fft.rfft(w, n=self.n, axis=4)

    def forward(self):
        b, ci, rp, cp, tp = self.xshape
        co, _, kr, kc, kt = self.w.shape
        _, _, r, c, t = self.out
        nf = self.xf.shape[0]
        wc = np.conj(self.wf).transpose(4, 1, 2, 3, 0).reshape(nf, ci, kr * kc * co)
        prod = (self.xf.reshape(nf, b * rp * cp, ci) @ wc).reshape(nf, b, rp, cp, kr, kc, co)
        yf = np.zeros((nf, b, r, c, co), dtype=complex)
        for i in range(kr):
            for j in range(kc):
                yf += prod[:, :, i:i + r, j:j + c, i, j, :]
        y = scipy.fft.irfft(yf, n=self.n, axis=0)[:t]
        return y.transpose(1, 4, 2, 3, 0)

    def input_grad(self, g):
        b, ci, rp, cp, tp = self.xshape
        co, _, kr, kc, kt = self.w.shape
        _, _, r, c, t = self.out
        gf = _to_freq(g, self.n)
        nf = gf.shape[0]
        wn = self.wf.transpose(4, 0, 2, 3, 1).reshape(nf, co, kr * kc * ci)
        prod = (gf.reshape(nf, b * r * c, co) @ wn).reshape(nf, b, r, c, kr, kc, ci)
        gxf = np.zeros((nf, b, rp, cp, ci), dtype=complex)
        for i in range(kr):
            for j in range(kc):
                gxf[:, :, i:i + r, j:j + c, :] += prod[:, :, :, :, i, j, :]
        gx = scipy.fft.irfft(gxf, n=self.n, axis=0)[:tp]
        return gx.transpose(1, 4, 2, 3, 0), gf

    def weight_grad(self, gf):
        b, ci, rp, cp, tp = self.xshape
        co, _, kr, kc, kt = self.w.shape
        _, _, r, c, t = self.out
        nf = gf.shape[0]
        gh = np.conj(gf).reshape(nf, b * r * c, co).transpose(0, 2, 1)
        mf = np.empty((nf, co, ci, kr, kc), dtype=complex)
        for i in range(kr):
            for j in range(kc):
                xs = self.xf[:, :, i:i + r, j:j + c, :].reshape(nf, b * r * c, ci)
                mf[..., i, j] = gh @ xs
        gw = scipy.fft.irfft(mf, n=self.n, axis=0)[:kt]
        return gw.transpose(1, 2, 3, 4, 0)


def _padding(extents, padding):
    if padding == "same":
        return tuple(k // 2 for k in extents)
    if padding == "valid":
        return (0, 0, 0)
    raise ConfigurationError(f"padding must be 'same' or 'valid', got {padding!r}")


def _pad(x, pads):
    if not any(pads):
        return x
    return np.pad(x, ((0, 0), (0, 0)) + tuple((p, p) for p in pads))


def conv3d(x, kernel, padding="same"):
    """3-D cross-correlation (no kernel flip) summed over input channels, plus bias.

    Parameters
    ----------
    x : Tensor
        ``[C_in, R, C, T]`` or ``[B, C_in, R, C, T]``.
    kernel : ConvKernel3D
    padding : {"same", "valid"}
        "same" zero-pads symmetrically so output extents equal input extents.
    """
    xd, squeeze = _batched(x)
    w = kernel.weight.data
    if xd.shape[1] != kernel.in_channels:
        raise DimensionError(
            f"input has {xd.shape[1]} channels, kernel expects {kernel.in_channels}")
    pads = _padding(kernel.extents, padding)
    for n, p, k in zip(xd.shape[2:], pads, kernel.extents):
        if n + 2 * p < k:
            raise DimensionError(f"padded extent {n + 2 * p} smaller than kernel extent {k}")
    xp = _pad(xd, pads)
    spectral = _SpectralConv(xp, w) if kernel.extents[2] >= FFT_MIN_TAPS else None
    y = spectral.forward() if spectral else _correlate(xp, w)
    y = y + kernel.bias.data[None, :, None, None, None]
    out = Tensor._result(y[0] if squeeze else y, (x, kernel.weight, kernel.bias), "conv3d")
    if out.requires_grad:
        def backward(g):
            gb = g[None] if squeeze else g
            gx = gw = gbias = None
            if spectral is not None:
                gxp, gf = spectral.input_grad(gb)
                if x.requires_grad:
                    r0, c0, t0 = pads
                    gx = gxp[:, :, r0:r0 + xd.shape[2], c0:c0 + xd.shape[3], t0:t0 + xd.shape[4]]
                    gx = gx[0] if squeeze else np.ascontiguousarray(gx)
                if kernel.weight.requires_grad:
                    gw = spectral.weight_grad(gf)
            elif x.requires_grad:
                gxp = _correlate_adjoint(gb, w, xp.shape)
                r0, c0, t0 = pads
                gx = gxp[:, :, r0:r0 + xd.shape[2], c0:c0 + xd.shape[3], t0:t0 + xd.shape[4]]
                gx = gx[0] if squeeze else np.ascontiguousarray(gx)
            if spectral is None and kernel.weight.requires_grad:
                gw = _weight_grad(xp, gb, kernel.extents)
            if kernel.bias.requires_grad:
                gbias = gb.sum(axis=(0, 2, 3, 4))
            return gx, gw, gbias

        out._backward = backward
    return out


def _pool_args(window, stride):
    window = tuple(int(v) for v in window)
    stride = tuple(int(v) for v in stride)
    if len(window) != 3 or len(stride) != 3:
        raise ConfigurationError("window and stride need three entries (rows, cols, time)")
    if any(s <= 0 for s in stride):
        raise ConfigurationError(f"stride must be positive, got {stride}")
    if any(w <= 0 for w in window):
        raise ConfigurationError(f"window must be positive, got {window}")
    return window, stride


def _out_extent(n, w, s):
    return (n - w) // s + 1


def _window_sum(a, window, stride):
    """Strided box sums over axes 2..4, one axis at a time."""
    for axis, w, st in zip((2, 3, 4), window, stride):
        n_out = _out_extent(a.shape[axis], w, st)
        span = st * (n_out - 1) + 1
        idx = [slice(None)] * 5
        acc = None
        for k in range(w):
            idx[axis] = slice(k, k + span, st)
            acc = a[tuple(idx)].copy() if acc is None else acc + a[tuple(idx)]
        a = acc
    return a


def _window_sum_adjoint(g, shape, window, stride):
    """Transpose of :func:`_window_sum`: spread each box sum back over its window."""
    for axis, w, st in reversed(list(zip((2, 3, 4), window, stride))):
        n_in = shape[axis]
        n_out = g.shape[axis]
        span = st * (n_out - 1) + 1
        out_shape = list(g.shape)
        out_shape[axis] = n_in
        acc = np.zeros(out_shape)
        idx = [slice(None)] * 5
        for k in range(w):
            idx[axis] = slice(k, k + span, st)
            acc[tuple(idx)] += g
        g = acc
    return g


def avg_pool3d(x, window, stride, padding="valid"):
    """Windowed mean over (rows, cols, time).

    With ``padding="same"`` windows are zero-padded symmetrically (odd
    windows), and padded cells count towards neither sum nor divisor.
    """
    window, stride = _pool_args(window, stride)
    xd, squeeze = _batched(x)
    pads = _padding(window, padding)
    if padding == "same" and any(w % 2 == 0 for w in window):
        raise ConfigurationError("'same' pooling needs odd windows")
    xp = _pad(xd, pads)
    for n, w in zip(xp.shape[2:], window):
        if w > n:
            raise DimensionError(f"window extent {w} exceeds padded input extent {n}")
    mask = _pad(np.ones((1, 1) + xd.shape[2:]), pads)
    count = _window_sum(mask, window, stride)
    y = _window_sum(xp, window, stride) / count
    out = Tensor._result(y[0] if squeeze else y, (x,), "avg_pool3d")
    if out.requires_grad:
        def backward(g):
            gb = (g[None] if squeeze else g) / count
            gxp = _window_sum_adjoint(gb, xp.shape, window, stride)
            r0, c0, t0 = pads
            gx = gxp[:, :, r0:r0 + xd.shape[2], c0:c0 + xd.shape[3], t0:t0 + xd.shape[4]]
            return (gx[0] if squeeze else np.ascontiguousarray(gx),)

        out._backward = backward
    return out


def max_pool3d(x, window, stride):
    """Windowed max over (rows, cols, time), no padding.

    The gradient goes to the arg-max; ties resolve to the earliest element in
    row-major window order.
    """
    window, stride = _pool_args(window, stride)
    xd, squeeze = _batched(x)
    for n, w in zip(xd.shape[2:], window):
        if w > n:
            raise DimensionError(f"window extent {w} exceeds input extent {n}")
    sr, sc, st = stride
    view = sliding_window_view(xd, window, axis=(2, 3, 4))[:, :, ::sr, ::sc, ::st]
    flat = view.reshape(view.shape[:5] + (-1,))
    idx = flat.argmax(axis=-1)
    y = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    out = Tensor._result(y[0] if squeeze else y, (x,), "max_pool3d")
    if out.requires_grad:
        def backward(g):
            gb = g[None] if squeeze else g
            ro, co, to = gb.shape[2:]
            gx = np.zeros(xd.shape)
            for q, (a, b, c) in enumerate(np.ndindex(*window)):
                hit = idx == q
                if hit.any():
                    gx[:, :, a:a + sr * ro:sr, b:b + sc * co:sc, c:c + st * to:st] += gb * hit
            return (gx[0] if squeeze else gx,)

        out._backward = backward
    return out


def concat_channels(inputs):
    """Concatenate volumes along the channel axis."""
    inputs = [as_tensor(t) for t in inputs]
    if not inputs:
        raise DimensionError("concat_channels needs at least one input")
    ndim = inputs[0].ndim
    axis = 0 if ndim == 4 else 1
    ref = inputs[0].shape
    for t in inputs[1:]:
        if t.ndim != ndim or t.shape[:axis] + t.shape[axis + 1:] != ref[:axis] + ref[axis + 1:]:
            raise DimensionError(f"cannot concatenate shapes {ref} and {t.shape}")
    offsets = np.cumsum([0] + [t.shape[axis] for t in inputs])
    out = Tensor._result(np.concatenate([t.data for t in inputs], axis=axis), inputs, "concat")
    if out.requires_grad:
        def backward(g):
            return tuple(
                np.take(g, np.arange(offsets[k], offsets[k + 1]), axis=axis)
                for k in range(len(inputs)))

        out._backward = backward
    return out


def relu(x):
    """Elementwise ``max(0, x)``; the sub-gradient at 0 is 0."""
    x = as_tensor(x)
    out = Tensor._result(np.maximum(x.data, 0.0), (x,), "relu")
    if out.requires_grad:
        out._backward = lambda g: (g * (x.data > 0),)
    return out


def dense(x, weight, bias):
    """Affine map ``W @ x + b``; ``x`` is ``[N]`` or ``[B, N]``."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    m, n = weight.shape
    if x.shape[-1] != n or x.ndim not in (1, 2):
        raise DimensionError(f"input shape {x.shape} incompatible with weights {weight.shape}")
    if bias.shape != (m,):
        raise DimensionError(f"bias shape {bias.shape} != ({m},)")
    out = Tensor._result(x.data @ weight.data.T + bias.data, (x, weight, bias), "dense")
    if out.requires_grad:
        def backward(g):
            g2 = np.atleast_2d(g)
            x2 = np.atleast_2d(x.data)
            gx = (g2 @ weight.data).reshape(x.shape)
            return gx, g2.T @ x2, g2.sum(axis=0)

        out._backward = backward
    return out


def global_avg_pool(x):
    """Mean over (rows, cols, time): ``[B, C, R, Cc, T] -> [B, C]``."""
    xd, squeeze = _batched(x)
    n = math.prod(xd.shape[2:])
    y = xd.mean(axis=(2, 3, 4))
    out = Tensor._result(y[0] if squeeze else y, (x,), "global_avg_pool")
    if out.requires_grad:
        def backward(g):
            gb = (g[None] if squeeze else g)[:, :, None, None, None] / n
            gx = np.broadcast_to(gb, xd.shape).copy()
            return (gx[0] if squeeze else gx,)

        out._backward = backward
    return out


def softmax(logits):
    """Row-wise softmax of a plain array (max-subtracted)."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, label):
    """Mean of ``-log softmax(logits)[label]`` over the batch.

    ``logits`` is ``[K]`` with an int label, or ``[B, K]`` with ``B`` labels.
    """
    logits = as_tensor(logits)
    z = logits.data if logits.ndim == 2 else logits.data[None]
    labels = np.atleast_1d(np.asarray(label))
    k = z.shape[1]
    if labels.shape != (z.shape[0],) or not np.issubdtype(labels.dtype, np.integer):
        raise InputError(f"need {z.shape[0]} integer labels, got {label!r}")
    if labels.min() < 0 or labels.max() >= k:
        raise InputError(f"label out of range [0, {k})")
    shifted = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(z.shape[0])
    loss = np.mean(logsum - shifted[rows, labels])
    out = Tensor._result(loss, (logits,), "softmax_xent")
    if out.requires_grad:
        def backward(g):
            p = np.exp(shifted - logsum[:, None])
            p[rows, labels] -= 1.0
            p *= g / z.shape[0]
            return (p.reshape(logits.shape),)

        out._backward = backward
    return out
