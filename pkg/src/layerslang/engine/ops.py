"""Numeric kernels for the CPU engine.

All arrays are float64.  Maps are laid out ``(n, z, r, c)``, flat
activations ``(n, d)``.  Convolution is cross-correlation (no kernel flip)
with symmetric zero padding.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

LINEAR, RELU, SIGMOID, ELU = 0, 1, 2, 3
BN_EPS = 1e-5
BN_MOMENTUM = 0.9


def activate(z, act):
    if act == LINEAR:
        return z
    if act == RELU:
        return np.maximum(z, 0.0)
    if act == SIGMOID:
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if act == ELU:
        return np.where(z > 0, z, np.expm1(np.minimum(z, 0.0)))
    raise ValueError(f"unknown activation code {act}")


def activation_grad(z, y, act):
    """Derivative of the activation at ``z`` (``y`` is its output)."""
    if act == LINEAR:
        return np.ones_like(z)
    if act == RELU:
        return (z > 0).astype(z.dtype)
    if act == SIGMOID:
        return y * (1.0 - y)
    if act == ELU:
        return np.where(z > 0, 1.0, y + 1.0)
    raise ValueError(f"unknown activation code {act}")


def forward_fc(x, W, b, act):
    if x.shape[1] != W.shape[0] or W.shape[1] != b.shape[0]:
        raise ValueError(f"shape mismatch: x{x.shape} W{W.shape} b{b.shape}")
    return activate(x @ W + b, act)


# -- convolution ---------------------------------------------------------------

def _windows(x, kr, kc, rpad, cpad, stride):
    xp = np.pad(x, ((0, 0), (0, 0), (rpad, rpad), (cpad, cpad)))
    win = sliding_window_view(xp, (kr, kc), axis=(2, 3))
    return win[:, :, ::stride, ::stride]


def conv2d(x, kernels, rpad=0, cpad=0, stride=1):
    """Cross-correlate ``x`` (n,z,r,c) with ``kernels`` (nk,z,kr,kc)."""
    nk, z, kr, kc = kernels.shape
    if x.shape[1] != z:
        raise ValueError(f"input has {x.shape[1]} channels, kernels expect {z}")
    win = _windows(x, kr, kc, rpad, cpad, stride)
    out = np.tensordot(win, kernels, axes=([1, 4, 5], [1, 2, 3]))
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def conv2d_backward(dz, x, kernels, rpad=0, cpad=0, stride=1):
    """Gradients of a cross-correlation w.r.t. its input and kernels."""
    nk, z, kr, kc = kernels.shape
    n, _, r, c = x.shape
    win = _windows(x, kr, kc, rpad, cpad, stride)
    dk = np.tensordot(dz, win, axes=([0, 2, 3], [0, 2, 3]))
    ro, co = dz.shape[2], dz.shape[3]
    dxp = np.zeros((n, z, r + 2 * rpad, c + 2 * cpad))
    for a in range(kr):
        for b in range(kc):
            contrib = np.tensordot(dz, kernels[:, :, a, b], axes=([1], [0]))
            dxp[:, :, a:a + stride * (ro - 1) + 1:stride,
                b:b + stride * (co - 1) + 1:stride] += contrib.transpose(0, 3, 1, 2)
    dx = dxp[:, :, rpad:rpad + r, cpad:cpad + c]
    return np.ascontiguousarray(dx), dk


def forward_conv(x, kernels, bias, rpad, cpad, stride, act):
    z = conv2d(x, kernels, rpad, cpad, stride) + bias[None, :, None, None]
    return activate(z, act)


# -- pooling and concatenation -------------------------------------------------

def forward_maxpool(x, sizer, sizec):
    """Non-overlapping max pooling with floor truncation.

    Returns the pooled maps and, for every output cell, the linear index
    ``row * c + col`` of the winning input cell.  Ties go to the lowest index.
    """
    n, z, r, c = x.shape
    ro, co = r // sizer, c // sizec
    xt = x[:, :, :ro * sizer, :co * sizec]
    blocks = xt.reshape(n, z, ro, sizer, co, sizec).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(n, z, ro, co, sizer * sizec)
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
    rows = np.arange(ro)[:, None] * sizer + arg // sizec
    cols = np.arange(co)[None, :] * sizec + arg % sizec
    return out, rows * c + cols


def maxpool_backward(dy, index, x_shape):
    n, z, r, c = x_shape
    dx = np.zeros((n, z, r * c))
    flat = index.reshape(n, z, -1)
    np.put_along_axis(dx, flat, dy.reshape(n, z, -1), axis=-1)
    return dx.reshape(x_shape)


def forward_cat(inputs):
    return np.concatenate(inputs, axis=1)


def cat_backward(dy, channels):
    splits = np.cumsum(channels)[:-1]
    return np.split(dy, splits, axis=1)


# -- batch normalization -------------------------------------------------------

def batchnorm_forward(z, gamma, beta, axes):
    mean = z.mean(axis=axes, keepdims=True)
    var = z.var(axis=axes, keepdims=True)
    inv = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (z - mean) * inv
    shape = mean.shape
    y = gamma.reshape(shape) * xhat + beta.reshape(shape)
    return y, (xhat, inv, axes), mean.reshape(-1), var.reshape(-1)


def batchnorm_eval(z, gamma, beta, mean, var, axes):
    shape = [1] * z.ndim
    shape[1] = -1
    xhat = (z - mean.reshape(shape)) / np.sqrt(var.reshape(shape) + BN_EPS)
    return gamma.reshape(shape) * xhat + beta.reshape(shape)


def batchnorm_backward(dy, gamma, cache):
    xhat, inv, axes = cache
    m = dy.size // gamma.size
    dgamma = (dy * xhat).sum(axis=axes)
    dbeta = dy.sum(axis=axes)
    dxhat = dy * gamma.reshape(inv.shape)
    dz = inv / m * (m * dxhat - dxhat.sum(axis=axes, keepdims=True)
                    - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True))
    return dz, dgamma, dbeta


# -- costs ---------------------------------------------------------------------

def softmax(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits, labels, scale=1.0, n_total=None):
    """Mean negative log-likelihood of ``labels`` under softmax(logits).

    Returns ``(cost, dlogits)``.  ``n_total`` overrides the divisor so that
    shards of one batch produce gradients that add up to the full batch.
    """
    n = n_total or logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(logits.shape[0])
    cost = -logp[rows, labels].sum() / n
    grad = np.exp(logp)
    grad[rows, labels] -= 1.0
    return scale * cost, grad * (scale / n)


def squared_error(y, t, scale=1.0, n_total=None):
    """(1/n) * sum of squared distances, and its gradient w.r.t. ``y``."""
    n = n_total or y.shape[0]
    diff = y - t
    return scale * (diff * diff).sum() / n, diff * (2.0 * scale / n)
