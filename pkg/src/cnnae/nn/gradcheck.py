"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from .layers import BatchNorm, Dropout
from .losses import bce_grad, bce_loss


def _forward(network, x, bn_batch_stats):
    for layer in network.layers:
        if isinstance(layer, Dropout):
            x = layer.forward(x, False)
        elif isinstance(layer, BatchNorm):
            x = layer.forward(x, bn_batch_stats)
        else:
            x = layer.forward(x, True)
    return x


def gradient_check(network, x, target, h=1e-5, batchnorm="eval", loss=bce_loss, loss_grad=bce_grad,
                   max_checks_per_param=None, rng=None) -> float:
    """Return the max relative error between backprop and central differences.

    Dropout runs as identity. ``batchnorm`` is ``"eval"`` (running statistics)
    or ``"batch"`` (batch statistics, running buffers left untouched). With
    ``max_checks_per_param`` only that many randomly chosen coordinates of each
    parameter tensor are perturbed.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    if batchnorm not in ("eval", "batch"):
        raise ValueError("batchnorm must be 'eval' or 'batch'")
    use_batch = batchnorm == "batch"
    x = np.asarray(x, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    bns = [layer for layer in network.layers if isinstance(layer, BatchNorm)]
    saved = [bn.update_running for bn in bns]
    for bn in bns:
        bn.update_running = False
    try:
        out = _forward(network, x, use_batch)
        network.zero_grad()
        grad = loss_grad(out, target)
        for layer in reversed(network.layers):
            grad = layer.backward(grad)
        analytic = {k: g.copy() for k, g in network.gradients().items()}
        params = network.parameters()
        rng = rng if rng is not None else np.random.default_rng(0)
        worst = 0.0
        for key, p in params.items():
            flat = p.reshape(-1)
            idx = np.arange(flat.size)
            if max_checks_per_param is not None and flat.size > max_checks_per_param:
                idx = rng.choice(flat.size, size=max_checks_per_param, replace=False)
            a_flat = analytic[key].reshape(-1)
            for i in idx:
                orig = flat[i]
                flat[i] = orig + h
                f_plus = loss(_forward(network, x, use_batch), target)
                flat[i] = orig - h
                f_minus = loss(_forward(network, x, use_batch), target)
                flat[i] = orig
                numeric = (f_plus - f_minus) / (2 * h)
                a = a_flat[i]
                err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
                worst = max(worst, err)
        return worst
    finally:
        for bn, flag in zip(bns, saved):
            bn.update_running = flag
