"""Binary cross-entropy on probabilities."""

import numpy as np

BCE_CLAMP = 1e-7


def bce_loss(pred, target, clamp=BCE_CLAMP):
    """Mean elementwise binary cross-entropy, predictions clamped to ``[clamp, 1 - clamp]``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"prediction shape {pred.shape} != target shape {target.shape}")
    p = np.clip(pred, clamp, 1.0 - clamp)
    return float(-np.mean(target * np.log(p) + (1.0 - target) * np.log(1.0 - p)))


def bce_grad(pred, target, clamp=BCE_CLAMP):
    """Gradient of :func:`bce_loss` w.r.t. ``pred``; zero where the clamp is active."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"prediction shape {pred.shape} != target shape {target.shape}")
    p = np.clip(pred, clamp, 1.0 - clamp)
    grad = (p - target) / (p * (1.0 - p)) / pred.size
    inside = (pred >= clamp) & (pred <= 1.0 - clamp)
    return np.where(inside, grad, 0.0)
