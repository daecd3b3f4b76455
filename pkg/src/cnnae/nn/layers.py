"""Layer implementations with explicit forward/backward passes.

All arrays carry a leading batch axis. Convolutional activations use the
channels-last layout ``(batch, length, channels)``, so a 39-feature record
enters a convolution stack as a ``(39, 1)`` signal.
"""

from __future__ import annotations

import math

import numpy as np


class Layer:
    """Base class. Subclasses fill ``params`` and ``grads`` with matching keys."""

    kind = "Layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def output_shape(self, input_shape: tuple) -> tuple:
        return tuple(input_shape)

    def zero_grad(self) -> None:
        for name, value in self.params.items():
            g = self.grads.get(name)
            if g is None or g.shape != value.shape:
                self.grads[name] = np.zeros_like(value)
            else:
                g.fill(0.0)

    def _require_cache(self):
        if self._cache is None:
            raise RuntimeError(f"{self.kind}.backward called without a prior forward pass")
        return self._cache

    def config(self) -> dict:
        return {}

    def state(self) -> dict[str, np.ndarray]:
        """Parameters plus any non-trainable buffers, for serialization."""
        return dict(self.params)

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, value in state.items():
            if name not in self.params or self.params[name].shape != value.shape:
                raise ValueError(f"{self.kind}: incompatible state entry {name!r}")
            self.params[name][...] = value


def he_uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    limit = math.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def xavier_uniform(rng: np.random.Generator, shape: tuple, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _init_weight(rng, init, shape, fan_in, fan_out):
    if rng is None:
        return np.zeros(shape)
    if init == "he":
        return he_uniform(rng, shape, fan_in)
    if init == "xavier":
        return xavier_uniform(rng, shape, fan_in, fan_out)
    raise ValueError(f"unknown initializer {init!r}")


def same_padding(length: int, kernel: int, stride: int) -> tuple[int, int, int]:
    """Return ``(out_length, pad_left, pad_right)`` for 'same' padding."""
    out = -(-length // stride)
    total = max((out - 1) * stride + kernel - length, 0)
    return out, total // 2, total - total // 2


def _conv_geometry(length, kernel, stride, padding):
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if padding == "same":
        return same_padding(length, kernel, stride)
    if padding in (None, "valid"):
        if kernel > length:
            raise ValueError(f"kernel length {kernel} exceeds input length {length}")
        return (length - kernel) // stride + 1, 0, 0
    raise ValueError(f"unknown padding {padding!r}")


def _im2col(xpad: np.ndarray, kernel: int, stride: int, out_len: int) -> np.ndarray:
    # (B, Lp, C) -> (B * out_len, kernel * C), column order (tap, channel)
    span = stride * (out_len - 1) + 1
    cols = np.concatenate([xpad[:, j:j + span:stride, :] for j in range(kernel)], axis=2)
    return cols.reshape(xpad.shape[0] * out_len, -1)


class Conv1D(Layer):
    """1-D cross-correlation over ``(batch, length, channels)`` activations.

    Kernels are stored as ``(out_channels, in_channels, kernel_size)``.
    """

    kind = "Conv1D"

    def __init__(self, in_channels, out_channels, kernel_size=3, stride=1, padding="same",
                 rng=None, init="he"):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        self.init = init
        shape = (out_channels, in_channels, kernel_size)
        self.params["weight"] = _init_weight(rng, init, shape, in_channels * kernel_size,
                                             out_channels * kernel_size)
        self.params["bias"] = np.zeros(out_channels)
        self.zero_grad()

    def config(self):
        return {"in_channels": self.in_channels, "out_channels": self.out_channels,
                "kernel_size": self.kernel_size, "stride": self.stride,
                "padding": self.padding, "init": self.init}

    def output_shape(self, input_shape):
        length, c = input_shape
        if c != self.in_channels:
            raise ValueError(f"Conv1D expects {self.in_channels} channels, got {c}")
        out_len, _, _ = _conv_geometry(length, self.kernel_size, self.stride, self.padding)
        return (out_len, self.out_channels)

    def _flat_weight(self):
        # (C_out, C_in, k) -> (C_out, k * C_in), matching the im2col column order
        return self.params["weight"].transpose(0, 2, 1).reshape(self.out_channels, -1)

    def forward(self, x, training):
        if x.ndim != 3 or x.shape[2] != self.in_channels:
            raise ValueError(f"Conv1D expects (B, L, {self.in_channels}), got {x.shape}")
        k, s = self.kernel_size, self.stride
        out_len, left, right = _conv_geometry(x.shape[1], k, s, self.padding)
        xpad = np.pad(x, ((0, 0), (left, right), (0, 0))) if left or right else x
        cols = _im2col(xpad, k, s, out_len)
        w2 = self._flat_weight()
        out = cols @ w2.T
        out += self.params["bias"]
        self._cache = (cols, w2, x.shape, xpad.shape[1], left, out_len)
        return out.reshape(x.shape[0], out_len, self.out_channels)

    def backward(self, grad):
        cols, w2, in_shape, pad_len, left, out_len = self._require_cache()
        b, length, c_in = in_shape
        k, s = self.kernel_size, self.stride
        g2 = grad.reshape(b * out_len, self.out_channels)
        dw = (g2.T @ cols).reshape(self.out_channels, k, c_in).transpose(0, 2, 1)
        self.grads["weight"] += dw
        self.grads["bias"] += g2.sum(axis=0)
        dcols = (g2 @ w2).reshape(b, out_len, k, c_in)
        dxpad = np.zeros((b, pad_len, c_in))
        span = s * (out_len - 1) + 1
        for j in range(k):
            dxpad[:, j:j + span:s, :] += dcols[:, :, j, :]
        return dxpad[:, left:left + length, :]


def conv1d_forward(x, kernels, bias, stride=1, padding="same"):
    """Cross-correlate a channel-first signal with ``kernels`` (no kernel flip).

    ``x`` is ``(C_in, L)`` or ``(B, C_in, L)``; ``kernels`` is ``(C_out, C_in, k)``.
    Returns ``(C_out, L_out)``, with a leading batch axis if ``x`` had one.
    """
    x = np.asarray(x, dtype=np.float64)
    kernels = np.asarray(kernels, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or kernels.ndim != 3:
        raise ValueError("conv1d expects input (B, C, L) or (C, L) and kernels (C_out, C_in, k)")
    c_out, c_in, k = kernels.shape
    if x.shape[1] != c_in:
        raise ValueError(f"input has {x.shape[1]} channels but kernels expect {c_in}")
    if bias.shape != (c_out,):
        raise ValueError(f"bias shape {bias.shape} does not match {c_out} output channels")
    layer = Conv1D(c_in, c_out, k, stride, padding)
    layer.params["weight"][...] = kernels
    layer.params["bias"][...] = bias
    out = layer.forward(np.ascontiguousarray(x.transpose(0, 2, 1)), False).transpose(0, 2, 1)
    return out[0] if single else out


def dense_forward(x, weight, bias):
    """``out[i] = sum_j weight[i, j] * x[j] + bias[i]``; ``x`` may carry a batch axis."""
    x = np.asarray(x, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[1]:
        raise ValueError(f"input width {x.shape[-1]} does not match weight {weight.shape}")
    if np.shape(bias) != (weight.shape[0],):
        raise ValueError("bias length must equal weight rows")
    return x @ weight.T + bias


class Dense(Layer):
    kind = "Dense"

    def __init__(self, in_features, out_features, rng=None, init="he"):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.init = init
        self.params["weight"] = _init_weight(rng, init, (out_features, in_features),
                                             in_features, out_features)
        self.params["bias"] = np.zeros(out_features)
        self.zero_grad()

    def config(self):
        return {"in_features": self.in_features, "out_features": self.out_features,
                "init": self.init}

    def output_shape(self, input_shape):
        if tuple(input_shape) != (self.in_features,):
            raise ValueError(f"Dense expects ({self.in_features},), got {tuple(input_shape)}")
        return (self.out_features,)

    def forward(self, x, training):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ValueError(f"Dense expects (B, {self.in_features}), got {x.shape}")
        self._cache = x
        out = x @ self.params["weight"].T
        out += self.params["bias"]
        return out

    def backward(self, grad):
        x = self._require_cache()
        self.grads["weight"] += grad.T @ x
        self.grads["bias"] += grad.sum(axis=0)
        return grad @ self.params["weight"]


class BatchNorm(Layer):
    """Normalize each feature (the last axis) over all other axes.

    Running statistics follow ``running = momentum * running + (1 - momentum) * batch``.
    With ``update_running = False`` batch statistics are still used in training
    mode but the running buffers are left alone.
    """

    kind = "BatchNorm"

    def __init__(self, num_features, momentum=0.99, eps=1e-5):
        super().__init__()
        if eps <= 0:
            raise ValueError("BatchNorm epsilon must be positive")
        if not 0 <= momentum < 1:
            raise ValueError("BatchNorm momentum must lie in [0, 1)")
        self.num_features = num_features
        self.momentum = momentum
        self.eps = eps
        self.update_running = True
        self.params["scale"] = np.ones(num_features)
        self.params["shift"] = np.zeros(num_features)
        self.running_mean = np.zeros(num_features)
        self.running_var = np.ones(num_features)
        self.zero_grad()

    def config(self):
        return {"num_features": self.num_features, "momentum": self.momentum, "eps": self.eps}

    def output_shape(self, input_shape):
        if input_shape[-1] != self.num_features:
            raise ValueError(f"BatchNorm expects {self.num_features} features, got {input_shape[-1]}")
        return tuple(input_shape)

    def state(self):
        return {**self.params, "running_mean": self.running_mean, "running_var": self.running_var}

    def load_state(self, state):
        state = dict(state)
        self.running_mean = np.array(state.pop("running_mean"), dtype=np.float64)
        self.running_var = np.array(state.pop("running_var"), dtype=np.float64)
        super().load_state(state)

    def forward(self, x, training):
        axes = tuple(range(x.ndim - 1))
        if training:
            if x.shape[0] < 2:
                raise ValueError("BatchNorm in training mode needs a batch of at least 2")
            mean = x.mean(axis=axes)
            centered = x - mean
            var = np.mean(centered * centered, axis=axes)
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat = centered
            xhat *= inv_std
            if self.update_running:
                m = self.momentum
                self.running_mean = m * self.running_mean + (1 - m) * mean
                self.running_var = m * self.running_var + (1 - m) * var
            self._cache = ("batch", xhat, inv_std, axes)
        else:
            inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
            xhat = (x - self.running_mean) * inv_std
            self._cache = ("running", xhat, inv_std, axes)
        return xhat * self.params["scale"] + self.params["shift"]

    def backward(self, grad):
        mode, xhat, inv_std, axes = self._require_cache()
        gx = (grad * xhat).sum(axis=axes)
        gs = grad.sum(axis=axes)
        self.grads["scale"] += gx
        self.grads["shift"] += gs
        scale = self.params["scale"]
        if mode == "running":
            return grad * (scale * inv_std)
        n = grad.size // grad.shape[-1]
        # dx = scale * inv_std * (g - mean(g) - xhat * mean(g * xhat))
        out = xhat * (gx / n)
        np.subtract(grad, out, out=out)
        out -= gs / n
        out *= scale * inv_std
        return out


class Dropout(Layer):
    """Inverted dropout: survivors are scaled by ``1 / (1 - p)`` during training."""

    kind = "Dropout"

    def __init__(self, p=0.5, rng=None):
        super().__init__()
        if not 0 <= p < 1:
            raise ValueError("dropout probability must lie in [0, 1)")
        self.p = p
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def config(self):
        return {"p": self.p}

    def forward(self, x, training):
        if not training or self.p == 0:
            self._cache = "identity"
            return x
        mask = (self.rng.random(x.shape) >= self.p) * (1.0 / (1.0 - self.p))
        self._cache = mask
        return x * mask

    def backward(self, grad):
        mask = self._require_cache()
        if isinstance(mask, str):
            return grad
        return grad * mask


def dropout_forward(x, p, training, rng):
    """Functional inverted dropout."""
    return Dropout(p, rng).forward(np.asarray(x, dtype=np.float64), training)


class ReLU(Layer):
    kind = "ReLU"

    def forward(self, x, training):
        out = np.maximum(x, 0.0)
        self._cache = out
        return out

    def backward(self, grad):
        out = self._require_cache()
        return grad * (out > 0)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Sigmoid(Layer):
    kind = "Sigmoid"

    def forward(self, x, training):
        y = sigmoid(x)
        self._cache = y
        return y

    def backward(self, grad):
        y = self._require_cache()
        return grad * y * (1.0 - y)


def activation_forward(x, kind):
    x = np.asarray(x, dtype=np.float64)
    if kind == "ReLU":
        return np.maximum(x, 0.0)
    if kind == "Sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation {kind!r}")


class Flatten(Layer):
    kind = "Flatten"

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x, training):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._require_cache())


LAYER_TYPES = {cls.kind: cls for cls in (Conv1D, Dense, BatchNorm, Dropout, ReLU, Sigmoid, Flatten)}
