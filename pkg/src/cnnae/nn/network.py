"""Sequential container with shape checking, train/eval modes and JSON state."""

from __future__ import annotations

import numpy as np

from .layers import LAYER_TYPES, Dropout, Layer

FORMAT_VERSION = 1


class Network:
    def __init__(self, layers: list[Layer], input_shape: tuple):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        self.mode = "train"
        self._forwarded = False
        self.shapes = [self.input_shape]
        for layer in self.layers:
            self.shapes.append(layer.output_shape(self.shapes[-1]))

    @property
    def output_shape(self) -> tuple:
        return self.shapes[-1]

    def train(self):
        self.mode = "train"
        return self

    def eval(self):
        self.mode = "eval"
        return self

    def forward(self, x: np.ndarray, training: bool | None = None) -> np.ndarray:
        if training is None:
            training = self.mode == "train"
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != self.input_shape:
            raise ValueError(f"network expects input (B, {self.input_shape}), got {x.shape}")
        for layer in self.layers:
            x = layer.forward(x, training)
        self._forwarded = True
        return x

    __call__ = forward

    def backward(self, loss_grad: np.ndarray) -> dict[str, np.ndarray]:
        """Backpropagate ``loss_grad`` (dLoss/dOutput) and return fresh gradients."""
        if not self._forwarded:
            raise RuntimeError("backward called without a prior forward pass")
        self.zero_grad()
        grad = np.asarray(loss_grad, dtype=np.float64)
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return self.gradients()

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def parameters(self) -> dict[str, np.ndarray]:
        return {f"{i}.{name}": value
                for i, layer in enumerate(self.layers) for name, value in layer.params.items()}

    def gradients(self) -> dict[str, np.ndarray]:
        return {f"{i}.{name}": layer.grads[name]
                for i, layer in enumerate(self.layers) for name in layer.params}

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters().values())

    def set_dropout_rng(self, rng: np.random.Generator):
        for layer in self.layers:
            if isinstance(layer, Dropout):
                layer.rng = rng

    def to_dict(self) -> dict:
        layers = []
        for layer in self.layers:
            state = {name: {"shape": list(v.shape), "values": v.ravel().tolist()}
                     for name, v in layer.state().items()}
            layers.append({"kind": layer.kind, "config": layer.config(), "state": state})
        return {"format": "cnnae.network", "version": FORMAT_VERSION,
                "input_shape": list(self.input_shape), "layers": layers}

    @classmethod
    def from_dict(cls, doc: dict) -> "Network":
        if doc.get("format") != "cnnae.network" or doc.get("version") != FORMAT_VERSION:
            raise ValueError("unsupported network document")
        layers = []
        for entry in doc["layers"]:
            layer = LAYER_TYPES[entry["kind"]](**entry["config"])
            state = {name: np.array(s["values"], dtype=np.float64).reshape(s["shape"])
                     for name, s in entry["state"].items()}
            layer.load_state(state)
            layers.append(layer)
        return cls(layers, tuple(doc["input_shape"]))
