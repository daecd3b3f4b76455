"""The 1-D CNN survival classifier plus Naive Bayes and MLP baselines.

Every classifier exposes ``score(X) -> (n, 2)`` class scores in the column
order (Recovered, Deceased); :func:`predict` takes the argmax with ties going
to Deceased.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import DECEASED, RECOVERED, EncodedDataset
from .nn import (Adam, BatchNorm, Conv1D, Dense, Dropout, Flatten, Network, ReLU, Sigmoid,
                 bce_grad, bce_loss)

KINDS = ("cnn", "mlp", "naive_bayes")
MODEL_FORMAT_VERSION = 1


@dataclass
class CnnConfig:
    input_width: int = 39
    conv_layers: int = 3
    filters: int = 256
    kernel_size: int = 3
    stride: int = 1
    padding: str = "same"
    dense_widths: tuple[int, ...] = (64, 32)
    dropout: float = 0.5
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epochs: int = 100
    batch_size: int = 32

    @property
    def flatten_width(self) -> int:
        length = self.input_width
        for _ in range(self.conv_layers):
            length = -(-length // self.stride) if self.padding == "same" else (length - self.kernel_size) // self.stride + 1
        return length * self.filters


@dataclass
class MlpConfig:
    input_width: int = 39
    widths: tuple[int, ...] = (64, 32, 16, 8, 4, 2)
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epochs: int = 100
    batch_size: int = 32


def build_cnn(config: CnnConfig, rng: np.random.Generator) -> Network:
    """conv -> batchnorm -> ReLU (x3), flatten, dense 64/32 with dropout, dense 2 -> sigmoid."""
    init_rng, dropout_rng = rng.spawn(2)
    layers = []
    channels = 1
    for _ in range(config.conv_layers):
        layers += [Conv1D(channels, config.filters, config.kernel_size, config.stride,
                          config.padding, rng=init_rng),
                   BatchNorm(config.filters), ReLU()]
        channels = config.filters
    layers.append(Flatten())
    width = config.flatten_width
    for hidden in config.dense_widths:
        layers += [Dense(width, hidden, rng=init_rng), ReLU(), Dropout(config.dropout, dropout_rng)]
        width = hidden
    layers += [Dense(width, 2, rng=init_rng, init="xavier"), Sigmoid()]
    return Network(layers, (config.input_width, 1))


def build_mlp(rng: np.random.Generator, config: MlpConfig | None = None) -> Network:
    """Six dense layers (ReLU hidden, sigmoid output)."""
    config = config or MlpConfig()
    layers = []
    width = config.input_width
    for i, out in enumerate(config.widths):
        last = i == len(config.widths) - 1
        layers.append(Dense(width, out, rng=rng, init="xavier" if last else "he"))
        layers.append(Sigmoid() if last else ReLU())
        width = out
    return Network(layers, (config.input_width,))


def one_hot(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    out = np.zeros((len(y), 2))
    out[np.arange(len(y)), y] = 1.0
    return out


def predict_from_scores(scores) -> np.ndarray:
    scores = np.asarray(scores)
    return np.where(scores[:, DECEASED] >= scores[:, RECOVERED], DECEASED, RECOVERED)


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    bounds = list(range(0, n, batch_size)) + [n]
    if len(bounds) > 2 and bounds[-1] - bounds[-2] == 1:
        # a lone trailing sample would break batch normalization; fold it into the previous batch
        del bounds[-2]
    return [order[a:b] for a, b in zip(bounds[:-1], bounds[1:])]


def predict_network(net: Network, X: np.ndarray, chunk: int = 512) -> np.ndarray:
    outs = [net.forward(X[i:i + chunk], training=False) for i in range(0, len(X), chunk)]
    return np.concatenate(outs) if outs else np.zeros((0,) + net.output_shape)


def fit_network(net: Network, X, T, epochs: int, batch_size: int, rng: np.random.Generator,
                X_val=None, T_val=None, learning_rate=0.001, beta1=0.9, beta2=0.999,
                accuracy=None) -> list[dict]:
    """Minibatch Adam on BCE. Returns one history row per epoch.

    Training loss/accuracy are averaged over the epoch's minibatches (train mode);
    validation figures come from an eval-mode pass after the epoch.
    """
    opt = Adam(net, learning_rate, beta1, beta2)
    history = []
    n = len(X)
    for epoch in range(1, epochs + 1):
        net.train()
        total_loss = 0.0
        hits = 0.0
        for idx in _batches(n, batch_size, rng):
            out = net.forward(X[idx])
            total_loss += bce_loss(out, T[idx]) * len(idx)
            if accuracy is not None:
                hits += accuracy(out, T[idx]) * len(idx)
            net.backward(bce_grad(out, T[idx]))
            opt.step()
        row = {"epoch": epoch, "train_loss": total_loss / n}
        if accuracy is not None:
            row["train_acc"] = hits / n
        if X_val is not None and len(X_val):
            out = predict_network(net, X_val)
            row["val_loss"] = bce_loss(out, T_val)
            if accuracy is not None:
                row["val_acc"] = accuracy(out, T_val)
        history.append(row)
    net.eval()
    return history


def class_accuracy(out, T) -> float:
    return float(np.mean(predict_from_scores(out) == np.argmax(T, axis=1)))


# ---------------------------------------------------------------------------
# Naive Bayes
# ---------------------------------------------------------------------------

@dataclass
class NaiveBayesModel:
    """Bernoulli likelihood on binary-coded columns, Gaussian on continuous ones.

    Bernoulli parameters use Laplace smoothing and accept fractional inputs
    (reconstructed samples), i.e. ``theta = (sum x + alpha) / (n + 2 alpha)``.
    """

    priors: np.ndarray
    theta: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    bernoulli_cols: np.ndarray
    gaussian_cols: np.ndarray
    alpha: float = 1.0

    @classmethod
    def fit(cls, X, y, gaussian_cols=(), alpha=1.0, var_floor=1e-6) -> "NaiveBayesModel":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        if set(np.unique(y)) != {RECOVERED, DECEASED}:
            raise ValueError("Naive Bayes needs training samples from both classes")
        gaussian_cols = np.asarray(sorted(gaussian_cols), dtype=np.int64)
        bernoulli_cols = np.setdiff1d(np.arange(X.shape[1]), gaussian_cols)
        priors = np.array([np.mean(y == c) for c in (RECOVERED, DECEASED)])
        theta = np.empty((2, len(bernoulli_cols)))
        mean = np.empty((2, len(gaussian_cols)))
        var = np.empty((2, len(gaussian_cols)))
        for c in (RECOVERED, DECEASED):
            Xc = X[y == c]
            theta[c] = (Xc[:, bernoulli_cols].sum(axis=0) + alpha) / (len(Xc) + 2 * alpha)
            if len(gaussian_cols):
                g = Xc[:, gaussian_cols]
                mean[c] = g.mean(axis=0)
                var[c] = np.maximum(g.var(axis=0), var_floor)
        return cls(priors, theta, mean, var, bernoulli_cols, gaussian_cols, alpha)

    def log_joint(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        xb = X[:, self.bernoulli_cols]
        xg = X[:, self.gaussian_cols]
        out = np.empty((len(X), 2))
        for c in (RECOVERED, DECEASED):
            lj = math.log(self.priors[c])
            lj = lj + xb @ np.log(self.theta[c]) + (1.0 - xb) @ np.log1p(-self.theta[c])
            if len(self.gaussian_cols):
                lj = lj - 0.5 * np.sum(np.log(2 * np.pi * self.var[c])
                                       + (xg - self.mean[c]) ** 2 / self.var[c], axis=1)
            out[:, c] = lj
        return out

    def posterior(self, X) -> np.ndarray:
        lj = self.log_joint(X)
        lj -= lj.max(axis=1, keepdims=True)
        p = np.exp(lj)
        return p / p.sum(axis=1, keepdims=True)

    def to_dict(self) -> dict:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, doc: dict) -> "NaiveBayesModel":
        arr = {k: np.asarray(doc[k], dtype=np.int64 if k.endswith("cols") else np.float64)
               for k in ("priors", "theta", "mean", "var", "bernoulli_cols", "gaussian_cols")}
        return cls(alpha=doc["alpha"], **arr)


# ---------------------------------------------------------------------------
# Uniform classifier interface
# ---------------------------------------------------------------------------

@dataclass
class Classifier:
    kind: str
    columns: tuple[str, ...]
    network: Network | None = None
    naive_bayes: NaiveBayesModel | None = None
    history: list[dict] = field(default_factory=list)

    def _inputs(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None]
        return X[:, :, None] if self.kind == "cnn" else X

    def score(self, X) -> np.ndarray:
        if self.kind == "naive_bayes":
            X = np.asarray(X, dtype=np.float64)
            return self.naive_bayes.posterior(X if X.ndim == 2 else X[None])
        return predict_network(self.network, self._inputs(X))

    def to_dict(self) -> dict:
        doc = {"format": "cnnae.classifier", "version": MODEL_FORMAT_VERSION, "kind": self.kind,
               "columns": list(self.columns), "history": self.history}
        if self.kind == "naive_bayes":
            doc["naive_bayes"] = self.naive_bayes.to_dict()
        else:
            doc["network"] = self.network.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Classifier":
        if doc.get("format") != "cnnae.classifier" or doc.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError("unsupported classifier document")
        clf = cls(doc["kind"], tuple(doc["columns"]), history=doc.get("history", []))
        if clf.kind == "naive_bayes":
            clf.naive_bayes = NaiveBayesModel.from_dict(doc["naive_bayes"])
        else:
            clf.network = Network.from_dict(doc["network"]).eval()
        return clf

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "Classifier":
        return cls.from_dict(json.loads(text))


def score(classifier: Classifier, sample) -> tuple[float, float]:
    x = getattr(sample, "x", sample)
    s = classifier.score(np.asarray(x)[None])[0]
    return float(s[RECOVERED]), float(s[DECEASED])


def predict(classifier: Classifier, sample) -> int:
    s_rec, s_dec = score(classifier, sample)
    return DECEASED if s_dec >= s_rec else RECOVERED


def gaussian_columns(columns) -> list[int]:
    return [i for i, name in enumerate(columns) if name == "Age"]


def train(kind: str, train_set: EncodedDataset, val_set: EncodedDataset | None, epochs: int,
          rng: np.random.Generator, cnn_config: CnnConfig | None = None,
          mlp_config: MlpConfig | None = None, batch_size: int | None = None) -> Classifier:
    """Fit a classifier of ``kind`` on ``train_set``; ``val_set`` is monitored, not used for selection."""
    if kind not in KINDS:
        raise ValueError(f"unknown classifier kind {kind!r}; expected one of {KINDS}")
    if len(train_set) == 0:
        raise ValueError("empty training set")
    clf = Classifier(kind, tuple(train_set.columns))
    if kind == "naive_bayes":
        clf.naive_bayes = NaiveBayesModel.fit(train_set.X, train_set.y,
                                              gaussian_columns(train_set.columns))
        return clf
    build_rng, fit_rng = rng.spawn(2)
    if kind == "cnn":
        cfg = CnnConfig(**{**asdict(cnn_config or CnnConfig()), "input_width": train_set.width})
        net = build_cnn(cfg, build_rng)
    else:
        cfg = MlpConfig(**{**asdict(mlp_config or MlpConfig()), "input_width": train_set.width})
        net = build_mlp(build_rng, cfg)
    clf.network = net
    X = clf._inputs(train_set.X)
    X_val = T_val = None
    if val_set is not None and len(val_set):
        X_val, T_val = clf._inputs(val_set.X), one_hot(val_set.y)
    clf.history = fit_network(net, X, one_hot(train_set.y), epochs, batch_size or cfg.batch_size,
                              fit_rng, X_val, T_val, cfg.learning_rate, cfg.beta1, cfg.beta2,
                              accuracy=class_accuracy)
    net.eval()
    return clf
