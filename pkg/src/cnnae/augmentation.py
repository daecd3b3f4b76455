"""Minority-class augmentation with an ensemble of autoencoders.

Each member is trained on the majority class minus one held-out group and
validated on that group; every minority sample is then passed through every
member, and the reconstructions join the dataset as new minority samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import DECEASED, RECOVERED, EncodedDataset, partition_groups
from .models import fit_network, predict_network
from .nn import Dense, Network, ReLU, Sigmoid


@dataclass
class AutoencoderSpec:
    input_width: int = 39
    first_width: int | None = None  # defaults to input_width
    bottleneck: int = 32
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epochs: int = 100
    batch_size: int | None = 32  # None = full batch
    n_members: int = 10

    @classmethod
    def for_width(cls, width: int, **overrides) -> "AutoencoderSpec":
        """Scale the bottleneck with the input width (32 of 39 at full width)."""
        bottleneck = max(1, round(32 * width / 39))
        return cls(input_width=width, bottleneck=bottleneck, **overrides)


def build_autoencoder(spec: AutoencoderSpec, rng: np.random.Generator) -> Network:
    """Dense(w) -> ReLU -> Dense(bottleneck) -> ReLU -> Dense(w) -> Sigmoid."""
    w = spec.input_width
    first = spec.first_width or w
    layers = [Dense(w, first, rng=rng), ReLU(),
              Dense(first, spec.bottleneck, rng=rng), ReLU(),
              Dense(spec.bottleneck, w, rng=rng, init="xavier"), Sigmoid()]
    return Network(layers, (w,))


@dataclass
class AugmentationEnsemble:
    members: list[Network]
    partition_log: list[np.ndarray]
    histories: list[list[dict]] = field(default_factory=list)
    minority_label: int = DECEASED
    majority_label: int = RECOVERED

    def log_dict(self) -> dict:
        return {"members": len(self.members),
                "validation_groups": [g.tolist() for g in self.partition_log],
                "final_train_loss": [h[-1]["train_loss"] if h else None for h in self.histories],
                "final_val_loss": [h[-1].get("val_loss") if h else None for h in self.histories]}


def train_ensemble(majority: EncodedDataset, spec: AutoencoderSpec,
                   rng: np.random.Generator) -> AugmentationEnsemble:
    """Train ``spec.n_members`` autoencoders; member i holds out group i for validation."""
    k = spec.n_members
    if len(majority) < k:
        raise ValueError(f"need at least {k} majority samples to train {k} autoencoders, got {len(majority)}")
    labels = np.unique(majority.y)
    if len(labels) != 1:
        raise ValueError("autoencoder training set must contain a single class")
    if majority.width != spec.input_width:
        raise ValueError(f"spec width {spec.input_width} != data width {majority.width}")
    split_rng, *member_rngs = rng.spawn(k + 1)
    groups = partition_groups(len(majority), k, split_rng)
    members, histories = [], []
    for i, group in enumerate(groups):
        init_rng, fit_rng = member_rngs[i].spawn(2)
        train_idx = np.setdiff1d(np.arange(len(majority)), group)
        X_train, X_val = majority.X[train_idx], majority.X[group]
        net = build_autoencoder(spec, init_rng)
        batch = spec.batch_size or len(X_train)
        hist = fit_network(net, X_train, X_train, spec.epochs, batch, fit_rng, X_val, X_val,
                           spec.learning_rate, spec.beta1, spec.beta2)
        members.append(net.eval())
        histories.append(hist)
    return AugmentationEnsemble(members, groups, histories, majority_label=int(labels[0]),
                                minority_label=1 - int(labels[0]))


def reconstruct(member: Network, x) -> np.ndarray:
    """Eval-mode reconstruction of one sample (or a batch of rows)."""
    x = np.asarray(getattr(x, "x", x), dtype=np.float64)
    out = predict_network(member, np.atleast_2d(x))
    return out[0] if x.ndim == 1 else out


def generate_augmented(ensemble: AugmentationEnsemble, minority: EncodedDataset) -> EncodedDataset:
    """Reconstruct every minority sample with every member (member-major order)."""
    if len(minority) == 0:
        raise ValueError("no minority samples to augment")
    X = np.concatenate([reconstruct(m, minority.X) for m in ensemble.members])
    n = len(X)
    return EncodedDataset(X, np.full(n, ensemble.minority_label),
                          np.array(["Reconstructed"] * n, dtype=object), minority.columns)


def assemble(original: EncodedDataset, augmented: EncodedDataset) -> EncodedDataset:
    """Concatenate without deduplication; origin tags are kept."""
    if len(augmented) == 0:
        return original[np.arange(len(original))]
    return EncodedDataset.concat([original, augmented])


@dataclass
class Augmenter:
    """Callable pipeline: split by class, train the ensemble, reconstruct, assemble."""

    spec: AutoencoderSpec | None = None

    def spec_for(self, width: int) -> AutoencoderSpec:
        if self.spec is not None and self.spec.input_width == width:
            return self.spec
        base = self.spec or AutoencoderSpec()
        return AutoencoderSpec.for_width(width, learning_rate=base.learning_rate, beta1=base.beta1,
                                         beta2=base.beta2, epochs=base.epochs,
                                         batch_size=base.batch_size, n_members=base.n_members)

    def __call__(self, dataset: EncodedDataset, rng: np.random.Generator):
        n_rec, n_dec = dataset.counts()
        majority_label = RECOVERED if n_rec >= n_dec else DECEASED
        majority = dataset[dataset.class_indices(majority_label)]
        minority = dataset[dataset.class_indices(1 - majority_label)]
        ensemble = train_ensemble(majority, self.spec_for(dataset.width), rng)
        return assemble(dataset, generate_augmented(ensemble, minority)), ensemble
