"""Information-gain feature ranking and pairwise feature correlation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .dataset import (BINARY_FEATURES, BLOOD_TYPES, ENCODED_COLUMNS, GENDERS, RAW_FEATURES,
                      PatientRecord, encode_all)


def entropy(labels) -> float:
    """Shannon entropy of the label distribution, in bits."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("entropy of an empty label set is undefined")
    _, counts = np.unique(labels, return_counts=True)
    p = counts / labels.size
    return float(-np.sum(p * np.log2(p)))


def information_gain(labels, values) -> float:
    """``H(labels) - sum_v |D_v|/|D| * H(labels | value = v)`` over observed values."""
    labels = np.asarray(labels)
    values = np.asarray(values)
    if labels.shape != values.shape:
        raise ValueError("labels and feature values must have the same length")
    base = entropy(labels)
    if base == 0.0:
        return 0.0
    conditional = 0.0
    for v in np.unique(values):
        sel = values == v
        conditional += sel.mean() * entropy(labels[sel])
    # guard against -1e-17 style rounding on uninformative features
    return max(base - conditional, 0.0)


def age_quartile_bins(ages) -> np.ndarray:
    """Map ages to quartile bin ids 0..3 using the sample's own quartiles."""
    ages = np.asarray(ages, dtype=np.float64)
    edges = np.quantile(ages, [0.25, 0.5, 0.75])
    return np.searchsorted(edges, ages, side="right")


def raw_feature_columns(records: list[PatientRecord]) -> dict[str, np.ndarray]:
    """Categorical view of each raw feature, age discretized into quartile bins."""
    cols = {
        "Gender": np.array([GENDERS.index(r.gender) for r in records]),
        "Age": age_quartile_bins([r.age for r in records]),
        "Blood Type": np.array([BLOOD_TYPES.index(r.blood_type) for r in records]),
    }
    flags = np.array([r.binaries for r in records], dtype=np.int64).reshape(len(records), -1)
    for j, name in enumerate(BINARY_FEATURES):
        cols[name] = flags[:, j]
    return cols


@dataclass
class FeatureRanking:
    entries: list[tuple[str, float]]

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.entries]

    def nonzero(self) -> list[tuple[str, float]]:
        return [(n, v) for n, v in self.entries if v > 0]

    @property
    def zero_ig(self) -> list[str]:
        return [n for n, v in self.entries if v <= 0]

    def to_csv(self) -> str:
        return _rows_csv(("feature", "ig_bits"), self.entries)

    def bars_csv(self) -> str:
        return _rows_csv(("feature", "value"), self.nonzero())


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for name, value in rows:
        writer.writerow([name, f"{value:.6f}"])
    return buf.getvalue()


def rank_features(records: list[PatientRecord]) -> FeatureRanking:
    labels = np.array([r.label for r in records])
    cols = raw_feature_columns(records)
    scores = [(name, information_gain(labels, cols[name])) for name in RAW_FEATURES]
    # stable sort keeps the canonical feature order among ties
    scores.sort(key=lambda item: -item[1])
    return FeatureRanking(scores)


@dataclass
class CorrelationMatrix:
    names: tuple[str, ...]
    values: np.ndarray
    zero_variance: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([""] + list(self.names))
        for name, row in zip(self.names, self.values):
            writer.writerow([name] + [f"{v:.6f}" for v in row])
        return buf.getvalue()

    def flags_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["feature", "zero_variance"])
        for name, flag in zip(self.names, self.zero_variance):
            writer.writerow([name, int(flag)])
        return buf.getvalue()

    def entry(self, a: str, b: str) -> float:
        return float(self.values[self.names.index(a), self.names.index(b)])


def pearson_matrix(X) -> tuple[np.ndarray, np.ndarray]:
    """Pearson correlation of the columns of ``X``; zero-variance columns get 0 off-diagonal."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 2:
        raise ValueError("correlation needs at least 2 samples")
    centered = X - X.mean(axis=0)
    norms = np.sqrt(np.sum(centered * centered, axis=0))
    zero = norms <= 1e-12 * np.maximum(1.0, np.abs(X).max(axis=0))
    safe = np.where(zero, 1.0, norms)
    unit = centered / safe
    unit[:, zero] = 0.0
    corr = unit.T @ unit
    corr = np.clip((corr + corr.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr, zero


def correlation_matrix(records: list[PatientRecord], raw: bool = False) -> CorrelationMatrix:
    """Pearson (phi for binary pairs) correlation over encoded or raw columns.

    In raw mode age stays in years and blood type uses its ordinal code.
    """
    if raw:
        X = np.column_stack([
            [GENDERS.index(r.gender) for r in records],
            [r.age for r in records],
            [BLOOD_TYPES.index(r.blood_type) for r in records],
            np.array([r.binaries for r in records], dtype=np.float64).reshape(len(records), -1),
        ])
        names = RAW_FEATURES
    else:
        X = encode_all(records).X
        names = ENCODED_COLUMNS
    corr, zero = pearson_matrix(X)
    return CorrelationMatrix(tuple(names), corr, zero)
