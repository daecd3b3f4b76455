"""Clinical record schema, CSV I/O, 39-dimensional encoding, synthetic cohorts and splits."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

RECOVERED = 0
DECEASED = 1
OUTCOMES = ("Recovered", "Deceased")

AGE_MIN, AGE_MAX = 11, 95
GENDERS = ("Male", "Female")
BLOOD_TYPES = ("A-", "A+", "B-", "B+", "AB-", "AB+", "O-", "O+")
# ABO group -> (bit1, bit2); Rh '+' -> 1
ABO_BITS = {"A": (0, 0), "B": (0, 1), "AB": (1, 0), "O": (1, 1)}

BINARY_FEATURES = (
    "BCG Vaccine", "CBC", "Diabetes", "blood pressure", "Asthma", "Heart disease",
    "kidney disease", "Respiratory disease", "Cancer", "Corticosteroids", "Transplant", "HEM",
    "Immunodeficiency", "Liver disease", "Rheumatological disease", "Chest pain", "Fever",
    "Trembling or Shakes", "Weakness", "Sweating", "Sore throat", "Dyspnea", "Dry cough",
    "Cough with sputum", "Fatigue, whole body hurts", "Anosmia", "Ageusia", "Anorexia", "Eczema",
    "Conjunctivitis (Pink eye)", "Blindness and Tunnel vision", "Vertigo", "Nausea/Diarrhea",
    "Tobacco",
)
RAW_FEATURES = ("Gender", "Age", "Blood Type") + BINARY_FEATURES
CSV_COLUMNS = RAW_FEATURES + ("Outcome",)
ENCODED_COLUMNS = ("Gender", "Age", "Blood Type ABO1", "Blood Type ABO2", "Blood Type Rh") + BINARY_FEATURES
N_ENCODED = len(ENCODED_COLUMNS)

# legal spellings for each binary field: (value meaning 0, value meaning 1)
BINARY_LEVELS = {name: ("Normal", "Abnormal") if name == "CBC" else ("No", "Yes")
                 for name in BINARY_FEATURES}


class DataError(ValueError):
    """Malformed or out-of-domain dataset content."""


@dataclass(frozen=True)
class PatientRecord:
    gender: str
    age: int
    blood_type: str
    binaries: tuple[bool, ...]
    outcome: str

    def __post_init__(self):
        if self.gender not in GENDERS:
            raise DataError(f"gender {self.gender!r} not in {GENDERS}")
        if not AGE_MIN <= self.age <= AGE_MAX:
            raise DataError(f"age {self.age} outside the range [{AGE_MIN}, {AGE_MAX}]")
        if self.blood_type not in BLOOD_TYPES:
            raise DataError(f"blood type {self.blood_type!r} not one of {', '.join(BLOOD_TYPES)}")
        if len(self.binaries) != len(BINARY_FEATURES):
            raise DataError(f"expected {len(BINARY_FEATURES)} binary fields, got {len(self.binaries)}")
        if self.outcome not in OUTCOMES:
            raise DataError(f"outcome {self.outcome!r} not in {OUTCOMES}")

    @property
    def label(self) -> int:
        return OUTCOMES.index(self.outcome)

    def raw_values(self) -> dict[str, str]:
        row = {"Gender": self.gender, "Age": str(self.age), "Blood Type": self.blood_type}
        for name, flag in zip(BINARY_FEATURES, self.binaries):
            row[name] = BINARY_LEVELS[name][int(flag)]
        row["Outcome"] = self.outcome
        return row


@dataclass(frozen=True)
class EncodedSample:
    x: np.ndarray
    y: int
    origin: str = "Original"


@dataclass
class EncodedDataset:
    """Encoded samples as arrays: ``X`` is ``(n, width)``, ``y`` holds 0/1 labels."""

    X: np.ndarray
    y: np.ndarray
    origin: np.ndarray = None
    columns: tuple[str, ...] = ENCODED_COLUMNS

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or len(self.X) != len(self.y):
            raise ValueError("X must be (n, width) with one label per row")
        if self.origin is None:
            self.origin = np.array(["Original"] * len(self.y), dtype=object)
        self.origin = np.asarray(self.origin, dtype=object)
        if len(self.columns) != self.X.shape[1]:
            raise ValueError("column names do not match the encoded width")

    def __len__(self):
        return len(self.y)

    @property
    def width(self) -> int:
        return self.X.shape[1]

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return EncodedSample(self.X[idx], int(self.y[idx]), str(self.origin[idx]))
        idx = np.asarray(idx)
        return EncodedDataset(self.X[idx], self.y[idx], self.origin[idx], self.columns)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def class_indices(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.y == label)

    def counts(self) -> tuple[int, int]:
        return int(np.sum(self.y == RECOVERED)), int(np.sum(self.y == DECEASED))

    @classmethod
    def concat(cls, parts: list["EncodedDataset"]) -> "EncodedDataset":
        parts = [p for p in parts if len(p)] or parts[:1]
        return cls(np.concatenate([p.X for p in parts]), np.concatenate([p.y for p in parts]),
                   np.concatenate([p.origin for p in parts]), parts[0].columns)

    @classmethod
    def from_samples(cls, samples, columns=ENCODED_COLUMNS) -> "EncodedDataset":
        samples = list(samples)
        if not samples:
            return cls(np.zeros((0, len(columns))), np.zeros(0), np.zeros(0, dtype=object), columns)
        return cls(np.stack([s.x for s in samples]), [s.y for s in samples],
                   [s.origin for s in samples], columns)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _parse_row(row: dict[str, str], line: int) -> PatientRecord:
    def fail(column, message):
        raise DataError(f"row {line}, column {column!r}: {message}")

    gender = row["Gender"].strip()
    if gender not in GENDERS:
        fail("Gender", f"{gender!r} not one of {', '.join(GENDERS)}")
    age_text = row["Age"].strip()
    try:
        age_value = float(age_text)
    except ValueError:
        fail("Age", f"unparseable age {age_text!r}")
    if not math.isfinite(age_value) or age_value != int(age_value):
        fail("Age", f"unparseable age {age_text!r} (whole years expected)")
    age = int(age_value)
    if not AGE_MIN <= age <= AGE_MAX:
        fail("Age", f"age {age} outside the range [{AGE_MIN}, {AGE_MAX}]")
    blood = row["Blood Type"].strip()
    if blood not in BLOOD_TYPES:
        fail("Blood Type", f"{blood!r} not one of {', '.join(BLOOD_TYPES)}")
    flags = []
    for name in BINARY_FEATURES:
        value = row[name].strip()
        levels = BINARY_LEVELS[name]
        if value not in levels:
            fail(name, f"{value!r} not one of {', '.join(levels)}")
        flags.append(value == levels[1])
    outcome = row["Outcome"].strip()
    if outcome not in OUTCOMES:
        fail("Outcome", f"{outcome!r} not one of {', '.join(OUTCOMES)}")
    return PatientRecord(gender, age, blood, tuple(flags), outcome)


def parse_csv(path) -> list[PatientRecord]:
    """Read and validate a cohort CSV in the canonical column layout."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        unknown = [h for h in header if h not in CSV_COLUMNS]
        if unknown:
            raise DataError(f"{path}: unknown column(s) {unknown}")
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {missing}")
        if len(header) != len(set(header)):
            raise DataError(f"{path}: duplicated column names")
        records = []
        for line, values in enumerate(reader, start=2):
            if not values:
                continue
            if len(values) != len(header):
                raise DataError(f"row {line}: expected {len(header)} fields, got {len(values)}")
            records.append(_parse_row(dict(zip(header, values)), line))
    return records


def format_csv(records: list[PatientRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for record in records:
        raw = record.raw_values()
        writer.writerow([raw[c] for c in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(records: list[PatientRecord], path) -> None:
    from .io import atomic_write_text
    atomic_write_text(path, format_csv(records))


def format_encoded_csv(data: EncodedDataset) -> str:
    """Encoded rows with ``Outcome`` and ``Origin`` columns, 6 decimal places."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(data.columns) + ["Outcome", "Origin"])
    for x, y, origin in zip(data.X, data.y, data.origin):
        writer.writerow([f"{v:.6f}" for v in x] + [OUTCOMES[int(y)], origin])
    return buf.getvalue()


def parse_encoded_csv(path) -> EncodedDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[-2:] != ["Outcome", "Origin"]:
            raise DataError(f"{path}: encoded CSV must end with Outcome, Origin columns")
        columns = tuple(header[:-2])
        X, y, origin = [], [], []
        for line, values in enumerate(reader, start=2):
            if not values:
                continue
            try:
                X.append([float(v) for v in values[:-2]])
            except ValueError as exc:
                raise DataError(f"row {line}: {exc}") from None
            if values[-2] not in OUTCOMES:
                raise DataError(f"row {line}, column 'Outcome': {values[-2]!r}")
            if values[-1] not in ("Original", "Reconstructed"):
                raise DataError(f"row {line}, column 'Origin': {values[-1]!r}")
            y.append(OUTCOMES.index(values[-2]))
            origin.append(values[-1])
    return EncodedDataset(np.array(X).reshape(len(y), len(columns)), y, origin, columns)


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

def blood_bits(blood_type: str) -> tuple[int, int, int]:
    abo, rh = blood_type[:-1], blood_type[-1]
    b1, b2 = ABO_BITS[abo]
    return b1, b2, int(rh == "+")


def encode(record: PatientRecord) -> EncodedSample:
    x = np.empty(N_ENCODED)
    x[0] = GENDERS.index(record.gender)
    x[1] = (record.age - AGE_MIN) / (AGE_MAX - AGE_MIN)
    x[2:5] = blood_bits(record.blood_type)
    x[5:] = record.binaries
    return EncodedSample(x, record.label, "Original")


def encode_all(records: list[PatientRecord]) -> EncodedDataset:
    return EncodedDataset.from_samples([encode(r) for r in records])


# ---------------------------------------------------------------------------
# Synthetic cohorts
# ---------------------------------------------------------------------------

def _pair(value, name):
    if isinstance(value, (int, float)):
        value = [value, value]
    value = [float(v) for v in value]
    if len(value) != 2 or not all(0.0 <= v <= 1.0 for v in value):
        raise ValueError(f"{name}: expected [p_recovered, p_deceased] probabilities in [0, 1]")
    return value


@dataclass
class GeneratorConfig:
    """Class-conditional sampling distribution for synthetic cohorts.

    Probability pairs are ``[recovered, deceased]``. ``couplings`` make a
    target field copy a source field with the given probability (otherwise the
    target is drawn from its own Bernoulli).
    """

    n_recovered: int = 300
    n_deceased: int = 20
    female_probability: float = 0.55
    age_recovered: tuple[float, float] = (48.3, 18.0)
    age_deceased: tuple[float, float] = (68.0, 10.0)
    age_bounds: tuple[int, int] = (AGE_MIN, AGE_MAX)
    abo_probabilities: dict = field(default_factory=lambda: {
        "A": [0.3, 0.3], "B": [0.25, 0.25], "AB": [0.1, 0.1], "O": [0.35, 0.35]})
    rh_positive: list = field(default_factory=lambda: [0.88, 0.88])
    binary_probabilities: dict = field(default_factory=lambda: {n: [0.1, 0.1] for n in BINARY_FEATURES})
    couplings: list = field(default_factory=list)
    seed: int = 0
    version: int = 1

    def __post_init__(self):
        if self.n_recovered < 1 or self.n_deceased < 1:
            raise ValueError("class counts must be >= 1")
        if not 0 <= self.female_probability <= 1:
            raise ValueError("female_probability must lie in [0, 1]")
        lo, hi = self.age_bounds
        if not (AGE_MIN <= lo < hi <= AGE_MAX):
            raise ValueError(f"age bounds must lie within [{AGE_MIN}, {AGE_MAX}]")
        for mean, std in (self.age_recovered, self.age_deceased):
            if std <= 0:
                raise ValueError("age standard deviations must be positive")
        if set(self.abo_probabilities) != set(ABO_BITS):
            raise ValueError(f"abo_probabilities needs exactly the groups {sorted(ABO_BITS)}")
        self.abo_probabilities = {k: _pair(v, f"abo {k}") for k, v in self.abo_probabilities.items()}
        for cls in (0, 1):
            total = sum(v[cls] for v in self.abo_probabilities.values())
            if abs(total - 1.0) > 1e-9:
                raise ValueError("ABO probabilities must sum to 1 within each class")
        self.rh_positive = _pair(self.rh_positive, "rh_positive")
        unknown = set(self.binary_probabilities) - set(BINARY_FEATURES)
        if unknown:
            raise ValueError(f"unknown binary features {sorted(unknown)}")
        probs = {n: [0.1, 0.1] for n in BINARY_FEATURES}
        probs.update({k: _pair(v, k) for k, v in self.binary_probabilities.items()})
        self.binary_probabilities = probs
        for c in self.couplings:
            if c["source"] not in BINARY_FEATURES or c["target"] not in BINARY_FEATURES:
                raise ValueError(f"coupling refers to unknown features: {c}")
            if not 0 <= c["probability"] <= 1:
                raise ValueError(f"coupling probability out of range: {c}")

    def to_dict(self) -> dict:
        return {
            "version": self.version, "seed": self.seed,
            "n_recovered": self.n_recovered, "n_deceased": self.n_deceased,
            "female_probability": self.female_probability,
            "age": {"recovered": {"mean": self.age_recovered[0], "std": self.age_recovered[1]},
                    "deceased": {"mean": self.age_deceased[0], "std": self.age_deceased[1]},
                    "bounds": list(self.age_bounds)},
            "abo_probabilities": self.abo_probabilities,
            "rh_positive": self.rh_positive,
            "binary_probabilities": self.binary_probabilities,
            "couplings": self.couplings,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GeneratorConfig":
        age = doc.get("age", {})
        kwargs = {k: doc[k] for k in ("n_recovered", "n_deceased", "female_probability", "seed",
                                      "abo_probabilities", "rh_positive", "binary_probabilities",
                                      "couplings", "version") if k in doc}
        if "recovered" in age:
            kwargs["age_recovered"] = (age["recovered"]["mean"], age["recovered"]["std"])
        if "deceased" in age:
            kwargs["age_deceased"] = (age["deceased"]["mean"], age["deceased"]["std"])
        if "bounds" in age:
            kwargs["age_bounds"] = tuple(age["bounds"])
        return cls(**kwargs)

    @classmethod
    def load(cls, path=None) -> "GeneratorConfig":
        """Load a JSON config; ``None`` loads the packaged default."""
        if path is None:
            text = resources.files("cnnae.data").joinpath("generator_default.json").read_text("utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        return cls.from_dict(json.loads(text))


def _truncated_ages(rng, mean, std, bounds, n):
    lo, hi = bounds
    out = np.empty(n, dtype=np.int64)
    filled = 0
    while filled < n:
        draw = np.rint(rng.normal(mean, std, size=2 * (n - filled) + 8))
        draw = draw[(draw >= lo) & (draw <= hi)][: n - filled]
        out[filled:filled + len(draw)] = draw
        filled += len(draw)
    return out


def generate_synthetic(config: GeneratorConfig) -> list[PatientRecord]:
    """Sample ``n_recovered`` then ``n_deceased`` records, deterministic in ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    groups = list(ABO_BITS)
    index = {name: i for i, name in enumerate(BINARY_FEATURES)}
    records = []
    for cls, n, (mean, std) in ((RECOVERED, config.n_recovered, config.age_recovered),
                                (DECEASED, config.n_deceased, config.age_deceased)):
        ages = _truncated_ages(rng, mean, std, config.age_bounds, n)
        female = rng.random(n) < config.female_probability
        abo_p = np.array([config.abo_probabilities[g][cls] for g in groups])
        abo = rng.choice(len(groups), size=n, p=abo_p / abo_p.sum())
        rh = rng.random(n) < config.rh_positive[cls]
        p = np.array([config.binary_probabilities[name][cls] for name in BINARY_FEATURES])
        flags = rng.random((n, len(BINARY_FEATURES))) < p
        for c in config.couplings:
            copy = rng.random(n) < c["probability"]
            src, dst = index[c["source"]], index[c["target"]]
            flags[copy, dst] = flags[copy, src]
        for i in range(n):
            blood = groups[abo[i]] + ("+" if rh[i] else "-")
            records.append(PatientRecord(GENDERS[int(female[i])], int(ages[i]), blood,
                                         tuple(bool(f) for f in flags[i]), OUTCOMES[cls]))
    return records


# ---------------------------------------------------------------------------
# Partitions
# ---------------------------------------------------------------------------

def partition_groups(n_samples: int, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffle ``range(n_samples)`` and split it into ``k`` groups whose sizes differ by <= 1."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n_samples:
        raise ValueError(f"cannot split {n_samples} samples into {k} groups")
    order = rng.permutation(n_samples)
    return [np.sort(g) for g in np.array_split(order, k)]


def stratified_kfold(labels, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Split sample indices into ``k`` folds preserving the class proportions."""
    labels = np.asarray(labels)
    if k < 1:
        raise ValueError("k must be >= 1")
    folds = [[] for _ in range(k)]
    offset = 0
    for cls in (RECOVERED, DECEASED):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < k:
            name = OUTCOMES[cls]
            raise ValueError(f"class {name} has {len(idx)} member(s); stratified {k}-fold needs >= {k}")
        chunks = np.array_split(rng.permutation(idx), k)
        # rotate so the folds that got an extra member of one class don't also get one of the next
        for i, chunk in enumerate(chunks):
            folds[(i + offset) % k].append(chunk)
        offset += len(idx) % k
    if sum(len(np.concatenate(f)) for f in folds) != len(labels):
        raise ValueError("labels must be 0 (Recovered) or 1 (Deceased)")
    return [np.sort(np.concatenate(f)) for f in folds]


def stratified_split(labels, fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Split positions ``0..n-1`` into (rest, held) with ``round(fraction * n_c)`` held per class."""
    labels = np.asarray(labels)
    rest, held = [], []
    for cls in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        n_held = int(math.floor(fraction * len(idx) + 0.5))
        held.append(idx[:n_held])
        rest.append(idx[n_held:])
    return np.sort(np.concatenate(rest)), np.sort(np.concatenate(held))


# ---------------------------------------------------------------------------
# Summary
# ---------------------------------------------------------------------------

@dataclass
class DatasetSummary:
    n_total: int
    n_recovered: int
    n_deceased: int
    female_fraction: float
    age_mean: float
    age_std: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def summarize(records: list[PatientRecord]) -> DatasetSummary:
    if not records:
        raise ValueError("cannot summarize an empty dataset")
    ages = np.array([r.age for r in records], dtype=np.float64)
    n_dec = sum(r.outcome == "Deceased" for r in records)
    return DatasetSummary(
        n_total=len(records),
        n_recovered=len(records) - n_dec,
        n_deceased=n_dec,
        female_fraction=sum(r.gender == "Female" for r in records) / len(records),
        age_mean=float(ages.mean()),
        age_std=float(ages.std(ddof=1)) if len(ages) > 1 else 0.0,
    )
