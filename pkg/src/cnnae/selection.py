"""Wrapper feature selection over binary masks: genetic algorithm and binary PSO.

A mask has one bit per raw feature. For patient data blood type is one bit
covering its three encoded columns; any other dataset gets one bit per column.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import ENCODED_COLUMNS, RAW_FEATURES, EncodedDataset, stratified_kfold
from .models import KINDS, predict_from_scores, train
from .seeding import child_rng

ALGORITHMS = ("GA", "PSO")

# canonical row order for mask CSVs over the full feature set
MASK_ROW_ORDER = (
    "CBC", "Blood Type", "Age", "Diabetes", "blood pressure", "Asthma", "Heart disease",
    "kidney disease", "Respiratory disease", "Cancer", "Corticosteroids", "BCG Vaccine", "Transplant",
    "HEM", "Immunodeficiency", "Liver disease", "Rheumatological disease", "Chest pain", "Fever",
    "Trembling or Shakes", "Weakness", "Sweating", "Sore throat", "Dyspnea", "Dry cough",
    "Cough with sputum", "Fatigue, whole body hurts", "Anosmia", "Ageusia", "Anorexia", "Eczema",
    "Conjunctivitis (Pink eye)", "Blindness and Tunnel vision", "Vertigo", "Nausea/Diarrhea",
    "Tobacco", "Gender",
)


@dataclass(frozen=True)
class FeatureGroups:
    names: tuple[str, ...]
    columns: tuple[tuple[int, ...], ...]

    @classmethod
    def for_columns(cls, columns) -> "FeatureGroups":
        columns = tuple(columns)
        if columns == ENCODED_COLUMNS:
            groups = [(0,), (1,), (2, 3, 4)] + [(j,) for j in range(5, len(ENCODED_COLUMNS))]
            return cls(RAW_FEATURES, tuple(groups))
        return cls(columns, tuple((j,) for j in range(len(columns))))

    def __len__(self):
        return len(self.names)

    def encoded_indices(self, mask) -> np.ndarray:
        mask = _check_mask(mask, len(self))
        return np.array([j for bit, cols in zip(mask, self.columns) if bit for j in cols], dtype=np.int64)


def _check_mask(mask, n) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (n,):
        raise ValueError(f"mask must have {n} entries, got shape {mask.shape}")
    if not mask.any():
        raise ValueError("mask selects no features")
    return mask


def project(dataset: EncodedDataset, mask) -> EncodedDataset:
    """Keep the encoded columns of the selected features, in their original order."""
    groups = FeatureGroups.for_columns(dataset.columns)
    idx = groups.encoded_indices(mask)
    return EncodedDataset(dataset.X[:, idx], dataset.y, dataset.origin,
                          tuple(dataset.columns[j] for j in idx))


@dataclass
class FitnessSpec:
    kind: str = "naive_bayes"
    folds: int = 3
    epochs: int = 10  # only used by the network kinds

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if self.folds < 2:
            raise ValueError("inner cross-validation needs at least 2 folds")


def _inner_cv_accuracy(data: EncodedDataset, folds, spec: FitnessSpec, rng) -> float:
    all_idx = np.arange(len(data))
    fold_rngs = rng.spawn(len(folds))
    correct = []
    for test, fold_rng in zip(folds, fold_rngs):
        train_idx = np.setdiff1d(all_idx, test)
        clf = train(spec.kind, data[train_idx], None, spec.epochs, fold_rng)
        pred = predict_from_scores(clf.score(data.X[test]))
        correct.append(np.mean(pred == data.y[test]))
    return float(np.mean(correct))


def wrapper_fitness(mask, dataset: EncodedDataset, spec: FitnessSpec | None = None,
                    rng: np.random.Generator | int = 0) -> float:
    """Mean accuracy of a stratified inner CV on the mask-projected dataset."""
    spec = spec or FitnessSpec()
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    fold_rng, train_rng = rng.spawn(2)
    data = project(dataset, mask)
    return _inner_cv_accuracy(data, stratified_kfold(data.y, spec.folds, fold_rng), spec, train_rng)


class WrapperFitness:
    """Memoized fitness with inner folds fixed once, so masks are compared on equal terms."""

    def __init__(self, dataset: EncodedDataset, spec: FitnessSpec | None = None, seed: int = 0):
        self.dataset = dataset
        self.spec = spec or FitnessSpec()
        self.groups = FeatureGroups.for_columns(dataset.columns)
        self.seed = seed
        self.folds = stratified_kfold(dataset.y, self.spec.folds, child_rng(seed, "fitness", "folds"))
        self._cache: dict[bytes, float] = {}

    @property
    def n_features(self) -> int:
        return len(self.groups)

    @property
    def evaluations(self) -> int:
        return len(self._cache)

    def __call__(self, mask) -> float:
        mask = _check_mask(mask, self.n_features)
        key = np.packbits(mask).tobytes()
        if key not in self._cache:
            data = project(self.dataset, mask)
            self._cache[key] = _inner_cv_accuracy(data, self.folds, self.spec,
                                                  child_rng(self.seed, "fitness", "train"))
        return self._cache[key]


@dataclass
class SearchConfig:
    algorithm: str = "GA"
    population: int = 100
    epochs: int = 500
    seed: int = 0
    tournament_size: int = 3
    crossover_rate: float = 0.9
    mutation_rate: float | None = None  # None = 1 / n_features
    elitism: int = 1
    inertia: float = 0.7
    c1: float = 1.5
    c2: float = 1.5
    velocity_clamp: float = 4.0
    initial_velocity: float = 1.0  # velocities start uniform in [-v, v]
    fitness: FitnessSpec = field(default_factory=FitnessSpec)

    def __post_init__(self):
        if isinstance(self.fitness, dict):
            self.fitness = FitnessSpec(**self.fitness)
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {{{', '.join(ALGORITHMS)}}}")
        if self.population < 1 or (self.algorithm == "GA" and self.population < 2):
            raise ValueError("population must be >= 2 (a PSO swarm may have 1 particle)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0 <= self.elitism <= self.population:
            raise ValueError("elitism must lie in [0, population]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SelectionResult:
    algorithm: str
    names: tuple[str, ...]
    mask: np.ndarray
    fitness: float
    trace: list[float]
    evaluations: int

    @property
    def selected(self) -> list[str]:
        return [n for n, bit in zip(self.names, self.mask) if bit]

    def mask_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["feature", "selected"])
        bits = dict(zip(self.names, self.mask))
        order = MASK_ROW_ORDER if sorted(self.names) == sorted(MASK_ROW_ORDER) else self.names
        for name in order:
            writer.writerow([name, int(bits[name])])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, "selected": self.selected, "mask": self.mask.astype(int).tolist(),
                "fitness": self.fitness, "trace": self.trace, "evaluations": self.evaluations}


def _repair(masks: np.ndarray, rng) -> np.ndarray:
    """Switch on one random bit in any all-zero row."""
    for row in np.flatnonzero(~masks.any(axis=1)):
        masks[row, rng.integers(masks.shape[1])] = True
    return masks


def _initial_masks(n_masks, n_features, rng) -> np.ndarray:
    return _repair(rng.random((n_masks, n_features)) < 0.5, rng)


def _tournament(scores, size, rng) -> int:
    picks = rng.integers(len(scores), size=size)
    return int(picks[np.argmax(scores[picks])])


def ga_select(fitness: WrapperFitness, config: SearchConfig) -> SelectionResult:
    """Generational GA; epoch 1 evaluates the initial population, each later epoch one offspring generation."""
    rng = child_rng(config.seed, "ga")
    n = fitness.n_features
    p_mut = config.mutation_rate if config.mutation_rate is not None else 1.0 / n
    pop = _initial_masks(config.population, n, rng)
    scores = np.array([fitness(m) for m in pop])
    best = int(np.argmax(scores))
    best_mask, best_fit = pop[best].copy(), float(scores[best])
    trace = [best_fit]
    for _ in range(config.epochs - 1):
        order = np.argsort(-scores, kind="stable")
        children = [pop[i].copy() for i in order[:config.elitism]]
        while len(children) < config.population:
            a = pop[_tournament(scores, config.tournament_size, rng)]
            b = pop[_tournament(scores, config.tournament_size, rng)]
            if rng.random() < config.crossover_rate:
                child = np.where(rng.random(n) < 0.5, a, b)
            else:
                child = a.copy()
            child ^= rng.random(n) < p_mut
            children.append(child)
        pop = _repair(np.array(children), rng)
        scores = np.array([fitness(m) for m in pop])
        i = int(np.argmax(scores))
        if scores[i] > best_fit:
            best_mask, best_fit = pop[i].copy(), float(scores[i])
        trace.append(best_fit)
    return SelectionResult("GA", fitness.groups.names, best_mask, best_fit, trace, fitness.evaluations)


def pso_select(fitness: WrapperFitness, config: SearchConfig) -> SelectionResult:
    """Binary PSO: clamped velocities, positions resampled through a sigmoid each epoch."""
    rng = child_rng(config.seed, "pso")
    n = fitness.n_features
    x = _initial_masks(config.population, n, rng)
    v = rng.uniform(-config.initial_velocity, config.initial_velocity, size=x.shape)
    scores = np.array([fitness(m) for m in x])
    pbest, pbest_fit = x.copy(), scores.copy()
    g = int(np.argmax(scores))
    gbest, gbest_fit = x[g].copy(), float(scores[g])
    trace = [gbest_fit]
    for _ in range(config.epochs - 1):
        r1, r2 = rng.random(x.shape), rng.random(x.shape)
        xf = x.astype(np.float64)
        v = config.inertia * v + config.c1 * r1 * (pbest - xf) + config.c2 * r2 * (gbest - xf)
        np.clip(v, -config.velocity_clamp, config.velocity_clamp, out=v)
        x = _repair(rng.random(x.shape) < 1.0 / (1.0 + np.exp(-v)), rng)
        scores = np.array([fitness(m) for m in x])
        improved = scores > pbest_fit
        pbest[improved], pbest_fit[improved] = x[improved], scores[improved]
        i = int(np.argmax(pbest_fit))
        if pbest_fit[i] > gbest_fit:
            gbest, gbest_fit = pbest[i].copy(), float(pbest_fit[i])
        trace.append(gbest_fit)
    return SelectionResult("PSO", fitness.groups.names, gbest, gbest_fit, trace, fitness.evaluations)


def select_features(dataset: EncodedDataset, config: SearchConfig) -> SelectionResult:
    fitness = WrapperFitness(dataset, config.fitness, config.seed)
    run = ga_select if config.algorithm == "GA" else pso_select
    return run(fitness, config)


def exhaustive_best(fitness: WrapperFitness) -> tuple[float, list[np.ndarray]]:
    """Brute-force optimum over all non-empty masks (small problems only)."""
    n = fitness.n_features
    if n > 16:
        raise ValueError(f"exhaustive search over {n} features is impractical")
    best, winners = -1.0, []
    for code in range(1, 2 ** n):
        mask = np.array([(code >> j) & 1 for j in range(n)], dtype=bool)
        f = fitness(mask)
        if f > best + 1e-12:
            best, winners = f, [mask]
        elif abs(f - best) <= 1e-12:
            winners.append(mask)
    return best, winners


def planted_problem(seed: int, n_samples: int = 300, n_features: int = 10,
                    informative: tuple[int, ...] = (0, 1, 2), flip: float = 0.05) -> EncodedDataset:
    """Random binary features; the label is the majority vote of ``informative`` with label noise."""
    rng = child_rng(seed, "planted")
    X = (rng.random((n_samples, n_features)) < 0.5).astype(np.float64)
    votes = X[:, list(informative)].sum(axis=1)
    y = (votes > len(informative) / 2).astype(np.int64)
    y ^= (rng.random(n_samples) < flip).astype(np.int64)
    return EncodedDataset(X, y, columns=tuple(f"f{j}" for j in range(n_features)))
