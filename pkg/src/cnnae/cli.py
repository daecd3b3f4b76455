"""Command-line front end: synth, analyze, augment, train, reproduce, select.

Every command writes fixed filenames under ``--out``:

    synth      cohort.csv, summary.json
    analyze    ig_ranking.csv, ig_bars.csv, correlation.csv, correlation_flags.csv, analysis.json
    augment    augmented.csv, augmentation.json
    train      model.json, curves.csv, training.json
    reproduce  report_plain.json, report_augmented.json, curves_plain.csv, curves_augmented.csv,
               comparison.csv, timings.json
    select     mask.csv, selection.json, select_report_plain.json, select_report_augmented.json,
               select_curves_plain.csv, select_curves_augmented.csv, select_comparison.csv,
               select_timings.json

Only comparison tables and timings files carry wall-clock numbers; the other
artifacts are a pure function of the resolved config and the input files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import correlation_matrix, rank_features
from .augmentation import Augmenter, AutoencoderSpec
from .dataset import (DataError, GeneratorConfig, encode_all, format_csv, format_encoded_csv,
                      generate_synthetic, parse_csv, stratified_split, summarize)
from .evaluation import PERCENT_METRICS, CvSettings, EvaluationReport, run_cross_validation
from .io import atomic_write_text, write_json
from .models import KINDS, CnnConfig, MlpConfig, train
from .selection import ALGORITHMS, FitnessSpec, SearchConfig, project, select_features
from .seeding import child_rng

LABELS = {"cnn": "CNN", "mlp": "MLP", "naive_bayes": "Naive Bayes"}
# execution settings that do not change any result
_EXECUTION_KEYS = ("out", "jobs")


@dataclass
class SelectionSettings:
    algorithm: str = "GA"
    population: int = 100
    epochs: int = 500
    fitness_kind: str = "naive_bayes"
    fitness_folds: int = 3


@dataclass
class ExperimentConfig:
    seed: int = 1
    data: str | None = None  # cohort CSV; None = synthetic
    generator: str | None = None  # GeneratorConfig JSON; None = packaged default
    generator_seed: int | None = None
    n_recovered: int | None = None
    n_deceased: int | None = None
    kind: str = "cnn"
    augment: bool = True
    augment_mode: str = "faithful"
    folds: int = 10
    epochs: int = 100
    batch_size: int = 32
    val_fraction: float = 0.2
    filters: int = 256
    ae_epochs: int = 100
    ae_batch_size: int = 32
    selection: SelectionSettings = field(default_factory=SelectionSettings)
    out: str = "out"
    jobs: int | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ValueError(f"unknown config key(s): {', '.join(unknown)}")
        doc = dict(doc)
        if "selection" in doc:
            sel = doc["selection"]
            sel_known = {f.name for f in fields(SelectionSettings)}
            bad = sorted(set(sel) - sel_known)
            if bad:
                raise ValueError(f"unknown selection key(s): {', '.join(bad)}")
            doc["selection"] = SelectionSettings(**sel)
        return cls(**doc)

    def provenance(self) -> dict:
        doc = asdict(self)
        for key in _EXECUTION_KEYS:
            doc.pop(key)
        return doc

    def resolved_jobs(self) -> int:
        return self.jobs or os.cpu_count() or 1

    def validate(self) -> None:
        if self.seed is None:
            raise ValueError("a master seed is required")
        for name in ("data", "generator"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise FileNotFoundError(f"{name} file not found: {path}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}; expected one of {KINDS}")
        if self.augment_mode not in ("faithful", "strict"):
            raise ValueError("augment_mode must be 'faithful' or 'strict'")
        if self.folds < 2 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("folds must be >= 2 and epochs, batch_size >= 1")
        if self.jobs is not None and self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def cv_settings(self) -> CvSettings:
        return CvSettings(kind=self.kind, k=self.folds, epochs=self.epochs, val_fraction=self.val_fraction,
                          mode=self.augment_mode,
                          cnn=CnnConfig(filters=self.filters, epochs=self.epochs, batch_size=self.batch_size),
                          mlp=MlpConfig(epochs=self.epochs, batch_size=self.batch_size),
                          batch_size=self.batch_size)

    def augmenter(self) -> Augmenter:
        return Augmenter(AutoencoderSpec(epochs=self.ae_epochs, batch_size=self.ae_batch_size))

    def generator_config(self) -> GeneratorConfig:
        cfg = GeneratorConfig.load(self.generator)
        for name in ("n_recovered", "n_deceased"):
            if getattr(self, name) is not None:
                setattr(cfg, name, getattr(self, name))
        if self.generator_seed is not None:
            cfg.seed = self.generator_seed
        cfg.__post_init__()
        return cfg


def load_records(config: ExperimentConfig):
    if config.data is not None:
        return parse_csv(config.data)
    return generate_synthetic(config.generator_config())


def _envelope(config: ExperimentConfig, **body) -> dict:
    return {"cnnae_version": __version__, "seed": config.seed, "config": config.provenance(), **body}


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_synth(config: ExperimentConfig) -> list[Path]:
    gen = config.generator_config()
    records = generate_synthetic(gen)
    out = Path(config.out)
    atomic_write_text(out / "cohort.csv", format_csv(records))
    write_json(out / "summary.json", _envelope(config, generator=gen.to_dict(),
                                               summary=summarize(records).to_dict()))
    return [out / "cohort.csv", out / "summary.json"]


def cmd_analyze(config: ExperimentConfig) -> list[Path]:
    records = load_records(config)
    ranking = rank_features(records)
    corr = correlation_matrix(records)
    out = Path(config.out)
    files = {"ig_ranking.csv": ranking.to_csv(), "ig_bars.csv": ranking.bars_csv(),
             "correlation.csv": corr.to_csv(), "correlation_flags.csv": corr.flags_csv()}
    for name, text in files.items():
        atomic_write_text(out / name, text)
    write_json(out / "analysis.json", _envelope(
        config, ranking=[{"feature": n, "ig_bits": v} for n, v in ranking.entries],
        zero_variance=[n for n, z in zip(corr.names, corr.zero_variance) if z]))
    return [out / n for n in files] + [out / "analysis.json"]


def cmd_augment(config: ExperimentConfig) -> list[Path]:
    data = encode_all(load_records(config))
    assembled, ensemble = config.augmenter()(data, child_rng(config.seed, "augment"))
    n_rec, n_dec = assembled.counts()
    out = Path(config.out)
    atomic_write_text(out / "augmented.csv", format_encoded_csv(assembled))
    write_json(out / "augmentation.json", _envelope(
        config, n_original=len(data), n_reconstructed=int(np.sum(assembled.origin == "Reconstructed")),
        n_assembled=len(assembled), n_recovered=n_rec, n_deceased=n_dec,
        train_sizes=[len(data.class_indices(ensemble.majority_label)) - len(g) for g in ensemble.partition_log],
        ensemble=ensemble.log_dict()))
    return [out / "augmented.csv", out / "augmentation.json"]


def _curves_text(history, fold=0) -> str:
    report = EvaluationReport("train", [], curves=[{"fold": fold, **row} for row in history])
    return report.curves_csv()


def cmd_train(config: ExperimentConfig) -> list[Path]:
    """Fit one classifier on a train/validation split of the (optionally augmented) dataset."""
    data = encode_all(load_records(config))
    if config.augment:
        data, _ = config.augmenter()(data, child_rng(config.seed, "augment"))
    rest, held = stratified_split(data.y, config.val_fraction, child_rng(config.seed, "train", "split"))
    settings = config.cv_settings()
    clf = train(config.kind, data[rest], data[held], config.epochs, child_rng(config.seed, "train", "fit"),
                cnn_config=settings.cnn, mlp_config=settings.mlp, batch_size=config.batch_size)
    out = Path(config.out)
    atomic_write_text(out / "model.json", clf.dumps())
    atomic_write_text(out / "curves.csv", _curves_text(clf.history))
    write_json(out / "training.json", _envelope(config, n_train=len(rest), n_val=len(held),
                                                final=clf.history[-1] if clf.history else None))
    return [out / "model.json", out / "curves.csv", out / "training.json"]


def method_names(kind: str, prefix: str = "") -> tuple[str, str]:
    label = LABELS[kind]
    augmented = "CNN-AE" if kind == "cnn" else f"{label}+AE"
    return prefix + label, prefix + augmented


def comparison_csv(reports: list[EvaluationReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["Method", "Accuracy", "PPV", "Recall", "Specificity", "F1", "AUC", "Loss", "Time"])
    for rep in reports:
        ci = rep.ci()
        row = [rep.method] + [f"{ci[m]['mean']:.2f} ± {ci[m]['half_width']:.2f}" for m in PERCENT_METRICS]
        row.append(f"{ci['loss']['mean']:.4f} ± {ci['loss']['half_width']:.4f}")
        row.append(f"{ci['train_time']['mean']:.2f}")
        writer.writerow(row)
    return buf.getvalue()


def _run_arms(config: ExperimentConfig, data, prefix: str, method_prefix: str = "") -> list[Path]:
    settings = config.cv_settings()
    plain_name, aug_name = method_names(config.kind, method_prefix)
    arms = [("plain", None, plain_name)]
    if config.augment:
        arms.append(("augmented", config.augmenter(), aug_name))
    out = Path(config.out)
    reports, written = [], []
    for arm, augmenter, name in arms:
        rep = run_cross_validation(data, settings, config.seed, augmenter=augmenter,
                                   jobs=config.resolved_jobs(), method=name)
        reports.append(rep)
        write_json(out / f"{prefix}report_{arm}.json", _envelope(config, arm=arm, report=rep.to_dict()))
        atomic_write_text(out / f"{prefix}curves_{arm}.csv", rep.curves_csv())
        written += [out / f"{prefix}report_{arm}.json", out / f"{prefix}curves_{arm}.csv"]
    atomic_write_text(out / f"{prefix}comparison.csv", comparison_csv(reports))
    write_json(out / f"{prefix}timings.json", {r.method: r.timings() for r in reports})
    return written + [out / f"{prefix}comparison.csv", out / f"{prefix}timings.json"]


def cmd_reproduce(config: ExperimentConfig) -> list[Path]:
    return _run_arms(config, encode_all(load_records(config)), "")


def cmd_select(config: ExperimentConfig) -> list[Path]:
    data = encode_all(load_records(config))
    sel = config.selection
    search = SearchConfig(algorithm=sel.algorithm, population=sel.population, epochs=sel.epochs,
                          seed=config.seed, fitness=FitnessSpec(kind=sel.fitness_kind, folds=sel.fitness_folds))
    result = select_features(data, search)
    out = Path(config.out)
    atomic_write_text(out / "mask.csv", result.mask_csv())
    write_json(out / "selection.json", _envelope(config, search=search.to_dict(), result=result.to_dict()))
    written = _run_arms(config, project(data, result.mask), "select_", method_prefix=f"{sel.algorithm}+")
    return [out / "mask.csv", out / "selection.json"] + written


HELP = {"synth": "write a synthetic cohort CSV and its summary",
        "analyze": "information-gain ranking and correlation matrix",
        "augment": "train the autoencoder ensemble and write the rebalanced dataset",
        "train": "fit one classifier and serialize it",
        "reproduce": "cross-validate the plain and augmented arms side by side",
        "select": "GA/PSO feature selection, then retrain both arms on the selected features"}

COMMANDS = {"synth": cmd_synth, "analyze": cmd_analyze, "augment": cmd_augment,
            "train": cmd_train, "reproduce": cmd_reproduce, "select": cmd_select}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # defaults are None so that only flags actually given override the config file
    common.add_argument("--config", help="experiment config JSON")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, help="worker processes for folds (default: all cores)")
    common.add_argument("--augment-mode", choices=("faithful", "strict"), dest="augment_mode")
    common.add_argument("--augment", type=_on_off, help="on|off")
    common.add_argument("--data", help="cohort CSV instead of the synthetic generator")
    common.add_argument("--generator", help="GeneratorConfig JSON")
    common.add_argument("--generator-seed", type=int, dest="generator_seed")
    common.add_argument("--n-recovered", type=int, dest="n_recovered")
    common.add_argument("--n-deceased", type=int, dest="n_deceased")
    common.add_argument("--kind", choices=KINDS)
    common.add_argument("--folds", type=int)
    common.add_argument("--epochs", type=int)
    common.add_argument("--batch-size", type=int, dest="batch_size")
    common.add_argument("--val-fraction", type=float, dest="val_fraction")
    common.add_argument("--filters", type=int, help="Conv1D filters per layer")
    common.add_argument("--ae-epochs", type=int, dest="ae_epochs")
    common.add_argument("--ae-batch-size", type=int, dest="ae_batch_size")

    parser = argparse.ArgumentParser(prog="cnnae", description="CNN-AE survival classification pipeline")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=HELP[name])
        if name == "select":
            p.add_argument("--algorithm", choices=ALGORITHMS)
            p.add_argument("--population", type=int)
            p.add_argument("--search-epochs", type=int, dest="search_epochs")
            p.add_argument("--fitness-kind", choices=KINDS, dest="fitness_kind")
    return parser


_SELECTION_FLAGS = {"algorithm": "algorithm", "population": "population",
                    "search_epochs": "epochs", "fitness_kind": "fitness_kind"}


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    doc = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ValueError("config file must hold a JSON object")
    config = ExperimentConfig.from_dict(doc)
    for f in fields(ExperimentConfig):
        value = getattr(args, f.name, None)
        if value is not None and f.name != "selection":
            setattr(config, f.name, value)
    for flag, name in _SELECTION_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(config.selection, name, value)
    return config


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
    except FileNotFoundError as exc:
        print(f"cnnae: error: config file not found: {exc.filename}", file=sys.stderr)
        return 1
    except (ValueError, TypeError) as exc:
        parser.error(str(exc))
    if config.selection.algorithm not in ALGORITHMS:
        parser.error(f"unknown algorithm {config.selection.algorithm!r}; choose from {{{', '.join(ALGORITHMS)}}}")
    try:
        config.validate()
        COMMANDS[args.command](config)
    except (OSError, DataError, ValueError) as exc:
        message = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"cnnae: error: {message}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
