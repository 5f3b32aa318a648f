"""``gentrap`` command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 training divergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import shutil
import sys
from pathlib import Path

import numpy as np

from ..dataset import (
    TABLE_FILES,
    FeatureEncoder,
    FoldSplit,
    SampleSet,
    check_fold,
    load_tables,
    preprocess,
    rolling_origin_folds,
)
from ..errors import ConfigError, DataError, GentrapError, TrainingDivergence
from ..models import build_model
from ..synthgen import generate
from ..training import evaluate, run_comparison, run_generalization, run_model
from .config import RunConfig, load_config

log = logging.getLogger("gentrap")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3
COMMANDS = ("generate", "preprocess", "train", "evaluate", "compare", "generalize")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gentrap", description="Radio link failure prediction from link KPIs and nearby weather.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="YAML or JSON run configuration (defaults apply when omitted)")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out", help="overrides the config output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel training jobs for compare / generalize")
    p.add_argument("--dry-run", action="store_true", help="validate the configuration and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


# -- helpers -------------------------------------------------------------------------

def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _save_config(cfg: RunConfig) -> None:
    cfg.out.mkdir(parents=True, exist_ok=True)
    if cfg.source:
        src = Path(cfg.source)
        dst = cfg.out / f"config{src.suffix or '.yaml'}"
        if src.resolve() != dst.resolve():
            shutil.copyfile(src, dst)
    _write(cfg.out / "config.resolved.yaml", cfg.dump())


def input_digest(data_dir: Path, cfg: RunConfig) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(vars(cfg.dataset), sort_keys=True).encode())
    for name in sorted(TABLE_FILES.values()):
        path = data_dir / name
        h.update(name.encode())
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    return h.hexdigest()


def _require_tables(data_dir: Path) -> None:
    missing = [n for n in TABLE_FILES.values() if not (data_dir / n).is_file()]
    if missing:
        raise DataError(f"{data_dir}: missing table file(s) {missing}; run `gentrap generate` or set data_dir")


def load_store(cfg: RunConfig) -> tuple[SampleSet, list[FoldSplit]]:
    samples_path, folds_path = cfg.store / "samples.npz", cfg.store / "folds.json"
    if not samples_path.is_file() or not folds_path.is_file():
        raise DataError(f"no preprocessed store under {cfg.store}; run `gentrap preprocess` first")
    samples = SampleSet.load(samples_path)
    folds = [FoldSplit.from_dict(d) for d in json.loads(folds_path.read_text())["folds"]]
    return samples, folds


def _fold(folds: list[FoldSplit], i: int) -> FoldSplit:
    for f in folds:
        if f.fold_index == i:
            return f
    raise ConfigError(f"fold {i} is not in the preprocessed manifest")


def _write_reports(directory: Path, stem: str, report) -> None:
    _write(directory / f"{stem}.json", report.to_json() + "\n")
    _write(directory / f"{stem}.csv", report.to_csv())
    _write(directory / f"{stem}.txt", report.render() + "\n")


def _write_trace(path: Path, rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["epoch", "loss", "val_precision", "val_recall", "val_f1"],
                           lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


# -- commands --------------------------------------------------------------------------

def cmd_generate(cfg: RunConfig, args) -> int:
    scenario = generate(cfg.scenario)
    out = scenario.write(cfg.data)
    rate = scenario.truth.realized_rate
    print(f"wrote scenario to {out}: {len(scenario.truth.link_keys)} links, {cfg.scenario.n_days} days, "
          f"realized failure rate {rate:.5f} (target {cfg.scenario.target_failure_rate})")
    return EXIT_OK


def cmd_preprocess(cfg: RunConfig, args) -> int:
    _require_tables(cfg.data)
    digest = input_digest(cfg.data, cfg)
    stamp = cfg.store / "input.sha256"
    if stamp.is_file() and stamp.read_text().strip() == digest and (cfg.store / "samples.npz").is_file() \
            and (cfg.store / "folds.json").is_file():
        print(f"{cfg.store} is up to date (inputs unchanged)")
        return EXIT_OK
    d = cfg.dataset
    samples, report = preprocess(load_tables(cfg.data), d.window, d.max_k, d.drop_threshold)
    if len(samples) == 0:
        raise DataError("preprocessing produced no samples")
    folds = rolling_origin_folds(samples.anchor_dates, d.n_folds)
    for f in folds:
        check_fold(f, samples.anchor_dates)
    cfg.store.mkdir(parents=True, exist_ok=True)
    samples.save(cfg.store / "samples.npz")
    manifest = {"folds": [f.to_dict(samples.anchor_dates) for f in folds]}
    _write(cfg.store / "folds.json", json.dumps(manifest) + "\n")
    _write(cfg.store / "report.json", report.to_json() + "\n")
    _write(stamp, digest + "\n")
    dropped = {t: v for t, v in report.dropped_features.items() if v}
    print(f"{report.n_samples} samples, {report.n_failures} failures, class ratio {report.class_ratio:.5f}; "
          f"dropped features: {dropped or 'none'}")
    return EXIT_OK


def cmd_train(cfg: RunConfig, args) -> int:
    samples, folds = load_store(cfg)
    e = cfg.experiment
    fold = _fold(folds, e.fold)
    outcome = run_model(e.model, samples, fold, cfg.model, cfg.train)
    ckpt = cfg.checkpoint_path()
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    outcome.result.model.save(ckpt)
    meta = {"model": e.model, "fold": e.fold, "threshold": outcome.result.threshold,
            "best_epoch": outcome.result.best_epoch, "lambda": outcome.result.lam,
            "encoder": outcome.encoder.to_dict()}
    _write(ckpt.with_suffix(".json"), json.dumps(meta) + "\n")
    _write_trace(ckpt.with_suffix(".trace.csv"), outcome.result.trace_rows())
    metrics = {"test": outcome.test.to_dict(), "validation": outcome.validation.to_dict()}
    _write(cfg.out / "reports" / f"train-{e.model}-fold{e.fold}.json", json.dumps(metrics, indent=2) + "\n")
    print(f"{e.model} fold {e.fold}: best epoch {outcome.result.best_epoch}, "
          f"validation macro-F1 {outcome.validation.f1:.4f}, test macro-F1 {outcome.test.f1:.4f}; "
          f"checkpoint {ckpt}")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig, args) -> int:
    ckpt = cfg.checkpoint_path()
    meta_path = ckpt.with_suffix(".json")
    if not ckpt.is_file() or not meta_path.is_file():
        raise DataError(f"checkpoint {ckpt} (with {meta_path.name}) not found; run `gentrap train` first")
    meta = json.loads(meta_path.read_text())
    samples, folds = load_store(cfg)
    fold = _fold(folds, int(meta["fold"]))
    enc = FeatureEncoder.from_dict(meta["encoder"])
    batch = enc.encode(samples, fold.test, np.float32)
    model = build_model(meta["model"], cfg.model, batch.pairs.shape[-1], batch.temporal.shape[-1],
                        batch.static.shape[-1], seed=cfg.seed, dtype=np.float32)
    model.load(ckpt).eval()
    report = evaluate(model, batch, meta.get("threshold"), fold=fold.fold_index)
    _write(cfg.out / "reports" / f"evaluate-{meta['model']}-fold{fold.fold_index}.json",
           json.dumps(report.to_dict(), indent=2) + "\n")
    print(f"{meta['model']} fold {fold.fold_index} test: precision {report.precision:.4f} "
          f"recall {report.recall:.4f} macro-F1 {report.f1:.4f}")
    return EXIT_OK


def cmd_compare(cfg: RunConfig, args) -> int:
    samples, folds = load_store(cfg)
    chosen = [_fold(folds, i) for i in cfg.experiment.folds]
    report, _ = run_comparison(cfg.experiment.models, samples, chosen, cfg.model, cfg.train, jobs=args.jobs)
    _write_reports(cfg.out / "reports", "comparison", report)
    print(report.render())
    return EXIT_OK


def cmd_generalize(cfg: RunConfig, args) -> int:
    samples, folds = load_store(cfg)
    fold = _fold(folds, cfg.experiment.fold)
    report, _ = run_generalization(cfg.experiment.generalize_models, samples, fold, cfg.experiment.fractions,
                                   cfg.model, cfg.train, jobs=args.jobs)
    _write_reports(cfg.out / "reports", "generalization", report)
    print(report.render())
    return EXIT_OK


HANDLERS = {"generate": cmd_generate, "preprocess": cmd_preprocess, "train": cmd_train,
            "evaluate": cmd_evaluate, "compare": cmd_compare, "generalize": cmd_generalize}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = cfg.with_overrides(args.seed, args.out)
        if args.dry_run:
            print(cfg.dump(), end="")
            print(f"# {args.command}: configuration is valid (dry run, nothing executed)")
            return EXIT_OK
        _save_config(cfg)
        return HANDLERS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergence as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (GentrapError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
