"""Model-comparison and link-fraction generalization drivers plus their reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..dataset import FeatureEncoder, FoldSplit, SampleSet
from ..errors import ConfigError
from ..models import ModelConfig, build_model
from .loop import TrainConfig, TrainResult, evaluate, fit_ae_and_threshold, train
from .metrics import MetricsReport

log = logging.getLogger(__name__)

COMPARISON_MODELS = ("gentrap", "gen_lstmplus", "lstmplus", "gnn_lstmae", "lstmae")
FRACTIONS = (0.5, 0.4, 0.3, 0.2, 0.1)


@dataclass
class RunOutcome:
    tag: str
    fold: int
    test: MetricsReport
    validation: MetricsReport
    result: TrainResult
    encoder: FeatureEncoder
    fraction: float | None = None


def run_model(tag: str, samples: SampleSet, fold: FoldSplit, model_cfg: ModelConfig,
              train_cfg: TrainConfig, train_idx: np.ndarray | None = None,
              val_idx: np.ndarray | None = None, dtype=np.float32) -> RunOutcome:
    """Fit ``tag`` on the fold's training split (optionally restricted) and score it on the test split."""
    tr = fold.train if train_idx is None else train_idx
    va = fold.validation if val_idx is None else val_idx
    enc = FeatureEncoder.fit(samples, tr)
    tb, vb, sb = enc.encode(samples, tr, dtype), enc.encode(samples, va, dtype), enc.encode(samples, fold.test, dtype)
    model = build_model(tag, model_cfg, tb.pairs.shape[-1], tb.temporal.shape[-1], tb.static.shape[-1],
                        seed=train_cfg.seed, dtype=dtype)
    if model.kind == "autoencoder":
        res = fit_ae_and_threshold(model, tb, vb, train_cfg)
    else:
        res = train(model, tb, vb, train_cfg)
    test = evaluate(res.model, sb, res.threshold, fold=fold.fold_index)
    val = evaluate(res.model, vb, res.threshold, fold=fold.fold_index)
    log.info("%s fold %d: test macro-F1 %.4f (val %.4f, best epoch %d)",
             tag, fold.fold_index, test.f1, val.f1, res.best_epoch)
    return RunOutcome(tag, fold.fold_index, test, val, res, enc)


def _run_job(args):
    return run_model(*args)


def _map(jobs: int, arglist: list):
    if jobs <= 1 or len(arglist) <= 1:
        return [_run_job(a) for a in arglist]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_job, arglist))


# -- reports -------------------------------------------------------------------

@dataclass
class ComparisonReport:
    """Rows are models; each fold contributes a precision / recall / F1 column group."""

    rows: list[MetricsReport] = field(default_factory=list)

    @property
    def models(self) -> list[str]:
        return list(dict.fromkeys(r.model for r in self.rows))

    @property
    def folds(self) -> list[int]:
        return sorted({r.fold for r in self.rows})

    def get(self, model: str, fold: int) -> MetricsReport:
        for r in self.rows:
            if r.model == model and r.fold == fold:
                return r
        raise KeyError((model, fold))

    def table(self) -> list[dict]:
        out = []
        for m in self.models:
            row = {"model": m}
            for f in self.folds:
                r = self.get(m, f)
                row[f"fold{f}_precision"] = r.precision
                row[f"fold{f}_recall"] = r.recall
                row[f"fold{f}_f1"] = r.f1
            out.append(row)
        return out

    def to_json(self) -> str:
        return json.dumps({"table": self.table(), "runs": [r.to_dict() for r in self.rows]}, indent=2)

    def to_csv(self) -> str:
        return _csv(self.table())

    def render(self) -> str:
        header = f"{'model':<14}" + "".join(f"| fold {f}: P      R      F1    " for f in self.folds)
        lines = [header, "-" * len(header)]
        for m in self.models:
            cells = "".join(f"| {self.get(m, f).precision:.4f} {self.get(m, f).recall:.4f} {self.get(m, f).f1:.4f} "
                            for f in self.folds)
            lines.append(f"{m:<14}" + cells)
        return "\n".join(lines)


@dataclass
class GeneralizationReport:
    """Rows are link fractions (largest first); one macro P/R/F1 group per model."""

    rows: list[tuple[float, MetricsReport]] = field(default_factory=list)

    @property
    def fractions(self) -> list[float]:
        return sorted({f for f, _ in self.rows}, reverse=True)

    @property
    def models(self) -> list[str]:
        return list(dict.fromkeys(r.model for _, r in self.rows))

    def get(self, fraction: float, model: str) -> MetricsReport:
        for f, r in self.rows:
            if math.isclose(f, fraction) and r.model == model:
                return r
        raise KeyError((fraction, model))

    def table(self) -> list[dict]:
        out = []
        for f in self.fractions:
            row = {"fraction": f}
            for m in self.models:
                r = self.get(f, m)
                row[f"{m}_precision"] = r.precision
                row[f"{m}_recall"] = r.recall
                row[f"{m}_f1"] = r.f1
            out.append(row)
        return out

    def to_json(self) -> str:
        runs = [dict(r.to_dict(), fraction=f) for f, r in self.rows]
        return json.dumps({"table": self.table(), "runs": runs}, indent=2)

    def to_csv(self) -> str:
        return _csv(self.table())

    def render(self) -> str:
        header = f"{'fraction':<9}" + "".join(f"| {m}: P      R      F1    " for m in self.models)
        lines = [header, "-" * len(header)]
        for f in self.fractions:
            cells = "".join(f"| {self.get(f, m).precision:.4f} {self.get(f, m).recall:.4f} {self.get(f, m).f1:.4f} "
                            for m in self.models)
            lines.append(f"{f:<9}" + cells)
        return "\n".join(lines)


def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


# -- drivers ----------------------------------------------------------------------

def run_comparison(tags, samples: SampleSet, folds: list[FoldSplit], model_cfg: ModelConfig,
                   train_cfg: TrainConfig, jobs: int = 1) -> tuple[ComparisonReport, list[RunOutcome]]:
    args = [(t, samples, f, model_cfg, train_cfg) for t in tags for f in folds]
    outcomes = _map(jobs, args)
    return ComparisonReport([o.test for o in outcomes]), outcomes


def nested_link_subsets(link_keys, fractions, seed: int) -> dict[float, set]:
    """One seeded permutation of the links; fraction f keeps its first ceil(f * n) entries.

    Smaller fractions are therefore always subsets of larger ones.
    """
    keys = sorted(set(link_keys))
    order = np.random.default_rng(seed).permutation(len(keys))
    out = {}
    for f in fractions:
        if not 0 < f <= 1:
            raise ConfigError(f"fraction must lie in (0, 1], got {f}")
        n = max(1, math.ceil(f * len(keys)))
        out[f] = {keys[i] for i in order[:n]}
    return out


def run_generalization(tags, samples: SampleSet, fold: FoldSplit, fractions, model_cfg: ModelConfig,
                       train_cfg: TrainConfig, seed: int | None = None,
                       jobs: int = 1) -> tuple[GeneralizationReport, list[RunOutcome]]:
    """Train on a nested random subset of links, test on every link of the fold's test split."""
    seed = train_cfg.seed if seed is None else seed
    keys = samples.link_key_strings()
    subsets = nested_link_subsets(keys, fractions, seed)
    args = []
    for f in fractions:
        keep = np.isin(keys, sorted(subsets[f]))
        tr = fold.train[keep[fold.train]]
        va = fold.validation[keep[fold.validation]]
        if samples.labels[tr].sum() == 0:
            raise ConfigError(f"fraction {f} leaves no failure events in the training split")
        args.extend((t, samples, fold, model_cfg, train_cfg, tr, va) for t in tags)
    outcomes = _map(jobs, args)
    rows = []
    i = 0
    for f in fractions:
        for _ in tags:
            outcomes[i].fraction = f
            rows.append((f, outcomes[i].test))
            i += 1
    return GeneralizationReport(rows), outcomes
