"""Seeded hyperparameter search over the four tunable detector parameters.

The trial schedule is fixed by the seed before any evaluation runs: a short
deterministic probe list (defaults and corners) followed by random draws from
the search space.  Growing the budget only appends trials, so the best score
is monotone in budget and re-runs reproduce byte-identical reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import ArgumentError
from .metrics import EvalConfig, evaluate_dataset
from .pipeline import (
    BipecConfig,
    config_fingerprint,
    config_from_dict,
    config_to_dict,
    detect_batch,
)


@dataclass(frozen=True)
class SearchSpace:
    pen_range: tuple[float, float] = (0.1, 100.0)
    window_sizes: tuple[int | None, ...] = (None, 25, 50, 100)
    chunk_sizes: tuple[int, ...] = (0, 200, 500)
    log_odds_thresholds: tuple[float, float] = (0.0, 10.0)
    fixed: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0 < self.pen_range[0] < self.pen_range[1]:
            raise ArgumentError(f"pen_range must be 0 < lo < hi, got {self.pen_range}")
        if not self.log_odds_thresholds[0] < self.log_odds_thresholds[1]:
            raise ArgumentError(
                f"log_odds_thresholds must be lo < hi, got {self.log_odds_thresholds}"
            )
        if not self.window_sizes or not self.chunk_sizes:
            raise ArgumentError("choice sets must be non-empty")


@dataclass(frozen=True)
class Trial:
    fingerprint: str
    f1: float
    precision: float
    error_series: tuple[str, ...] = ()


@dataclass(frozen=True)
class TuneReport:
    best: BipecConfig
    best_f1: float
    best_precision: float
    trials: tuple[Trial, ...]
    budget: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "best_config": config_to_dict(self.best),
            "best_fingerprint": config_fingerprint(self.best),
            "best_f1": self.best_f1,
            "best_precision": self.best_precision,
            "budget": self.budget,
            "seed": self.seed,
            "trials": [
                {
                    "fingerprint": t.fingerprint,
                    "f1": t.f1,
                    "precision": t.precision,
                    "error_series": list(t.error_series),
                }
                for t in self.trials
            ],
        }


def objective(
    config: BipecConfig, labeled: Dataset, eval_cfg: EvalConfig
) -> tuple[float, float]:
    """Macro F1 and precision of the config on a labeled dataset."""
    f1, prec, _ = _objective_with_errors(config, labeled, eval_cfg)
    return f1, prec


def _objective_with_errors(
    config: BipecConfig, labeled: Dataset, eval_cfg: EvalConfig
) -> tuple[float, float, tuple[str, ...]]:
    batch = detect_batch(labeled, config)
    predictions = {sid: r.final for sid, r in batch.results.items()}
    # Annotated series whose detection failed are scored 0 by evaluate_dataset
    # simply by being absent from the prediction map.
    report = evaluate_dataset(predictions, labeled, eval_cfg)
    return report.macro_f1, report.macro_precision, tuple(sorted(batch.errors))


def _apply(base: BipecConfig, overrides: dict) -> BipecConfig:
    doc = config_to_dict(base)
    for section, values in overrides.items():
        doc.setdefault(section, {}).update(values)
    return config_from_dict(doc)


def _probe_configs(space: SearchSpace) -> list[BipecConfig]:
    pen_lo, pen_hi = space.pen_range
    thr_lo, thr_hi = space.log_odds_thresholds
    windows = space.window_sizes
    chunks = space.chunk_sizes
    shapes = [
        {},  # documented defaults
        {"pelt": {"pen": pen_lo}, "bayes": {"log_odds_threshold": thr_lo}},
        {"pelt": {"pen": pen_hi}, "bayes": {"log_odds_threshold": thr_hi}},
        {"pelt": {"pen": pen_lo}, "bayes": {"log_odds_threshold": thr_hi}},
        {"pelt": {"pen": pen_hi}, "bayes": {"log_odds_threshold": thr_lo}},
        {
            "bayes": {"window_size": windows[0]},
            "chunking": {"chunk_size": chunks[0]},
        },
        {
            "bayes": {"window_size": windows[-1]},
            "chunking": {"chunk_size": chunks[-1]},
        },
    ]
    probes = []
    for shape in shapes:
        merged = dict(shape)
        for section, values in space.fixed.items():
            merged.setdefault(section, {})
            merged[section] = {**merged[section], **values}
        probes.append(_apply(BipecConfig(), merged))
    return probes


def _sample_config(space: SearchSpace, rng: np.random.Generator) -> BipecConfig:
    pen = math.exp(
        rng.uniform(math.log(space.pen_range[0]), math.log(space.pen_range[1]))
    )
    window = space.window_sizes[int(rng.integers(len(space.window_sizes)))]
    chunk = space.chunk_sizes[int(rng.integers(len(space.chunk_sizes)))]
    threshold = float(rng.uniform(*space.log_odds_thresholds))
    overrides = {
        "pelt": {"pen": pen},
        "bayes": {"window_size": window, "log_odds_threshold": threshold},
        "chunking": {"chunk_size": chunk},
    }
    for section, values in space.fixed.items():
        overrides.setdefault(section, {})
        overrides[section] = {**overrides[section], **values}
    return _apply(BipecConfig(), overrides)


def tune(
    labeled: Dataset,
    space: SearchSpace = SearchSpace(),
    budget: int = 50,
    seed: int = 0,
    eval_cfg: EvalConfig = EvalConfig(),
) -> TuneReport:
    """Evaluate ``budget`` configs and return the best by (F1, precision).

    Ties keep the earliest trial, so defaults win over later lookalikes.
    """
    if budget < 1:
        raise ArgumentError(f"budget must be >= 1, got {budget}")
    if not labeled.series:
        raise ArgumentError("labeled dataset is empty")
    if not any(labeled.annotations_for(s.id) for s in labeled.series):
        raise ArgumentError("labeled dataset has no annotated series")

    probes = _probe_configs(space)[: max(1, budget // 10)]
    rng = np.random.default_rng(seed)
    schedule = list(probes) + [
        _sample_config(space, rng) for _ in range(budget - len(probes))
    ]

    trials: list[Trial] = []
    best_idx = 0
    best_key = (-1.0, -1.0)
    for i, config in enumerate(schedule):
        f1, prec, errs = _objective_with_errors(config, labeled, eval_cfg)
        trials.append(Trial(config_fingerprint(config), f1, prec, errs))
        if (f1, prec) > best_key:
            best_key = (f1, prec)
            best_idx = i

    return TuneReport(
        best=schedule[best_idx],
        best_f1=trials[best_idx].f1,
        best_precision=trials[best_idx].precision,
        trials=tuple(trials),
        budget=budget,
        seed=seed,
    )
