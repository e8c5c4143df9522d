"""Bag-level metrics, cross-validation, hyperparameter grids and baselines."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from .core import NEGATIVE, POSITIVE, Bag, MimnError, Mimn, Model, PotentialSpec
from .data import Dataset, kfold_split
from .features import FeatureMapSpec, Identity
from .inference import predict
from .learning import TrainConfig, train


@dataclass(frozen=True)
class Metrics:
    """Accuracy plus a confusion matrix indexed ``[true, predicted]`` with -1 first."""

    accuracy: float
    confusion: np.ndarray

    @property
    def n(self) -> int:
        return int(self.confusion.sum())

    @classmethod
    def from_labels(cls, true, pred) -> "Metrics":
        true = np.asarray(true)
        pred = np.asarray(pred)
        conf = np.zeros((2, 2), dtype=np.int64)
        for t, p in zip(true, pred):
            conf[int(t == POSITIVE), int(p == POSITIVE)] += 1
        total = conf.sum()
        acc = float(np.trace(conf) / total) if total else 0.0
        return cls(acc, conf)


def predict_bags(model: Model, bags) -> list:
    """Predictions for raw bags, run through the model's feature pipeline."""
    return [predict(model, model.featurize(b)) for b in bags]


def evaluate(model: Model, dataset) -> Metrics:
    bags = list(dataset)
    preds = predict_bags(model, bags)
    return Metrics.from_labels([b.label for b in bags], [p.label for p in preds])


class FoldResult(NamedTuple):
    fold: int
    metrics: Metrics


def cross_validate(dataset: Dataset, spec: PotentialSpec, map_spec: FeatureMapSpec | None = None,
                   config: TrainConfig | None = None, k: int = 10, seed: int = 0,
                   stratified: bool = True) -> tuple[float, list[FoldResult]]:
    """Mean test accuracy over ``k`` bag-level folds.

    Each fold fits its scaler and model on the training part only.
    """
    config = config or TrainConfig()
    map_spec = map_spec or Identity()
    results = []
    for i, (tr, te) in enumerate(kfold_split(dataset, k, seed, stratified)):
        model = train(tr, spec, map_spec, config)
        results.append(FoldResult(i, evaluate(model, te)))
    mean = float(np.mean([r.metrics.accuracy for r in results]))
    return mean, results


LAMBDA_GRID = (100.0, 10.0, 1.0, 0.1, 0.01)
RHO_GRID = tuple(r / 10 for r in range(1, 11))
K_GRID = (3, 5, 10)


@dataclass(frozen=True)
class GridRow:
    spec: PotentialSpec
    lam: float
    mean_accuracy: float
    folds: tuple


@dataclass(frozen=True)
class GridResult:
    best: GridRow
    rows: tuple


def grid_search(dataset: Dataset, spec_grid: Sequence[PotentialSpec],
                lambda_grid: Sequence[float] = LAMBDA_GRID, k: int = 10, seed: int = 0,
                map_spec: FeatureMapSpec | None = None,
                config: TrainConfig | None = None) -> GridResult:
    """Cross-validate every (spec, lambda) pair; the first best in grid order wins."""
    spec_grid = list(spec_grid)
    lambda_grid = list(lambda_grid)
    if not spec_grid or not lambda_grid:
        raise MimnError("grid search needs nonempty spec and lambda grids")
    config = config or TrainConfig()
    rows = []
    for spec in spec_grid:
        for lam in lambda_grid:
            mean, folds = cross_validate(dataset, spec, map_spec, replace(config, lam=lam),
                                         k, seed)
            rows.append(GridRow(spec, lam, mean, tuple(folds)))
    best = rows[0]
    for row in rows[1:]:
        if row.mean_accuracy > best.mean_accuracy:
            best = row
    return GridResult(best, tuple(rows))


# --------------------------------------------------------------------------
# Instance-level baselines
# --------------------------------------------------------------------------


def baseline_vote(instance_scores, rule: str) -> list[int]:
    """Bag labels from per-instance decision scores.

    ``at_least_one``: positive iff any score > 0.  ``majority``: positive iff
    strictly more than half the scores are > 0.
    """
    bags = list(instance_scores)
    if not bags:
        raise MimnError("baseline_vote needs at least one bag")
    out = []
    for scores in bags:
        s = np.asarray(scores, dtype=float)
        if s.size == 0:
            raise MimnError("baseline_vote got an empty bag")
        n_pos = int(np.count_nonzero(s > 0))
        if rule == "at_least_one":
            out.append(POSITIVE if n_pos > 0 else NEGATIVE)
        elif rule == "majority":
            out.append(POSITIVE if 2 * n_pos > s.size else NEGATIVE)
        else:
            raise MimnError(f"unknown voting rule {rule!r}")
    return out


def instance_dataset(dataset: Dataset) -> Dataset:
    """Every instance as its own bag, inheriting its bag's label."""
    return Dataset(tuple(
        Bag(f"{b.id}#{i}", b.label, b.instances[i:i + 1])
        for b in dataset for i in range(b.size)
    ))


def train_instance_classifier(dataset: Dataset, map_spec: FeatureMapSpec | None = None,
                              config: TrainConfig | None = None) -> Model:
    """Linear instance classifier: single-instance Mimn bags with inherited labels."""
    return train(instance_dataset(dataset), Mimn(), map_spec, config)


def instance_decision_scores(model: Model, bag: Bag) -> np.ndarray:
    """Per-instance margin ``F(+1) - F(-1)`` of the single-instance model."""
    return np.array([predict(model, model.featurize(Bag(bag.id, bag.label, x[None, :]))).margin
                     for x in bag.instances])


def cross_validate_baseline(dataset: Dataset, rule: str, map_spec: FeatureMapSpec | None = None,
                            config: TrainConfig | None = None, k: int = 10,
                            seed: int = 0) -> tuple[float, list[FoldResult]]:
    results = []
    for i, (tr, te) in enumerate(kfold_split(dataset, k, seed)):
        model = train_instance_classifier(tr, map_spec, config)
        pred = baseline_vote([instance_decision_scores(model, b) for b in te], rule)
        results.append(FoldResult(i, Metrics.from_labels(te.labels, pred)))
    return float(np.mean([r.metrics.accuracy for r in results])), results


# --------------------------------------------------------------------------
# Reports
# --------------------------------------------------------------------------


def report_rows(rows: Sequence[GridRow], map_spec=None) -> list[dict]:
    out = []
    for row in rows:
        for fr in row.folds:
            out.append({
                "potential": str(row.spec),
                "feature_map": str(map_spec or Identity()),
                "lambda": row.lam,
                "fold": fr.fold,
                "accuracy": fr.metrics.accuracy,
            })
    return out


def report_csv(records: list[dict]) -> str:
    if not records:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(records[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(records)
    return buf.getvalue()


def report_text(rows: Sequence[GridRow], best: GridRow | None = None) -> str:
    header = ("potential", "lambda", "mean_acc", "folds")
    table = [header]
    for row in rows:
        mark = " *" if best is not None and row is best else ""
        table.append((str(row.spec), f"{row.lam:g}", f"{100 * row.mean_accuracy:.2f}{mark}",
                      str(len(row.folds))))
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
                     for r in table) + "\n"
