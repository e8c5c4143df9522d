"""Max-margin training with latent instance labels.

The per-bag loss is ``L_n - R_n`` where ``L_n`` is the loss-augmented score
(0/1 loss on the bag label) and ``R_n`` the best score under the true label;
the objective adds ``lambda/2 * ||w||^2`` over instance and clique weights.
It is minimized by deterministic batch subgradient descent, returning the
best iterate seen.  Steps use the Polyak length ``f(w_t) / ||g_t||^2`` with
the objective's lower bound 0 as target, relaxed by ``step0 / (1 + t /
step_decay)``; this keeps the step scale-free in the number of bags and the
feature range.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import (
    NEGATIVE,
    POSITIVE,
    Bag,
    Labeling,
    MimnError,
    Model,
    PotentialSpec,
    check_label,
    clique_indicator,
)
from .features import FeatureMapSpec, Identity, fit_scaler, transform_instances
from .inference import BatchInference

log = logging.getLogger(__name__)


class TrainingError(MimnError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 1.0
    max_iters: int = 300
    step0: float = 1.0
    step_decay: float = 50.0
    seed: int = 0
    stop_tol: float = 1e-6
    stop_window: int = 20
    append_bias: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise MimnError("lambda must be > 0")
        if isinstance(self.max_iters, bool) or not isinstance(self.max_iters, int) \
                or self.max_iters < 1:
            raise MimnError("max_iters must be an integer >= 1")
        if not self.step0 > 0 or not self.step_decay > 0:
            raise MimnError("step0 and step_decay must be > 0")
        if self.stop_window < 1:
            raise MimnError("stop_window must be >= 1")


class JointFeature(NamedTuple):
    instance_part: np.ndarray
    clique_part: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.instance_part, self.clique_part])


def joint_feature(spec: PotentialSpec, bag: Bag, h, y: int) -> JointFeature:
    """Gradient of the joint score w.r.t. ``(w_instance, w_clique)``."""
    y = check_label(y)
    lab = h if isinstance(h, Labeling) else Labeling.from_labels(h)
    if lab.labels.size != bag.size:
        raise MimnError(f"labeling has length {lab.labels.size}, bag has {bag.size}")
    clique = clique_indicator(spec, lab.positive_count, bag.size, y)
    return JointFeature(lab.labels.astype(float) @ bag.instances, clique)


def _as_bags(bags) -> list[Bag]:
    return list(getattr(bags, "bags", bags))


class Objective:
    """Objective and subgradient over a fixed list of (already mapped) bags."""

    def __init__(self, bags, spec: PotentialSpec, lam: float):
        self.engine = BatchInference(_as_bags(bags), spec)
        self.spec = spec
        self.lam = lam
        self.dim = self.engine.X.shape[1]

    def __call__(self, w: np.ndarray) -> tuple[float, np.ndarray]:
        eng = self.engine
        wi, wc = w[: self.dim], w[self.dim:]
        y = eng.labels
        s_true, c_true, h_true = eng.infer(wi, wc, y)
        s_flip, c_flip, h_flip = eng.infer(wi, wc, -y)
        flip = 1.0 + s_flip > s_true  # ties keep the true label
        L = np.where(flip, 1.0 + s_flip, s_true)
        total = float(np.sum(L - s_true)) + 0.5 * self.lam * float(w @ w)

        inst_flip = np.repeat(flip, np.diff(eng.offsets))
        h_L = np.where(inst_flip, h_flip, h_true)
        grad = np.empty_like(w)
        grad[: self.dim] = eng.X.T @ (h_L - h_true)
        gc = np.zeros(wc.size)
        np.add.at(gc, np.where(flip, c_flip, c_true), 1.0)
        np.add.at(gc, c_true, -1.0)
        grad[self.dim:] = gc
        grad += self.lam * w
        return total, grad


def objective(model: Model, bags, lam: float) -> float:
    """Regularized hinge objective on bags already in the model's feature space."""
    return Objective(bags, model.spec, lam)(model.weights)[0]


def subgradient(model: Model, bags, lam: float) -> np.ndarray:
    return Objective(bags, model.spec, lam)(model.weights)[1]


@dataclass
class TrainResult:
    model: Model
    history: list = field(default_factory=list)
    best_iter: int = 0

    @property
    def best_objective(self) -> float:
        return self.history[self.best_iter]


def fit(bags, spec: PotentialSpec, map_spec: FeatureMapSpec | None = None,
        config: TrainConfig | None = None) -> TrainResult:
    """Fit scaler and weights on raw ``bags``; see :func:`train`."""
    config = config or TrainConfig()
    map_spec = map_spec if map_spec is not None else Identity()
    bags = _as_bags(bags)
    if not bags:
        raise TrainingError("cannot train on an empty dataset")
    present = {b.label for b in bags}
    if present != {POSITIVE, NEGATIVE}:
        raise TrainingError("training data must contain both positive and negative bags")

    scaler = fit_scaler(bags)
    mapped = [b.with_instances(transform_instances(b.instances, scaler, map_spec,
                                                   config.append_bias)) for b in bags]
    obj = Objective(mapped, spec, config.lam)
    w = np.zeros(obj.dim + spec.n_weights)

    history = []
    best_w, best_val, best_iter = w.copy(), math.inf, 0
    best_trace = []
    for t in range(config.max_iters + 1):
        val, grad = obj(w)
        if not math.isfinite(val) or not np.all(np.isfinite(grad)):
            raise TrainingError(f"non-finite objective at iteration {t}")
        history.append(val)
        if val < best_val:
            best_val, best_w, best_iter = val, w.copy(), t
        best_trace.append(best_val)
        log.debug("iter %d objective %.10g best %.10g", t, val, best_val)
        if t == config.max_iters:
            break
        if t >= config.stop_window:
            before = best_trace[t - config.stop_window]
            if before - best_val <= config.stop_tol * abs(before):
                log.debug("stopping at iteration %d: best objective stalled", t)
                break
        g2 = float(grad @ grad)
        if g2 == 0.0:
            break
        relax = config.step0 / (1.0 + t / config.step_decay)
        w = w - (relax * val / g2) * grad

    d = obj.dim
    model = Model(best_w[:d], best_w[d:], spec, map_spec, scaler, config.append_bias)
    return TrainResult(model, history, best_iter)


def train(bags, spec: PotentialSpec, map_spec: FeatureMapSpec | None = None,
          config: TrainConfig | None = None) -> Model:
    """Train a model on raw bags.

    The scaler is fitted on ``bags``; weights start at zero; the returned
    model is the iterate with the lowest objective.
    """
    return fit(bags, spec, map_spec, config).model
