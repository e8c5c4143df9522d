"""Domain types, cardinality clique potentials and the joint bag score.

A bag's score for instance labels ``h`` and bag label ``y`` is the sum of a
linear instance term ``h_i * <w, x_i>`` per instance plus a clique term that
depends on ``h`` only through the positive count ``m_plus``.  The clique term
is either a finite learned weight or infeasible; infeasible configurations
are represented by ``None`` and never enter arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

POSITIVE = 1
NEGATIVE = -1
LABELS = (POSITIVE, NEGATIVE)

# Slack for rational boundaries such as rho=0.3, m=10 where rho*m lands one
# ulp above the integer.
_RHO_EPS = 1e-9


class MimnError(ValueError):
    """Base class for structured errors raised by this package."""


class DimensionError(MimnError):
    pass


class InfeasibleError(MimnError):
    pass


def check_label(y) -> int:
    if y not in (1, -1) or isinstance(y, bool):
        raise MimnError(f"bag label must be -1 or 1, got {y!r}")
    return int(y)


# --------------------------------------------------------------------------
# Potential families
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Mimn:
    """At least one positive instance in a positive bag, none in a negative."""

    @property
    def n_weights(self) -> int:
        return 2

    def __str__(self) -> str:
        return "mimn"


@dataclass(frozen=True)
class Rmimn:
    """At least a fraction ``rho`` of positives in a positive bag."""

    rho: float

    def __post_init__(self):
        if not (isinstance(self.rho, (int, float)) and 0.0 < self.rho <= 1.0):
            raise MimnError("rho must be in (0,1]")

    @property
    def n_weights(self) -> int:
        return 2

    def k_min(self, m: int) -> int:
        """Smallest positive count admissible for a positive bag of size m."""
        return max(1, math.ceil(self.rho * m - _RHO_EPS))

    def __str__(self) -> str:
        return f"rmimn:{self.rho:g}"


@dataclass(frozen=True)
class Gmimn:
    """Learned weights for ``k_segments`` equal slices of the positive ratio."""

    k_segments: int

    def __post_init__(self):
        if isinstance(self.k_segments, bool) or not isinstance(self.k_segments, int) \
                or self.k_segments < 1:
            raise MimnError("k_segments must be an integer >= 1")

    @property
    def n_weights(self) -> int:
        return 2 * self.k_segments

    def __str__(self) -> str:
        return f"gmimn:{self.k_segments}"


PotentialSpec = Union[Mimn, Rmimn, Gmimn]


class Finite(NamedTuple):
    """A feasible clique configuration: its value and the weight that produced it."""

    value: float
    weight_index: int


def _gmimn_segment(k_segments: int, m_plus: int, m: int, y: int) -> int:
    # Integer ceil/floor of K*m_plus/m: exact at every rational boundary.
    if y == POSITIVE:
        return -((-k_segments * m_plus) // m)
    return (k_segments * m_plus) // m + 1


def clique_weight_index(spec: PotentialSpec, m_plus: int, m: int, y: int) -> Optional[int]:
    """Index into the clique weight vector for ``(m_plus, m, y)``, or None if infeasible."""
    if m < 1 or not 0 <= m_plus <= m:
        raise MimnError(f"need 0 <= m_plus <= m and m >= 1, got m_plus={m_plus}, m={m}")
    y = check_label(y)
    if isinstance(spec, Mimn):
        if y == POSITIVE:
            return 0 if m_plus >= 1 else None
        return 1 if m_plus == 0 else None
    if isinstance(spec, Rmimn):
        k_min = spec.k_min(m)
        if y == POSITIVE:
            return 0 if m_plus >= k_min else None
        return 1 if m_plus < k_min else None
    if isinstance(spec, Gmimn):
        K = spec.k_segments
        if y == POSITIVE:
            if m_plus == 0:
                return None
            return _gmimn_segment(K, m_plus, m, y) - 1
        if m_plus == m:
            return None
        return K + _gmimn_segment(K, m_plus, m, y) - 1
    raise TypeError(f"unknown potential spec {spec!r}")


def check_clique_weights(spec: PotentialSpec, weights) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (spec.n_weights,):
        raise DimensionError(
            f"{spec} expects {spec.n_weights} clique weights, got shape {weights.shape}"
        )
    return weights


def clique_value(spec: PotentialSpec, weights, m_plus: int, m: int, y: int) -> Optional[Finite]:
    """Value of the cardinality clique potential; ``None`` marks an infeasible count."""
    weights = check_clique_weights(spec, weights)
    idx = clique_weight_index(spec, m_plus, m, y)
    if idx is None:
        return None
    return Finite(float(weights[idx]), idx)


def feasible_counts(spec: PotentialSpec, m: int, y: int) -> list[int]:
    """Sorted positive counts with a finite clique potential."""
    counts = [k for k in range(m + 1) if clique_weight_index(spec, k, m, y) is not None]
    if not counts:
        raise InfeasibleError(f"{spec} admits no labeling for m={m}, y={y}")
    return counts


def clique_indicator(spec: PotentialSpec, m_plus: int, m: int, y: int) -> np.ndarray:
    """One-hot vector over clique weights selecting the active weight."""
    idx = clique_weight_index(spec, m_plus, m, y)
    if idx is None:
        raise InfeasibleError(f"m_plus={m_plus} of m={m} is infeasible for {spec}, y={y}")
    out = np.zeros(spec.n_weights)
    out[idx] = 1.0
    return out


def clique_table(spec: PotentialSpec, m: int, y: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized feasibility mask and weight index for every count 0..m.

    Returns ``(feasible, index)``; ``index`` is meaningful only where
    ``feasible`` is True.  Used by the fast inference paths, so it is kept
    separate from the scalar :func:`clique_weight_index` that the brute-force
    oracle relies on.
    """
    k = np.arange(m + 1)
    index = np.zeros(m + 1, dtype=np.intp)
    if isinstance(spec, Mimn):
        feasible = k >= 1 if y == POSITIVE else k == 0
        index[:] = 0 if y == POSITIVE else 1
    elif isinstance(spec, Rmimn):
        k_min = spec.k_min(m)
        feasible = k >= k_min if y == POSITIVE else k < k_min
        index[:] = 0 if y == POSITIVE else 1
    elif isinstance(spec, Gmimn):
        K = spec.k_segments
        if y == POSITIVE:
            feasible = k >= 1
            index = -((-K * k) // m) - 1
        else:
            feasible = k < m
            index = K + (K * k) // m
        index = np.where(feasible, index, 0)
    else:
        raise TypeError(f"unknown potential spec {spec!r}")
    return feasible, index


# --------------------------------------------------------------------------
# Bags and models
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Bag:
    """A labelled group of instances (rows of ``instances``).

    ``instance_labels`` optionally carries ground-truth instance labels for
    synthetic data; learning never reads it.
    """

    id: str
    label: int
    instances: np.ndarray
    instance_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        check_label(self.label)
        X = np.array(self.instances, dtype=float, ndmin=2)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise MimnError(f"bag {self.id!r} needs a nonempty (m, d) instance array")
        if not np.all(np.isfinite(X)):
            raise MimnError(f"bag {self.id!r} has non-finite feature values")
        X.setflags(write=False)
        object.__setattr__(self, "instances", X)
        object.__setattr__(self, "label", int(self.label))

    @property
    def size(self) -> int:
        return self.instances.shape[0]

    @property
    def dim(self) -> int:
        return self.instances.shape[1]

    def with_instances(self, instances: np.ndarray) -> "Bag":
        return Bag(self.id, self.label, instances, self.instance_labels)


class Labeling(NamedTuple):
    """Instance labels in {-1, +1} with their positive/negative counts."""

    labels: np.ndarray
    positive_count: int
    negative_count: int

    @classmethod
    def from_labels(cls, labels) -> "Labeling":
        labels = np.asarray(labels, dtype=np.int8)
        if labels.ndim != 1 or not np.all((labels == 1) | (labels == -1)):
            raise MimnError("instance labels must be a 1-d sequence of -1/+1")
        n_pos = int(np.count_nonzero(labels == 1))
        return cls(labels, n_pos, labels.size - n_pos)


@dataclass(frozen=True, eq=False)
class Model:
    """Instance and clique weights plus the feature pipeline they were trained on."""

    w_instance: np.ndarray
    w_clique: np.ndarray
    spec: PotentialSpec
    map_spec: object = None
    scaler: object = None
    append_bias: bool = False

    def __post_init__(self):
        w = np.array(self.w_instance, dtype=float)
        if w.ndim != 1:
            raise DimensionError("w_instance must be a vector")
        c = check_clique_weights(self.spec, np.array(self.w_clique, dtype=float))
        w.setflags(write=False)
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "w_instance", w)
        object.__setattr__(self, "w_clique", c)

    @property
    def weights(self) -> np.ndarray:
        """Concatenation of instance and clique weights."""
        return np.concatenate([self.w_instance, self.w_clique])

    @classmethod
    def zeros(cls, dim: int, spec: PotentialSpec, **kw) -> "Model":
        return cls(np.zeros(dim), np.zeros(spec.n_weights), spec, **kw)

    def with_weights(self, weights: np.ndarray) -> "Model":
        d = self.w_instance.size
        return Model(weights[:d], weights[d:], self.spec, self.map_spec, self.scaler,
                     self.append_bias)

    def featurize(self, bag: Bag) -> Bag:
        """Apply scaler, feature map and optional bias column to a raw bag."""
        from .features import transform_instances

        return bag.with_instances(
            transform_instances(bag.instances, self.scaler, self.map_spec, self.append_bias)
        )


# --------------------------------------------------------------------------
# Scores
# --------------------------------------------------------------------------


def instance_potential(w_instance, x, h: int) -> float:
    w = np.asarray(w_instance, dtype=float)
    x = np.asarray(x, dtype=float)
    if w.shape != x.shape or w.ndim != 1:
        raise DimensionError(f"weight shape {w.shape} does not match feature shape {x.shape}")
    return check_label(h) * float(np.dot(w, x))


def instance_scores(w_instance: np.ndarray, X: np.ndarray) -> np.ndarray:
    """``<w, x_i>`` for every row of ``X``."""
    if X.shape[1] != w_instance.shape[0]:
        raise DimensionError(
            f"model expects dimension {w_instance.shape[0]}, bag has {X.shape[1]}"
        )
    return X @ w_instance


def labeled_sum(scores: np.ndarray, labels: np.ndarray, clique: float) -> float:
    """Correctly rounded ``clique + sum_i h_i * scores_i``.

    ``math.fsum`` makes the result independent of summation order, so any two
    routes to the same labeling report bit-identical scores.
    """
    return math.fsum(np.concatenate([[clique], np.where(labels > 0, scores, -scores)]))


def score(model: Model, bag: Bag, h, y: int) -> Optional[float]:
    """Joint score of ``(bag, h, y)``; ``None`` when the clique potential is infeasible."""
    y = check_label(y)
    lab = h if isinstance(h, Labeling) else Labeling.from_labels(h)
    if lab.labels.size != bag.size:
        raise DimensionError(f"labeling has length {lab.labels.size}, bag has {bag.size}")
    c = clique_value(model.spec, model.w_clique, lab.positive_count, bag.size, y)
    if c is None:
        return None
    a = instance_scores(model.w_instance, bag.instances)
    return labeled_sum(a, lab.labels, c.value)
