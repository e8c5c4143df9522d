"""Exact MAP inference for cardinality clique potentials.

For a fixed bag label the best labeling with ``k`` positives always takes the
``k`` instances with the largest ``<w, x_i>``, so sorting once and scanning
prefix sums over every feasible ``k`` solves the problem in O(m log m).

Reported scores are recomputed for the chosen labeling with a correctly
rounded sum (:func:`mimn.core.labeled_sum`), which is also what the
brute-force oracle reports, so the two agree bit for bit.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .core import (
    NEGATIVE,
    POSITIVE,
    Bag,
    InfeasibleError,
    Labeling,
    MimnError,
    Model,
    check_label,
    clique_table,
    clique_value,
    instance_scores,
    labeled_sum,
)

BRUTE_FORCE_MAX = 20
_EPS = np.finfo(float).eps


class InferenceResult(NamedTuple):
    labeling: Labeling
    score: float
    k_star: int


class Prediction(NamedTuple):
    label: int
    labeling: Labeling
    margin: float


class LossAugmented(NamedTuple):
    label: int
    labeling: Labeling
    value: float


def _top_k_labels(order: np.ndarray, k: int) -> np.ndarray:
    labels = np.full(order.size, NEGATIVE, dtype=np.int8)
    labels[order[:k]] = POSITIVE
    return labels


def _rounding_slack(m: int, *magnitudes: float) -> float:
    # Generous bound on the float error of an m-term sum.
    return 4.0 * (m + 2) * _EPS * sum(magnitudes)


def map_labeling(model: Model, bag: Bag, y: int) -> InferenceResult:
    """Highest-scoring instance labeling of ``bag`` for bag label ``y``.

    Ties between instances break by ascending index; ties between counts
    break toward the smallest count.
    """
    y = check_label(y)
    m = bag.size
    a = instance_scores(model.w_instance, bag.instances)
    gain = 2.0 * a
    order = np.argsort(-gain, kind="stable")
    prefix = np.concatenate([[0.0], np.cumsum(gain[order])])
    base = -np.sum(a)
    feasible, index = clique_table(model.spec, m, y)
    if not feasible.any():
        raise InfeasibleError(f"{model.spec} admits no labeling for m={m}, y={y}")
    clique = model.w_clique[index]
    s = base + prefix + clique
    masked = np.where(feasible, s, -np.inf)
    k_star = int(np.argmax(masked))

    slack = _rounding_slack(m, float(np.sum(np.abs(gain))), abs(base),
                            float(np.max(np.abs(clique))))
    candidates = np.flatnonzero(masked >= masked[k_star] - slack) if slack > 0 else [k_star]
    best = None
    for k in candidates:
        labels = _top_k_labels(order, int(k))
        val = labeled_sum(a, labels, float(clique[k]))
        if best is None or val > best[0]:
            best = (val, int(k), labels)
    val, k_star, labels = best
    return InferenceResult(Labeling(labels, k_star, m - k_star), val, k_star)


def predict(model: Model, bag: Bag) -> Prediction:
    """Bag label with the larger MAP score; an exact tie predicts -1."""
    pos = map_labeling(model, bag, POSITIVE)
    neg = map_labeling(model, bag, NEGATIVE)
    margin = pos.score - neg.score
    if pos.score > neg.score:
        return Prediction(POSITIVE, pos.labeling, margin)
    return Prediction(NEGATIVE, neg.labeling, margin)


def loss_augmented(model: Model, bag: Bag, y_true: int) -> LossAugmented:
    """``max_y [Delta(y, y_true) + F(y)]`` with 0/1 loss; ties keep ``y_true``."""
    y_true = check_label(y_true)
    same = map_labeling(model, bag, y_true)
    other = map_labeling(model, bag, -y_true)
    flipped = 1.0 + other.score
    if flipped > same.score:
        return LossAugmented(-y_true, other.labeling, flipped)
    return LossAugmented(y_true, same.labeling, same.score)


# --------------------------------------------------------------------------
# Exhaustive oracle
# --------------------------------------------------------------------------


def _all_labelings(m: int, start: int, stop: int) -> np.ndarray:
    codes = np.arange(start, stop, dtype=np.int64)[:, None]
    bits = (codes >> np.arange(m, dtype=np.int64)) & 1
    return np.where(bits == 1, POSITIVE, NEGATIVE).astype(np.int8)


def brute_force_map(model: Model, bag: Bag, y: int, max_size: int = BRUTE_FORCE_MAX,
                    chunk: int = 1 << 15) -> InferenceResult:
    """Argmax of the joint score by enumerating all ``2**m`` labelings.

    Clique values come from the scalar :func:`clique_value`, independent of
    the vectorized table used by :func:`map_labeling`.
    """
    y = check_label(y)
    m = bag.size
    if m > max_size:
        raise MimnError(f"brute force limited to bags of at most {max_size} instances, got {m}")
    a = instance_scores(model.w_instance, bag.instances)
    cv = [clique_value(model.spec, model.w_clique, k, m, y) for k in range(m + 1)]
    if all(c is None for c in cv):
        raise InfeasibleError(f"{model.spec} admits no labeling for m={m}, y={y}")
    clique = np.array([np.nan if c is None else c.value for c in cv])
    feasible = np.array([c is not None for c in cv])
    slack = _rounding_slack(m, float(np.sum(np.abs(a))),
                            float(np.max(np.abs(clique[feasible]))))

    # First pass: float maximum; second pass: exact scores of near-maximal rows.
    top = -np.inf
    for start in range(0, 1 << m, chunk):
        H = _all_labelings(m, start, min(1 << m, start + chunk))
        counts = np.count_nonzero(H == POSITIVE, axis=1)
        ok = feasible[counts]
        if ok.any():
            top = max(top, float(np.max(H[ok] @ a + clique[counts[ok]])))
    best = None
    for start in range(0, 1 << m, chunk):
        H = _all_labelings(m, start, min(1 << m, start + chunk))
        counts = np.count_nonzero(H == POSITIVE, axis=1)
        ok = feasible[counts]
        near = np.flatnonzero(ok)
        near = near[H[near] @ a + clique[counts[near]] >= top - slack]
        for r in near:
            val = labeled_sum(a, H[r], float(clique[counts[r]]))
            key = (val, -int(counts[r]))
            if best is None or key > best[0]:
                best = (key, H[r].copy())
    (val, neg_k), labels = best
    lab = Labeling.from_labels(labels)
    return InferenceResult(lab, val, lab.positive_count)


def brute_force_loss_augmented(model: Model, bag: Bag, y_true: int,
                               max_size: int = BRUTE_FORCE_MAX) -> LossAugmented:
    """Exhaustive ``max over (y, h)`` of ``Delta + score``; ties keep ``y_true``."""
    y_true = check_label(y_true)
    best = None
    for y in (y_true, -y_true):
        r = brute_force_map(model, bag, y, max_size)
        val = r.score + (0.0 if y == y_true else 1.0)
        if best is None or val > best.value:
            best = LossAugmented(y, r.labeling, val)
    return best


# --------------------------------------------------------------------------
# Batched inference over a fixed dataset (training engine)
# --------------------------------------------------------------------------


class BatchInference:
    """MAP inference for many bags at once, grouped by bag size.

    Scores here are plain float prefix sums (no exact re-summation); the
    chosen counts match :func:`map_labeling` except on exact float ties.
    """

    def __init__(self, bags, spec):
        self.bags = list(bags)
        self.spec = spec
        self.X = np.vstack([b.instances for b in self.bags])
        self.labels = np.array([b.label for b in self.bags], dtype=np.int64)
        sizes = np.array([b.size for b in self.bags])
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.offsets = offsets
        self.groups = []
        for m in np.unique(sizes):
            idx = np.flatnonzero(sizes == m)
            rows = offsets[idx][:, None] + np.arange(m)[None, :]
            tables = {y: clique_table(spec, int(m), y) for y in (POSITIVE, NEGATIVE)}
            self.groups.append((int(m), idx, rows, tables))

    @property
    def n_bags(self) -> int:
        return len(self.bags)

    def infer(self, w_instance: np.ndarray, w_clique: np.ndarray, y: np.ndarray):
        """MAP for bag ``n`` under label ``y[n]``.

        Returns per-bag scores, per-bag clique weight indices and the
        per-instance labels (aligned with ``self.X`` rows).
        """
        a = self.X @ w_instance
        scores = np.empty(self.n_bags)
        cidx = np.empty(self.n_bags, dtype=np.intp)
        h = np.empty(self.X.shape[0], dtype=float)
        for m, idx, rows, tables in self.groups:
            A = a[rows]
            gain = 2.0 * A
            order = np.argsort(-gain, axis=1, kind="stable")
            prefix = np.zeros((idx.size, m + 1))
            np.cumsum(np.take_along_axis(gain, order, axis=1), axis=1, out=prefix[:, 1:])
            base = -A.sum(axis=1)
            yg = y[idx]
            feas = np.empty((idx.size, m + 1), dtype=bool)
            index = np.empty((idx.size, m + 1), dtype=np.intp)
            for lab in (POSITIVE, NEGATIVE):
                sel = yg == lab
                feas[sel] = tables[lab][0]
                index[sel] = tables[lab][1]
            S = np.where(feas, base[:, None] + prefix + w_clique[index], -np.inf)
            k = np.argmax(S, axis=1)
            ar = np.arange(idx.size)
            scores[idx] = S[ar, k]
            cidx[idx] = index[ar, k]
            rank = np.empty_like(order)
            np.put_along_axis(rank, order, np.arange(m)[None, :].repeat(idx.size, 0), axis=1)
            h[rows] = np.where(rank < k[:, None], 1.0, -1.0)
        return scores, cidx, h
