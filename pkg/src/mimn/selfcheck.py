"""Seeded oracle checks: fast inference vs enumeration, subgradient vs finite differences."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .core import NEGATIVE, POSITIVE, Bag, Gmimn, Mimn, Model, Rmimn, labeled_sum
from .core import clique_value, instance_scores
from .evaluation import K_GRID, RHO_GRID
from .inference import brute_force_loss_augmented, brute_force_map, loss_augmented, map_labeling
from .learning import Objective

ALL_SPECS = (Mimn(),) + tuple(Rmimn(r) for r in RHO_GRID) + tuple(Gmimn(k) for k in K_GRID)


def case_seed(seed: int, i: int) -> int:
    return seed * 1_000_003 + i


def random_case(rng: np.random.Generator, max_bag: int = 12, max_dim: int = 5,
                weight_range: float = 2.0):
    """A random (model, bag, y) with weights uniform in ``[-weight_range, weight_range]``."""
    spec = ALL_SPECS[rng.integers(len(ALL_SPECS))]
    m = int(rng.integers(1, max_bag + 1))
    d = int(rng.integers(1, max_dim + 1))
    w = rng.uniform(-weight_range, weight_range, d)
    c = rng.uniform(-weight_range, weight_range, spec.n_weights)
    X = rng.uniform(-1.0, 1.0, (m, d))
    y = POSITIVE if rng.integers(2) else NEGATIVE
    return Model(w, c, spec), Bag("case", y, X), y


@dataclass
class CheckReport:
    name: str
    passed: int = 0
    total: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.passed == self.total and self.total > 0

    def __str__(self) -> str:
        return f"{self.passed}/{self.total} {self.name}"


def check_inference(cases: int, max_bag: int = 12, seed: int = 0) -> CheckReport:
    rep = CheckReport("inference")
    for i in range(cases):
        s = case_seed(seed, i)
        model, bag, y = random_case(np.random.default_rng(s), max_bag)
        fast = map_labeling(model, bag, y)
        slow = brute_force_map(model, bag, y)
        la_fast = loss_augmented(model, bag, y)
        la_slow = brute_force_loss_augmented(model, bag, y)
        rep.total += 1
        if fast.score == slow.score and la_fast.value == la_slow.value:
            rep.passed += 1
        else:
            rep.failures.append(s)
    return rep


def _top_two_gap(values) -> float:
    v = sorted(values, reverse=True)
    return v[0] - v[1] if len(v) > 1 else np.inf


def argmax_gaps(model: Model, bag: Bag) -> tuple[float, float]:
    """Gap between best and runner-up for the loss-augmented and true-label problems."""
    m = bag.size
    a = instance_scores(model.w_instance, bag.instances)
    by_label = {POSITIVE: [], NEGATIVE: []}
    for h in itertools.product((NEGATIVE, POSITIVE), repeat=m):
        h = np.array(h)
        k = int(np.count_nonzero(h == POSITIVE))
        for y in (POSITIVE, NEGATIVE):
            c = clique_value(model.spec, model.w_clique, k, m, y)
            if c is not None:
                by_label[y].append(labeled_sum(a, h, c.value))
    aug = by_label[bag.label] + [v + 1.0 for v in by_label[-bag.label]]
    return _top_two_gap(aug), _top_two_gap(by_label[bag.label])


def random_problem(rng: np.random.Generator, max_bags: int = 6, max_bag: int = 6,
                   max_dim: int = 4):
    spec = ALL_SPECS[rng.integers(len(ALL_SPECS))]
    d = int(rng.integers(1, max_dim + 1))
    n = int(rng.integers(2, max_bags + 1))
    bags = [Bag(f"b{j}", POSITIVE if j % 2 == 0 else NEGATIVE,
                rng.uniform(-1.0, 1.0, (int(rng.integers(1, max_bag + 1)), d)))
            for j in range(n)]
    model = Model(rng.uniform(-2, 2, d), rng.uniform(-2, 2, spec.n_weights), spec)
    lam = float(rng.uniform(0.1, 2.0))
    return model, bags, lam


def finite_difference(f, w: np.ndarray, step: float = 1e-5) -> np.ndarray:
    g = np.empty_like(w)
    for j in range(w.size):
        e = np.zeros_like(w)
        e[j] = step
        g[j] = (f(w + e) - f(w - e)) / (2 * step)
    return g


def relative_errors(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    return np.abs(analytic - numeric) / np.maximum(np.abs(analytic), 1e-8)


def check_gradient(points: int, seed: int = 0, step: float = 1e-5, rtol: float = 1e-4,
                   min_gap: float = 1e-3, max_attempts: int = 100_000) -> CheckReport:
    """Finite-difference check at ``points`` random problems whose argmaxes are unique.

    ``min_gap`` keeps every argmax at least that far ahead of its runner-up,
    so a perturbation of size ``step`` cannot change it.
    """
    rep = CheckReport("gradient")
    attempt = 0
    while rep.total < points and attempt < max_attempts:
        s = case_seed(seed, attempt)
        attempt += 1
        model, bags, lam = random_problem(np.random.default_rng(s))
        if min(min(argmax_gaps(model, b)) for b in bags) <= min_gap:
            continue
        obj = Objective(bags, model.spec, lam)
        w = model.weights
        _, g = obj(w)
        fd = finite_difference(lambda v: obj(v)[0], w, step)
        rep.total += 1
        if np.all(relative_errors(g, fd) <= rtol):
            rep.passed += 1
        else:
            rep.failures.append(s)
    return rep
