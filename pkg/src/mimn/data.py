"""Datasets, the MIL-CSV format, synthetic bags and fold construction.

MIL-CSV holds one instance per line: ``bag_id,label,f1,...,fd``.  Lines of a
bag share its label; an optional header is recognised by a non-numeric third
field.

Synthetic data and fold shuffles draw from numpy's PCG64 generator
(``numpy.random.default_rng``), so results are reproducible for a given seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import NEGATIVE, POSITIVE, Bag, MimnError


class DataFormatError(MimnError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    bags: tuple

    def __post_init__(self):
        bags = tuple(self.bags)
        if not bags:
            raise MimnError("a dataset needs at least one bag")
        dims = {b.dim for b in bags}
        if len(dims) != 1:
            raise MimnError(f"bags disagree on feature dimension: {sorted(dims)}")
        ids = [b.id for b in bags]
        if len(set(ids)) != len(ids):
            raise MimnError("bag ids must be unique")
        object.__setattr__(self, "bags", bags)

    @property
    def dim(self) -> int:
        return self.bags[0].dim

    @property
    def labels(self) -> np.ndarray:
        return np.array([b.label for b in self.bags])

    def __len__(self) -> int:
        return len(self.bags)

    def __iter__(self) -> Iterator[Bag]:
        return iter(self.bags)

    def subset(self, indices) -> "Dataset":
        return Dataset(tuple(self.bags[i] for i in indices))


# --------------------------------------------------------------------------
# MIL-CSV
# --------------------------------------------------------------------------


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _parse_label(s: str, lineno: int) -> int:
    try:
        v = float(s)
    except ValueError:
        raise DataFormatError(f"label {s!r} is not a number at line {lineno}") from None
    if v not in (1.0, -1.0):
        raise DataFormatError(f"label must be -1 or 1, got {s!r} at line {lineno}")
    return int(v)


def parse_mil_csv(text: str) -> Dataset:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DataFormatError("empty file")
    order: list[str] = []
    rows: dict[str, list] = {}
    labels: dict[str, int] = {}
    dim = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            raise DataFormatError(f"blank line at line {lineno}")
        fields = line.split(",")
        if lineno == 1 and len(fields) >= 3 and not _is_number(fields[2]):
            continue
        if len(fields) < 3:
            raise DataFormatError(f"expected bag_id,label,features at line {lineno}")
        bag_id = fields[0]
        if not bag_id:
            raise DataFormatError(f"empty bag id at line {lineno}")
        label = _parse_label(fields[1], lineno)
        try:
            values = [float(f) for f in fields[2:]]
        except ValueError:
            raise DataFormatError(f"non-numeric feature at line {lineno}") from None
        if not all(math.isfinite(v) for v in values):
            raise DataFormatError(f"non-finite feature at line {lineno}")
        if dim is None:
            dim = len(values)
        elif len(values) != dim:
            raise DataFormatError(
                f"ragged row: expected {dim} features, got {len(values)} at line {lineno}")
        if bag_id in labels:
            if labels[bag_id] != label:
                raise DataFormatError(f"inconsistent bag label at line {lineno}")
        else:
            labels[bag_id] = label
            order.append(bag_id)
            rows[bag_id] = []
        rows[bag_id].append(values)
    if not order:
        raise DataFormatError("no instances in file")
    return Dataset(tuple(Bag(b, labels[b], np.array(rows[b])) for b in order))


def read_mil_csv(path) -> Dataset:
    with open(path, encoding="utf-8") as f:
        return parse_mil_csv(f.read())


def write_mil_csv(dataset: Dataset, header: bool = False) -> str:
    """Canonical MIL-CSV: bags contiguous, shortest round-trip float repr."""
    out = []
    if header:
        out.append(",".join(["bag_id", "label"] + [f"f{j + 1}" for j in range(dataset.dim)]))
    for bag in dataset.bags:
        if "," in bag.id or "\n" in bag.id or not bag.id:
            raise DataFormatError(f"bag id {bag.id!r} cannot be written to MIL-CSV")
        prefix = f"{bag.id},{bag.label}"
        for row in bag.instances:
            out.append(prefix + "," + ",".join(repr(float(v)) for v in row))
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# Synthetic bags
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthParams:
    n_pos_bags: int = 100
    n_neg_bags: int = 100
    bag_size: int = 10
    dim: int = 20
    witness_rate: float = 0.3
    neg_contamination: float = 0.0
    separation: float = 4.0
    noise_sd: float = 1.0

    def __post_init__(self):
        if self.n_pos_bags < 0 or self.n_neg_bags < 0 or self.n_pos_bags + self.n_neg_bags < 1:
            raise MimnError("need a nonnegative number of bags per class, at least one in total")
        if self.bag_size < 1 or self.dim < 1:
            raise MimnError("bag size and dimension must be >= 1")
        if not 0.0 < self.witness_rate <= 1.0:
            raise MimnError("witness rate must be in (0,1]")
        if not 0.0 <= self.neg_contamination < 1.0:
            raise MimnError("negative contamination must be in [0,1)")
        if not self.separation > 0 or not self.noise_sd > 0:
            raise MimnError("separation and noise_sd must be > 0")

    @property
    def witnesses_per_bag(self) -> int:
        return math.ceil(self.witness_rate * self.bag_size - 1e-9)

    @property
    def contaminants_per_bag(self) -> int:
        return math.floor(self.neg_contamination * self.bag_size + 1e-9)


def synthesize(params: SynthParams, seed: int) -> Dataset:
    """Gaussian concept/background bags with an exact witness count per bag.

    The background mean is the origin; the concept mean lies at distance
    ``separation`` along a seeded random unit direction.  Ground-truth
    instance labels are kept in ``Bag.instance_labels``.
    """
    rng = np.random.default_rng(seed)
    m, d = params.bag_size, params.dim
    u = rng.standard_normal(d)
    u /= np.linalg.norm(u)
    mu_pos = params.separation * u

    def make_bag(bag_id, label, n_concept):
        is_concept = np.zeros(m, dtype=bool)
        is_concept[rng.permutation(m)[:n_concept]] = True
        X = params.noise_sd * rng.standard_normal((m, d))
        X[is_concept] += mu_pos
        return Bag(bag_id, label, X, np.where(is_concept, POSITIVE, NEGATIVE).astype(np.int8))

    bags = [make_bag(f"pos{i:04d}", POSITIVE, params.witnesses_per_bag)
            for i in range(params.n_pos_bags)]
    bags += [make_bag(f"neg{i:04d}", NEGATIVE, params.contaminants_per_bag)
             for i in range(params.n_neg_bags)]
    return Dataset(tuple(bags))


# --------------------------------------------------------------------------
# Folds
# --------------------------------------------------------------------------


def kfold_indices(labels, k: int, seed: int, stratified: bool = True) -> list[np.ndarray]:
    """Test-index arrays of ``k`` disjoint folds covering ``range(len(labels))``.

    Stratified folds deal each class's shuffled members round-robin, starting
    where the previous class stopped, so fold sizes differ by at most one.
    """
    labels = np.asarray(labels)
    n = labels.size
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 2 <= k <= n:
        raise MimnError(f"number of folds must be in [2, {n}], got {k}")
    rng = np.random.default_rng(seed)
    if stratified:
        sequence = np.concatenate([rng.permutation(np.flatnonzero(labels == c))
                                   for c in (POSITIVE, NEGATIVE)])
    else:
        sequence = rng.permutation(n)
    folds = [sequence[i::k] for i in range(k)]
    return [np.sort(f) for f in folds]


def kfold_split(dataset: Dataset, k: int, seed: int,
                stratified: bool = True) -> list[tuple[Dataset, Dataset]]:
    out = []
    for test_idx in kfold_indices(dataset.labels, k, seed, stratified):
        mask = np.ones(len(dataset), dtype=bool)
        mask[test_idx] = False
        out.append((dataset.subset(np.flatnonzero(mask)), dataset.subset(test_idx)))
    return out
