"""Feature scaling and explicit kernel feature maps.

Raw features are first scaled to [0, 1] per dimension, then optionally lifted
by a feature map so that a linear model in the mapped space behaves like a
kernel machine in the original one.

The homogeneous maps follow Vedaldi & Zisserman's construction for additive
homogeneous kernels ``k(x, y) = sqrt(xy) K(log y - log x)``: the kernel
signature ``K`` is restricted to one period ``2*pi/L`` and its spectrum is
sampled at ``0, L, ..., nL``, giving ``2n + 1`` features per input dimension.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.integrate import quad

from .core import DimensionError, MimnError

KERNELS = ("intersection", "chi2", "js")


@dataclass(frozen=True)
class Scaler:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = np.array(self.min, dtype=float)
        hi = np.array(self.max, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionError("scaler min/max must be vectors of equal length")
        if np.any(lo > hi):
            raise MimnError("scaler min must not exceed max")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def dim(self) -> int:
        return self.min.size


def fit_scaler(bags) -> Scaler:
    """Per-dimension min and max over every instance of every bag."""
    bags = list(bags)
    if not bags:
        raise MimnError("cannot fit a scaler on an empty dataset")
    X = np.vstack([b.instances for b in bags])
    return Scaler(X.min(axis=0), X.max(axis=0))


def apply_scaler(scaler: Scaler, x) -> np.ndarray:
    """Min-max scale ``x`` (a vector or rows of vectors), clamping to [0, 1].

    Constant dimensions map to 0.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != scaler.dim:
        raise DimensionError(f"scaler fitted on dimension {scaler.dim}, got {x.shape[-1]}")
    span = scaler.max - scaler.min
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (x - scaler.min) / safe, 0.0)
    return np.clip(out, 0.0, 1.0)


# --------------------------------------------------------------------------
# Feature maps
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Identity:
    def output_dim(self, d: int) -> int:
        return d

    def __str__(self) -> str:
        return "linear"


@dataclass(frozen=True)
class Quadratic:
    def output_dim(self, d: int) -> int:
        return d + d * (d + 1) // 2

    def __str__(self) -> str:
        return "quad"


@dataclass(frozen=True)
class Homogeneous:
    kernel: str
    order: int = 3
    period: float = 0.5

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise MimnError(f"unknown homogeneous kernel {self.kernel!r}; expected one of {KERNELS}")
        if isinstance(self.order, bool) or not isinstance(self.order, int) or self.order < 0:
            raise MimnError("homogeneous map order must be an integer >= 0")
        if not self.period > 0:
            raise MimnError("homogeneous map period must be > 0")

    def output_dim(self, d: int) -> int:
        return d * (2 * self.order + 1)

    def __str__(self) -> str:
        return f"hom:{self.kernel}:{self.order}:{self.period:g}"


FeatureMapSpec = Union[Identity, Quadratic, Homogeneous]


def quadratic_map(x) -> np.ndarray:
    """``[x, x_j^2, sqrt(2) x_j x_k (j < k)]`` so that ``<P(x), P(y)> = <x,y> + <x,y>^2``."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    j, k = np.triu_indices(d, 1)
    return np.concatenate([x, x * x, math.sqrt(2.0) * x[..., j] * x[..., k]], axis=-1)


def _check_nonnegative(x: np.ndarray, what: str) -> None:
    if np.any(x < 0):
        raise MimnError(f"{what} requires nonnegative inputs")


def exact_kernel(kernel: str, x, y) -> float:
    """Closed-form additive kernel, with zero-argument terms taken as 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionError(f"shape mismatch {x.shape} vs {y.shape}")
    _check_nonnegative(x, kernel)
    _check_nonnegative(y, kernel)
    s = x + y
    if kernel == "intersection":
        return float(np.sum(np.minimum(x, y)))
    if kernel == "chi2":
        with np.errstate(invalid="ignore", divide="ignore"):
            return float(np.sum(np.where(s > 0, 2.0 * x * y / s, 0.0)))
    if kernel == "js":
        with np.errstate(invalid="ignore", divide="ignore"):
            tx = np.where(x > 0, 0.5 * x * np.log2(s / x), 0.0)
            ty = np.where(y > 0, 0.5 * y * np.log2(s / y), 0.0)
        return float(np.sum(tx + ty))
    raise MimnError(f"unknown kernel {kernel!r}")


# Kernel signatures K(delta), delta = log(y / x).
# All three are even in delta; written in terms of a = |delta| to avoid overflow.
def _signature(kernel: str, delta: float) -> float:
    a = abs(delta)
    e = math.exp(-a)
    if kernel == "chi2":
        return 2.0 * math.exp(-a / 2.0) / (1.0 + e)
    if kernel == "intersection":
        return math.exp(-a / 2.0)
    # js: log2(1 + e^a) = (a + log1p(e^-a)) / ln 2, and e^(a/2) = e^(-a/2) / e^-a
    lp = math.log1p(e)
    ratio = lp / e if e > 0.0 else 1.0
    return 0.5 * math.exp(-a / 2.0) * (a + lp + ratio) / math.log(2.0)


def spectrum(kernel: str, lam: float) -> float:
    """Closed-form spectrum of the full (unwindowed) kernel signature."""
    if kernel == "chi2":
        return 1.0 / math.cosh(math.pi * lam)
    if kernel == "intersection":
        return 2.0 / math.pi / (1.0 + 4.0 * lam * lam)
    if kernel == "js":
        return 2.0 / math.log(4.0) / math.cosh(math.pi * lam) / (1.0 + 4.0 * lam * lam)
    raise MimnError(f"unknown kernel {kernel!r}")


@functools.lru_cache(maxsize=None)
def windowed_spectrum(kernel: str, order: int, period: float) -> tuple[float, ...]:
    """Spectrum of the signature truncated to one period, sampled at ``j * period``.

    Negative samples (possible for some kernels at high order) are clipped to
    zero since the feature map takes their square root.
    """
    half = math.pi / period
    out = []
    for j in range(order + 1):
        lam = j * period
        val, _ = quad(lambda d: _signature(kernel, d) * math.cos(lam * d), 0.0, half,
                      limit=200, epsabs=1e-13, epsrel=1e-12)
        out.append(max(0.0, val / math.pi))
    return tuple(out)


def homogeneous_map(spec: Homogeneous, x) -> np.ndarray:
    """Per-dimension blocks ``[c0, c1, s1, ..., cn, sn]`` concatenated across dimensions."""
    x = np.asarray(x, dtype=float)
    _check_nonnegative(x, f"{spec.kernel} feature map")
    kappa = windowed_spectrum(spec.kernel, spec.order, float(spec.period))
    L = spec.period
    with np.errstate(divide="ignore"):
        logx = np.where(x > 0, np.log(np.where(x > 0, x, 1.0)), 0.0)
    parts = [np.sqrt(x * L * kappa[0])]
    for j in range(1, spec.order + 1):
        r = np.sqrt(2.0 * x * L * kappa[j])
        parts.append(r * np.cos(j * L * logx))
        parts.append(r * np.sin(j * L * logx))
    out = np.stack(parts, axis=-1)
    return out.reshape(x.shape[:-1] + (x.shape[-1] * len(parts),))


def apply_map(map_spec: FeatureMapSpec, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if map_spec is None or isinstance(map_spec, Identity):
        return X
    if isinstance(map_spec, Quadratic):
        return quadratic_map(X)
    if isinstance(map_spec, Homogeneous):
        return homogeneous_map(map_spec, X)
    raise MimnError(f"unsupported feature_map {map_spec!r}")


def transform_instances(X, scaler: Scaler | None, map_spec: FeatureMapSpec | None,
                        append_bias: bool = False) -> np.ndarray:
    """Scale, map, then optionally append a constant-1 column."""
    X = np.asarray(X, dtype=float)
    if scaler is not None:
        X = apply_scaler(scaler, X)
    X = apply_map(map_spec, X)
    if append_bias:
        X = np.concatenate([X, np.ones(X.shape[:-1] + (1,))], axis=-1)
    return X


def mapped_dim(d: int, map_spec: FeatureMapSpec | None, append_bias: bool = False) -> int:
    base = d if map_spec is None else map_spec.output_dim(d)
    return base + int(append_bias)
