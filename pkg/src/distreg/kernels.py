"""Kernels, Gram matrices, and empirical mean embeddings.

An embedding is kept in dual form throughout: a kernel plus a weighted
sample set. Every RKHS quantity (inner products, squared distances)
reduces to a Gram computation over the stored samples, so all algebra is
exact up to floating point.

Reductions avoid BLAS on purpose: distances accumulate over feature axes
in a fixed order, and inner products reduce over fixed row blocks with
numpy's pairwise summation (within each row, then across weighted row
sums), so the summation tree depends only on the shapes and repeated
runs give bit-identical results regardless of thread settings.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

GAUSSIAN = "gaussian"
LAPLACE = "laplace"
_FAMILIES = (GAUSSIAN, LAPLACE)

__all__ = [
    "GAUSSIAN",
    "LAPLACE",
    "KernelConfig",
    "SampleSet",
    "Embedding",
    "eval_kernel",
    "gram",
    "embed",
    "inner",
    "mmd2",
    "median_heuristic",
    "combine",
    "pairwise_distances",
]


@dataclass(frozen=True)
class KernelConfig:
    """Kernel family and bandwidth rho.

    gaussian: k(x, y) = exp(-rho * ||x - y||^2)   (squared Euclidean, no 1/2 factor)
    laplace:  k(x, y) = exp(-rho * ||x - y||_1)
    """

    family: str
    rho: float

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise ValueError(
                f"unknown kernel family {self.family!r}; expected one of {_FAMILIES}"
            )
        rho = float(self.rho)
        if not np.isfinite(rho) or rho <= 0.0:
            raise ValueError(f"kernel bandwidth rho must be positive and finite, got {self.rho}")
        object.__setattr__(self, "rho", rho)


@dataclass(frozen=True)
class SampleSet:
    """A finite set of D-dimensional real vectors from one distribution.

    Stored as an immutable (n, dim) float64 array; 1-d input is treated
    as n scalar samples.
    """

    samples: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("samples must be a non-empty (n, dim) array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    @property
    def dim(self) -> int:
        return int(self.samples.shape[1])

    def __len__(self) -> int:
        return int(self.samples.shape[0])


@dataclass(frozen=True)
class Embedding:
    """Empirical mean embedding sum_i weights[i] * k(samples[i], .).

    Uniform weights (from `embed`) represent a probability embedding.
    Arbitrary signed weights arise as outputs of the linear regression
    operators and are allowed.
    """

    kernel: KernelConfig
    sample_set: SampleSet
    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != len(self.sample_set):
            raise ValueError(
                f"got {w.shape[0]} weights for {len(self.sample_set)} samples"
            )
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.sample_set.dim


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, SampleSet):
        return x.samples
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


def _dists(X: np.ndarray, Y: np.ndarray, family: str) -> np.ndarray:
    # accumulate one feature axis at a time; fixed order, no BLAS
    if family == GAUSSIAN:
        out = X[:, 0, None] - Y[None, :, 0]
        np.square(out, out=out)
        for d in range(1, X.shape[1]):
            diff = X[:, d, None] - Y[None, :, d]
            np.square(diff, out=diff)
            out += diff
    else:
        out = np.abs(X[:, 0, None] - Y[None, :, 0])
        for d in range(1, X.shape[1]):
            out += np.abs(X[:, d, None] - Y[None, :, d])
    return out


def _kernel_matrix(k: KernelConfig, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    out = _dists(X, Y, k.family)
    np.multiply(out, -k.rho, out=out)
    np.exp(out, out=out)
    return out


_BLOCK_ROWS = 256


def _weighted_kernel_sum(
    k: KernelConfig, X: np.ndarray, wa: np.ndarray, Y: np.ndarray, wb: np.ndarray
) -> float:
    """sum_ij wa_i wb_j k(X_i, Y_j) without materializing the full Gram.

    Rows are processed in fixed blocks; each row reduces by numpy's
    pairwise summation and the weighted row sums reduce pairwise again,
    so the summation tree is a fixed function of the shapes alone.
    """
    n = X.shape[0]
    row_sums = np.empty(n)
    for i0 in range(0, n, _BLOCK_ROWS):
        i1 = min(i0 + _BLOCK_ROWS, n)
        block = _kernel_matrix(k, X[i0:i1], Y)
        np.multiply(block, wb[None, :], out=block)
        row_sums[i0:i1] = np.sum(block, axis=1)
    return float(np.sum(wa * row_sums))


def eval_kernel(k: KernelConfig, x, y) -> float:
    """Evaluate k(x, y) for two vectors. Result lies in (0, 1]."""
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    yv = np.asarray(y, dtype=np.float64).reshape(-1)
    if xv.shape != yv.shape:
        raise ValueError(f"dimension mismatch: {xv.shape[0]} vs {yv.shape[0]}")
    if not (np.all(np.isfinite(xv)) and np.all(np.isfinite(yv))):
        raise ValueError("kernel inputs must be finite")
    return float(_kernel_matrix(k, xv[None, :], yv[None, :])[0, 0])


def gram(k: KernelConfig, X, Y) -> np.ndarray:
    """Kernel matrix with entry (i, j) = k(X_i, Y_j)."""
    Xm, Ym = _as_matrix(X), _as_matrix(Y)
    if Xm.shape[1] != Ym.shape[1]:
        raise ValueError(f"dimension mismatch: {Xm.shape[1]} vs {Ym.shape[1]}")
    return _kernel_matrix(k, Xm, Ym)


def embed(k: KernelConfig, X: SampleSet) -> Embedding:
    """Empirical mean embedding of a sample set (uniform weights 1/n)."""
    n = len(X)
    return Embedding(kernel=k, sample_set=X, weights=np.full(n, 1.0 / n))


def _check_compatible(a: Embedding, b: Embedding) -> None:
    if a.kernel != b.kernel:
        raise ValueError(f"kernel mismatch: {a.kernel} vs {b.kernel}")
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def inner(a: Embedding, b: Embedding) -> float:
    """RKHS inner product <a, b> = w_a^T G w_b over the two sample sets."""
    _check_compatible(a, b)
    return _weighted_kernel_sum(
        a.kernel, a.sample_set.samples, a.weights, b.sample_set.samples, b.weights
    )


def mmd2(a: Embedding, b: Embedding) -> float:
    """Squared RKHS distance ||a - b||^2; tiny negative rounding is clamped to 0."""
    v = inner(a, a) - 2.0 * inner(a, b) + inner(b, b)
    if v < 0.0:
        if v < -1e-10:
            raise ValueError(f"mmd2 came out significantly negative ({v}); inputs inconsistent")
        v = 0.0
    return v


def pairwise_distances(X, family: str = GAUSSIAN) -> np.ndarray:
    """Condensed vector of pairwise distances (i < j).

    Euclidean for the gaussian family, l1 for laplace — the metrics the
    respective kernels are built on.
    """
    if family not in _FAMILIES:
        raise ValueError(f"unknown kernel family {family!r}")
    Xm = _as_matrix(X)
    D = _dists(Xm, Xm, family)
    if family == GAUSSIAN:
        np.sqrt(D, out=D)
    iu = np.triu_indices(Xm.shape[0], k=1)
    return D[iu]


def subsample_rows(X: np.ndarray, cap: int = 1000) -> np.ndarray:
    """Deterministic row subsample: every ceil(n/cap)-th row, at most cap rows."""
    n = X.shape[0]
    if n <= cap:
        return X
    stride = -(-n // cap)
    return X[::stride][:cap]


def median_heuristic(X: SampleSet, family: str = GAUSSIAN) -> float:
    """Bandwidth from the median pairwise distance of the sample set.

    gaussian: rho = 1 / (2 m^2) with m the median Euclidean distance;
    laplace:  rho = 1 / m with m the median l1 distance.
    Sample sets larger than 1000 points are deterministically strided
    down before the quadratic pairwise computation.
    """
    if len(X) < 2:
        raise ValueError("median heuristic needs at least 2 samples")
    sub = subsample_rows(X.samples)
    dists = pairwise_distances(sub, family)
    m = float(np.median(dists))
    if m <= 0.0:
        raise ValueError(
            "median pairwise distance is zero (all samples identical); pass an explicit rho"
        )
    if family == GAUSSIAN:
        return 1.0 / (2.0 * m * m)
    return 1.0 / m


def combine(embeddings: Sequence[Embedding], coeffs) -> Embedding:
    """Linear combination sum_i coeffs[i] * embeddings[i].

    Represented exactly by concatenating sample sets and scaling weights;
    the result may have signed, non-normalized weights.
    """
    if len(embeddings) == 0:
        raise ValueError("need at least one embedding")
    c = np.asarray(coeffs, dtype=np.float64).reshape(-1)
    if c.shape[0] != len(embeddings):
        raise ValueError(f"got {c.shape[0]} coefficients for {len(embeddings)} embeddings")
    first = embeddings[0]
    for e in embeddings[1:]:
        _check_compatible(first, e)
    samples = np.vstack([e.sample_set.samples for e in embeddings])
    weights = np.concatenate([c[i] * e.weights for i, e in enumerate(embeddings)])
    return Embedding(kernel=first.kernel, sample_set=SampleSet(samples), weights=weights)
