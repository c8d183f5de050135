"""Manifold kernels and Gram matrices.

Three kernel families are available:

``gaussian_led``
    ``exp(-beta * ||log X - log Y||_F^2)`` on SPD matrices.
``gaussian_stein``
    ``exp(-beta * S(X, Y))`` with the Stein divergence S. Positive definite
    only for ``beta`` in ``{1/2, 1, ..., (d-1)/2}`` (or beyond ``(d-1)/2``).
``projection``
    ``beta * ||X^T Y||_F^2`` on Grassmann bases.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from . import manifold
from .errors import DimensionMismatch, InvalidKernel, KindMismatch, NotPositiveDefinite

# rows per block when batching small-matrix factorisations
_CHUNK = 4096


class Family(str, enum.Enum):
    GAUSSIAN_LED = "gaussian_led"
    GAUSSIAN_STEIN = "gaussian_stein"
    PROJECTION = "projection"

    @property
    def kind(self) -> manifold.Kind:
        if self is Family.PROJECTION:
            return manifold.Kind.GRASSMANN
        return manifold.Kind.SPD


@dataclass(frozen=True)
class KernelSpec:
    family: Family
    beta: float

    def __post_init__(self):
        try:
            family = Family(self.family)
        except ValueError:
            raise InvalidKernel(f"unknown kernel family {self.family!r}") from None
        object.__setattr__(self, "family", family)
        try:
            beta = float(self.beta)
        except (TypeError, ValueError):
            raise InvalidKernel(f"beta must be a number, got {self.beta!r}") from None
        if not np.isfinite(beta) or beta <= 0:
            raise InvalidKernel(f"beta must be positive, got {self.beta!r}")
        object.__setattr__(self, "beta", beta)

    def to_dict(self) -> dict:
        return {"family": self.family.value, "beta": self.beta}

    @classmethod
    def from_dict(cls, obj: dict) -> "KernelSpec":
        return cls(obj["family"], obj["beta"])


@dataclass(frozen=True)
class GramMatrix:
    values: np.ndarray
    spec: KernelSpec

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def stein_admissible(beta: float, d: int) -> bool:
    """Whether ``beta`` keeps the Stein kernel positive definite for d x d inputs."""
    top = 0.5 * (d - 1)
    if beta >= top - 1e-12 and top > 0:
        return True
    twice = 2.0 * beta
    return abs(twice - round(twice)) <= 1e-12 and 1 <= round(twice) <= d - 1


def check_admissible(spec: KernelSpec, d: int) -> None:
    if spec.family is Family.GAUSSIAN_STEIN and not stein_admissible(spec.beta, d):
        raise InvalidKernel(
            f"beta={spec.beta} is not admissible for the Stein kernel with d={d}; "
            f"use a multiple of 1/2 up to {(d - 1) / 2} or anything larger")


def as_stack(points) -> np.ndarray:
    """Stack a list of points (arrays or point objects) into an (n, a, b) array."""
    if isinstance(points, np.ndarray):
        stack = np.asarray(points, dtype=float)
    else:
        points = list(points)
        if not points:
            raise DimensionMismatch("empty point list")
        stack = np.stack([np.asarray(p, dtype=float) for p in points])
    if stack.ndim != 3:
        raise DimensionMismatch(f"expected a stack of matrices, got shape {stack.shape}")
    return stack


def check_kind(spec: KernelSpec, stack: np.ndarray) -> None:
    """Reject inputs whose shape or structure does not suit the kernel family."""
    n, a, b = stack.shape
    if spec.family.kind is manifold.Kind.SPD:
        if a != b:
            raise KindMismatch(f"{spec.family.value} kernel needs square SPD matrices")
        asym = np.abs(stack - np.swapaxes(stack, 1, 2))
        if np.any(asym > manifold.SYM_TOL * np.maximum(1.0, np.abs(stack))):
            raise KindMismatch(f"{spec.family.value} kernel needs SPD matrices")
    else:
        gram = np.swapaxes(stack, 1, 2) @ stack
        if b > a or np.abs(gram - np.eye(b)).max() > manifold.ORTHO_TOL:
            raise KindMismatch("projection kernel needs orthonormal Grassmann bases")


def kernel_eval(spec: KernelSpec, X, Y) -> float:
    """Kernel value between two points."""
    stack = as_stack([X, Y])
    check_kind(spec, stack)
    if spec.family is Family.GAUSSIAN_LED:
        return float(np.exp(-spec.beta * manifold.led_distance(stack[0], stack[1])))
    if spec.family is Family.GAUSSIAN_STEIN:
        check_admissible(spec, stack.shape[1])
        return float(np.exp(-spec.beta * manifold.stein_divergence(stack[0], stack[1])))
    return spec.beta * float(np.sum((stack[0].T @ stack[1]) ** 2))


def _batched_logdet(stack: np.ndarray) -> np.ndarray:
    try:
        chol = np.linalg.cholesky(stack)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("Cholesky factorisation failed") from None
    return 2.0 * np.sum(np.log(np.diagonal(chol, axis1=-2, axis2=-1)), axis=-1)


def _stein_pairs(A: np.ndarray, B: np.ndarray, ia: np.ndarray, ib: np.ndarray,
                 ld_a: np.ndarray, ld_b: np.ndarray) -> np.ndarray:
    out = np.empty(len(ia))
    for start in range(0, len(ia), _CHUNK):
        sl = slice(start, start + _CHUNK)
        mid = 0.5 * (A[ia[sl]] + B[ib[sl]])
        out[sl] = _batched_logdet(mid) - 0.5 * (ld_a[ia[sl]] + ld_b[ib[sl]])
    return np.maximum(out, 0.0)


def _projection_block(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    q = A.shape[1]
    if q * q <= 4096:
        pa = (A @ np.swapaxes(A, 1, 2)).reshape(len(A), -1)
        pb = (B @ np.swapaxes(B, 1, 2)).reshape(len(B), -1)
        return pa @ pb.T
    out = np.empty((len(A), len(B)))
    for i, x in enumerate(A):
        out[i] = np.sum((x.T @ B) ** 2, axis=(1, 2))
    return out


def gram(spec: KernelSpec, rows, cols=None) -> GramMatrix:
    """Kernel matrix between ``rows`` and ``cols``.

    With ``cols`` omitted (or the same object as ``rows``) the self-Gram is
    built from the upper triangle and mirrored, so it is exactly symmetric.
    """
    self_gram = cols is None or cols is rows
    A = as_stack(rows)
    B = A if self_gram else as_stack(cols)
    if A.shape[1:] != B.shape[1:]:
        raise DimensionMismatch(f"row points {A.shape[1:]} vs column points {B.shape[1:]}")
    check_kind(spec, A)
    if not self_gram:
        check_kind(spec, B)
    beta = spec.beta

    if spec.family is Family.GAUSSIAN_LED:
        la = manifold.spd_logm_batch(A).reshape(len(A), -1)
        if self_gram:
            dist = squareform(pdist(la, "sqeuclidean"))
        else:
            lb = manifold.spd_logm_batch(B).reshape(len(B), -1)
            dist = cdist(la, lb, "sqeuclidean")
        values = np.exp(-beta * dist)
    elif spec.family is Family.GAUSSIAN_STEIN:
        check_admissible(spec, A.shape[1])
        ld_a = _batched_logdet(A)
        if self_gram:
            n = len(A)
            iu, ju = np.triu_indices(n, k=1)
            div = np.zeros((n, n))
            div[iu, ju] = _stein_pairs(A, A, iu, ju, ld_a, ld_a)
            div[ju, iu] = div[iu, ju]
        else:
            ld_b = _batched_logdet(B)
            ia, ib = np.indices((len(A), len(B))).reshape(2, -1)
            div = _stein_pairs(A, B, ia, ib, ld_a, ld_b).reshape(len(A), len(B))
        values = np.exp(-beta * div)
    else:
        values = beta * _projection_block(A, B)
        if self_gram:
            values = np.triu(values) + np.triu(values, 1).T
    return GramMatrix(values, spec)


def default_beta(family, points, seed: int = 0, n_pairs: int = 200) -> float:
    """Default kernel parameter for a dataset.

    The log-Euclidean Gaussian uses the median heuristic ``1 / (2 sigma^2)``
    with sigma^2 the median squared LED over ``n_pairs`` random pairs; the
    Stein kernel uses ``(d-1)/2``; the projection kernel uses 1.
    """
    family = Family(family)
    stack = as_stack(points)
    if family is Family.PROJECTION:
        return 1.0
    d = stack.shape[1]
    if family is Family.GAUSSIAN_STEIN:
        if d < 2:
            raise InvalidKernel("the Stein kernel needs d >= 2")
        return 0.5 * (d - 1)
    n = len(stack)
    if n < 2:
        return 1.0
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, size=n_pairs)
    j = (i + rng.integers(1, n, size=n_pairs)) % n
    logs = manifold.spd_logm_batch(stack).reshape(n, -1)
    sq = np.sum((logs[i] - logs[j]) ** 2, axis=1)
    sigma2 = float(np.median(sq))
    if sigma2 <= 0:
        return 1.0
    return 1.0 / (2.0 * sigma2)
