"""Points, distances, exponential/logarithm maps and Karcher means.

Two manifolds are supported:

* the SPD manifold of d x d symmetric positive definite matrices with the
  affine invariant metric, and
* the Grassmannian G(q, d) of d-dimensional subspaces of R^q, each point
  stored as a q x d matrix with orthonormal columns.

All functions accept plain ndarrays or the point wrappers defined here.
Distances follow the squared convention for SPD (the affine invariant and
log-Euclidean distances are returned as squared Frobenius norms) and the
plain principal-angle norm for the Grassmannian.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyInput,
    KindMismatch,
    NonSymmetric,
    NotPositiveDefinite,
)

SPD_MIN_EIG = 1e-10
NEG_EIG_TOL = 1e-8
SYM_TOL = 1e-10
ORTHO_TOL = 1e-8


class Kind(str, enum.Enum):
    SPD = "spd"
    GRASSMANN = "grassmann"


def as_kind(kind) -> Kind:
    try:
        return Kind(kind)
    except ValueError:
        raise KindMismatch(f"unknown manifold kind {kind!r}") from None


# ---------------------------------------------------------------------------
# validation

def check_symmetric(mat: np.ndarray, tol: float = SYM_TOL) -> None:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {mat.shape}")
    diff = np.abs(mat - mat.T)
    if np.any(diff > tol * np.maximum(1.0, np.abs(mat))):
        raise NonSymmetric(f"matrix is not symmetric (max asymmetry {diff.max():.3e})")


def check_spd(mat: np.ndarray, min_eig: float = SPD_MIN_EIG) -> None:
    check_symmetric(mat)
    lam = np.linalg.eigvalsh(np.asarray(mat, dtype=float))
    # allow eigen-solver roundoff relative to the spectrum's scale
    if lam[0] < min_eig - 64 * np.finfo(float).eps * abs(lam[-1]):
        raise NotPositiveDefinite(
            f"smallest eigenvalue {lam[0]:.3e} is below {min_eig:.1e}")


def check_grassmann(basis: np.ndarray, tol: float = ORTHO_TOL) -> None:
    basis = np.asarray(basis, dtype=float)
    if basis.ndim != 2 or basis.shape[1] > basis.shape[0] or basis.shape[1] < 1:
        raise DimensionMismatch(
            f"expected a q x d basis with 1 <= d <= q, got shape {basis.shape}")
    gram = basis.T @ basis
    err = np.abs(gram - np.eye(basis.shape[1])).max()
    if err > tol:
        raise DimensionMismatch(f"basis columns are not orthonormal (error {err:.3e})")


@dataclass(frozen=True)
class SpdPoint:
    """A symmetric positive definite matrix."""

    mat: np.ndarray

    def __post_init__(self):
        mat = np.array(self.mat, dtype=float)
        check_spd(mat)
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.mat if dtype is None else self.mat.astype(dtype)


@dataclass(frozen=True)
class GrassmannPoint:
    """A point on G(q, d) given by a q x d orthonormal basis."""

    basis: np.ndarray

    def __post_init__(self):
        basis = np.array(self.basis, dtype=float)
        check_grassmann(basis)
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)

    @property
    def ambient(self) -> int:
        return self.basis.shape[0]

    @property
    def subdim(self) -> int:
        return self.basis.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.basis if dtype is None else self.basis.astype(dtype)


@dataclass(frozen=True)
class TangentVector:
    """A tangent vector together with the manifold kind it belongs to."""

    kind: Kind
    vec: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return self.vec if dtype is None else self.vec.astype(dtype)


def _mat(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _same_shape(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape:
        raise DimensionMismatch(f"shape {x.shape} does not match {y.shape}")


# ---------------------------------------------------------------------------
# matrix functions

def _sym_eig(mat: np.ndarray, floor: float | None):
    check_symmetric(mat)
    sym = 0.5 * (mat + mat.T)
    lam, vecs = np.linalg.eigh(sym)
    if floor is not None:
        if lam[0] < -NEG_EIG_TOL:
            raise NotPositiveDefinite(f"negative eigenvalue {lam[0]:.3e}")
        lam = np.maximum(lam, floor)
    return lam, vecs


def _rebuild(vecs: np.ndarray, vals: np.ndarray) -> np.ndarray:
    out = (vecs * vals) @ vecs.T
    return 0.5 * (out + out.T)


def spd_power(X, alpha, min_eig: float = SPD_MIN_EIG) -> np.ndarray:
    """Real power ``X**alpha`` of an SPD matrix, or its logarithm.

    Eigenvalues are clamped from below at ``min_eig`` before the power is
    taken. Pass ``alpha="log"`` for the principal matrix logarithm.
    """
    lam, vecs = _sym_eig(_mat(X), floor=min_eig)
    if isinstance(alpha, str):
        if alpha != "log":
            raise ValueError(f"alpha must be a number or 'log', got {alpha!r}")
        return _rebuild(vecs, np.log(lam))
    return _rebuild(vecs, lam ** float(alpha))


def spd_logm(X) -> np.ndarray:
    return spd_power(X, "log")


def sym_expm(S) -> np.ndarray:
    """Matrix exponential of a symmetric matrix."""
    lam, vecs = _sym_eig(_mat(S), floor=None)
    return _rebuild(vecs, np.exp(lam))


def spd_logm_batch(stack: np.ndarray, min_eig: float = SPD_MIN_EIG) -> np.ndarray:
    """Matrix logarithms of a stack of SPD matrices, shape (n, d, d)."""
    stack = np.asarray(stack, dtype=float)
    sym = 0.5 * (stack + np.swapaxes(stack, -1, -2))
    lam, vecs = np.linalg.eigh(sym)
    if lam.size and lam.min() < -NEG_EIG_TOL:
        raise NotPositiveDefinite(f"negative eigenvalue {lam.min():.3e}")
    lam = np.log(np.maximum(lam, min_eig))
    return (vecs * lam[..., None, :]) @ np.swapaxes(vecs, -1, -2)


# ---------------------------------------------------------------------------
# distances

def spd_distance(X, Y) -> float:
    """Squared affine invariant distance ``||log(X^-1/2 Y X^-1/2)||_F^2``."""
    X, Y = _mat(X), _mat(Y)
    _same_shape(X, Y)
    if np.array_equal(X, Y):
        return 0.0
    w = spd_power(X, -0.5)
    lam = np.linalg.eigvalsh(0.5 * ((w @ Y @ w) + (w @ Y @ w).T))
    return float(np.sum(np.log(np.maximum(lam, SPD_MIN_EIG)) ** 2))


def spd_distances_to(center, stack: np.ndarray) -> np.ndarray:
    """Squared affine invariant distances from ``center`` to every matrix in a stack."""
    center = _mat(center)
    stack = np.asarray(stack, dtype=float)
    if stack.shape[1:] != center.shape:
        raise DimensionMismatch(f"stack shape {stack.shape} vs center {center.shape}")
    w = spd_power(center, -0.5)
    inner = w @ stack @ w
    inner = 0.5 * (inner + np.swapaxes(inner, -1, -2))
    lam = np.linalg.eigvalsh(inner)
    out = np.sum(np.log(np.maximum(lam, SPD_MIN_EIG)) ** 2, axis=-1)
    out[_equal_to(center, stack)] = 0.0
    return out


def _equal_to(center: np.ndarray, stack: np.ndarray) -> np.ndarray:
    # exact copies get distance 0 rather than eigen-solver roundoff
    return np.all(stack == center, axis=(1, 2))


def led_distance(X, Y) -> float:
    """Squared log-Euclidean distance ``||log X - log Y||_F^2``."""
    X, Y = _mat(X), _mat(Y)
    _same_shape(X, Y)
    diff = spd_logm(X) - spd_logm(Y)
    return float(np.sum(diff * diff))


def _logdet_chol(mat: np.ndarray) -> float:
    try:
        chol = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("Cholesky factorisation failed") from None
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def stein_divergence(X, Y) -> float:
    """Stein divergence ``log det((X+Y)/2) - 0.5 log det(XY)``."""
    X, Y = _mat(X), _mat(Y)
    _same_shape(X, Y)
    val = _logdet_chol(0.5 * (X + Y)) - 0.5 * (_logdet_chol(X) + _logdet_chol(Y))
    return max(val, 0.0)


def principal_angles(X, Y) -> np.ndarray:
    """Principal angles between two subspaces, ordered by decreasing cosine."""
    X, Y = _mat(X), _mat(Y)
    _same_shape(X, Y)
    xi = np.linalg.svd(X.T @ Y, compute_uv=False)
    return np.arccos(np.clip(xi, 0.0, 1.0))


def grassmann_distance(X, Y) -> float:
    """Geodesic distance ``sqrt(sum theta_i^2)`` between two subspaces."""
    if np.array_equal(_mat(X), _mat(Y)):
        return 0.0
    return float(np.linalg.norm(principal_angles(X, Y)))


def grassmann_distances_to(center, stack: np.ndarray) -> np.ndarray:
    center = _mat(center)
    stack = np.asarray(stack, dtype=float)
    if stack.shape[1:] != center.shape:
        raise DimensionMismatch(f"stack shape {stack.shape} vs center {center.shape}")
    xi = np.linalg.svd(center.T @ stack, compute_uv=False)
    theta = np.arccos(np.clip(xi, 0.0, 1.0))
    out = np.sqrt(np.sum(theta * theta, axis=-1))
    out[_equal_to(center, stack)] = 0.0
    return out


def distance(x, y, kind) -> float:
    if as_kind(kind) is Kind.SPD:
        return spd_distance(x, y)
    return grassmann_distance(x, y)


# ---------------------------------------------------------------------------
# exponential and logarithm maps

def _spd_log_map(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    lam, vecs = _sym_eig(X, floor=SPD_MIN_EIG)
    sq = _rebuild(vecs, np.sqrt(lam))
    isq = _rebuild(vecs, 1.0 / np.sqrt(lam))
    inner = isq @ Y @ isq
    return _sym(sq @ spd_logm(_sym(inner)) @ sq)


def _spd_exp_map(X: np.ndarray, V: np.ndarray) -> np.ndarray:
    lam, vecs = _sym_eig(X, floor=SPD_MIN_EIG)
    sq = _rebuild(vecs, np.sqrt(lam))
    isq = _rebuild(vecs, 1.0 / np.sqrt(lam))
    return _sym(sq @ sym_expm(_sym(isq @ V @ isq)) @ sq)


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _grassmann_log_map(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    xty = X.T @ Y
    perp = Y - X @ xty
    # M = (I - X X^T) Y (X^T Y)^-1, solved rather than inverted
    M = np.linalg.solve(xty.T, perp.T).T
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    return (U * np.arctan(s)) @ Vt


def _grassmann_exp_map(X: np.ndarray, V: np.ndarray) -> np.ndarray:
    U, s, Vt = np.linalg.svd(V, full_matrices=False)
    Y = (X @ Vt.T * np.cos(s)) @ Vt + (U * np.sin(s)) @ Vt
    Q, R = np.linalg.qr(Y)
    # fix column signs so the representative is close to X V cos + U sin
    return Q * np.sign(np.where(np.diag(R) == 0, 1.0, np.diag(R)))


def log_map(base, target, kind) -> TangentVector:
    """Riemannian logarithm of ``target`` at ``base``."""
    kind = as_kind(kind)
    X, Y = _mat(base), _mat(target)
    _same_shape(X, Y)
    if kind is Kind.SPD:
        return TangentVector(kind, _spd_log_map(X, Y))
    return TangentVector(kind, _grassmann_log_map(X, Y))


def exp_map(base, tangent, kind) -> np.ndarray:
    """Riemannian exponential of ``tangent`` at ``base``."""
    kind = as_kind(kind)
    if isinstance(tangent, TangentVector) and tangent.kind is not kind:
        raise KindMismatch(f"tangent of kind {tangent.kind.value} used with {kind.value}")
    X, V = _mat(base), _mat(tangent)
    _same_shape(X, V)
    if kind is Kind.SPD:
        return _spd_exp_map(X, V)
    return _grassmann_exp_map(X, V)


# ---------------------------------------------------------------------------
# Karcher mean

@dataclass
class KarcherResult:
    point: np.ndarray
    iterations: int
    converged: bool
    grad_norm: float


def karcher_mean(points: Sequence, kind, max_iter: int = 50,
                 tol: float = 1e-6) -> KarcherResult:
    """Iterated tangent-space averaging, started at the first point.

    Each step moves the estimate by the full mean of the log maps. Running
    out of iterations is not an error; check ``converged`` on the result.
    """
    kind = as_kind(kind)
    stack = [_mat(p) for p in points]
    if not stack:
        raise EmptyInput("karcher_mean needs at least one point")
    for p in stack[1:]:
        _same_shape(stack[0], p)
    mu = stack[0].copy()
    logm = _spd_log_map if kind is Kind.SPD else _grassmann_log_map
    expm = _spd_exp_map if kind is Kind.SPD else _grassmann_exp_map
    grad_norm = np.inf
    for it in range(1, max_iter + 1):
        step = sum(logm(mu, p) for p in stack) / len(stack)
        grad_norm = float(np.linalg.norm(step))
        if grad_norm <= tol:
            return KarcherResult(mu, it, True, grad_norm)
        mu = expm(mu, step)
    return KarcherResult(mu, max_iter, False, grad_norm)
