"""Kernelised random projections of manifold data.

All three embeddings start from a random landmark subset S of p points and
its Gram matrix K_S. A point X is represented by its kernel row
``k(X) = [K(X, S_1), ..., K(X, S_p)]`` and embedded by a linear map that
depends only on K_S:

* KGRP draws ``b`` Gaussian-like hyperplanes ``w = sqrt((p-1)/t) K_S^-1/2 e``
  where ``e`` indicates a random t-subset of S,
* KORP orthonormalises S through the Cholesky factor ``K_S = R^T R`` and
  embeds with ``k(X) R^-1``,
* KPCA-RP projects the centred kernel row onto the kernel principal
  components of S.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DegenerateSpectrum,
    InvalidSize,
    NonSymmetric,
    NotPositiveDefinite,
    ShapeMismatch,
    SpecMismatch,
)
from .kernel import GramMatrix, KernelSpec, as_stack, gram

DEFAULT_P = 100
DEFAULT_B = 300
INVSQRT_FLOOR = 1e-10
EIG_FLOOR = 1e-12
CHOL_RETRIES = 3


@dataclass(frozen=True)
class LandmarkSet:
    indices: np.ndarray
    gram_s: GramMatrix

    @property
    def p(self) -> int:
        return len(self.indices)

    @property
    def spec(self) -> KernelSpec:
        return self.gram_s.spec


def select_landmarks(n: int, p: int, seed: int) -> np.ndarray:
    """Draw ``p`` distinct indices from ``range(n)`` uniformly at random."""
    if p < 1 or p > n:
        raise InvalidSize(f"landmark count p={p} must lie in [1, n={n}]")
    rng = np.random.default_rng(seed)
    return rng.choice(n, size=p, replace=False)


def build_landmarks(spec: KernelSpec, points, p: int, seed: int) -> LandmarkSet:
    """Select landmarks from ``points`` and compute their Gram matrix."""
    stack = as_stack(points)
    idx = select_landmarks(len(stack), p, seed)
    return LandmarkSet(idx, gram(spec, stack[idx]))


def _symmetric(K: np.ndarray) -> np.ndarray:
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got {K.shape}")
    if np.any(np.abs(K - K.T) > 1e-10 * np.maximum(1.0, np.abs(K))):
        raise NonSymmetric("kernel matrix is not symmetric")
    return 0.5 * (K + K.T)


def psd_invsqrt(K, floor: float = INVSQRT_FLOOR) -> np.ndarray:
    """Inverse square root of a PSD matrix with eigenvalues clamped at ``floor``."""
    lam, vecs = np.linalg.eigh(_symmetric(K))
    if lam[0] < -1e-8:
        raise NotPositiveDefinite(f"matrix has eigenvalue {lam[0]:.3e}")
    lam = np.maximum(lam, floor)
    out = (vecs / np.sqrt(lam)) @ vecs.T
    return 0.5 * (out + out.T)


class Projector:
    """A fitted embedding. Subclasses implement :meth:`_apply`."""

    landmarks: LandmarkSet

    @property
    def spec(self) -> KernelSpec:
        return self.landmarks.spec

    @property
    def p(self) -> int:
        return self.landmarks.p

    def embed(self, cross) -> np.ndarray:
        """Embed the rows of an n x p kernel matrix against the landmarks."""
        if isinstance(cross, GramMatrix):
            if cross.spec != self.spec:
                raise SpecMismatch(f"cross Gram uses {cross.spec}, projector uses {self.spec}")
            values = cross.values
        else:
            values = np.asarray(cross, dtype=float)
        if values.ndim != 2 or values.shape[1] != self.p:
            raise ShapeMismatch(f"cross Gram shape {values.shape} does not have p={self.p} columns")
        return self._apply(values)

    def _apply(self, values: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class KgrpProjector(Projector):
    landmarks: LandmarkSet
    coef: np.ndarray
    t: int

    @property
    def dim(self) -> int:
        return self.coef.shape[1]

    def _apply(self, values):
        # 1/sqrt(b) puts projected distances on the RKHS scale
        return (values @ self.coef) / math.sqrt(self.dim)


@dataclass(frozen=True)
class KorpProjector(Projector):
    landmarks: LandmarkSet
    rinv: np.ndarray

    @property
    def dim(self) -> int:
        return self.rinv.shape[1]

    def _apply(self, values):
        return values @ self.rinv


@dataclass(frozen=True)
class KpcaRpProjector(Projector):
    landmarks: LandmarkSet
    alpha: np.ndarray
    eigvals: np.ndarray
    col_means: np.ndarray
    grand_mean: float

    @property
    def dim(self) -> int:
        return self.alpha.shape[1]

    def _apply(self, values):
        centred = (values - values.mean(axis=1, keepdims=True)
                   - self.col_means + self.grand_mean)
        return centred @ self.alpha


def embed(proj: Projector, cross) -> np.ndarray:
    return proj.embed(cross)


def default_t(p: int) -> int:
    return min(30, math.ceil(p / 2))


def fit_kgrp(landmarks: LandmarkSet, b: int = DEFAULT_B, t: int | None = None,
             seed: int = 0) -> KgrpProjector:
    """Kernelised Gaussian random projection with ``b`` output dimensions."""
    p = landmarks.p
    if t is None:
        t = default_t(p)
    if b < 1:
        raise InvalidSize(f"b must be >= 1, got {b}")
    if not 1 <= t <= p:
        raise InvalidSize(f"t must lie in [1, p={p}], got {t}")
    invsqrt = psd_invsqrt(landmarks.gram_s.values)
    rng = np.random.default_rng(seed)
    ind = np.zeros((p, b))
    for col in range(b):
        ind[rng.choice(p, size=t, replace=False), col] = 1.0
    coef = math.sqrt((p - 1) / t) * (invsqrt @ ind)
    return KgrpProjector(landmarks, coef, t)


def fit_korp(landmarks: LandmarkSet, jitter: float | None = None) -> KorpProjector:
    """Kernelised orthonormal random projection via Cholesky of K_S."""
    K = _symmetric(landmarks.gram_s.values)
    p = landmarks.p
    if jitter is None:
        jitter = 1e-10 * max(np.trace(K), 1e-300) / p
    reg = K
    for attempt in range(CHOL_RETRIES + 1):
        try:
            lower = np.linalg.cholesky(reg)
            break
        except np.linalg.LinAlgError:
            if attempt == CHOL_RETRIES:
                raise NotPositiveDefinite(
                    f"Cholesky of the landmark Gram failed after {CHOL_RETRIES} retries") from None
            reg = K + jitter * np.eye(p)
            jitter *= 2.0
    upper = lower.T
    rinv = solve_triangular(upper, np.eye(p), lower=False)
    return KorpProjector(landmarks, rinv)


def double_centre(K: np.ndarray) -> np.ndarray:
    col = K.mean(axis=0)
    return K - col[None, :] - K.mean(axis=1)[:, None] + col.mean()


def fit_kpca_rp(landmarks: LandmarkSet, eig_floor: float = EIG_FLOOR,
                keep: int | None = None) -> KpcaRpProjector:
    """KPCA-based random projection onto the principal components of S.

    Components with eigenvalue at or below ``eig_floor`` times the largest
    are dropped; ``keep`` further truncates to the leading components. Each
    coefficient vector is scaled so that its principal direction has unit
    norm in feature space.
    """
    K = _symmetric(landmarks.gram_s.values)
    col_means = K.mean(axis=0)
    grand = float(col_means.mean())
    Kc = double_centre(K)
    Kc = 0.5 * (Kc + Kc.T)
    lam, vecs = np.linalg.eigh(Kc)
    lam, vecs = lam[::-1], vecs[:, ::-1]
    top = lam[0]
    if top <= 1e-12 * np.abs(K).max():
        raise DegenerateSpectrum("centred landmark Gram has no positive eigenvalue")
    mask = lam > eig_floor * top
    if keep is not None:
        if keep < 1:
            raise InvalidSize(f"keep must be >= 1, got {keep}")
        mask &= np.arange(len(lam)) < keep
    if not mask.any():
        raise DegenerateSpectrum("no principal component survived the eigenvalue floor")
    lam, vecs = lam[mask], vecs[:, mask]
    alpha = vecs / np.sqrt(lam)
    return KpcaRpProjector(landmarks, alpha, lam.copy(), col_means, grand)
