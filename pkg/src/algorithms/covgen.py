"""
Covariance structures, Gaussian sampling and mean-vector generation
for the numerical study.

Structures: IND, AR(rho), BD(rho) with blocks of 4, BAND(rho) with
bandwidth 4, or a user matrix. The heteroscedastic variant draws
sigma_ii ~ chi2_5 / 5 and rescales the base structure, read as a
correlation matrix, to D^{1/2} R D^{1/2}.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from algorithms.errors import NotPositiveDefinite, ShapeMismatch


class CovKind(str, Enum):
    IND = "ind"
    AR = "ar"
    BLOCK_DIAG = "bd"
    BAND = "band"
    CUSTOM = "custom"


@dataclass(frozen=True)
class CovarianceModel:
    kind: CovKind = CovKind.IND
    rho: float = 0.0
    width: int = 4
    hetero_diag: bool = False
    matrix: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.kind, CovKind):
            object.__setattr__(self, "kind", CovKind(str(self.kind).lower()))
        if self.width < 1:
            raise ValueError(f"width must be positive, got {self.width}")
        if self.kind is CovKind.AR and not abs(self.rho) < 1.0:
            raise ValueError(f"AR needs |rho| < 1, got {self.rho}")
        if self.kind is CovKind.BLOCK_DIAG:
            lower = -1.0 / (self.width - 1) if self.width > 1 else -1.0
            if not lower < self.rho < 1.0:
                raise ValueError(f"BD({self.width}) needs rho in ({lower:.4g}, 1), got {self.rho}")
        if self.kind is CovKind.CUSTOM:
            if self.matrix is None:
                raise ValueError("custom covariance needs a matrix")
            mat = np.asarray(self.matrix, dtype=float)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise ShapeMismatch(f"custom covariance must be square, got {mat.shape}")
            if not np.allclose(mat, mat.T):
                raise ValueError("custom covariance must be symmetric")
            cholesky_factor(mat)
            object.__setattr__(self, "matrix", mat)

    @classmethod
    def ind(cls, hetero_diag: bool = False) -> "CovarianceModel":
        return cls(CovKind.IND, hetero_diag=hetero_diag)

    @classmethod
    def ar(cls, rho: float, hetero_diag: bool = False) -> "CovarianceModel":
        return cls(CovKind.AR, rho=rho, hetero_diag=hetero_diag)

    @classmethod
    def block_diag(cls, rho: float, blk: int = 4, hetero_diag: bool = False) -> "CovarianceModel":
        return cls(CovKind.BLOCK_DIAG, rho=rho, width=blk, hetero_diag=hetero_diag)

    @classmethod
    def band(cls, rho: float, bw: int = 4, hetero_diag: bool = False) -> "CovarianceModel":
        return cls(CovKind.BAND, rho=rho, width=bw, hetero_diag=hetero_diag)

    @classmethod
    def custom(cls, matrix) -> "CovarianceModel":
        return cls(CovKind.CUSTOM, matrix=np.asarray(matrix, dtype=float))

    @property
    def label(self) -> str:
        names = {
            CovKind.IND: "IND",
            CovKind.AR: f"AR_{self.rho:g}",
            CovKind.BLOCK_DIAG: f"BD_{self.rho:g}",
            CovKind.BAND: f"BAND_{self.rho:g}",
            CovKind.CUSTOM: "CUSTOM",
        }
        return names[self.kind] + ("+HET" if self.hetero_diag else "")

    @property
    def is_identity(self) -> bool:
        return self.kind is CovKind.IND and not self.hetero_diag


def cholesky_factor(sigma: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, or NotPositiveDefinite."""
    try:
        return linalg.cholesky(np.asarray(sigma, dtype=float), lower=True)
    except linalg.LinAlgError:
        raise NotPositiveDefinite("covariance matrix is not positive definite") from None


def _base_structure(model: CovarianceModel, p: int) -> np.ndarray:
    idx = np.arange(p)
    gap = np.abs(idx[:, None] - idx[None, :])
    if model.kind is CovKind.IND:
        return np.eye(p)
    if model.kind is CovKind.AR:
        return model.rho ** gap.astype(float)
    if model.kind is CovKind.BLOCK_DIAG:
        group = idx // model.width
        same = group[:, None] == group[None, :]
        return np.where(gap == 0, 1.0, np.where(same, model.rho, 0.0))
    if model.kind is CovKind.BAND:
        return np.where(gap == 0, 1.0, np.where(gap <= model.width, model.rho, 0.0))
    mat = model.matrix
    if mat.shape[0] != p:
        raise ShapeMismatch(f"custom covariance is {mat.shape[0]}x{mat.shape[0]} but p={p}")
    return mat.copy()


def chi2_5_scales(p: int, rng: np.random.Generator) -> np.ndarray:
    """p draws of chi2_5 / 5."""
    return rng.chisquare(5, size=p) / 5.0


def realize_sigma(model: CovarianceModel, p: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Dense p x p covariance of the model; heteroscedastic diagonals are drawn from rng."""
    if p < 1:
        raise ValueError(f"p must be positive, got {p}")
    sigma = _base_structure(model, p)
    if model.hetero_diag:
        if rng is None:
            raise ValueError("heteroscedastic diagonal needs a random generator")
        if model.kind is CovKind.CUSTOM:
            sd = np.sqrt(np.diag(sigma))
            sigma = sigma / np.outer(sd, sd)
        root = np.sqrt(chi2_5_scales(p, rng))
        sigma = sigma * np.outer(root, root)
    cholesky_factor(sigma)
    return sigma


def sample_gaussian(mean: np.ndarray, chol: Optional[np.ndarray], n: int, rng: np.random.Generator) -> np.ndarray:
    """n rows i.i.d. N_p(mean, L L'); chol=None means identity."""
    mean = np.asarray(mean, dtype=float)
    p = mean.size
    draws = rng.standard_normal((n, p))
    if chol is not None:
        if chol.shape != (p, p):
            raise ShapeMismatch(f"factor is {chol.shape} but mean has p={p}")
        draws = draws @ chol.T
    return draws + mean


class SignalKind(str, Enum):
    SIGN_FLIP = "sign_flip"
    SPARSE_SIGN_FLIP = "sparse_sign_flip"
    FIXED = "fixed"


@dataclass(frozen=True)
class SignalSpec:
    """How mu2 is produced; mu1 = 0 throughout."""

    kind: SignalKind = SignalKind.SIGN_FLIP
    delta: float = 0.0
    prop: float = 1.0
    vector: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.kind, SignalKind):
            object.__setattr__(self, "kind", SignalKind(str(self.kind).lower()))
        if self.delta < 0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")
        if not 0.0 <= self.prop <= 1.0:
            raise ValueError(f"prop must lie in [0, 1], got {self.prop}")
        if self.kind is SignalKind.FIXED:
            if self.vector is None:
                raise ValueError("fixed signal needs a vector")
            object.__setattr__(self, "vector", np.asarray(self.vector, dtype=float).ravel())

    @classmethod
    def null(cls) -> "SignalSpec":
        return cls(SignalKind.SIGN_FLIP, delta=0.0)

    @classmethod
    def sign_flip(cls, delta: float) -> "SignalSpec":
        return cls(SignalKind.SIGN_FLIP, delta=delta)

    @classmethod
    def sparse_sign_flip(cls, delta: float, prop: float) -> "SignalSpec":
        return cls(SignalKind.SPARSE_SIGN_FLIP, delta=delta, prop=prop)

    @classmethod
    def fixed(cls, vector: Sequence[float]) -> "SignalSpec":
        return cls(SignalKind.FIXED, vector=np.asarray(vector, dtype=float))

    @property
    def is_null(self) -> bool:
        if self.kind is SignalKind.FIXED:
            return not np.any(self.vector)
        return self.delta == 0.0 or (self.kind is SignalKind.SPARSE_SIGN_FLIP and self.prop == 0.0)

    @property
    def is_random(self) -> bool:
        return self.kind is not SignalKind.FIXED


def local_alternative(delta_vec: Sequence[float], n1: int, n2: int) -> np.ndarray:
    """mu1 - mu2 = sqrt(N / (n1 n2)) delta."""
    return math.sqrt((n1 + n2) / (n1 * n2)) * np.asarray(delta_vec, dtype=float)


def _partial_shuffle(p: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """`count` distinct positions of range(p), drawn without replacement."""
    return rng.choice(p, size=count, replace=False)


def make_mu2(spec: SignalSpec, p: int, rng: np.random.Generator) -> np.ndarray:
    if p < 1:
        raise ValueError(f"p must be positive, got {p}")
    if spec.kind is SignalKind.FIXED:
        if spec.vector.size != p:
            raise ShapeMismatch(f"fixed signal has length {spec.vector.size}, expected p={p}")
        # mu1 = 0, so mu2 = -(mu1 - mu2)
        return -spec.vector.copy()

    magnitude = spec.delta / math.sqrt(p)
    if spec.kind is SignalKind.SIGN_FLIP:
        signs = rng.choice(np.array([-1.0, 1.0]), size=p)
        return magnitude * signs

    count = int(round(spec.prop * p))
    mu2 = np.zeros(p)
    support = _partial_shuffle(p, count, rng)
    mu2[support] = magnitude * rng.choice(np.array([-1.0, 1.0]), size=count)
    return mu2
