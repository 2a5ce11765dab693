"""Domain types, objectives, gradients and evaluation metrics.

The data model is deliberately thin: matrices are plain float64 numpy
arrays validated at the boundary, a :class:`FactorPair` couples the two
factors ``U`` (m x d) and ``V`` (n x d), and an :class:`ObservedMask`
holds the index set of observed entries together with its sampling
operator.  Everything in this module is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

__all__ = [
    "ProblemKind",
    "FactorPair",
    "ObservedMask",
    "InvalidParameterError",
    "DimensionMismatchError",
    "ConstraintViolationError",
    "as_matrix",
    "column_pair_norms",
    "weight_diag",
    "smoothed_regularizer",
    "apply_mask",
    "objective",
    "gradient",
    "nre",
    "nmae",
    "freedom_ratio",
]

# Below this observed-entry density the masked residual is traversed
# sparsely instead of materializing an m x n array.
SPARSE_DENSITY_CUTOFF = 0.25


class InvalidParameterError(ValueError):
    """A scalar parameter is outside its admissible range."""


class DimensionMismatchError(ValueError):
    """Array shapes are inconsistent with each other."""


class ConstraintViolationError(ValueError):
    """An input violates a problem constraint (e.g. NMF nonnegativity)."""


class ProblemKind(Enum):
    DENOISE = "denoise"
    COMPLETE = "complete"
    NMF = "nmf"


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return a finite 2-D float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class FactorPair:
    """The current factors U (m x d) and V (n x d) sharing inner dimension d."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = as_matrix(self.u, "u")
        v = as_matrix(self.v, "v")
        if u.shape[1] != v.shape[1]:
            raise DimensionMismatchError(
                f"factors disagree on inner dimension: {u.shape[1]} vs {v.shape[1]}"
            )
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def d(self) -> int:
        return self.u.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.u.shape[0], self.v.shape[0])

    def product(self) -> np.ndarray:
        return self.u @ self.v.T


@dataclass(frozen=True)
class ObservedMask:
    """Index set of observed entries of an m x n matrix."""

    rows: int
    cols: int
    row_idx: np.ndarray = field(repr=False)
    col_idx: np.ndarray = field(repr=False)

    def __post_init__(self):
        ri = np.asarray(self.row_idx, dtype=np.int64).ravel()
        ci = np.asarray(self.col_idx, dtype=np.int64).ravel()
        if ri.shape != ci.shape:
            raise DimensionMismatchError("row and column index arrays differ in length")
        if ri.size < 1:
            raise InvalidParameterError("mask must contain at least one entry")
        if ri.min() < 0 or ri.max() >= self.rows or ci.min() < 0 or ci.max() >= self.cols:
            raise InvalidParameterError("mask index out of range")
        flat = ri * self.cols + ci
        if np.unique(flat).size != flat.size:
            raise InvalidParameterError("mask contains duplicate index pairs")
        object.__setattr__(self, "row_idx", ri)
        object.__setattr__(self, "col_idx", ci)

    @classmethod
    def from_pairs(cls, rows: int, cols: int, pairs) -> "ObservedMask":
        pairs = list(pairs)
        ri = np.array([p[0] for p in pairs], dtype=np.int64)
        ci = np.array([p[1] for p in pairs], dtype=np.int64)
        return cls(rows, cols, ri, ci)

    @classmethod
    def full(cls, rows: int, cols: int) -> "ObservedMask":
        ri, ci = np.divmod(np.arange(rows * cols, dtype=np.int64), cols)
        return cls(rows, cols, ri, ci)

    @property
    def card(self) -> int:
        return self.row_idx.size

    @property
    def density(self) -> float:
        return self.card / (self.rows * self.cols)

    def to_dense_bool(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols), dtype=bool)
        out[self.row_idx, self.col_idx] = True
        return out


def column_pair_norms(fp: FactorPair) -> np.ndarray:
    """Per-column joint norms sqrt(||u_i||^2 + ||v_i||^2)."""
    return np.sqrt(np.sum(fp.u * fp.u, axis=0) + np.sum(fp.v * fp.v, axis=0))


def weight_diag(fp: FactorPair, eta: float) -> np.ndarray:
    """Diagonal reweighting entries 1/sqrt(||u_i||^2 + ||v_i||^2 + eta^2)."""
    if eta <= 0:
        raise InvalidParameterError("eta must be positive")
    sq = np.sum(fp.u * fp.u, axis=0) + np.sum(fp.v * fp.v, axis=0)
    return 1.0 / np.sqrt(sq + eta * eta)


def smoothed_regularizer(fp: FactorPair, eta: float) -> float:
    """Smoothed joint column-sparsity value sum_i sqrt(||u_i||^2 + ||v_i||^2 + eta^2).

    With ``eta=0`` this is the l1/l2 norm of the stacked factor columns.
    """
    if eta < 0:
        raise InvalidParameterError("eta must be nonnegative")
    sq = np.sum(fp.u * fp.u, axis=0) + np.sum(fp.v * fp.v, axis=0)
    return float(np.sum(np.sqrt(sq + eta * eta)))


def apply_mask(m, mask: ObservedMask) -> np.ndarray:
    """Sampling operator: keep observed entries, zero the rest."""
    arr = as_matrix(m)
    if arr.shape != (mask.rows, mask.cols):
        raise DimensionMismatchError(
            f"matrix shape {arr.shape} does not match mask ({mask.rows}, {mask.cols})"
        )
    out = np.zeros_like(arr)
    out[mask.row_idx, mask.col_idx] = arr[mask.row_idx, mask.col_idx]
    return out


def _check_problem_inputs(kind: ProblemKind, y: np.ndarray, mask, fp: FactorPair):
    if fp.shape != y.shape:
        raise DimensionMismatchError(
            f"factor product shape {fp.shape} does not match data {y.shape}"
        )
    if kind is ProblemKind.COMPLETE:
        if mask is None:
            raise InvalidParameterError("completion requires an observed mask")
        if (mask.rows, mask.cols) != y.shape:
            raise DimensionMismatchError("mask shape does not match data")
    if kind is ProblemKind.NMF:
        if np.any(y < 0):
            raise ConstraintViolationError("NMF data must be elementwise nonnegative")
        if np.any(fp.u < 0) or np.any(fp.v < 0):
            raise ConstraintViolationError("NMF factors must be elementwise nonnegative")


def _observed_residual_values(y: np.ndarray, mask: ObservedMask, fp: FactorPair) -> np.ndarray:
    """Values of (U V^T - Y) at the observed entries only."""
    pred = np.einsum(
        "ij,ij->i", fp.u[mask.row_idx], fp.v[mask.col_idx]
    )
    return pred - y[mask.row_idx, mask.col_idx]


def _residual_csr(y: np.ndarray, mask: ObservedMask, fp: FactorPair) -> sp.csr_matrix:
    vals = _observed_residual_values(y, mask, fp)
    return sp.csr_matrix(
        (vals, (mask.row_idx, mask.col_idx)), shape=(mask.rows, mask.cols)
    )


def objective(
    kind: ProblemKind,
    y,
    mask: ObservedMask | None,
    fp: FactorPair,
    lam: float,
    eta: float,
) -> float:
    """Cost 0.5 ||residual||_F^2 + lambda * smoothed regularizer.

    The residual is Y - U V^T for denoising/NMF and its restriction to
    the observed entries for completion.
    """
    y = as_matrix(y, "y")
    _check_problem_inputs(kind, y, mask, fp)
    if kind is ProblemKind.COMPLETE:
        if mask.density < SPARSE_DENSITY_CUTOFF:
            r = _observed_residual_values(y, mask, fp)
            fit = 0.5 * float(r @ r)
        else:
            res = apply_mask(fp.product() - y, mask)
            fit = 0.5 * float(np.sum(res * res))
    else:
        res = fp.product() - y
        fit = 0.5 * float(np.sum(res * res))
    return fit + lam * smoothed_regularizer(fp, eta)


def gradient(
    kind: ProblemKind,
    side: str,
    y,
    mask: ObservedMask | None,
    fp: FactorPair,
    lam: float,
    eta: float,
) -> np.ndarray:
    """Exact gradient of the eta-smoothed objective w.r.t. one factor.

    ``side`` is ``"u"`` or ``"v"``.  The gradient is R V + lambda U D for
    the U side (R the possibly masked residual U V^T - Y) and the
    transposed analogue for the V side.
    """
    y = as_matrix(y, "y")
    _check_problem_inputs(kind, y, mask, fp)
    if side not in ("u", "v"):
        raise InvalidParameterError(f"side must be 'u' or 'v', got {side!r}")
    w = weight_diag(fp, eta)
    if kind is ProblemKind.COMPLETE:
        if mask.density < SPARSE_DENSITY_CUTOFF:
            r = _residual_csr(y, mask, fp)
            rv = r @ fp.v if side == "u" else r.T @ fp.u
        else:
            res = apply_mask(fp.product() - y, mask)
            rv = res @ fp.v if side == "u" else res.T @ fp.u
    else:
        res = fp.product() - y
        rv = res @ fp.v if side == "u" else res.T @ fp.u
    factor = fp.u if side == "u" else fp.v
    return np.asarray(rv) + lam * factor * w


def nre(x0, fp: FactorPair) -> float:
    """Normalized reconstruction error ||X0 - U V^T||_F / ||X0||_F."""
    x0 = as_matrix(x0, "x0")
    denom = float(np.linalg.norm(x0))
    if denom == 0.0:
        raise InvalidParameterError("reference matrix must be nonzero")
    return float(np.linalg.norm(x0 - fp.product())) / denom


def nmae(y, mask: ObservedMask, fp: FactorPair) -> float:
    """Mean absolute error over observed entries, scaled by the rating range 4."""
    y = as_matrix(y, "y")
    if mask.card < 1:
        raise InvalidParameterError("mask must contain at least one entry")
    pred = np.einsum("ij,ij->i", fp.u[mask.row_idx], fp.v[mask.col_idx])
    return float(np.sum(np.abs(pred - y[mask.row_idx, mask.col_idx]))) / (4.0 * mask.card)


def freedom_ratio(r: int, n: int, card_omega: int) -> float:
    """Degrees-of-freedom ratio r (2n - r) / card(Omega)."""
    if card_omega <= 0:
        raise InvalidParameterError("card_omega must be positive")
    if r <= 0 or n <= 0 or r > n:
        raise InvalidParameterError("need 0 < r <= n")
    return r * (2 * n - r) / card_omega
