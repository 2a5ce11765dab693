"""Alternating reweighted solver for the masked (matrix completion) objective.

The residual is only ever evaluated at the observed entries; each factor
update is one quasi-Newton step with the shared d x d curvature block,
so an iteration costs O(card(Omega) d + (m + n) d^2 + d^3).
"""

from __future__ import annotations

import time

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve

from .common import (
    IterationTrace,
    SolverConfig,
    init_factors,
    should_stop,
)
from .core import (
    FactorPair,
    InvalidParameterError,
    ObservedMask,
    ProblemKind,
    as_matrix,
    objective,
    weight_diag,
)
from .denoise import final_status, finish_iteration
from .oracles import proximity_delta_a

__all__ = ["update_factor_mc", "solve_mc"]


class _MaskedResidual:
    """Observed-entry residual with a fixed sparsity pattern.

    Builds the CSR index structure once; per-iteration work only refills
    the value array.
    """

    def __init__(self, y: np.ndarray, mask: ObservedMask):
        order = np.lexsort((mask.col_idx, mask.row_idx))
        self.row_idx = mask.row_idx[order]
        self.col_idx = mask.col_idx[order]
        self.y_obs = y[self.row_idx, self.col_idx]
        self.template = sp.csr_matrix(
            (np.zeros(mask.card), (self.row_idx, self.col_idx)),
            shape=(mask.rows, mask.cols),
        )

    def csr(self, fp: FactorPair) -> sp.csr_matrix:
        pred = np.einsum("ij,ij->i", fp.u[self.row_idx], fp.v[self.col_idx])
        r = self.template.copy()
        r.data = pred - self.y_obs
        return r


def _mc_step(
    side: str, res: sp.csr_matrix, fp: FactorPair, w: np.ndarray, lam: float
) -> np.ndarray:
    if side == "u":
        cur, other, grad_fit = fp.u, fp.v, res @ fp.v
    else:
        cur, other, grad_fit = fp.v, fp.u, res.T @ fp.u
    w = np.asarray(w, dtype=float)
    a = other.T @ other + lam * np.diag(w)
    c = cho_factor(a, lower=True)
    grad = np.asarray(grad_fit) + lam * cur * w
    return cur - cho_solve(c, grad.T).T


def update_factor_mc(
    side: str,
    y,
    mask: ObservedMask,
    fp: FactorPair,
    w: np.ndarray,
    lam: float,
) -> np.ndarray:
    """One quasi-Newton factor update for the masked objective.

    U side: U - (P_Omega(U V^T - Y) V + lam U D)(V^T V + lam D)^{-1};
    the V side is the transposed analogue.
    """
    if fp.d < 1:
        raise InvalidParameterError("factor pair has no columns")
    if lam <= 0:
        raise InvalidParameterError("lam must be positive")
    if side not in ("u", "v"):
        raise InvalidParameterError(f"side must be 'u' or 'v', got {side!r}")
    y = as_matrix(y, "y")
    if (mask.rows, mask.cols) != y.shape:
        raise InvalidParameterError("mask shape does not match data")
    res = _MaskedResidual(y, mask).csr(fp)
    return _mc_step(side, res, fp, w, lam)


def solve_mc(
    y, mask: ObservedMask, cfg: SolverConfig
) -> tuple[FactorPair, IterationTrace]:
    """Alternating masked updates with weight refresh, pruning and the
    relative-change stopping rule."""
    cfg.validate()
    y = as_matrix(y, "y")
    if (mask.rows, mask.cols) != y.shape:
        raise InvalidParameterError("mask shape does not match data")
    rng = np.random.default_rng(cfg.seed)
    obs_frob = float(np.linalg.norm(y[mask.row_idx, mask.col_idx]))
    fp = init_factors(y, cfg.d_init, rng, frob=obs_frob)
    residual = _MaskedResidual(y, mask)
    trace = IterationTrace(config=cfg)
    trace.initial_objective = objective(
        ProblemKind.COMPLETE, y, mask, fp, cfg.lam, cfg.eta
    )
    for k in range(1, cfg.max_iter + 1):
        t0 = time.perf_counter()
        w = weight_diag(fp, cfg.eta)
        u_new = _mc_step("u", residual.csr(fp), fp, w, cfg.lam)
        mid = FactorPair(u_new, fp.v)
        w_mid = weight_diag(mid, cfg.eta)
        v_new = _mc_step("v", residual.csr(mid), mid, w_mid, cfg.lam)
        next_fp = FactorPair(u_new, v_new)
        delta = proximity_delta_a(fp, next_fp, cfg.lam, cfg.eta)
        fp = finish_iteration(
            trace, cfg, k, fp, next_fp, delta, ProblemKind.COMPLETE, y, mask, t0
        )
        if should_stop(trace, cfg):
            break
    trace.status = final_status(trace, cfg)
    return fp, trace
