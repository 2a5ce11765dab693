"""Shared solver infrastructure: configuration, pruning, stopping, tracing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import FactorPair, InvalidParameterError, column_pair_norms

__all__ = [
    "NmfOptions",
    "SolverConfig",
    "PruneEvent",
    "IterationRecord",
    "IterationTrace",
    "STATUS_CONVERGED",
    "STATUS_MAX_ITER",
    "STATUS_DEGENERATE",
    "prune_columns",
    "relative_change",
    "should_stop",
    "init_factors",
]

STATUS_CONVERGED = "converged"
STATUS_MAX_ITER = "max_iter"
STATUS_DEGENERATE = "degenerate"


@dataclass(frozen=True)
class NmfOptions:
    """Parameters specific to the projected Newton NMF solver."""

    beta_u: float = 0.1
    beta_v: float = 0.1
    sigma: float = 1e-2
    eps_active: float = 1e-6
    max_backtracks: int = 40

    def validate(self):
        if not (0.0 < self.beta_u < 1.0 and 0.0 < self.beta_v < 1.0):
            raise InvalidParameterError("beta_u and beta_v must lie in (0, 1)")
        if self.sigma <= 0:
            raise InvalidParameterError("sigma must be positive")
        if self.eps_active <= 0:
            raise InvalidParameterError("eps_active must be positive")
        if self.max_backtracks < 0:
            raise InvalidParameterError("max_backtracks must be nonnegative")


@dataclass(frozen=True)
class SolverConfig:
    lam: float
    d_init: int
    eta: float = 1e-6
    tol: float = 1e-4
    max_iter: int = 500
    prune_tol: float = 1e-6
    seed: int = 0
    nmf: NmfOptions = field(default_factory=NmfOptions)

    def validate(self):
        if self.lam <= 0:
            raise InvalidParameterError("lam must be positive")
        if self.eta <= 0:
            raise InvalidParameterError("eta must be positive")
        if self.d_init < 1:
            raise InvalidParameterError("d_init must be at least 1")
        if self.tol <= 0:
            raise InvalidParameterError("tol must be positive")
        if self.max_iter < 1:
            raise InvalidParameterError("max_iter must be at least 1")
        if self.prune_tol <= 0:
            raise InvalidParameterError("prune_tol must be positive")
        if self.seed < 0:
            raise InvalidParameterError("seed must be a nonnegative integer")
        self.nmf.validate()


@dataclass(frozen=True)
class PruneEvent:
    iteration: int
    removed_columns: list[int]
    pair_norms_at_removal: list[float]


@dataclass
class IterationRecord:
    k: int
    objective: float
    d: int
    rel_change: float
    delta: float
    ms: float
    # Extra diagnostics consumed by the convergence-rate checks; these do
    # not appear in the serialized trace schema.
    displacement_sq: float = 0.0
    gram_min_eig: float = 0.0
    max_col_sq: float = 0.0


@dataclass
class IterationTrace:
    """Per-iteration record of one solve, plus prune events and final status."""

    config: SolverConfig
    initial_objective: float = 0.0
    records: list[IterationRecord] = field(default_factory=list)
    prunes: list[PruneEvent] = field(default_factory=list)
    status: str = STATUS_MAX_ITER

    @property
    def iterations(self) -> int:
        return len(self.records)

    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    def deltas(self) -> np.ndarray:
        return np.array([r.delta for r in self.records])

    def to_json_dict(self, metrics: dict | None = None) -> dict:
        cfg = self.config
        return {
            "config": {
                "lambda": cfg.lam,
                "eta": cfg.eta,
                "d_init": cfg.d_init,
                "tol": cfg.tol,
                "max_iter": cfg.max_iter,
                "prune_tol": cfg.prune_tol,
                "seed": cfg.seed,
                "nmf": {
                    "beta_u": cfg.nmf.beta_u,
                    "beta_v": cfg.nmf.beta_v,
                    "sigma": cfg.nmf.sigma,
                    "eps_active": cfg.nmf.eps_active,
                    "max_backtracks": cfg.nmf.max_backtracks,
                },
            },
            "iterations": [
                {
                    "k": r.k,
                    "objective": r.objective,
                    "d": r.d,
                    "rel_change": r.rel_change,
                    "delta": r.delta,
                    "ms": r.ms,
                }
                for r in self.records
            ],
            "prunes": [
                {
                    "k": p.iteration,
                    "removed": list(p.removed_columns),
                    "norms": list(p.pair_norms_at_removal),
                }
                for p in self.prunes
            ],
            "status": self.status,
            "metrics": {
                "nre": None if metrics is None else metrics.get("nre"),
                "nmae": None if metrics is None else metrics.get("nmae"),
            },
        }


def prune_columns(
    fp: FactorPair, w: np.ndarray, threshold: float
) -> tuple[FactorPair, np.ndarray, list[int]]:
    """Drop columns whose joint norm falls below ``threshold`` times the largest.

    Returns the pruned pair, the pruned weight diagonal and the list of
    surviving column indices (order preserved).  An all-zero pair yields a
    d = 0 pair, the caller's degenerate terminal state.
    """
    if threshold <= 0:
        raise InvalidParameterError("threshold must be positive")
    norms = column_pair_norms(fp)
    top = norms.max() if norms.size else 0.0
    if top == 0.0:
        kept_mask = np.zeros(fp.d, dtype=bool)
    else:
        kept_mask = norms >= threshold * top
    kept = [int(i) for i in np.nonzero(kept_mask)[0]]
    if len(kept) == fp.d:
        return fp, w, kept
    pruned = FactorPair(fp.u[:, kept_mask], fp.v[:, kept_mask])
    return pruned, np.asarray(w)[kept_mask], kept


def _product_gramians(prev: FactorPair, next_: FactorPair):
    tp = float(np.sum((prev.u.T @ prev.u) * (prev.v.T @ prev.v)))
    tn = float(np.sum((next_.u.T @ next_.u) * (next_.v.T @ next_.v)))
    tc = float(np.sum((prev.u.T @ next_.u) * (prev.v.T @ next_.v)))
    return tp, tn, tc


def relative_change(prev: FactorPair, next_: FactorPair) -> float:
    """||U_k V_k^T - U_{k+1} V_{k+1}^T||_F / ||U_k V_k^T||_F.

    Uses Gram-matrix trace identities when the outer dimensions dominate,
    avoiding the m x n products.
    """
    m, n = prev.shape
    if next_.shape != (m, n):
        raise InvalidParameterError("factor pairs describe different matrix shapes")
    dmax = max(prev.d, next_.d, 1)
    if min(m, n) > 4 * dmax:
        tp, tn, tc = _product_gramians(prev, next_)
        if tp <= 0.0:
            raise InvalidParameterError("previous factor product is zero")
        diff_sq = max(tp - 2.0 * tc + tn, 0.0)
        return float(np.sqrt(diff_sq) / np.sqrt(tp))
    xp = prev.product()
    denom = float(np.linalg.norm(xp))
    if denom == 0.0:
        raise InvalidParameterError("previous factor product is zero")
    return float(np.linalg.norm(xp - next_.product())) / denom


def safe_relative_change(prev: FactorPair, next_: FactorPair) -> float:
    """Like :func:`relative_change` but defined for a zero previous product."""
    try:
        return relative_change(prev, next_)
    except InvalidParameterError:
        tp, tn, _ = _product_gramians(prev, next_)
        return 0.0 if tn == 0.0 else float("inf")


def should_stop(trace: IterationTrace, cfg: SolverConfig) -> bool:
    """Stop when the relative product change drops below tol, the iteration
    cap is hit, or every column has been pruned."""
    if not trace.records:
        raise InvalidParameterError("need at least one completed iteration")
    last = trace.records[-1]
    if last.d == 0:
        return True
    if last.rel_change < cfg.tol:
        return True
    if last.k >= cfg.max_iter:
        return True
    return False


def init_factors(
    y: np.ndarray,
    d: int,
    rng: np.random.Generator,
    nonneg: bool = False,
    frob: float | None = None,
) -> FactorPair:
    """Scale-matched Gaussian initialization of both factors.

    Entries are standard Gaussians scaled by (||Y||_F / sqrt(m n d))^(1/2);
    for NMF starts the magnitudes are kept and signs dropped.  ``frob``
    overrides the Frobenius norm used for the scale (masked problems must
    measure it on the observed entries only).
    """
    m, n = y.shape
    if frob is None:
        frob = float(np.linalg.norm(y))
    scale = float(np.sqrt(frob / np.sqrt(m * n * d))) if frob > 0 else 0.0
    u = rng.standard_normal((m, d)) * scale
    v = rng.standard_normal((n, d)) * scale
    if nonneg:
        u, v = np.abs(u), np.abs(v)
    return FactorPair(u, v)
