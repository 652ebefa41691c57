"""Fused nearly-isotonic regression on a DAG.

Minimizes

    0.5 * ||y - beta||^2 + lambda_fused * ||D beta||_1 + lambda_ni * ||(D beta)_+||_1

by an alternating-direction splitting on ``z = D beta``.  The sum and range
constraints sometimes attached to this estimator are never imposed: the
unconstrained minimizer already satisfies them, and the tests check that.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import sparse

from .errors import DimensionMismatch, InvalidPenalty, NotConverged
from .graph import Dag, _components_from_mask

log = logging.getLogger(__name__)

__all__ = [
    "PenaltyConfig",
    "SolverConfig",
    "SolveResult",
    "FusedPartition",
    "KKTReport",
    "prox_edge_penalty",
    "prox_edge_penalty_vec",
    "solve",
    "solve_path",
    "objective",
    "extract_fused_regions",
    "kkt_certificate",
    "region_stationarity_gap",
]


@dataclass(frozen=True)
class PenaltyConfig:
    lambda_fused: float = 0.0
    lambda_ni: float = 0.0

    def __post_init__(self):
        for name in ("lambda_fused", "lambda_ni"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidPenalty(f"{name} must be finite and >= 0, got {v!r}")

    def scaled(self, factor: float) -> "PenaltyConfig":
        return PenaltyConfig(self.lambda_fused * factor, self.lambda_ni * factor)


@dataclass(frozen=True)
class SolverConfig:
    rho: float = 1.0
    tol_primal: float = 1e-10
    tol_dual: float = 1e-10
    max_iters: int = 200_000
    cg_tol: float = 1e-13
    cg_max_iters: int = 1000

    def __post_init__(self):
        for name in ("rho", "tol_primal", "tol_dual", "cg_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 1 or self.cg_max_iters < 1:
            raise ValueError("iteration limits must be >= 1")


@dataclass
class SolveResult:
    beta: np.ndarray
    edge_dual: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    objective: float
    converged: bool = True
    # Splitting state, kept for warm starts.
    z: np.ndarray | None = field(default=None, repr=False)
    u: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "beta": self.beta.tolist(),
            "edge_dual": self.edge_dual.tolist(),
            "iterations": int(self.iterations),
            "objective": float(self.objective),
            "primal_residual": float(self.primal_residual),
            "dual_residual": float(self.dual_residual),
        }


@dataclass
class FusedPartition:
    regions: list[list[int]]
    region_values: np.ndarray

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    def labels(self, n_vertices: int) -> np.ndarray:
        lab = np.empty(n_vertices, dtype=np.int64)
        for k, grp in enumerate(self.regions):
            lab[grp] = k
        return lab

    def to_dict(self) -> dict:
        return {"regions": self.regions, "region_values": self.region_values.tolist()}


@dataclass
class KKTReport:
    stationarity_gap: float
    box_violation: float
    complementarity_violation: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "stationarity_gap": self.stationarity_gap,
            "box_violation": self.box_violation,
            "complementarity_violation": self.complementarity_violation,
            "pass": self.passed,
        }


def prox_edge_penalty(x: float, t: float, pen: PenaltyConfig) -> float:
    """Proximal map of ``z -> lambda_fused*|z| + lambda_ni*max(z, 0)`` with step ``t``.

    An asymmetric soft threshold: the dead zone is ``[-t*lf, t*(lf + lni)]``.
    """
    if not t > 0:
        raise ValueError("step t must be positive")
    upper = t * (pen.lambda_fused + pen.lambda_ni)
    lower = -t * pen.lambda_fused
    if x > upper:
        return x - upper
    if x < lower:
        return x - lower
    return 0.0


def prox_edge_penalty_vec(x: np.ndarray, t: float, pen: PenaltyConfig) -> np.ndarray:
    upper = t * (pen.lambda_fused + pen.lambda_ni)
    lower = -t * pen.lambda_fused
    return np.where(x > upper, x - upper, np.where(x < lower, x - lower, 0.0))


def _as_signal(y, dag: Dag, name: str = "y") -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] != dag.n_vertices:
        raise DimensionMismatch(
            f"{name} has shape {y.shape}, expected ({dag.n_vertices},) for this graph"
        )
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains non-finite entries")
    return y


def objective(y, dag: Dag, pen: PenaltyConfig, beta) -> float:
    y = _as_signal(y, dag)
    beta = _as_signal(beta, dag, "beta")
    d = beta[dag.sources] - beta[dag.targets]
    return float(
        0.5 * np.sum((y - beta) ** 2)
        + pen.lambda_fused * np.sum(np.abs(d))
        + pen.lambda_ni * np.sum(np.maximum(d, 0.0))
    )


def _cg(A, b: np.ndarray, x0: np.ndarray, tol: float, max_iters: int) -> np.ndarray:
    """Conjugate gradient for SPD ``A``, stopping at ``||r||_2 <= tol * max(1, ||b||_2)``."""
    x = x0.copy()
    r = b - A @ x
    thresh = tol * max(1.0, float(np.sqrt(b @ b)))
    rs = float(r @ r)
    if math.sqrt(rs) <= thresh:
        return x
    p = r.copy()
    for _ in range(max_iters):
        Ap = A @ p
        alpha = rs / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rs_new = float(r @ r)
        if math.sqrt(rs_new) <= thresh:
            break
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x


def solve(
    y,
    dag: Dag,
    pen: PenaltyConfig,
    cfg: SolverConfig | None = None,
    warm_start: SolveResult | None = None,
) -> SolveResult:
    """Minimize the fused nearly-isotonic objective on ``dag``.

    Iterates a CG solve of ``(I + rho D^T D) beta = y + rho D^T (z - u)``, the
    elementwise prox for ``z`` and the scaled dual update for ``u`` until both
    max-norm residuals are below tolerance.  The returned ``edge_dual`` is
    ``rho * u``, an optimality certificate (see :func:`kkt_certificate`).

    Raises :class:`NotConverged` carrying the last iterate when ``max_iters``
    is exhausted.
    """
    cfg = cfg or SolverConfig()
    y = _as_signal(y, dag)
    m = dag.n_edges
    if m == 0:
        return SolveResult(y.copy(), np.zeros(0), 0, 0.0, 0.0, 0.0, True, np.zeros(0), np.zeros(0))

    rho = cfg.rho
    D = dag.D.csr
    Dt = D.T.tocsr()
    A = (sparse.identity(dag.n_vertices, format="csr") + rho * (Dt @ D)).tocsr()
    thresh = 1.0 / rho

    if warm_start is not None and warm_start.z is not None and warm_start.z.shape == (m,):
        beta = warm_start.beta.copy()
        z = warm_start.z.copy()
        # Keep the dual in absolute units so a change of rho does not rescale it.
        u = warm_start.edge_dual / rho
    else:
        beta = y.copy()
        z = prox_edge_penalty_vec(D @ beta, thresh, pen)
        u = np.zeros(m)

    r_pri = r_dual = math.inf
    it = 0
    for it in range(1, cfg.max_iters + 1):
        rhs = y + rho * (Dt @ (z - u))
        beta = _cg(A, rhs, beta, cfg.cg_tol, cfg.cg_max_iters)
        Db = D @ beta
        z_prev = z
        z = prox_edge_penalty_vec(Db + u, thresh, pen)
        resid = Db - z
        u = u + resid
        r_pri = float(np.max(np.abs(resid)))
        r_dual = rho * float(np.max(np.abs(Dt @ (z - z_prev))))
        if r_pri <= cfg.tol_primal and r_dual <= cfg.tol_dual:
            break

    converged = r_pri <= cfg.tol_primal and r_dual <= cfg.tol_dual
    result = SolveResult(
        beta=beta,
        edge_dual=rho * u,
        iterations=it,
        primal_residual=r_pri,
        dual_residual=r_dual,
        objective=objective(y, dag, pen, beta),
        converged=converged,
        z=z,
        u=u,
    )
    if not converged:
        raise NotConverged(
            f"no convergence after {it} iterations "
            f"(primal {r_pri:.3e}, dual {r_dual:.3e})",
            result=result,
        )
    return result


def solve_path(
    y,
    dag: Dag,
    lambdas: Sequence[PenaltyConfig],
    cfg: SolverConfig | None = None,
) -> list[SolveResult]:
    """Solve along a sequence of penalties, warm-starting each from the previous."""
    if len(lambdas) == 0:
        raise ValueError("lambdas must be nonempty")
    out: list[SolveResult] = []
    prev = None
    for k, pen in enumerate(lambdas):
        try:
            prev = solve(y, dag, pen, cfg, warm_start=prev)
        except NotConverged as exc:
            exc.index = k
            exc.args = (f"path point {k}: {exc.args[0]}",)
            raise
        out.append(prev)
    return out


def extract_fused_regions(beta, dag: Dag, fuse_tol: float = 1e-6) -> FusedPartition:
    """Group vertices joined by edges whose fitted difference is at most ``fuse_tol``."""
    beta = _as_signal(beta, dag, "beta")
    diff = np.abs(beta[dag.sources] - beta[dag.targets])
    kept = np.flatnonzero(diff <= fuse_tol)
    regions = _components_from_mask(dag, kept)
    values = np.array([beta[g].mean() for g in regions])
    return FusedPartition(regions, values)


def kkt_certificate(
    y, dag: Dag, pen: PenaltyConfig, result: SolveResult, tol: float = 1e-6
) -> KKTReport:
    """Check ``beta - y + D^T gamma = 0`` with ``gamma`` in the edgewise subdifferential.

    ``gamma_e`` must lie in ``[-lf, lf + lni]``, equal ``lf + lni`` where
    ``(D beta)_e > tol`` and ``-lf`` where ``(D beta)_e < -tol``.
    """
    y = _as_signal(y, dag)
    beta = _as_signal(result.beta, dag, "beta")
    gamma = np.asarray(result.edge_dual, dtype=float)
    if gamma.shape != (dag.n_edges,):
        raise DimensionMismatch(f"edge_dual has shape {gamma.shape}, expected ({dag.n_edges},)")
    hi = pen.lambda_fused + pen.lambda_ni
    lo = -pen.lambda_fused
    stat = beta - y + dag.D.rmatvec(gamma)
    stationarity = float(np.max(np.abs(stat))) if stat.size else 0.0
    if gamma.size == 0:
        return KKTReport(stationarity, 0.0, 0.0, stationarity <= tol)
    box = float(max(0.0, np.max(lo - gamma), np.max(gamma - hi)))
    d = beta[dag.sources] - beta[dag.targets]
    comp = np.zeros_like(gamma)
    pos = d > tol
    neg = d < -tol
    comp[pos] = np.abs(gamma[pos] - hi)
    comp[neg] = np.abs(gamma[neg] - lo)
    complementarity = float(np.max(comp))
    ok = stationarity <= tol and box <= tol and complementarity <= tol
    return KKTReport(stationarity, box, complementarity, bool(ok))


def region_stationarity_gap(y, dag: Dag, pen: PenaltyConfig, beta, fuse_tol: float = 1e-6) -> float:
    """Max gap between each fused region's value and its closed-form stationarity value.

    For a region ``F`` the fitted level equals ``mean(y_F)`` minus
    ``1/|F|`` times the sum over boundary edges of their active subgradient,
    taken with ``+`` when the edge leaves ``F`` and ``-`` when it enters.
    """
    y = _as_signal(y, dag)
    beta = _as_signal(beta, dag, "beta")
    part = extract_fused_regions(beta, dag, fuse_tol)
    lab = part.labels(dag.n_vertices)
    hi = pen.lambda_fused + pen.lambda_ni
    lo = -pen.lambda_fused
    push = np.zeros(part.n_regions)
    for e, (i, j) in enumerate(dag.edges):
        a, b = lab[i], lab[j]
        if a == b:
            continue
        g = hi if part.region_values[a] > part.region_values[b] else lo
        push[a] += g
        push[b] -= g
    gap = 0.0
    for k, grp in enumerate(part.regions):
        level = y[grp].mean() - push[k] / len(grp)
        gap = max(gap, float(np.max(np.abs(beta[grp] - level))))
    return gap


def with_overrides(cfg: SolverConfig, **kw) -> SolverConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
