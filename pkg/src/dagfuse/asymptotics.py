"""Limit law of the scaled estimator error, and Monte Carlo tools around it.

For a true signal ``beta0`` and a base estimator with ``n^q (beta_hat - beta0) -> psi``,
the scaled error of the fused nearly-isotonic fit converges to the minimizer of

    V(w) = -2 psi'w + w'w + c'w
           + lf0 * sum_{eq} |w_i - w_j| + lni0 * sum_{eq} (w_i - w_j)_+

where ``eq`` are the edges on which ``beta0`` is flat and ``c`` collects the
linear terms contributed by the remaining edges (:func:`linear_shift`).
Halving ``V`` shows that its minimizer is the solver's fit of ``psi - c/2`` on
the ``eq`` subgraph with penalties ``(lf0/2, lni0/2)``.

All experiments use the empirical pmf of a categorical sample as base
estimator, so ``q = 1/2`` and ``psi ~ N(0, diag(p) - p p')``.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Literal

import numpy as np
from scipy import stats

from .errors import DimensionMismatch, InvalidProbabilityVector, NotConverged, PreconditionViolated
from .graph import Dag, _components_from_mask, from_edge_list
from .solver import PenaltyConfig, SolverConfig, _as_signal, solve

log = logging.getLogger(__name__)

PenaltyScaling = Literal["theorem", "matched"]

# Domain tags keep the finite-sample and limit streams independent for a shared seed.
_STREAM_FINITE = 0
_STREAM_LIMIT = 1


@dataclass(frozen=True)
class LimitLawSpec:
    true_signal: np.ndarray
    lambda_f0: float = 0.0
    lambda_ni0: float = 0.0
    q: float = 0.5
    eq_tol: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "true_signal", np.asarray(self.true_signal, dtype=float))
        if self.lambda_f0 < 0 or self.lambda_ni0 < 0:
            raise ValueError("limit penalties must be >= 0")
        if not self.q > 0:
            raise ValueError("rate exponent q must be > 0")


@dataclass(frozen=True)
class EdgeClassification:
    eq_edges: tuple[int, ...]
    pos_edges: tuple[int, ...]
    neg_edges: tuple[int, ...]


@dataclass
class EmpiricalLaw:
    samples: np.ndarray
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def reps(self) -> int:
        return self.samples.shape[0]


def replicate_rng(seed: int, stream: int, replicate: int) -> np.random.Generator:
    """Counter-based generator for replicate ``replicate`` of ``stream``; order-independent."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream, replicate])))


def _check_pmf(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0 or not np.all(np.isfinite(p)):
        raise InvalidProbabilityVector("p must be a finite 1-D vector")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise InvalidProbabilityVector(f"p must be nonnegative and sum to 1 (sum={p.sum()!r})")
    return p


def classify_edges(spec: LimitLawSpec, dag: Dag) -> EdgeClassification:
    b = _as_signal(spec.true_signal, dag, "true_signal")
    d = b[dag.sources] - b[dag.targets]
    eq = np.flatnonzero(np.abs(d) <= spec.eq_tol)
    pos = np.flatnonzero(d > spec.eq_tol)
    neg = np.flatnonzero(d < -spec.eq_tol)
    return EdgeClassification(tuple(eq.tolist()), tuple(pos.tolist()), tuple(neg.tolist()))


def linear_shift(spec: LimitLawSpec, dag: Dag, cls: EdgeClassification) -> np.ndarray:
    """Gradient ``c`` of the terms of ``V`` that are linear in ``w`` (non-flat edges)."""
    c = np.zeros(dag.n_vertices)
    for e in cls.pos_edges:
        i, j = dag.edges[e]
        g = spec.lambda_f0 + spec.lambda_ni0
        c[i] += g
        c[j] -= g
    for e in cls.neg_edges:
        i, j = dag.edges[e]
        c[i] -= spec.lambda_f0
        c[j] += spec.lambda_f0
    return c


def limit_law_solve(psi, spec: LimitLawSpec, dag: Dag, cfg: SolverConfig | None = None) -> np.ndarray:
    """Return ``argmin_w V(w)`` for the given draw ``psi``."""
    psi = _as_signal(psi, dag, "psi")
    cls = classify_edges(spec, dag)
    c = linear_shift(spec, dag, cls)
    target = psi - 0.5 * c
    if not cls.eq_edges or (spec.lambda_f0 == 0 and spec.lambda_ni0 == 0):
        return target
    half = PenaltyConfig(0.5 * spec.lambda_f0, 0.5 * spec.lambda_ni0)
    return solve(target, dag.subgraph(cls.eq_edges), half, cfg).beta


def objective_V(w, psi, spec: LimitLawSpec, dag: Dag) -> float:
    """Direct evaluation of ``V(w)``, term by term, independent of :func:`linear_shift`."""
    w = _as_signal(w, dag, "w")
    psi = _as_signal(psi, dag, "psi")
    b = _as_signal(spec.true_signal, dag, "true_signal")
    db = b[dag.sources] - b[dag.targets]
    dw = w[dag.sources] - w[dag.targets]
    flat = np.abs(db) <= spec.eq_tol
    total = -2.0 * psi @ w + w @ w
    total += spec.lambda_f0 * np.sum(dw[~flat] * np.sign(db[~flat]))
    total += spec.lambda_f0 * np.sum(np.abs(dw[flat]))
    total += spec.lambda_ni0 * np.sum(dw[(~flat) & (db > 0)])
    total += spec.lambda_ni0 * np.sum(np.maximum(dw[flat], 0.0))
    return float(total)


def objective_Vn(w, beta_hat, spec: LimitLawSpec, dag: Dag, n: int, pen_n: PenaltyConfig) -> float:
    """Finite-sample criterion in the local coordinate ``w = n^q (beta - beta0)``.

    ``||z_n - w||^2 - ||z_n||^2`` plus the penalty increments
    ``lambda_n * (pen(beta0 + w/n^q) - pen(beta0))`` with ``z_n = n^q (beta_hat - beta0)``.
    """
    w = _as_signal(w, dag, "w")
    beta_hat = _as_signal(beta_hat, dag, "beta_hat")
    b = _as_signal(spec.true_signal, dag, "true_signal")
    scale = float(n) ** spec.q
    zn = scale * (beta_hat - b)
    db = b[dag.sources] - b[dag.targets]
    dnew = db + (w[dag.sources] - w[dag.targets]) / scale
    total = np.sum((zn - w) ** 2) - np.sum(zn ** 2)
    total += pen_n.lambda_fused * np.sum(np.abs(dnew) - np.abs(db))
    total += pen_n.lambda_ni * np.sum(np.maximum(dnew, 0.0) - np.maximum(db, 0.0))
    return float(total)


def finite_sample_penalty(lambda0: PenaltyConfig, n: int, q: float, scaling: PenaltyScaling = "theorem") -> PenaltyConfig:
    """Penalty used at sample size ``n``.

    ``"theorem"``: ``lambda0 * n^q``, the rate in the theorem's hypothesis.
    ``"matched"``: ``lambda0 / (2 n^q)``, the rate under which the finite-sample
    problem, rewritten in ``w``, is exactly ``V`` with ``psi`` replaced by
    ``n^q (beta_hat - beta0)``.
    """
    if scaling == "theorem":
        return lambda0.scaled(float(n) ** q)
    if scaling == "matched":
        return lambda0.scaled(0.5 * float(n) ** (-q))
    raise ValueError(f"unknown penalty scaling {scaling!r}")


def sample_psi_multinomial(p, rng: np.random.Generator) -> np.ndarray:
    """Draw from ``N(0, diag(p) - p p')`` as ``diag(sqrt p) (I - u u') z``, ``u = sqrt p``."""
    p = _check_pmf(p)
    u = np.sqrt(p)
    z = rng.standard_normal(p.size)
    return u * (z - (u @ z) * u)


def _finite_replicate(r, *, p, dag, n, pen_n, q, seed, cfg):
    rng = replicate_rng(seed, _STREAM_FINITE, r)
    beta_hat = rng.multinomial(n, p) / n
    try:
        fit = solve(beta_hat, dag, pen_n, cfg).beta
    except NotConverged as exc:
        log.warning("finite-sample replicate %d failed: %s", r, exc)
        return None
    return float(n) ** q * (fit - p)


def _limit_replicate(r, *, p, spec, dag, seed, cfg):
    rng = replicate_rng(seed, _STREAM_LIMIT, r)
    psi = sample_psi_multinomial(p, rng)
    try:
        return limit_law_solve(psi, spec, dag, cfg)
    except NotConverged as exc:
        log.warning("limit replicate %d failed: %s", r, exc)
        return None


def _run_replicates(fn, reps: int, threads: int) -> tuple[np.ndarray, list[int]]:
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(fn, range(reps), chunksize=max(1, reps // (4 * threads))))
    else:
        rows = [fn(r) for r in range(reps)]
    failed = [r for r, row in enumerate(rows) if row is None]
    kept = [row for row in rows if row is not None]
    if not kept:
        raise RuntimeError(f"all {reps} replicates failed")
    return np.vstack(kept), failed


def mc_finite_sample(
    p,
    dag: Dag,
    n: int,
    lambda0: PenaltyConfig,
    q: float,
    reps: int,
    seed: int,
    cfg: SolverConfig | None = None,
    scaling: PenaltyScaling = "theorem",
    threads: int = 1,
) -> EmpiricalLaw:
    """Monte Carlo law of ``n^q (beta*_n - p)`` with ``beta_hat`` the empirical pmf.

    Each replicate draws the multinomial counts of ``n`` categorical outcomes,
    smooths the resulting pmf and records the scaled error.  Replicates whose
    solve does not converge are dropped and listed in ``meta["failed"]``.
    """
    p = _check_pmf(p)
    if p.size != dag.n_vertices:
        raise DimensionMismatch("p and graph sizes differ")
    if n < 1 or reps < 1:
        raise ValueError("n and reps must be >= 1")
    pen_n = finite_sample_penalty(lambda0, n, q, scaling)
    fn = partial(_finite_replicate, p=p, dag=dag, n=int(n), pen_n=pen_n, q=q, seed=seed, cfg=cfg)
    samples, failed = _run_replicates(fn, reps, threads)
    meta = {
        "kind": "finite_sample",
        "n": int(n),
        "q": q,
        "lambda0": [lambda0.lambda_fused, lambda0.lambda_ni],
        "lambda_n": [pen_n.lambda_fused, pen_n.lambda_ni],
        "scaling": scaling,
        "reps": int(reps),
        "failed": failed,
        "failures": len(failed),
    }
    return EmpiricalLaw(samples, seed, meta)


def mc_limit(
    p,
    spec: LimitLawSpec,
    dag: Dag,
    reps: int,
    seed: int,
    cfg: SolverConfig | None = None,
    threads: int = 1,
) -> EmpiricalLaw:
    """Monte Carlo law of ``argmin V`` with ``psi`` drawn from the multinomial limit."""
    p = _check_pmf(p)
    if reps < 1:
        raise ValueError("reps must be >= 1")
    fn = partial(_limit_replicate, p=p, spec=spec, dag=dag, seed=seed, cfg=cfg)
    samples, failed = _run_replicates(fn, reps, threads)
    meta = {
        "kind": "limit",
        "q": spec.q,
        "lambda0": [spec.lambda_f0, spec.lambda_ni0],
        "reps": int(reps),
        "failed": failed,
        "failures": len(failed),
    }
    return EmpiricalLaw(samples, seed, meta)


def compare_laws(a: EmpiricalLaw, b: EmpiricalLaw) -> dict:
    """Coordinatewise two-sample KS statistics plus max-norm mean and covariance gaps."""
    A, B = np.atleast_2d(a.samples), np.atleast_2d(b.samples)
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"laws have dimensions {A.shape[1]} and {B.shape[1]}")
    ks = np.array([stats.ks_2samp(A[:, j], B[:, j]).statistic for j in range(A.shape[1])])

    def cov(X):
        if X.shape[0] < 2:
            return np.zeros((X.shape[1], X.shape[1]))
        return np.atleast_2d(np.cov(X, rowvar=False))

    return {
        "per_coord_ks": ks.tolist(),
        "median_ks": float(np.median(ks)),
        "mean_gap": float(np.max(np.abs(A.mean(axis=0) - B.mean(axis=0)))),
        "cov_gap": float(np.max(np.abs(cov(A) - cov(B)))),
    }


def constant_regions(spec: LimitLawSpec, dag: Dag) -> list[list[int]]:
    cls = classify_edges(spec, dag)
    return _components_from_mask(dag, np.asarray(cls.eq_edges, dtype=np.int64))


def decomposition_check(psi, spec: LimitLawSpec, dag: Dag, cfg: SolverConfig | None = None) -> dict:
    """Compare the joint limit solve against separate nearly-isotonic fits per flat region.

    Requires ``lambda_f0 == 0`` and a true signal that is isotonic on ``dag``.
    """
    psi = _as_signal(psi, dag, "psi")
    if spec.lambda_f0 != 0:
        raise PreconditionViolated("decomposition needs lambda_f0 == 0")
    cls = classify_edges(spec, dag)
    if cls.pos_edges:
        raise PreconditionViolated(f"true signal decreases along edges {list(cls.pos_edges)}")
    joint = limit_law_solve(psi, spec, dag, cfg)

    pieces = np.empty(dag.n_vertices)
    pen = PenaltyConfig(0.0, 0.5 * spec.lambda_ni0)
    for region in constant_regions(spec, dag):
        local = {v: k for k, v in enumerate(region)}
        sub_edges = [(local[i], local[j]) for i, j in dag.edges if i in local and j in local]
        sub = from_edge_list(len(region), sub_edges)
        pieces[region] = solve(psi[region], sub, pen, cfg).beta
    return {"max_gap": float(np.max(np.abs(joint - pieces))), "n_regions": len(constant_regions(spec, dag))}
