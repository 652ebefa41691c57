"""Randomized property suites backing ``dagfuse verify`` and the acceptance tests.

Every suite is a pure function of its seed and returns a JSON-ready report
with one entry per check: worst observed value, tolerance and verdict.
"""
from __future__ import annotations

import numpy as np

from .asymptotics import LimitLawSpec, decomposition_check, replicate_rng, sample_psi_multinomial
from .graph import Dag, build_chain, build_grid2d, from_edge_list
from .oracle import grid_oracle, pava_chain, subgradient_oracle
from .solver import (
    PenaltyConfig,
    SolverConfig,
    kkt_certificate,
    objective,
    region_stationarity_gap,
    solve,
)

SUITES = ("theorem1", "kkt", "oracles", "decomposition")

_SUITE_STREAM = {"theorem1": 10, "kkt": 10, "oracles": 11, "decomposition": 12}


def build_diamond_chain(k: int) -> Dag:
    """``k`` diamonds glued tip to tail: ``3k + 1`` vertices, ``4k`` edges."""
    edges = []
    for d in range(k):
        a = 3 * d
        edges += [(a, a + 1), (a, a + 2), (a + 1, a + 3), (a + 2, a + 3)]
    return from_edge_list(3 * k + 1, edges)


def random_dag(rng: np.random.Generator, n_max: int = 30, family: str | None = None) -> Dag:
    """Chain, 2-D grid, diamond chain or random order-compatible DAG with at most ``n_max`` vertices."""
    family = family or rng.choice(["chain", "grid", "diamond", "random"])
    if family == "chain":
        return build_chain(int(rng.integers(1, n_max + 1)))
    if family == "grid":
        s1 = int(rng.integers(1, min(5, n_max) + 1))
        s2 = int(rng.integers(1, n_max // s1 + 1))
        return build_grid2d(s1, s2)
    if family == "diamond" and n_max >= 4:
        return build_diamond_chain(int(rng.integers(1, (n_max - 1) // 3 + 1)))
    n = int(rng.integers(2, n_max + 1))
    perm = rng.permutation(n)
    density = rng.uniform(0.05, 0.4)
    edges = [
        (int(perm[a]), int(perm[b]))
        for a in range(n)
        for b in range(a + 1, n)
        if rng.random() < density
    ]
    return from_edge_list(n, edges)


def _check(worst: float, tol: float, instances: int) -> dict:
    return {"worst": float(worst), "tolerance": tol, "instances": instances, "pass": bool(worst <= tol)}


def _instance(seed: int, suite: str, k: int, n_max: int, family: str | None = None):
    rng = replicate_rng(seed, _SUITE_STREAM[suite], k)
    fam = family or ("chain", "grid", "diamond", "random")[k % 4]
    dag = random_dag(rng, n_max, fam)
    y = rng.uniform(0.0, 1.0, dag.n_vertices)
    lf, lni = rng.uniform(0.0, 2.0, 2)
    return dag, y, PenaltyConfig(float(lf), float(lni))


def theorem1_suite(seed: int, instances: int = 200, cfg: SolverConfig | None = None, kkt_tol: float = 1e-6) -> dict:
    """Sum and range preservation plus KKT certificates on random instances."""
    sum_worst = range_worst = 0.0
    kkt = {"stationarity": 0.0, "box": 0.0, "complementarity": 0.0}
    region_worst = 0.0
    kkt_failures = 0
    for k in range(instances):
        dag, y, pen = _instance(seed, "theorem1", k, 30)
        res = solve(y, dag, pen, cfg)
        b = res.beta
        sum_worst = max(sum_worst, abs(b.sum() - y.sum()) / (1.0 + abs(y.sum())))
        range_worst = max(range_worst, y.min() - b.min(), b.max() - y.max())
        cert = kkt_certificate(y, dag, pen, res, kkt_tol)
        kkt["stationarity"] = max(kkt["stationarity"], cert.stationarity_gap)
        kkt["box"] = max(kkt["box"], cert.box_violation)
        kkt["complementarity"] = max(kkt["complementarity"], cert.complementarity_violation)
        kkt_failures += not cert.passed
        region_worst = max(region_worst, region_stationarity_gap(y, dag, pen, b))
    checks = {
        "sum_relative_gap": _check(sum_worst, 1e-8, instances),
        "range_excess": _check(range_worst, 1e-8, instances),
        "kkt_stationarity": _check(kkt["stationarity"], kkt_tol, instances),
        "kkt_box": _check(kkt["box"], kkt_tol, instances),
        "kkt_complementarity": _check(kkt["complementarity"], kkt_tol, instances),
        "kkt_failures": {"worst": kkt_failures, "tolerance": 0, "instances": instances, "pass": kkt_failures == 0},
        "fused_region_stationarity": _check(region_worst, 1e-6, instances),
    }
    return checks


def oracle_suite(
    seed: int,
    grid_instances: int = 50,
    subgradient_instances: int = 50,
    isotonic_instances: int = 50,
    grid_step: float = 1e-3,
    subgradient_iters: int = 1_000_000,
    cfg: SolverConfig | None = None,
) -> dict:
    """Solver against brute-force lattice search, subgradient descent and PAVA."""
    grid_excess = -np.inf
    for k in range(grid_instances):
        dag, y, pen = _instance(seed, "oracles", k, 3)
        res = solve(y, dag, pen, cfg)
        lo, hi = float(y.min()), float(y.max())
        if hi - lo < grid_step:
            hi = lo + grid_step
        g = grid_oracle(y, dag, pen, lo, hi, grid_step)
        grid_excess = max(grid_excess, res.objective - objective(y, dag, pen, g))

    sg_rel = 0.0
    sg_signed = -np.inf
    for k in range(subgradient_instances):
        dag, y, pen = _instance(seed, "oracles", 1000 + k, 10)
        res = solve(y, dag, pen, cfg)
        f_or = objective(y, dag, pen, subgradient_oracle(y, dag, pen, subgradient_iters))
        scale = abs(f_or) if f_or != 0 else 1.0
        sg_rel = max(sg_rel, abs(res.objective - f_or) / scale)
        sg_signed = max(sg_signed, (res.objective - f_or) / scale)

    iso_worst = 0.0
    for k in range(isotonic_instances):
        rng = replicate_rng(seed, _SUITE_STREAM["oracles"], 2000 + k)
        n = int(rng.integers(1, 21))
        y = rng.uniform(0.0, 1.0, n)
        res = solve(y, build_chain(n), PenaltyConfig(0.0, 1e4), cfg)
        iso_worst = max(iso_worst, float(np.max(np.abs(res.beta - pava_chain(y)))))

    return {
        "grid_objective_excess": _check(grid_excess, 1e-6, grid_instances),
        "subgradient_relative_gap": _check(sg_rel, 1e-6, subgradient_instances),
        # One-sided: solver never worse than the subgradient point.
        "subgradient_solver_not_worse": _check(sg_signed, 1e-6, subgradient_instances),
        "isotonic_limit_vs_pava": _check(iso_worst, 1e-3, isotonic_instances),
    }


def block_isotonic_truth(dag: Dag, labels) -> np.ndarray:
    """True signal equal to the block label, checked to be isotonic on ``dag``."""
    b = np.asarray(labels, dtype=float)
    if np.any(b[dag.sources] > b[dag.targets]):
        raise ValueError("labels are not isotonic on the graph")
    return b


DECOMPOSITION_CASES = {
    "chain6": (lambda: build_chain(6), [0, 0, 0, 1, 1, 1]),
    # 2 x 3 grid, row-major: left column pair flat at 0, the rest flat at 1.
    "grid2x3": (lambda: build_grid2d(2, 3), [0, 1, 1, 0, 1, 1]),
}


def decomposition_suite(seed: int, draws: int = 100, lambda_ni0: float = 1.0, cfg: SolverConfig | None = None) -> dict:
    checks = {}
    for c, (name, (make, labels)) in enumerate(sorted(DECOMPOSITION_CASES.items())):
        dag = make()
        truth = block_isotonic_truth(dag, labels)
        p = np.full(dag.n_vertices, 1.0 / dag.n_vertices)
        spec = LimitLawSpec(truth, 0.0, lambda_ni0, 0.5)
        worst = 0.0
        for r in range(draws):
            psi = sample_psi_multinomial(p, replicate_rng(seed, _SUITE_STREAM["decomposition"], 1000 * c + r))
            worst = max(worst, decomposition_check(psi, spec, dag, cfg)["max_gap"])
        checks[f"{name}_max_gap"] = _check(worst, 1e-8, draws)
    return checks


def run_suite(name: str, seed: int, cfg: SolverConfig | None = None, **kw) -> dict:
    if name in ("theorem1", "kkt"):
        checks = theorem1_suite(seed, cfg=cfg, **kw)
        if name == "kkt":
            checks = {k: v for k, v in checks.items() if k.startswith(("kkt", "fused"))}
        else:
            checks = {k: v for k, v in checks.items() if not k.startswith(("kkt", "fused"))}
    elif name == "oracles":
        checks = oracle_suite(seed, cfg=cfg, **kw)
    elif name == "decomposition":
        checks = decomposition_suite(seed, cfg=cfg, **kw)
    else:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return {
        "suite": name,
        "seed": seed,
        "pass": all(c["pass"] for c in checks.values()),
        "checks": checks,
    }
