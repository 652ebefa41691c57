"""Acceptance criteria, one test each, each printing a single PASS/FAIL line.

Run directly (``python3 tests/test_acceptance.py``) for just the eight lines,
or through pytest, where the lines are repeated in the terminal summary.
Seeds are fixed here once; they were not tuned against the outcomes.
"""

import time
from functools import cache

import numpy as np
import pytest

from dagfuse.asymptotics import LimitLawSpec, compare_laws, mc_finite_sample, mc_limit
from dagfuse.distribution import CategoricalSample, smooth_histogram
from dagfuse.graph import build_chain, build_grid2d, incidence
from dagfuse.solver import PenaltyConfig
from dagfuse.verify import decomposition_suite, oracle_suite, theorem1_suite

SEED = 0
LINES: dict[int, str] = {}


def report(k: int, ok: bool, text: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {text}"
    LINES[k] = line
    print(line)
    return ok


@cache
def _theorem1():
    t0 = time.perf_counter()
    checks = theorem1_suite(SEED, instances=200, kkt_tol=1e-6)
    return checks, time.perf_counter() - t0


@cache
def _oracles():
    t0 = time.perf_counter()
    checks = oracle_suite(SEED)
    return checks, time.perf_counter() - t0


def criterion1():
    c, secs = _theorem1()
    s, r = c["sum_relative_gap"], c["range_excess"]
    ok = s["pass"] and r["pass"] and secs <= 120
    return report(1, ok, f"200 instances, worst sum gap {s['worst']:.1e}, worst range excess {r['worst']:.1e}, {secs:.0f}s")


def criterion2():
    c, _ = _theorem1()
    keys = ("kkt_stationarity", "kkt_box", "kkt_complementarity", "kkt_failures")
    ok = all(c[k]["pass"] for k in keys)
    detail = ", ".join(f"{k[4:]} {c[k]['worst']:.1e}" for k in keys[:3])
    return report(2, ok, f"KKT at 1e-6 on 200 solves ({detail}, {c['kkt_failures']['worst']} failures)")


def criterion3():
    c, secs = _oracles()
    g, sg = c["grid_objective_excess"], c["subgradient_relative_gap"]
    ok = g["pass"] and sg["pass"] and secs <= 600
    return report(
        3,
        ok,
        f"grid excess {g['worst']:.1e} (<= 1e-6), subgradient relative gap {sg['worst']:.1e} (<= 1e-6), "
        f"solver-not-worse {c['subgradient_solver_not_worse']['worst']:.1e}, {secs:.0f}s",
    )


def criterion4():
    worst_sum, lowest = 0.0, np.inf
    for r in range(100):
        rng = np.random.default_rng([SEED, 40, r])
        k = int(rng.integers(2, 21))
        dag = (build_chain(k) if r % 2 == 0 else build_grid2d(2, (k + 1) // 2))
        p = rng.dirichlet(np.ones(dag.n_vertices))
        outcomes = rng.choice(dag.n_vertices, size=int(rng.integers(1, 500)), p=p)
        pen = PenaltyConfig(*rng.uniform(0, 0.5, 2))
        pmf = smooth_histogram(CategoricalSample(outcomes.tolist()), dag, pen).pmf
        worst_sum = max(worst_sum, abs(pmf.sum() - 1.0))
        lowest = min(lowest, float(pmf.min()))
    ok = worst_sum <= 1e-8 and lowest >= -1e-8
    return report(4, ok, f"100 smoothed pmfs, worst |sum-1| {worst_sum:.1e}, smallest entry {lowest:.1e}")


def _law_comparison(scaling: str):
    dag = build_chain(4)
    p = np.full(4, 0.25)
    lam0 = PenaltyConfig(0.0, 1.0)
    spec = LimitLawSpec(p, 0.0, 1.0, 0.5)
    limit = mc_limit(p, spec, dag, 2000, SEED)
    big = compare_laws(mc_finite_sample(p, dag, 100_000, lam0, 0.5, 2000, SEED, scaling=scaling), limit)
    small = compare_laws(mc_finite_sample(p, dag, 100, lam0, 0.5, 2000, SEED, scaling=scaling), limit)
    return big, small


def criterion5():
    t0 = time.perf_counter()
    big, small = _law_comparison("theorem")
    secs = time.perf_counter() - t0
    ks_max = max(big["per_coord_ks"])
    ok = ks_max <= 0.10 and big["median_ks"] < small["median_ks"] and secs <= 900
    ok = report(
        5,
        ok,
        f"lambda_n = n^0.5: max KS {ks_max:.3f} (<= 0.10), median KS n=1e5 {big['median_ks']:.3f} "
        f"vs n=1e2 {small['median_ks']:.3f}, {secs:.0f}s",
    )
    # Not a criterion: the same comparison under the penalty scaling that
    # matches the limit objective, for context in the failure analysis.
    mb, ms = _law_comparison("matched")
    print(
        f"INFO criterion 5 with lambda_n = 1/(2 n^0.5): max KS {max(mb['per_coord_ks']):.3f}, "
        f"median KS n=1e5 {mb['median_ks']:.3f} vs n=1e2 {ms['median_ks']:.3f}"
    )
    return ok


def criterion6():
    c = decomposition_suite(SEED, draws=100, lambda_ni0=1.0)
    ok = all(v["pass"] for v in c.values())
    detail = ", ".join(f"{k[:-8]} {v['worst']:.1e}" for k, v in c.items())
    return report(6, ok, f"per-region decomposition over 100 draws, max gap {detail} (<= 1e-8)")


def criterion7():
    c, _ = _oracles()
    iso = c["isotonic_limit_vs_pava"]
    return report(7, iso["pass"], f"lambda_NI = 1e4 vs PAVA on 50 chains, worst {iso['worst']:.1e} (<= 1e-3)")


def criterion8():
    g = build_grid2d(3, 4)
    dense = incidence(g).toarray()
    rows_ok = all(sorted(row[row != 0].tolist()) == [-1.0, 1.0] for row in dense)
    ok = g.n_vertices == 12 and g.n_edges == 17 and dense.shape == (17, 12) and rows_ok
    return report(8, ok, f"grid(3,4): {g.n_vertices} vertices, {g.n_edges} edges, D {dense.shape}, rows +1/-1: {rows_ok}")


CRITERIA = [criterion1, criterion2, criterion3, criterion4, criterion5, criterion6, criterion7, criterion8]


@pytest.mark.slow
@pytest.mark.parametrize("fn", CRITERIA, ids=[f"criterion{k}" for k in range(1, 9)])
def test_acceptance(fn):
    assert fn()


if __name__ == "__main__":
    results = [fn() for fn in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria pass")
