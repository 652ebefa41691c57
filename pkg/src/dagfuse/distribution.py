"""Smoothing of empirical pmfs over a DAG-ordered support."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptySample, OutcomeOutOfRange, ProbabilityContractViolated
from .graph import Dag
from .solver import (
    FusedPartition,
    KKTReport,
    PenaltyConfig,
    SolveResult,
    SolverConfig,
    extract_fused_regions,
    kkt_certificate,
    solve,
)

# Slack for the sum/range guarantees; the fit is never renormalized or clipped.
CONTRACT_TOL = 1e-8


@dataclass(frozen=True)
class CategoricalSample:
    outcomes: tuple[int, ...]

    def __init__(self, outcomes: Sequence[int]):
        object.__setattr__(self, "outcomes", tuple(int(o) for o in outcomes))

    @property
    def n(self) -> int:
        return len(self.outcomes)


@dataclass
class SmoothedPmf:
    pmf: np.ndarray
    empirical: np.ndarray
    regions: FusedPartition
    certificate: KKTReport
    result: SolveResult

    def to_dict(self) -> dict:
        out = self.result.to_dict()
        out["regions"] = self.regions.to_dict()
        out["certificate"] = self.certificate.to_dict()
        return out


def empirical_pmf(sample: CategoricalSample, n_vertices: int) -> np.ndarray:
    if sample.n == 0:
        raise EmptySample("sample has no outcomes")
    counts = np.zeros(n_vertices)
    for k, o in enumerate(sample.outcomes):
        if not 0 <= o < n_vertices:
            raise OutcomeOutOfRange(f"outcome #{k} = {o} outside [0, {n_vertices})")
        counts[o] += 1
    return counts / sample.n


def check_probability_contract(pmf: np.ndarray, empirical: np.ndarray, tol: float = CONTRACT_TOL) -> None:
    """Raise if ``pmf`` breaks sum preservation or the range of ``empirical``."""
    sum_gap = abs(pmf.sum() - empirical.sum())
    low = empirical.min() - pmf.min()
    high = pmf.max() - empirical.max()
    if sum_gap > tol or low > tol or high > tol:
        raise ProbabilityContractViolated(
            f"smoothed pmf left the simplex: sum gap {sum_gap:.3e}, "
            f"below min by {low:.3e}, above max by {high:.3e}"
        )


def smooth_histogram(
    sample: CategoricalSample,
    dag: Dag,
    pen: PenaltyConfig,
    cfg: SolverConfig | None = None,
    fuse_tol: float = 1e-6,
    kkt_tol: float = 1e-6,
) -> SmoothedPmf:
    """Empirical pmf, then fused nearly-isotonic smoothing, fused regions and a KKT check.

    The output is asserted (not forced) to be a probability vector.
    """
    emp = empirical_pmf(sample, dag.n_vertices)
    res = solve(emp, dag, pen, cfg)
    check_probability_contract(res.beta, emp)
    regions = extract_fused_regions(res.beta, dag, fuse_tol)
    cert = kkt_certificate(emp, dag, pen, res, kkt_tol)
    return SmoothedPmf(res.beta, emp, regions, cert, res)
