# ipsim/stats/variance_scan.py
"""Var Z(B_n)/|B_n| along a region ladder against the summed site covariances."""
from __future__ import annotations

import logging
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel

from ipsim.dynamics.rules import LocalRule
from ipsim.exceptions import EstimationError, GraphError
from ipsim.graph.graph_builder import TREE_KINDS, Graph
from ipsim.graph.graph_metrics import Region, ball
from ipsim.simulate.replicas import run_replicas

logger = logging.getLogger(__name__)

N_BATCHES = 20
MAX_BASES = 64


class VarianceRow(BaseModel):
    Bn: int
    ratio: float
    partial_sum: float
    gap: float
    se: float
    boundary_frac: float
    reference: Optional[float] = None
    ref_gap: Optional[float] = None


class VarianceRatioReport(BaseModel):
    t: float
    ell: int
    n_replicas: int
    rows: List[VarianceRow]

    @property
    def boundary_decreasing(self) -> bool:
        fracs = [r.boundary_frac for r in self.rows]
        return all(b < a for a, b in zip(fracs, fracs[1:]))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [r.model_dump() for r in self.rows],
            columns=["Bn", "ratio", "partial_sum", "gap", "se", "boundary_frac", "reference", "ref_gap"],
        )


def _batch_se(Z: np.ndarray, size: int) -> float:
    n = len(Z)
    batches = min(N_BATCHES, n // 2)
    if batches < 2:
        return float("nan")
    ratios = [np.var(part, ddof=1) / size for part in np.array_split(Z, batches)]
    return float(np.std(ratios, ddof=1) / np.sqrt(batches))


def partial_covariance_sum(g: Graph, Y: np.ndarray, ell: int, bases: Sequence[int]) -> float:
    """Mean over base vertices x of sum_{z in ball(x, ell)} Cov(Y_x, Y_z)."""
    Yc = Y - Y.mean(axis=0)
    n = len(Y)
    total = 0.0
    for x in bases:
        cov_row = Yc[:, x] @ Yc / (n - 1)
        total += float(cov_row[sorted(ball(g, x, ell))].sum())
    return total / len(bases)


def variance_ratio_scan(
    g: Graph,
    rule: LocalRule,
    eta0: Sequence[int],
    ladder: Sequence[Region],
    t: float,
    n_replicas: int,
    seed: int,
    f: Optional[Sequence[float]] = None,
    ell: Optional[int] = None,
    reference: Optional[float] = None,
    threads: Optional[int] = None,
) -> VarianceRatioReport:
    """
    Y_x = f(eta_t(x)), Z(B) = sum_{x in B} Y_x. ``gap`` compares the ratio
    with the partial covariance sum; ``ref_gap`` with an analytic value
    when one is supplied.
    """
    if n_replicas < 4:
        raise EstimationError("variance scan needs at least 4 replicas")
    if not ladder:
        raise EstimationError("empty region ladder")
    ell = 3 * rule.range + 3 if ell is None else int(ell)
    f = np.arange(rule.alphabet.size, dtype=float) if f is None else np.asarray(f, dtype=float)

    if g.kind in TREE_KINDS:
        bases = [g.root]
        radius = int(g.interior_radius_map[g.root])
        if ell > radius:
            logger.warning("ell=%d exceeds the interior radius %d; clamping", ell, radius)
            ell = radius
        if any(int(g.interior_radius_map[x]) < 1 for x in ladder[-1].members):
            raise GraphError("ladder regions must stay inside the truncated tree")
    else:
        step = max(1, g.V // MAX_BASES)
        bases = list(range(0, g.V, step))[:MAX_BASES]

    results = run_replicas(g, rule, eta0, t, n_replicas, seed, snapshot_time=t, threads=threads)
    Y = f[results.snapshots.astype(np.int64)]
    partial = partial_covariance_sum(g, Y, ell, bases)

    rows = []
    for region in ladder:
        members = region.as_array()
        Z = Y[:, members].sum(axis=1)
        size = len(members)
        ratio = float(np.var(Z, ddof=1) / size)
        rows.append(
            VarianceRow(
                Bn=size,
                ratio=ratio,
                partial_sum=partial,
                gap=abs(ratio - partial),
                se=_batch_se(Z, size),
                boundary_frac=region.boundary_fraction,
                reference=reference,
                ref_gap=None if reference is None else abs(ratio - reference),
            )
        )
    report = VarianceRatioReport(t=float(t), ell=ell, n_replicas=n_replicas, rows=rows)
    if not report.boundary_decreasing:
        logger.warning("boundary fraction is not strictly decreasing along the ladder")
    return report
