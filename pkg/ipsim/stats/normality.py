# ipsim/stats/normality.py
"""
Composite normality checks of standardized empirical counts.

Mean and variance are estimated from the same sample, so plain KS
critical values are too lenient; they are calibrated by Monte Carlo
(Lilliefors) instead.
"""
from __future__ import annotations

import functools
import logging
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel
from scipy import stats

from ipsim.config import config
from ipsim.exceptions import EstimationError
from ipsim.simulate.observe import EmpiricalSeries

logger = logging.getLogger(__name__)

_CHUNK = 250


def ks_distance(z: np.ndarray) -> float:
    """sup |F_n - Phi| for a sample, against the standard normal."""
    z = np.sort(np.asarray(z, dtype=float))
    n = len(z)
    cdf = stats.norm.cdf(z)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def standardize(x: np.ndarray) -> Optional[np.ndarray]:
    """(x - mean) / sd with ddof=1, or None for a degenerate sample."""
    x = np.asarray(x, dtype=float)
    sd = x.std(ddof=1) if len(x) > 1 else 0.0
    if not sd > 0:
        return None
    return (x - x.mean()) / sd


@functools.lru_cache(maxsize=64)
def lilliefors_critical_value(n: int, significance: float, samples: Optional[int] = None, seed: int = 0) -> float:
    """Upper ``significance`` quantile of the KS distance of self-standardized normal samples of size n."""
    if n < 4:
        raise EstimationError(f"need at least 4 observations for a normality test, got {n}")
    samples = config.LILLIEFORS_SAMPLES if samples is None else samples
    rng = np.random.default_rng(seed)
    grid_hi = np.arange(1, n + 1) / n
    grid_lo = np.arange(0, n) / n
    dists = []
    for start in range(0, samples, _CHUNK):
        block = rng.standard_normal((min(_CHUNK, samples - start), n))
        block = (block - block.mean(axis=1, keepdims=True)) / block.std(axis=1, ddof=1, keepdims=True)
        cdf = stats.norm.cdf(np.sort(block, axis=1))
        dists.append(np.maximum((grid_hi - cdf).max(axis=1), (cdf - grid_lo).max(axis=1)))
    crit = float(np.quantile(np.concatenate(dists), 1.0 - significance))
    logger.debug("Lilliefors critical value n=%d alpha=%s: %.5f", n, significance, crit)
    return crit


def anderson_darling(z: np.ndarray, significance: float):
    """(statistic, critical value at the closest tabulated level) for a composite normal test."""
    result = stats.anderson(np.asarray(z, dtype=float), dist="norm")
    levels = np.asarray(result.significance_level) / 100.0
    i = int(np.argmin(np.abs(levels - significance)))
    return float(result.statistic), float(result.critical_values[i])


def qq_points(z: np.ndarray):
    z = np.sort(np.asarray(z, dtype=float))
    n = len(z)
    theoretical = stats.norm.ppf((np.arange(1, n + 1) - 0.5) / n)
    return theoretical, z


class CltCell(BaseModel):
    t: float
    w: int
    ks: Optional[float] = None
    ad: Optional[float] = None
    crit: float
    ad_crit: Optional[float] = None
    passed: Optional[bool] = None
    degenerate: bool = False


class CltReport(BaseModel):
    significance: float
    n_replicas: int
    region_size: int
    cells: List[CltCell]
    qq: Optional[list] = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cells if not c.degenerate)

    @property
    def degenerate_cells(self) -> int:
        return sum(1 for c in self.cells if c.degenerate)

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "t": c.t, "w": c.w, "ks": c.ks, "ad": c.ad, "crit": c.crit, "pass": c.passed,
                "ad_crit": c.ad_crit, "degenerate": c.degenerate,
            }
            for c in self.cells
        ]
        return pd.DataFrame(rows, columns=["t", "w", "ks", "ad", "crit", "pass", "ad_crit", "degenerate"])

    def qq_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.qq or [], columns=["t", "w", "theoretical", "sample"])


def clt_check(
    series: Sequence[EmpiricalSeries],
    times: Sequence[float],
    states: Optional[Sequence[int]] = None,
    significance: float = 0.01,
) -> CltReport:
    """
    Test (N_t(w) - mean) / sqrt(|R|) across replicas against a normal law
    with estimated mean and variance, at each requested (t, w).
    """
    if not series:
        raise EstimationError("no replicas")
    n = len(series)
    if n < 500:
        logger.warning("clt_check with %d replicas: KS is unstable below 500", n)
    grid = series[0].grid
    W = series[0].n_states
    size = series[0].region_size
    states = list(range(W)) if states is None else [int(w) for w in states]
    counts = np.stack([s.counts for s in series])
    crit = lilliefors_critical_value(n, significance)

    cells, qq = [], []
    for t in times:
        hit = np.flatnonzero(np.isclose(grid, t, rtol=0, atol=1e-9))
        if not len(hit):
            raise EstimationError(f"time {t} is not on the observation grid")
        i = int(hit[0])
        for w in states:
            x = counts[:, i, w].astype(float)
            z = standardize((x - x.mean()) / np.sqrt(size))
            if z is None:
                cells.append(CltCell(t=float(t), w=w, crit=crit, degenerate=True))
                continue
            ks = ks_distance(z)
            ad, ad_crit = anderson_darling(z, significance)
            cells.append(CltCell(t=float(t), w=w, ks=ks, ad=ad, crit=crit, ad_crit=ad_crit, passed=ks <= crit))
            theoretical, sample = qq_points(z)
            qq.extend({"t": float(t), "w": w, "theoretical": a, "sample": b} for a, b in zip(theoretical, sample))

    report = CltReport(significance=significance, n_replicas=n, region_size=size, cells=cells, qq=qq)
    if report.degenerate_cells:
        logger.info("%d degenerate cells flagged (zero variance)", report.degenerate_cells)
    return report
