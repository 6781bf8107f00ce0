# ipsim/stats/moments.py
"""
Cross-replica moments of the empirical process.

Everything is built from mergeable sufficient statistics taken about a
shift (the first replica seen), so a deterministic coordinate has exactly
zero estimated variance.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd

from ipsim.exceptions import EstimationError
from ipsim.simulate.observe import EmpiricalSeries

logger = logging.getLogger(__name__)


class MomentAccumulator:
    """Sums, cross-products and degradation power sums over replicas."""

    def __init__(self, grid: Sequence[float], n_states: int, region_size: int):
        self.grid = np.asarray(grid, dtype=float)
        self.n_states = int(n_states)
        self.region_size = int(region_size)
        size = len(self.grid) * self.n_states
        self.n = 0
        self.shift: Optional[np.ndarray] = None
        self.s1 = np.zeros(size)
        self.s2 = np.zeros((size, size))
        self.d_shift: Optional[np.ndarray] = None
        self.d_pow = np.zeros((4, len(self.grid)))
        self.has_degradation = True

    def add(self, series: EmpiricalSeries) -> None:
        if series.counts.shape != (len(self.grid), self.n_states) or series.region_size != self.region_size:
            raise EstimationError("series does not match the accumulator's grid, alphabet or region")
        x = series.counts.reshape(-1).astype(float)
        if self.shift is None:
            self.shift = x.copy()
        x = x - self.shift
        self.s1 += x
        self.s2 += np.outer(x, x)

        if series.degradation is None:
            self.has_degradation = False
        elif self.has_degradation:
            d = np.asarray(series.degradation, dtype=float)
            if self.d_shift is None:
                self.d_shift = d.copy()
            d = d - self.d_shift
            self.d_pow += np.vstack([d, d ** 2, d ** 3, d ** 4])
        self.n += 1

    def extend(self, series: Iterable[EmpiricalSeries]) -> "MomentAccumulator":
        for s in series:
            self.add(s)
        return self

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        """Pool two accumulators; both are re-expressed about this one's shift."""
        if other.n == 0:
            return self
        if self.n == 0:
            self.__dict__.update({k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in other.__dict__.items()})
            return self
        delta = other.shift - self.shift
        self.s2 += other.s2 + np.outer(other.s1, delta) + np.outer(delta, other.s1) + other.n * np.outer(delta, delta)
        self.s1 += other.s1 + other.n * delta
        if self.has_degradation and other.has_degradation:
            c = other.d_shift - self.d_shift
            p1, p2, p3, p4 = other.d_pow
            n = other.n
            self.d_pow += np.vstack([
                p1 + n * c,
                p2 + 2 * c * p1 + n * c ** 2,
                p3 + 3 * c * p2 + 3 * c ** 2 * p1 + n * c ** 3,
                p4 + 4 * c * p3 + 6 * c ** 2 * p2 + 4 * c ** 3 * p1 + n * c ** 4,
            ])
        else:
            self.has_degradation = False
        self.n += other.n
        return self

    # --------------------------------------------------------- estimates
    def mean_counts(self) -> np.ndarray:
        return (self.shift + self.s1 / self.n).reshape(len(self.grid), self.n_states)

    def count_covariance(self) -> np.ndarray:
        """Unbiased (G*W, G*W) covariance of the counts."""
        if self.n < 2:
            raise EstimationError("variance quantities need at least 2 replicas")
        mean = self.s1 / self.n
        return (self.s2 - self.n * np.outer(mean, mean)) / (self.n - 1)

    def degradation_moments(self):
        """(mean, unbiased variance, fourth central moment) of D_t per grid time."""
        if not self.has_degradation or self.d_shift is None:
            raise EstimationError("replicas carry no degradation values")
        if self.n < 2:
            raise EstimationError("variance quantities need at least 2 replicas")
        n = self.n
        m1, m2, m3, m4 = self.d_pow / n
        c2 = np.maximum(m2 - m1 ** 2, 0.0)
        c4 = m4 - 4 * m1 * m3 + 6 * m1 ** 2 * m2 - 3 * m1 ** 4
        return self.d_shift + m1, c2 * n / (n - 1), np.maximum(c4, 0.0)


@dataclass
class MomentEstimates:
    grid: np.ndarray
    region_size: int
    n_replicas: int
    m: np.ndarray
    se_m: np.ndarray
    v: np.ndarray
    se_v: np.ndarray
    count_cov: np.ndarray
    n_states: int

    def gamma(self, i: int, j: int, w: int, wp: int) -> float:
        """Gamma-hat(s_i, t_j)(w, w') = Cov(N_s(w), N_t(w')) / |R|."""
        W = self.n_states
        return float(self.count_cov[i * W + w, j * W + wp] / self.region_size)

    def count_variance_ratio(self, i: int, w: int) -> float:
        """|R|^{-1} Var(N_t(w)); equals gamma(i, i, w, w)."""
        W = self.n_states
        return float(np.diag(self.count_cov)[i * W + w] / self.region_size)

    def gamma_se(self, i: int, j: int, w: int, wp: int) -> float:
        W = self.n_states
        a, b = i * W + w, j * W + wp
        c = self.count_cov
        var = (c[a, a] * c[b, b] + c[a, b] ** 2) / max(self.n_replicas - 1, 1)
        return float(np.sqrt(max(var, 0.0)) / self.region_size)

    def at(self, t: float) -> int:
        hit = np.flatnonzero(np.isclose(self.grid, t, rtol=0, atol=1e-9))
        if not len(hit):
            raise EstimationError(f"time {t} is not on the observation grid")
        return int(hit[0])

    def moments_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.grid, "m": self.m, "se_m": self.se_m, "v": self.v, "se_v": self.se_v})

    def gamma_frame(self, times: Optional[Sequence[float]] = None) -> pd.DataFrame:
        idx = range(len(self.grid)) if times is None else [self.at(t) for t in times]
        W = self.n_states
        rows = [
            {
                "s": self.grid[i],
                "t": self.grid[j],
                "w": w,
                "wp": wp,
                "cov": self.gamma(i, j, w, wp),
                "se": self.gamma_se(i, j, w, wp),
            }
            for i in idx for j in idx if i <= j
            for w in range(W) for wp in range(W)
        ]
        return pd.DataFrame(rows, columns=["s", "t", "w", "wp", "cov", "se"])


def estimate_moments(
    series: Sequence[EmpiricalSeries] | MomentAccumulator,
) -> MomentEstimates:
    """m-hat(t) = E D_t / |R| and v-hat(t) = Var D_t / |R| with standard errors."""
    if isinstance(series, MomentAccumulator):
        acc = series
    else:
        if not series:
            raise EstimationError("no replicas")
        first = series[0]
        acc = MomentAccumulator(first.grid, first.n_states, first.region_size).extend(series)
    if acc.n < 2:
        raise EstimationError("variance quantities need at least 2 replicas")

    n, size = acc.n, acc.region_size
    mean_d, var_d, c4 = acc.degradation_moments()
    m = mean_d / size
    se_m = np.sqrt(var_d / n) / size
    v = var_d / size
    # large-sample standard error of the sample variance
    var_of_var = np.maximum(c4 - var_d ** 2 * (n - 3) / (n - 1), 0.0) / n
    se_v = np.sqrt(var_of_var) / size
    return MomentEstimates(
        grid=acc.grid,
        region_size=size,
        n_replicas=n,
        m=m,
        se_m=se_m,
        v=v,
        se_v=se_v,
        count_cov=acc.count_covariance(),
        n_states=acc.n_states,
    )
