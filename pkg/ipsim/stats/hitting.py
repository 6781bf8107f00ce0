# ipsim/stats/hitting.py
"""
Failure-time analysis: T_n = inf{t : D_t >= k(n)} against the normal
approximation sqrt(|B_n|)(T_n - t_alpha) ~ N(0, v(t_alpha)/m'(t_alpha)^2).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel

from ipsim.dynamics.rules import WORKING_FAILED, StateAlphabet
from ipsim.exceptions import CensoringError, HittingError
from ipsim.stats.moments import MomentEstimates
from ipsim.stats.normality import ks_distance, lilliefors_critical_value, standardize

logger = logging.getLogger(__name__)

MAX_CENSORED = 0.01
DEFAULT_BANDWIDTH_C = 0.5


class HittingReport(BaseModel):
    alpha: float
    threshold: float
    region_size: int
    n_replicas: int
    censored: int
    degenerate: bool = False
    t_alpha: Optional[float] = None
    m_prime: Optional[float] = None
    h: Optional[float] = None
    v: Optional[float] = None
    sigma2: Optional[float] = None
    ks: Optional[float] = None
    crit: Optional[float] = None
    passed: Optional[bool] = None
    z_mean: Optional[float] = None
    z_var: Optional[float] = None
    analytic_t_alpha: Optional[float] = None
    analytic_sigma2: Optional[float] = None
    note: str = ""

    def summary_frame(self) -> pd.DataFrame:
        row = {
            "t_alpha": self.t_alpha, "m_prime": self.m_prime, "h": self.h, "v": self.v,
            "sigma2": self.sigma2, "ks": self.ks, "pass": self.passed, "crit": self.crit,
            "censored": self.censored, "z_mean": self.z_mean, "z_var": self.z_var,
            "degenerate": self.degenerate, "alpha": self.alpha, "threshold": self.threshold,
        }
        return pd.DataFrame([row])


def hitting_frame(times: np.ndarray) -> pd.DataFrame:
    """One row per replica; censored replicas carry an empty T."""
    return pd.DataFrame({"replica": np.arange(len(times)), "T": times})


def _interp(grid: np.ndarray, values: np.ndarray, t: float) -> float:
    return float(np.interp(t, grid, values))


def hitting_analysis(
    times: Sequence[float],
    moments: MomentEstimates,
    alpha: float,
    threshold: float,
    t_end: float,
    bandwidth_c: float = DEFAULT_BANDWIDTH_C,
    significance: float = 0.01,
    analytic_t_alpha: Optional[float] = None,
    analytic_sigma2: Optional[float] = None,
) -> HittingReport:
    """
    ``times`` holds one first-crossing time per replica (NaN when the
    threshold was never reached by t_end). ``moments`` carries m-hat and
    v-hat on the observation grid.
    """
    T = np.asarray(times, dtype=float)
    n = len(T)
    size = moments.region_size
    base = dict(
        alpha=alpha, threshold=threshold, region_size=size, n_replicas=n,
        analytic_t_alpha=analytic_t_alpha, analytic_sigma2=analytic_sigma2,
    )
    censored = int(np.isnan(T).sum())
    if n and censored == 0 and np.all(T == 0):
        logger.info("threshold %s already reached at t=0 in every replica", threshold)
        return HittingReport(**base, censored=0, degenerate=True, t_alpha=0.0,
                             note="threshold reached at start: every failure time is 0")

    if censored > MAX_CENSORED * n:
        raise CensoringError(
            f"{censored} of {n} replicas never reached the threshold by t_end={t_end}; increase sim.t_end"
        )

    grid, m, v = moments.grid, moments.m, moments.v
    if not m[0] < alpha < m[-1]:
        raise HittingError(f"alpha={alpha} is outside the observed range ({m[0]:.4g}, {m[-1]:.4g}) of m-hat")

    i = int(np.argmax(m >= alpha))
    t_alpha = float(grid[i - 1] + (alpha - m[i - 1]) * (grid[i] - grid[i - 1]) / (m[i] - m[i - 1]))

    h = bandwidth_c * t_end * n ** (-1 / 5)
    h = min(h, t_alpha - grid[0], grid[-1] - t_alpha)
    if not h > 0:
        raise HittingError(f"no room for a central difference around t_alpha={t_alpha}")

    window = (grid >= t_alpha - h) & (grid <= t_alpha + h)
    window[max(i - 1, 0)] = window[i] = True
    if np.any(np.diff(m[window]) <= 0):
        raise HittingError("m-hat is not strictly increasing around its crossing; refusing to extrapolate")

    m_prime = (_interp(grid, m, t_alpha + h) - _interp(grid, m, t_alpha - h)) / (2 * h)
    if not m_prime > 0:
        raise HittingError(f"estimated m'(t_alpha) = {m_prime} is not positive")
    v_alpha = _interp(grid, v, t_alpha)
    sigma2 = v_alpha / m_prime ** 2

    crossed = T[~np.isnan(T)]
    report = HittingReport(**base, censored=censored, t_alpha=t_alpha, m_prime=m_prime, h=h, v=v_alpha, sigma2=sigma2)
    if sigma2 > 0 and len(crossed) >= 4:
        z = math.sqrt(size) * (crossed - t_alpha) / math.sqrt(sigma2)
        report.z_mean = float(z.mean())
        report.z_var = float(z.var(ddof=1))
        zs = standardize(z)
        if zs is not None:
            report.crit = lilliefors_critical_value(len(zs), significance)
            report.ks = ks_distance(zs)
            report.passed = report.ks <= report.crit
    if censored:
        report.note = f"{censored} censored replicas left out of the normality test"
    return report


# ------------------------------------------------------------- k-out-of-n
@dataclass(frozen=True)
class KOutOfN:
    """Binary working/failed system that fails once ceil(alpha |B_n|) sites have failed."""

    alpha: float
    region_size: int
    alphabet: StateAlphabet = WORKING_FAILED

    @property
    def f(self) -> np.ndarray:
        return (np.arange(self.alphabet.size) == self.alphabet.index("failed")).astype(float)

    @property
    def k(self) -> int:
        return int(math.ceil(self.alpha * self.region_size - 1e-9))

    def analyze(self, times: Sequence[float], moments: MomentEstimates, t_end: float, **kwargs) -> HittingReport:
        return hitting_analysis(times, moments, self.alpha, self.k, t_end, **kwargs)


def kout_of_n_mode(alpha: float, region_size: int, alphabet: StateAlphabet = WORKING_FAILED) -> KOutOfN:
    if not 0 <= alpha <= 1:
        raise HittingError(f"alpha must lie in [0, 1], got {alpha}")
    if "failed" not in alphabet.labels:
        raise HittingError("k-out-of-n mode needs a state labelled 'failed'")
    return KOutOfN(alpha=alpha, region_size=region_size, alphabet=alphabet)
