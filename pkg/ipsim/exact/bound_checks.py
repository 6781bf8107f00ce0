# ipsim/exact/bound_checks.py
"""Exact covariances, oscillations and the covariance/smoothness inequalities."""
from __future__ import annotations

import itertools
import logging
import math
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel
from scipy.linalg import expm

from ipsim.dynamics.rate_functionals import Influence, influence_matrix, total_rate_bound
from ipsim.exact.generator import GeneratorMatrix, semigroup_action, site_indicator, transient
from ipsim.exceptions import GraphError
from ipsim.graph.graph_metrics import rho_s3, sphere

logger = logging.getLogger(__name__)

COV_TOL = 1e-9
SMOOTH_TOL = 1e-8
DEFAULT_EPS = 0.1


def exact_two_time_cov(
    gen: GeneratorMatrix,
    eta0: Sequence[int],
    f: np.ndarray,
    g_fn: np.ndarray,
    s: float,
    t: float,
) -> float:
    """Cov(f(eta_s), g(eta_t)) from eta0, via E[f(eta_s) g(eta_t)] = S_s(f S_{t-s} g)(eta0)."""
    f = np.asarray(f, dtype=float)
    g_fn = np.asarray(g_fn, dtype=float)
    if s > t:
        f, g_fn, s, t = g_fn, f, t, s
    p_s = transient(gen, eta0, s)
    later = semigroup_action(gen, g_fn, t - s)
    joint = float(p_s @ (f * later))
    return joint - float(p_s @ f) * float(p_s @ later)


def oscillation(gen: GeneratorMatrix, h: np.ndarray) -> np.ndarray:
    """Delta_h(x) = sup |h(eta) - h(zeta)| over pairs differing only at x."""
    W, V = gen.n_states, gen.V
    arr = np.asarray(h, dtype=float).reshape((W,) * V)
    out = np.zeros(V)
    for x in range(V):
        # site 0 is the least significant digit, i.e. the last axis
        axis = V - 1 - x
        out[x] = float((arr.max(axis=axis) - arr.min(axis=axis)).max())
    return out


# ------------------------------------------------------------ covariance
def covariance_bound(
    B: float,
    M: float,
    k: int,
    beta: float,
    rho: float,
    d: int,
    s: float,
    t: float,
    kappa_f: float = 1.0,
    kappa_g: float = 1.0,
    size: int = 1,
) -> float:
    """
    C kappa_f kappa_g min(|R1|,|R2|) e^{D(t+s)} e^{-(beta-rho) d} with
    D = 2M e^{(beta+rho)k} and C = (2B/D) e^{beta k} (1 + e^{rho k}/(1 - e^{rho-beta})).
    For D = 0 the factor e^{D(t+s)}/D is replaced by its limit 2 min(s, t).
    """
    if beta <= rho:
        raise ValueError(f"beta must exceed rho ({beta} <= {rho})")
    D = 2.0 * M * math.exp((beta + rho) * k)
    head = 2.0 * B * math.exp(beta * k) * (1.0 + math.exp(rho * k) / (1.0 - math.exp(rho - beta)))
    growth = math.exp(D * (t + s)) / D if D > 0 else 2.0 * min(s, t)
    return head * kappa_f * kappa_g * size * growth * math.exp(-(beta - rho) * d)


class CovBoundReport(BaseModel):
    B: float
    M: float
    D: float
    k: int
    beta: float
    rho: float
    eps: float
    base_site: int
    rows: List[Dict[str, Any]]

    @property
    def violations(self) -> int:
        return sum(1 for row in self.rows if not row["pass"])

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=["d", "s", "t", "cov", "bound", "pass", "bound_eps", "pass_eps"])


def verify_cov_bound(
    gen: GeneratorMatrix,
    eta0: Sequence[int],
    distances: Sequence[int],
    times: Sequence[float],
    beta: Optional[float] = None,
    eps: float = DEFAULT_EPS,
    base_site: int = 0,
    state: Optional[int] = None,
) -> CovBoundReport:
    """
    Sweep single-site indicators f at ``base_site`` and g at a site at
    distance d over every (s, t) pair. Indicators are mainly located on
    their site with kappa = 1 for any beta.
    """
    g, rule = gen.graph, gen.rule
    state = rule.alphabet.top if state is None else rule.alphabet.index(state)
    rho = rho_s3(g.degree)
    beta = rho + 1.0 if beta is None else float(beta)
    beta_eps = beta if beta > eps else eps + 1.0
    B = total_rate_bound(rule, g).value
    M = influence_matrix(rule, g).M
    k = rule.range
    D = 2.0 * M * math.exp((beta + rho) * k)

    f = site_indicator(gen, base_site, state)
    rows = []
    for d in distances:
        targets = sorted(sphere(g, base_site, int(d)))
        if not targets:
            raise GraphError(f"no vertex at distance {d} from {base_site} in {g.describe()}")
        g_fn = site_indicator(gen, targets[0], state)
        for s, t in itertools.product(times, repeat=2):
            cov = exact_two_time_cov(gen, eta0, f, g_fn, s, t)
            bound = covariance_bound(B, M, k, beta, rho, d, s, t)
            bound_eps = covariance_bound(B, M, k, beta_eps, eps, d, s, t)
            rows.append(
                {
                    "d": int(d),
                    "s": float(s),
                    "t": float(t),
                    "cov": cov,
                    "bound": bound,
                    "pass": abs(cov) <= bound + COV_TOL,
                    "bound_eps": bound_eps,
                    "pass_eps": abs(cov) <= bound_eps + COV_TOL,
                }
            )
    report = CovBoundReport(B=B, M=M, D=D, k=k, beta=beta, rho=rho, eps=eps, base_site=base_site, rows=rows)
    if not report.passed:
        logger.error("covariance bound violated in %d of %d rows", report.violations, len(rows))
    return report


# ------------------------------------------------------------ smoothness
class SmoothBoundReport(BaseModel):
    t: float
    rows: List[Dict[str, Any]]

    @property
    def passed(self) -> bool:
        return all(row["pass"] for row in self.rows)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=["site", "lhs", "rhs", "pass"])


def verify_smoothness_bound(
    gen: GeneratorMatrix,
    f: np.ndarray,
    t: float,
    influence: Optional[Influence] = None,
) -> SmoothBoundReport:
    """Delta_{S_t f} <= exp(t Gamma) Delta_f, with Gamma acting on the right."""
    influence = influence_matrix(gen.rule, gen.graph) if influence is None else influence
    gamma = influence.dense()
    lhs = oscillation(gen, semigroup_action(gen, f, t))
    rhs = expm(t * gamma.T) @ oscillation(gen, f)
    rows = [
        {"site": x, "lhs": float(lhs[x]), "rhs": float(rhs[x]), "pass": bool(lhs[x] <= rhs[x] + SMOOTH_TOL)}
        for x in range(gen.V)
    ]
    report = SmoothBoundReport(t=float(t), rows=rows)
    if not report.passed:
        logger.error("smoothness bound violated at t=%s", t)
    return report
