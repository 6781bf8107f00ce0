# ipsim/exact/generator.py
"""
Full generator on W^V for tiny systems and its transient semigroup.

Configurations are indexed in mixed radix |W| with site 0 as the least
significant digit: index(eta) = sum_x eta(x) * |W|^x.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.stats import poisson

from ipsim.config import config
from ipsim.dynamics.rules import LocalRule, NeighborhoodTable
from ipsim.exceptions import StateSpaceCapError
from ipsim.graph.graph_builder import Graph

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GeneratorMatrix:
    Q: sparse.csr_matrix
    graph: Graph
    rule: LocalRule
    configs: np.ndarray
    Lambda: float

    @property
    def n_states(self) -> int:
        return self.rule.alphabet.size

    @property
    def V(self) -> int:
        return self.graph.V

    @property
    def dimension(self) -> int:
        return self.Q.shape[0]

    def index_of(self, eta: Sequence[int]) -> int:
        eta = np.asarray(eta, dtype=np.int64)
        if eta.shape != (self.V,):
            raise ValueError(f"configuration must have length {self.V}")
        return int(eta @ (self.n_states ** np.arange(self.V, dtype=np.int64)))

    def point_mass(self, eta: Sequence[int]) -> np.ndarray:
        p = np.zeros(self.dimension)
        p[self.index_of(eta)] = 1.0
        return p

    def uniformized(self) -> sparse.csr_matrix:
        """P = I + Q / Lambda."""
        if self.Lambda <= 0:
            return sparse.identity(self.dimension, format="csr")
        return (sparse.identity(self.dimension, format="csr") + self.Q / self.Lambda).tocsr()


def all_configurations(V: int, n_states: int) -> np.ndarray:
    idx = np.arange(n_states ** V, dtype=np.int64)
    powers = n_states ** np.arange(V, dtype=np.int64)
    return ((idx[:, None] // powers[None, :]) % n_states).astype(np.int8)


def build_generator(g: Graph, rule: LocalRule, cap: Optional[int] = None) -> GeneratorMatrix:
    cap = config.STATE_SPACE_CAP if cap is None else cap
    W = rule.alphabet.size
    dimension = W ** g.V
    if dimension > cap:
        raise StateSpaceCapError(f"|W|^V = {W}^{g.V} = {dimension} exceeds the state-space cap {cap}")

    configs = all_configurations(g.V, W)
    table = NeighborhoodTable(g, rule.range)
    index = np.arange(dimension, dtype=np.int64)
    rows, cols, vals = [], [], []
    for x in g.vertices:
        own = configs[:, x].astype(np.int64)
        counts = np.zeros((dimension, rule.range, W), dtype=np.int64)
        for d in range(1, rule.range + 1):
            shell = table.members[x][table.distances[x] == d]
            if not len(shell):
                continue
            sub = configs[:, shell]
            for w in range(W):
                counts[:, d - 1, w] = (sub == w).sum(axis=1)
        rates = rule.rate_matrix(own, counts)
        for w in range(W):
            hit = np.flatnonzero(rates[:, w] > 0)
            if not len(hit):
                continue
            rows.append(index[hit])
            cols.append(index[hit] + (w - own[hit]) * W ** x)
            vals.append(rates[hit, w])

    if rows:
        off = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(dimension, dimension),
        )
    else:
        off = sparse.csr_matrix((dimension, dimension))
    out_rate = np.asarray(off.sum(axis=1)).ravel()
    Q = (off - sparse.diags(out_rate)).tocsr()
    Lambda = float(out_rate.max()) if dimension else 0.0
    logger.debug("generator for %r on %s: dimension %d, nnz %d", rule, g.describe(), dimension, Q.nnz)
    return GeneratorMatrix(Q=Q, graph=g, rule=rule, configs=configs, Lambda=Lambda)


# ------------------------------------------------------------ uniformization
def _poisson_terms(rate_time: float, tol: float) -> np.ndarray:
    n_max = int(poisson.isf(tol, rate_time)) + 1
    return poisson.pmf(np.arange(n_max + 1), rate_time)


def propagate(gen: GeneratorMatrix, dist: np.ndarray, t: float, tol: Optional[float] = None) -> np.ndarray:
    """Row vector dist * exp(tQ) by uniformization."""
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    dist = np.asarray(dist, dtype=float)
    if t == 0 or gen.Lambda == 0:
        return dist.copy()
    tol = config.UNIFORMIZATION_TOL if tol is None else tol
    weights = _poisson_terms(gen.Lambda * t, tol)
    PT = gen.uniformized().T.tocsr()
    term = dist.copy()
    out = weights[0] * term
    for w in weights[1:]:
        term = PT @ term
        out += w * term
    return out


def transient(gen: GeneratorMatrix, eta0: Sequence[int], t: float) -> np.ndarray:
    """Distribution of eta_t started from eta0."""
    return propagate(gen, gen.point_mass(eta0), t)


def semigroup_action(gen: GeneratorMatrix, f: np.ndarray, t: float, tol: Optional[float] = None) -> np.ndarray:
    """S_t f as a vector over configurations."""
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    f = np.asarray(f, dtype=float)
    if t == 0 or gen.Lambda == 0:
        return f.copy()
    tol = config.UNIFORMIZATION_TOL if tol is None else tol
    weights = _poisson_terms(gen.Lambda * t, tol)
    P = gen.uniformized()
    term = f.copy()
    out = weights[0] * term
    for w in weights[1:]:
        term = P @ term
        out += w * term
    return out


def site_indicator(gen: GeneratorMatrix, site: int, state: int) -> np.ndarray:
    gen.graph.check_vertex(site)
    return (gen.configs[:, site] == gen.rule.alphabet.index(state)).astype(float)


def site_marginals(gen: GeneratorMatrix, dist: np.ndarray) -> np.ndarray:
    """(V, |W|) array of P(eta(x) = w)."""
    out = np.zeros((gen.V, gen.n_states))
    for x in range(gen.V):
        out[x] = np.bincount(gen.configs[:, x], weights=dist, minlength=gen.n_states)
    return out


@dataclass
class SemigroupCache:
    """Transient distributions along a time grid, propagated step by step."""

    gen: GeneratorMatrix
    eta0: Sequence[int]
    times: Sequence[float]
    distributions: Dict[float, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        grid: List[float] = sorted(float(t) for t in self.times)
        if grid and grid[0] < 0:
            raise ValueError("times must be >= 0")
        dist = self.gen.point_mass(self.eta0)
        previous = 0.0
        for t in grid:
            dist = propagate(self.gen, dist, t - previous)
            self.distributions[t] = dist
            previous = t
        self.times = grid

    def at(self, t: float) -> np.ndarray:
        try:
            return self.distributions[float(t)]
        except KeyError:
            raise KeyError(f"time {t} is not on the cached grid {self.times}") from None

    def marginals(self, t: float) -> np.ndarray:
        return site_marginals(self.gen, self.at(t))

    def expectation(self, f: np.ndarray, t: float) -> float:
        return float(self.at(t) @ np.asarray(f, dtype=float))
