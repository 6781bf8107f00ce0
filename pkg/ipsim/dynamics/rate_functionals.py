# ipsim/dynamics/rate_functionals.py
"""
Functionals of a local rule computed by enumerating neighbourhood patterns.

A pattern is (own state, per-shell state counts). Because rules only see
counts per distance shell, enumerating count compositions covers every
configuration of the neighbourhood without visiting the |W|^{|ball|}
labelled configurations one by one.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy import sparse

from ipsim.config import config
from ipsim.exceptions import EnumerationCapError
from ipsim.graph.graph_builder import Graph
from ipsim.dynamics.rules import LocalRule, NeighborhoodTable, template_graph

logger = logging.getLogger(__name__)

MONOTONE_TOL = 1e-12


# ------------------------------------------------------------------ patterns
def _compositions(total: int, parts: int) -> np.ndarray:
    """All vectors of ``parts`` non-negative integers summing to ``total``."""
    rows = [
        np.bincount(np.asarray(combo, dtype=np.int64), minlength=parts)
        for combo in itertools.combinations_with_replacement(range(parts), total)
    ]
    if not rows:
        return np.zeros((1, parts), dtype=np.int64)
    return np.vstack(rows)


def pattern_count(template: Sequence[int], n_states: int) -> int:
    count = n_states
    for size in template:
        count *= math.comb(size + n_states - 1, n_states - 1)
    return count


def enumerate_patterns(template: Sequence[int], n_states: int) -> Tuple[np.ndarray, np.ndarray]:
    """(own (N,), counts (N, k, W)) for every pattern of one shell template."""
    comps = [_compositions(int(s), n_states) for s in template]
    grids = np.meshgrid(np.arange(n_states), *[np.arange(len(c)) for c in comps], indexing="ij")
    idx = [grid.reshape(-1) for grid in grids]
    own = idx[0].astype(np.int64)
    counts = np.zeros((len(own), len(comps), n_states), dtype=np.int64)
    for d, comp in enumerate(comps):
        counts[:, d, :] = comp[idx[d + 1]]
    return own, counts


def sample_patterns(
    template: Sequence[int], n_states: int, n: int, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    own = rng.integers(n_states, size=n)
    counts = np.zeros((n, len(template), n_states), dtype=np.int64)
    for d, size in enumerate(template):
        counts[:, d, :] = rng.multinomial(int(size), np.full(n_states, 1.0 / n_states), size=n)
    return own, counts


def _templates(rule: LocalRule, g: Optional[Graph]) -> List[Tuple[int, ...]]:
    g = template_graph(rule) if g is None else g
    return NeighborhoodTable(g, rule.range).templates()


def _total_patterns(rule: LocalRule, templates: Sequence[Tuple[int, ...]]) -> int:
    return sum(pattern_count(t, rule.alphabet.size) for t in templates)


# -------------------------------------------------------------------- B
@dataclass(frozen=True)
class RateBound:
    value: float
    exact: bool
    patterns: int


def total_rate_bound(
    rule: LocalRule,
    g: Optional[Graph] = None,
    allow_sampling: bool = False,
    cap: Optional[int] = None,
    seed: int = 0,
) -> RateBound:
    """
    B = sup over patterns of the total outflow rate at one site.

    Past the enumeration cap the supremum over ``cap`` random patterns is
    returned with ``exact=False``; it is then only a lower bound.
    """
    cap = config.PATTERN_CAP if cap is None else cap
    templates = _templates(rule, g)
    n_patterns = _total_patterns(rule, templates)
    W = rule.alphabet.size

    if n_patterns <= cap:
        best = 0.0
        for template in templates:
            own, counts = enumerate_patterns(template, W)
            best = max(best, float(rule.rate_matrix(own, counts).sum(axis=1).max()))
        return RateBound(value=best, exact=True, patterns=n_patterns)

    if not allow_sampling:
        raise EnumerationCapError(
            f"{n_patterns} neighbourhood patterns exceed the cap of {cap}; enable sampling for a lower bound"
        )
    rng = np.random.default_rng(seed)
    per_template = max(1, cap // len(templates))
    best = 0.0
    for template in templates:
        own, counts = sample_patterns(template, W, per_template, rng)
        best = max(best, float(rule.rate_matrix(own, counts).sum(axis=1).max()))
    logger.warning("B for %r sampled from %d patterns: lower bound only", rule, per_template * len(templates))
    return RateBound(value=best, exact=False, patterns=per_template * len(templates))


# -------------------------------------------------------------- influence
@dataclass(frozen=True)
class Influence:
    by_distance: Tuple[float, ...]
    matrix: sparse.csr_matrix
    M: float
    exact: bool

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def _influence_by_distance(rule: LocalRule, own: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """sup of the l1 rate change when one site at distance d changes state."""
    W = rule.alphabet.size
    k = counts.shape[1]
    out = np.zeros(k)
    if not len(own):
        return out
    base = rule.rate_matrix(own, counts)
    for d in range(k):
        for a, b in itertools.permutations(range(W), 2):
            rows = np.flatnonzero(counts[:, d, a] >= 1)
            if not len(rows):
                continue
            moved = counts[rows].copy()
            moved[:, d, a] -= 1
            moved[:, d, b] += 1
            diff = np.abs(base[rows] - rule.rate_matrix(own[rows], moved)).sum(axis=1)
            out[d] = max(out[d], float(diff.max()))
    return out


def influence_matrix(
    rule: LocalRule,
    g: Graph,
    allow_sampling: bool = False,
    cap: Optional[int] = None,
    seed: int = 0,
) -> Influence:
    """
    gamma(x, y): largest l1 change of x's rate vector caused by changing
    the state of y alone. Depends only on d(x, y) and x's shell template,
    so it is computed once per (template, distance) and spread over the
    graph as a sparse matrix; M is the largest row sum.
    """
    cap = config.PATTERN_CAP if cap is None else cap
    table = NeighborhoodTable(g, rule.range)
    templates = table.templates()
    W = rule.alphabet.size
    n_patterns = _total_patterns(rule, templates)
    exact = n_patterns <= cap
    if not exact and not allow_sampling:
        raise EnumerationCapError(f"{n_patterns} neighbourhood patterns exceed the cap of {cap}")

    rng = np.random.default_rng(seed)
    per_template: Dict[Tuple[int, ...], np.ndarray] = {}
    for template in templates:
        if exact:
            own, counts = enumerate_patterns(template, W)
        else:
            own, counts = sample_patterns(template, W, max(1, cap // len(templates)), rng)
        per_template[template] = _influence_by_distance(rule, own, counts)

    rows, cols, vals = [], [], []
    for x in g.vertices:
        gamma_d = per_template[table.shell_sizes[x]]
        if not len(table.members[x]):
            continue
        rows.append(np.full(len(table.members[x]), x))
        cols.append(table.members[x])
        vals.append(gamma_d[table.distances[x] - 1])

    if rows:
        matrix = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(g.V, g.V)
        )
        matrix.eliminate_zeros()
    else:
        matrix = sparse.csr_matrix((g.V, g.V))

    by_distance = np.zeros(rule.range)
    for gamma_d in per_template.values():
        by_distance = np.maximum(by_distance, gamma_d)
    M = float(np.asarray(matrix.sum(axis=1)).max()) if g.V else 0.0
    if not exact:
        logger.warning("influence of %r sampled: values are lower bounds", rule)
    return Influence(by_distance=tuple(float(v) for v in by_distance), matrix=matrix, M=M, exact=exact)


# ----------------------------------------------------------- monotonicity
class Certificate(BaseModel):
    passed: bool
    checked_pairs: int
    violation: Optional[Dict[str, object]] = None
    note: str = ""


def _up_down_tails(rates: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """up[:, j] = sum_{w >= j} rates, down[:, j] = sum_{w < j} rates."""
    up = np.cumsum(rates[:, ::-1], axis=1)[:, ::-1]
    down = np.concatenate([np.zeros((len(rates), 1)), np.cumsum(rates, axis=1)[:, :-1]], axis=1)
    return up, down


def _raise_moves(own: np.ndarray, counts: np.ndarray, top: int):
    """Covering pairs (low, high): one coordinate raised by one level."""
    rows = np.flatnonzero(own < top)
    if len(rows):
        yield "own", rows, own[rows] + 1, counts[rows]
    k, W = counts.shape[1], counts.shape[2]
    for d in range(k):
        for a in range(W - 1):
            rows = np.flatnonzero(counts[:, d, a] >= 1)
            if not len(rows):
                continue
            high = counts[rows].copy()
            high[:, d, a] -= 1
            high[:, d, a + 1] += 1
            yield f"shell{d + 1}:{a}->{a + 1}", rows, own[rows], high


def monotonicity_certificate(rule: LocalRule, g: Optional[Graph] = None) -> Certificate:
    """
    Sufficient condition for attractiveness of single-site dynamics: for
    every pair of patterns low <= high and every threshold j, the rate of
    jumping to >= j from below both states does not decrease, and the rate
    of jumping to < j from above both states does not increase. Checking
    covering pairs is enough since the inequalities chain.
    """
    templates = _templates(rule, g)
    n_patterns = _total_patterns(rule, templates)
    if n_patterns > config.PATTERN_CAP:
        raise EnumerationCapError(
            f"{n_patterns} neighbourhood patterns exceed the cap of {config.PATTERN_CAP}"
        )

    W = rule.alphabet.size
    thresholds = np.arange(W)
    checked = 0
    for template in templates:
        own, counts = enumerate_patterns(template, W)
        base = rule.rate_matrix(own, counts)
        up_lo_all, dn_lo_all = _up_down_tails(base)
        for move, rows, own_hi, counts_hi in _raise_moves(own, counts, rule.alphabet.top):
            up_hi, dn_hi = _up_down_tails(rule.rate_matrix(own_hi, counts_hi))
            up_lo, dn_lo = up_lo_all[rows], dn_lo_all[rows]
            own_lo = own[rows]
            checked += len(rows)

            up_mask = (thresholds[None, :] > own_hi[:, None]) & (thresholds[None, :] >= 1)
            down_mask = (thresholds[None, :] <= own_lo[:, None]) & (thresholds[None, :] >= 1)
            bad_up = up_mask & (up_lo > up_hi + MONOTONE_TOL)
            bad_down = down_mask & (dn_lo + MONOTONE_TOL < dn_hi)
            bad = bad_up | bad_down
            if bad.any():
                i, j = map(int, np.argwhere(bad)[0])
                direction = "up" if bad_up[i, j] else "down"
                violation = {
                    "move": move,
                    "threshold": j,
                    "direction": direction,
                    "low": {"own": int(own_lo[i]), "counts": counts[rows[i]].tolist()},
                    "high": {"own": int(own_hi[i]), "counts": counts_hi[i].tolist()},
                    "low_rate": float(up_lo[i, j] if direction == "up" else dn_lo[i, j]),
                    "high_rate": float(up_hi[i, j] if direction == "up" else dn_hi[i, j]),
                }
                logger.info("%r is not certified monotone: %s", rule, violation)
                return Certificate(passed=False, checked_pairs=checked, violation=violation,
                                   note="sufficient condition violated by the exhibited pair")
    return Certificate(passed=True, checked_pairs=checked,
                       note="sufficient condition holds for every covering pattern pair")


def positive_correlations_certificate(rule: LocalRule, g: Optional[Graph] = None) -> Certificate:
    """Single-site and monotone dynamics preserve positive correlations."""
    if not rule.single_site:
        return Certificate(passed=False, checked_pairs=0, note="rule updates more than one site")
    mono = monotonicity_certificate(rule, g)
    note = "single-site updates and monotone" if mono.passed else "not certified monotone"
    return Certificate(passed=mono.passed, checked_pairs=mono.checked_pairs, violation=mono.violation, note=note)


def rate_envelope(rule: LocalRule, g: Optional[Graph] = None) -> Tuple[float, float]:
    """(sup of total upward rate, sup of total downward rate) over patterns."""
    templates = _templates(rule, g)
    n_patterns = _total_patterns(rule, templates)
    if n_patterns > config.PATTERN_CAP:
        raise EnumerationCapError(
            f"{n_patterns} neighbourhood patterns exceed the cap of {config.PATTERN_CAP}"
        )
    W = rule.alphabet.size
    states = np.arange(W)
    sup_up = sup_down = 0.0
    for template in templates:
        own, counts = enumerate_patterns(template, W)
        rates = rule.rate_matrix(own, counts)
        above = states[None, :] > own[:, None]
        sup_up = max(sup_up, float(np.where(above, rates, 0.0).sum(axis=1).max()))
        sup_down = max(sup_down, float(np.where(~above, rates, 0.0).sum(axis=1).max()))
    return sup_up, sup_down
