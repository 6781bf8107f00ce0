# ipsim/dynamics/rules.py
"""
Single-site, finite-range transition-rate families.

A rule sees a site's own state and, for every distance d = 1..range, how
many sites at distance d occupy each state. Automorphisms preserve those
counts, so every rule written this way is group invariant on any
vertex-transitive graph.
"""
from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from enum import Enum
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from ipsim.exceptions import RuleError
from ipsim.graph.graph_builder import Graph, build_torus

logger = logging.getLogger(__name__)


class StateAlphabet:
    """Totally ordered finite state set w_0 < w_1 < ... ; states are indices."""

    def __init__(self, labels: Sequence[str]):
        labels = [str(lab) for lab in labels]
        if len(labels) < 2:
            raise RuleError(f"alphabet needs at least 2 states, got {labels}")
        if len(set(labels)) != len(labels):
            raise RuleError(f"alphabet labels must be distinct, got {labels}")
        self.labels: Tuple[str, ...] = tuple(labels)

    @classmethod
    def of_size(cls, n: int) -> "StateAlphabet":
        return cls([str(i) for i in range(n)])

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def states(self) -> range:
        return range(self.size)

    @property
    def top(self) -> int:
        return self.size - 1

    def index(self, state) -> int:
        """Accept an index or a label."""
        if isinstance(state, (int, np.integer)) and not isinstance(state, bool):
            if 0 <= int(state) < self.size:
                return int(state)
        elif str(state) in self.labels:
            return self.labels.index(str(state))
        raise RuleError(f"state {state!r} not in alphabet {list(self.labels)}")

    def __eq__(self, other) -> bool:
        return isinstance(other, StateAlphabet) and other.labels == self.labels

    def __hash__(self) -> int:
        return hash(self.labels)

    def __repr__(self) -> str:
        return f"StateAlphabet({list(self.labels)})"


BINARY = StateAlphabet(["0", "1"])
WORKING_FAILED = StateAlphabet(["working", "failed"])


class RuleKind(str, Enum):
    INDEPENDENT = "independent"
    CONTACT = "contact"
    LADDER = "ladder"
    CUSTOM = "custom"


class LocalRule(ABC):
    kind: RuleKind
    single_site = True

    def __init__(self, alphabet: StateAlphabet, range_: int):
        if range_ < 0:
            raise RuleError(f"range must be >= 0, got {range_}")
        self.alphabet = alphabet
        self.range = int(range_)

    @abstractmethod
    def _rate_matrix(self, own: np.ndarray, counts: np.ndarray) -> np.ndarray:
        """Raw rates, shape (N, |W|)."""

    def rate_matrix(self, own: np.ndarray, counts: np.ndarray) -> np.ndarray:
        """
        Rates towards every target state for a batch of neighbourhood
        patterns. ``own`` has shape (N,), ``counts`` has shape (N, range, |W|).
        The column of the current state is zero.
        """
        own = np.asarray(own, dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64).reshape(len(own), self.range, self.alphabet.size)
        rates = np.array(self._rate_matrix(own, counts), dtype=float, copy=True)
        if rates.shape != (len(own), self.alphabet.size):
            raise RuleError(f"{self.kind.value} rule returned rates of shape {rates.shape}")
        if not np.all(np.isfinite(rates)):
            raise RuleError(f"{self.kind.value} rule produced a non-finite rate")
        if np.any(rates < 0):
            raise RuleError(f"{self.kind.value} rule produced a negative rate")
        rates[np.arange(len(own)), own] = 0.0
        return rates

    def rate_vector(self, own: int, counts: np.ndarray) -> np.ndarray:
        return self.rate_matrix(np.array([own]), np.asarray(counts)[None, ...])[0]

    def describe(self) -> Dict[str, object]:
        return {"type": self.kind.value, "range": self.range, "states": list(self.alphabet.labels)}

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.describe().items() if k != "type")
        return f"{type(self).__name__}({args})"


class IndependentFlip(LocalRule):
    """Each site moves one level up at rate ``up`` and one level down at rate ``down``."""

    kind = RuleKind.INDEPENDENT

    def __init__(self, alphabet: StateAlphabet = BINARY, up: float = 1.0, down: float = 0.0, range_: int = 1):
        super().__init__(alphabet, range_)
        self.up = float(up)
        self.down = float(down)

    def _rate_matrix(self, own, counts):
        rates = np.zeros((len(own), self.alphabet.size))
        rows = np.arange(len(own))
        can_up = own < self.alphabet.top
        can_down = own > 0
        rates[rows[can_up], own[can_up] + 1] = self.up
        rates[rows[can_down], own[can_down] - 1] = self.down
        return rates

    def describe(self):
        return {**super().describe(), "lambda": self.up, "delta": self.down}


class Contact(LocalRule):
    """
    Binary contact process: a healthy site is infected at rate
    spontaneous + lam * (infected sites within range); an infected site
    recovers at rate delta.
    """

    kind = RuleKind.CONTACT

    def __init__(self, lam: float, delta: float, spontaneous: float = 0.0, range_: int = 1,
                 alphabet: StateAlphabet = BINARY):
        if alphabet.size != 2:
            raise RuleError("contact rule needs a binary alphabet")
        super().__init__(alphabet, range_)
        self.lam = float(lam)
        self.delta = float(delta)
        self.spontaneous = float(spontaneous)

    def _rate_matrix(self, own, counts):
        infected = counts[:, :, 1].sum(axis=1)
        rates = np.zeros((len(own), 2))
        rates[:, 1] = np.where(own == 0, self.spontaneous + self.lam * infected, 0.0)
        rates[:, 0] = np.where(own == 1, self.delta, 0.0)
        return rates

    def describe(self):
        return {**super().describe(), "lambda": self.lam, "delta": self.delta, "spontaneous": self.spontaneous}


class DegradationLadder(LocalRule):
    """
    Level i jumps to i+1 at rate a[i] + b[i] * (mean state index of the
    sites within range). No downward jumps.
    """

    kind = RuleKind.LADDER

    def __init__(self, alphabet: StateAlphabet, a: Sequence[float], b: Sequence[float], range_: int = 1):
        super().__init__(alphabet, range_)
        steps = alphabet.size - 1
        if len(a) != steps or len(b) != steps:
            raise RuleError(f"ladder over {alphabet.size} states needs {steps} values of a and b")
        if min(a) < 0 or min(b) < 0:
            raise RuleError("ladder coefficients a and b must be >= 0")
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)

    def _rate_matrix(self, own, counts):
        levels = np.arange(self.alphabet.size)
        per_state = counts.sum(axis=1)
        n_neighbors = per_state.sum(axis=1)
        weighted = per_state @ levels
        mean_level = np.divide(weighted, n_neighbors, out=np.zeros(len(own)), where=n_neighbors > 0)
        rates = np.zeros((len(own), self.alphabet.size))
        rows = np.flatnonzero(own < self.alphabet.top)
        lvl = own[rows]
        rates[rows, lvl + 1] = self.a[lvl] + self.b[lvl] * mean_level[rows]
        return rates

    def describe(self):
        return {**super().describe(), "a": self.a.tolist(), "b": self.b.tolist()}


class CustomRule(LocalRule):
    """User-supplied rate function ``rate_fn(own, counts) -> rates over W``."""

    kind = RuleKind.CUSTOM

    def __init__(self, alphabet: StateAlphabet, range_: int,
                 rate_fn: Callable[[int, np.ndarray], Sequence[float]], name: str = "custom"):
        super().__init__(alphabet, range_)
        self.rate_fn = rate_fn
        self.name = name

    def _rate_matrix(self, own, counts):
        return np.array([self.rate_fn(int(o), c) for o, c in zip(own, counts)], dtype=float).reshape(
            len(own), self.alphabet.size
        )

    def describe(self):
        return {**super().describe(), "name": self.name}


def build_rule(model) -> LocalRule:
    """Factory from the ``model`` table of an experiment config."""
    kind = RuleKind(model.type)
    if kind == RuleKind.INDEPENDENT:
        alphabet = alphabet_from(model.states, default=BINARY)
        return IndependentFlip(alphabet, up=model.lambda_, down=model.delta, range_=model.range)
    if kind == RuleKind.CONTACT:
        alphabet = alphabet_from(model.states, default=BINARY)
        return Contact(model.lambda_, model.delta, spontaneous=model.spontaneous,
                       range_=model.range, alphabet=alphabet)
    if kind == RuleKind.LADDER:
        alphabet = alphabet_from(model.states, default=StateAlphabet.of_size(len(model.a) + 1))
        return DegradationLadder(alphabet, model.a, model.b, range_=model.range)
    raise RuleError(f"model type {kind.value!r} cannot be built from a config")


def alphabet_from(states, default: StateAlphabet) -> StateAlphabet:
    if states is None:
        return default
    if isinstance(states, int):
        return StateAlphabet.of_size(states)
    return StateAlphabet(states)


# ------------------------------------------------------------ neighbourhoods
class NeighborhoodTable:
    """Distance shells 1..k around every vertex of a graph."""

    def __init__(self, g: Graph, k: int):
        self.graph = g
        self.k = int(k)
        self.members: List[np.ndarray] = []
        self.distances: List[np.ndarray] = []
        sizes = []
        for x in g.vertices:
            dist = g.distances_from(x, cutoff=self.k)
            items = sorted((d, y) for y, d in dist.items() if d >= 1)
            self.members.append(np.array([y for _, y in items], dtype=np.int64))
            self.distances.append(np.array([d for d, _ in items], dtype=np.int64))
            sizes.append(tuple(int(np.sum(self.distances[-1] == d)) for d in range(1, self.k + 1)))
        self.shell_sizes: List[Tuple[int, ...]] = sizes

    def templates(self) -> List[Tuple[int, ...]]:
        """Distinct shell-size tuples, largest neighbourhood first."""
        return sorted(set(self.shell_sizes), key=lambda s: (-sum(s), s))

    def max_shell_sizes(self) -> Tuple[int, ...]:
        if not self.k or not self.shell_sizes:
            return ()
        return tuple(max(s[d] for s in self.shell_sizes) for d in range(self.k))

    def counts(self, config: np.ndarray, x: int, n_states: int) -> np.ndarray:
        out = np.zeros((self.k, n_states), dtype=np.int64)
        if self.k:
            np.add.at(out, (self.distances[x] - 1, config[self.members[x]]), 1)
        return out


def template_graph(rule: LocalRule) -> Graph:
    """Default neighbourhood template: a 2-d torus wide enough for the range."""
    return build_torus(2, 2 * max(rule.range, 1) + 3)
