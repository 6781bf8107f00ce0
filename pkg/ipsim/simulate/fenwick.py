# ipsim/simulate/fenwick.py
"""Binary indexed tree over non-negative site rates."""
from __future__ import annotations

from typing import List, Sequence


class FenwickTree:
    """Prefix sums with O(log n) point updates and inverse-CDF search."""

    def __init__(self, values: Sequence[float], rebuild_every: int = 100_000):
        self.n = len(values)
        self.rebuild_every = rebuild_every
        self._step = 1
        while self._step * 2 <= self.n:
            self._step *= 2
        self.rebuild(values)

    def rebuild(self, values: Sequence[float]) -> None:
        """Recompute the tree from scratch; clears accumulated rounding."""
        self.values: List[float] = [float(v) for v in values]
        tree = [0.0] + self.values
        for i in range(1, self.n + 1):
            j = i + (i & -i)
            if j <= self.n:
                tree[j] += tree[i]
        self._tree = tree
        self._updates = 0

    def set(self, i: int, value: float) -> None:
        delta = value - self.values[i]
        if delta == 0.0:
            return
        self.values[i] = value
        tree = self._tree
        j = i + 1
        while j <= self.n:
            tree[j] += delta
            j += j & -j
        self._updates += 1
        if self._updates >= self.rebuild_every:
            self.rebuild(self.values)

    def total(self) -> float:
        tree = self._tree
        out = 0.0
        j = self.n
        while j > 0:
            out += tree[j]
            j -= j & -j
        return max(out, 0.0)

    def find(self, u: float) -> int:
        """Smallest i with prefix_sum(i + 1) > u."""
        tree = self._tree
        pos = 0
        step = self._step
        while step:
            nxt = pos + step
            if nxt <= self.n and tree[nxt] <= u:
                pos = nxt
                u -= tree[nxt]
            step >>= 1
        return min(pos, self.n - 1)

    def __len__(self) -> int:
        return self.n
