# ipsim/simulate/observe.py
"""Empirical counts N_t(w), degradation D_t and first-passage times from event logs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ipsim.exceptions import ObservationError
from ipsim.graph.graph_metrics import Region
from ipsim.simulate.gillespie import EventLog

RegionLike = Union[Region, Iterable[int]]


@dataclass
class EmpiricalSeries:
    region_label: str
    region_size: int
    grid: np.ndarray
    counts: np.ndarray
    degradation: Optional[np.ndarray] = None
    replica_id: int = 0

    def __post_init__(self):
        if np.any(self.counts.sum(axis=1) != self.region_size):
            raise ObservationError(f"replica {self.replica_id}: counts do not sum to |R| = {self.region_size}")

    @property
    def n_states(self) -> int:
        return self.counts.shape[1]

    def to_frame(self) -> pd.DataFrame:
        G, W = self.counts.shape
        frame = pd.DataFrame(
            {
                "replica": self.replica_id,
                "t": np.repeat(self.grid, W),
                "w": np.tile(np.arange(W), G),
                "count": self.counts.reshape(-1),
            }
        )
        if self.degradation is not None:
            frame["D"] = np.repeat(self.degradation, W)
        return frame


def _members(log: EventLog, region: RegionLike) -> np.ndarray:
    members = region.as_array() if isinstance(region, Region) else np.asarray(sorted(set(region)), dtype=np.int64)
    if len(members) and (members.min() < 0 or members.max() >= len(log.initial)):
        raise ObservationError("region contains vertices outside the simulated graph")
    return members


def _region_events(log: EventLog, members: np.ndarray):
    mask = np.zeros(len(log.initial), dtype=bool)
    mask[members] = True
    inside = mask[log.sites]
    return log.times[inside], log.from_states[inside].astype(np.int64), log.to_states[inside].astype(np.int64)


def observe(
    log: EventLog,
    region: RegionLike,
    grid: Sequence[float],
    f: Optional[Sequence[float]] = None,
    n_states: Optional[int] = None,
) -> EmpiricalSeries:
    """Counts of every state over ``region`` at each grid time (right-continuous)."""
    grid = np.asarray(grid, dtype=float)
    if len(grid) and (grid.min() < 0 or grid.max() > log.t_end):
        raise ObservationError(f"grid must lie in [0, {log.t_end}]")
    if np.any(np.diff(grid) < 0):
        raise ObservationError("grid must be non-decreasing")
    members = _members(log, region)
    W = int(n_states if n_states is not None else (len(f) if f is not None else max(2, int(log.initial.max()) + 1)))

    initial = np.bincount(log.initial[members].astype(np.int64), minlength=W)
    times, frm, to = _region_events(log, members)
    delta = np.zeros((len(times), W), dtype=np.int64)
    rows = np.arange(len(times))
    np.add.at(delta, (rows, to), 1)
    np.add.at(delta, (rows, frm), -1)
    cum = np.vstack([np.zeros((1, W), dtype=np.int64), np.cumsum(delta, axis=0)])
    idx = np.searchsorted(times, grid, side="right")
    counts = initial[None, :] + cum[idx]

    degradation = None
    if f is not None:
        degradation = counts @ np.asarray(f, dtype=float)
    label = region.label if isinstance(region, Region) else "R"
    return EmpiricalSeries(label, len(members), grid, counts, degradation, log.replica_id)


def first_crossing(log: EventLog, region: RegionLike, f: Sequence[float], threshold: float) -> Optional[float]:
    """inf{t : D_t >= threshold}; D_t only moves at events, so this is an event time, or 0, or None."""
    members = _members(log, region)
    f = np.asarray(f, dtype=float)
    d0 = float(f[log.initial[members].astype(np.int64)].sum())
    if d0 >= threshold:
        return 0.0
    times, frm, to = _region_events(log, members)
    if not len(times):
        return None
    path = d0 + np.cumsum(f[to] - f[frm])
    hit = np.flatnonzero(path >= threshold)
    return float(times[hit[0]]) if len(hit) else None


def snapshot(log: EventLog, t: float) -> np.ndarray:
    if not 0 <= t <= log.t_end:
        raise ObservationError(f"snapshot time {t} outside [0, {log.t_end}]")
    return log.config_at(t)
