# ipsim/simulate/replicas.py
"""Independent replicas, optionally spread over a process pool."""
from __future__ import annotations

import logging
import pickle
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from ipsim.config import config
from ipsim.dynamics.rules import LocalRule
from ipsim.graph.graph_builder import Graph
from ipsim.graph.graph_metrics import Region
from ipsim.simulate.gillespie import EventLog, GillespieSimulator
from ipsim.simulate.observe import EmpiricalSeries, first_crossing, observe, snapshot

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReplicaTask:
    eta0: Tuple[int, ...]
    t_end: float
    seed: int
    grid: Optional[Tuple[float, ...]] = None
    region: Optional[Region] = None
    f: Optional[Tuple[float, ...]] = None
    threshold: Optional[float] = None
    snapshot_time: Optional[float] = None
    keep_logs: int = 0


@dataclass
class ReplicaResults:
    n_replicas: int
    series: List[EmpiricalSeries] = field(default_factory=list)
    crossings: Optional[np.ndarray] = None
    snapshots: Optional[np.ndarray] = None
    logs: Dict[int, EventLog] = field(default_factory=dict)
    event_counts: Optional[np.ndarray] = None

    @property
    def censored(self) -> int:
        return 0 if self.crossings is None else int(np.isnan(self.crossings).sum())


# worker process state, filled by the pool initializer
_WORKER: Dict[str, object] = {}


def _init_worker(g: Graph, rule: LocalRule, task: ReplicaTask) -> None:
    _WORKER["sim"] = GillespieSimulator(g, rule)
    _WORKER["task"] = task


def _run_one(sim: GillespieSimulator, task: ReplicaTask, replica_id: int):
    log = sim.run(task.eta0, task.t_end, task.seed, replica_id)
    W = sim.W
    series = None
    if task.grid is not None and task.region is not None:
        series = observe(log, task.region, task.grid, task.f, n_states=W)
    crossing = None
    if task.threshold is not None:
        hit = first_crossing(log, task.region, task.f, task.threshold)
        crossing = np.nan if hit is None else hit
    snap = snapshot(log, task.snapshot_time) if task.snapshot_time is not None else None
    kept = log if replica_id < task.keep_logs else None
    return replica_id, series, crossing, snap, kept, len(log)


def _run_chunk(replica_ids: Sequence[int]):
    sim, task = _WORKER["sim"], _WORKER["task"]
    return [_run_one(sim, task, i) for i in replica_ids]


def _picklable(*objs) -> bool:
    try:
        pickle.dumps(objs)
        return True
    except Exception:
        return False


def run_replicas(
    g: Graph,
    rule: LocalRule,
    eta0: Sequence[int],
    t_end: float,
    n_replicas: int,
    seed: int,
    grid: Optional[Sequence[float]] = None,
    region: Optional[Region] = None,
    f: Optional[Sequence[float]] = None,
    threshold: Optional[float] = None,
    snapshot_time: Optional[float] = None,
    keep_logs: int = 0,
    threads: Optional[int] = None,
    show_progress: Optional[bool] = None,
) -> ReplicaResults:
    """
    Replica i uses the stream keyed by (seed, i); results are ordered by
    replica id, so the outcome does not depend on ``threads``.
    """
    if n_replicas < 1:
        raise ValueError(f"n_replicas must be >= 1, got {n_replicas}")
    if threshold is not None and (region is None or f is None):
        raise ValueError("first-crossing times need a region and a degradation map")
    threads = config.THREADS if threads is None else max(1, int(threads))
    show_progress = config.SHOW_PROGRESS if show_progress is None else show_progress

    task = ReplicaTask(
        eta0=tuple(int(s) for s in eta0),
        t_end=float(t_end),
        seed=int(seed),
        grid=None if grid is None else tuple(float(t) for t in grid),
        region=region,
        f=None if f is None else tuple(float(v) for v in f),
        threshold=threshold,
        snapshot_time=snapshot_time,
        keep_logs=keep_logs,
    )
    if threads > 1 and not _picklable(g, rule):
        logger.warning("%r cannot be sent to worker processes; running on one thread", rule)
        threads = 1

    ids = list(range(n_replicas))
    rows = []
    bar = tqdm(total=n_replicas, desc="replicas", disable=not show_progress)
    if threads == 1:
        sim = GillespieSimulator(g, rule)
        for i in ids:
            rows.append(_run_one(sim, task, i))
            bar.update(1)
    else:
        size = max(1, n_replicas // (threads * 8))
        chunks = [ids[i:i + size] for i in range(0, n_replicas, size)]
        with ProcessPoolExecutor(max_workers=threads, initializer=_init_worker, initargs=(g, rule, task)) as pool:
            futures = [pool.submit(_run_chunk, chunk) for chunk in chunks]
            for fut in as_completed(futures):
                part = fut.result()
                rows.extend(part)
                bar.update(len(part))
    bar.close()
    rows.sort(key=lambda row: row[0])

    results = ReplicaResults(n_replicas=n_replicas)
    results.event_counts = np.array([row[5] for row in rows], dtype=np.int64)
    if task.grid is not None and region is not None:
        results.series = [row[1] for row in rows]
    if threshold is not None:
        results.crossings = np.array([row[2] for row in rows], dtype=float)
    if snapshot_time is not None:
        results.snapshots = np.vstack([row[3] for row in rows]).astype(np.int8)
    results.logs = {row[0]: row[4] for row in rows if row[4] is not None}
    logger.info(
        "%d replicas of %r on %s: %.1f events per replica",
        n_replicas, rule, g.describe(), float(results.event_counts.mean()),
    )
    return results
