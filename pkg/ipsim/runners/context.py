# ipsim/runners/context.py
"""Objects shared by every subcommand: graph, rule, start, regions, artifacts."""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

from ipsim.config import config
from ipsim.dynamics.rate_functionals import total_rate_bound
from ipsim.dynamics.rules import LocalRule
from ipsim.experiment_config import ExperimentConfig, config_hash
from ipsim.graph.graph_builder import TREE_KINDS, Graph, build_graph
from ipsim.graph.graph_metrics import Region, default_margin, interior_core
from ipsim.simulate.gillespie import RNG_ALGORITHM
from ipsim.utils.csv_utils import write_csv
from ipsim.utils.manifest import RunManifest

logger = logging.getLogger(__name__)


def graph_from_config(cfg: ExperimentConfig) -> Graph:
    params = cfg.graph.model_dump(exclude={"type", "interior_margin"}, exclude_none=True)
    return build_graph(cfg.graph.type, **params)


@dataclass
class RunContext:
    cfg: ExperimentConfig
    subcommand: str
    out_dir: str
    threads: int = 1
    artifacts: List[str] = field(default_factory=list)
    _graph: Optional[Graph] = None
    _rule: Optional[LocalRule] = None

    def __post_init__(self):
        self.hash = config_hash(self.cfg)
        self.manifest = RunManifest(
            subcommand=self.subcommand,
            config_hash=self.hash,
            seed=self.cfg.sim.seed,
            rng_algorithm=RNG_ALGORITHM,
            grid=self.cfg.sim.expanded_grid,
        )

    # -------------------------------------------------------- model pieces
    @property
    def graph(self) -> Graph:
        if self._graph is None:
            self._graph = graph_from_config(self.cfg)
        return self._graph

    @property
    def rule(self) -> LocalRule:
        if self._rule is None:
            self._rule = self.cfg.rule()
        return self._rule

    @property
    def eta0(self) -> List[int]:
        return [self.cfg.initial_state()] * self.graph.V

    @property
    def f(self) -> np.ndarray:
        """Degradation score: the state's index in the order."""
        return np.arange(self.rule.alphabet.size, dtype=float)

    def observation_region(self) -> Region:
        g = self.graph
        if g.kind not in TREE_KINDS:
            return Region.whole(g, label="S")
        margin = self.cfg.graph.interior_margin
        if margin is None:
            B = total_rate_bound(self.rule, g, allow_sampling=True).value
            margin = default_margin(self.cfg.sim.t_end, B, self.rule.range, int(g.interior_radius_map[g.root]))
        logger.info("observation region: interior core with margin %d", margin)
        return interior_core(g, margin, label=f"core{margin}")

    # ------------------------------------------------------------ artifacts
    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def write(self, df: pd.DataFrame, name: str, header_lines=None) -> str:
        path = write_csv(df, self.path(name), header_lines)
        self.manifest.record(path)
        self.artifacts.append(path)
        return path

    def finish(self, exit_status: int, notes: Optional[str] = None) -> str:
        self.manifest.exit_status = exit_status
        self.manifest.notes = notes
        path = self.manifest.write(self.out_dir)
        self.artifacts.append(path)
        return path


def default_out_dir(cfg: ExperimentConfig, subcommand: str) -> str:
    if cfg.output.directory:
        return cfg.output.directory
    return os.path.join(config.OUTPUT_DIR, subcommand)


def ceil_threshold(alpha: float, size: int) -> int:
    return int(math.ceil(alpha * size - 1e-9))


def is_pure_birth_independent(cfg: ExperimentConfig, rule: LocalRule) -> bool:
    """Independent binary flips 0 -> 1 only, started from 0."""
    return (
        cfg.model.type == "independent"
        and rule.alphabet.size == 2
        and cfg.model.delta == 0
        and cfg.initial_state() == 0
    )
