# ipsim/experiment_config.py
"""
Experiment files: one TOML document with graph, model, init, sim,
analysis and output tables.

    [graph]
    type = "torus"
    dim = 2
    side = 20

    [model]
    type = "independent"
    lambda = 1.0

    [sim]
    t_end = 2.0
    grid = "linspace(0, 2, 41)"
    replicas = 2000
    seed = 7
"""
from __future__ import annotations

import hashlib
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import List, Literal, Optional, Union

import numpy as np
import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ipsim.dynamics.rules import LocalRule, build_rule
from ipsim.exceptions import ConfigError, IpsimError

LINSPACE = re.compile(r"^\s*linspace\(\s*([^,]+?)\s*,\s*([^,]+?)\s*,\s*(\d+)\s*\)\s*$")


class _Table(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class GraphTable(_Table):
    type: Literal["torus", "tree", "tetra"]
    dim: Optional[int] = Field(default=None, ge=1)
    side: Optional[int] = Field(default=None, ge=3)
    degree: Optional[int] = Field(default=None, ge=3)
    radius: Optional[int] = Field(default=None, ge=1)
    interior_margin: Optional[int] = Field(default=None, ge=0)


class ModelTable(_Table):
    type: Literal["independent", "contact", "ladder"]
    lambda_: float = Field(default=1.0, alias="lambda", ge=0)
    delta: float = Field(default=0.0, ge=0)
    spontaneous: float = Field(default=0.0, ge=0)
    states: Optional[Union[int, List[str]]] = None
    a: Optional[List[float]] = None
    b: Optional[List[float]] = None
    range: int = Field(default=1, ge=0)


class InitTable(_Table):
    state: Union[int, str] = 0


class SimTable(_Table):
    t_end: float = Field(gt=0)
    grid: Union[str, List[float]] = "linspace(0, 1, 11)"
    replicas: int = Field(default=1000, ge=1)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    keep_logs: int = Field(default=1, ge=0)

    @field_validator("grid")
    @classmethod
    def _grid_syntax(cls, value):
        if isinstance(value, str) and not LINSPACE.match(value):
            raise ValueError("grid must be a list of times or 'linspace(t0, t1, G)'")
        return value

    @property
    def expanded_grid(self) -> List[float]:
        return expand_grid(self.grid)


class AnalysisTable(_Table):
    times: Optional[List[float]] = None
    alpha: float = Field(default=0.5, ge=0, le=1)
    significance: float = Field(default=0.01, gt=0, lt=1)
    ladder: List[int] = Field(default_factory=list)
    ell: Optional[int] = Field(default=None, ge=0)
    bandwidth_c: float = Field(default=0.5, gt=0)
    beta: Optional[float] = None
    distances: List[int] = Field(default_factory=lambda: [1, 2, 3])
    bound_times: List[float] = Field(default_factory=lambda: [0.25, 0.5])
    smooth_times: List[float] = Field(default_factory=lambda: [0.1, 0.3])
    site: int = Field(default=0, ge=0)
    reference: Optional[float] = None


class OutputTable(_Table):
    directory: Optional[str] = None


class ExperimentConfig(_Table):
    graph: GraphTable
    model: ModelTable
    init: InitTable = Field(default_factory=InitTable)
    sim: SimTable
    analysis: AnalysisTable = Field(default_factory=AnalysisTable)
    output: OutputTable = Field(default_factory=OutputTable)

    def rule(self) -> LocalRule:
        return build_rule(self.model)

    def initial_state(self) -> int:
        return self.rule().alphabet.index(self.init.state)

    def analysis_times(self) -> List[float]:
        """Times tested by clt-check and variance-scan; the last grid point unless listed."""
        if self.analysis.times:
            return list(self.analysis.times)
        return self.sim.expanded_grid[-1:]

    def violations(self) -> List[str]:
        """Cross-table checks that single fields cannot express."""
        out: List[str] = []
        g = self.graph
        if g.type == "torus":
            for key in ("dim", "side"):
                if getattr(g, key) is None:
                    out.append(f"graph.{key}: required for a torus")
        if g.type == "tree":
            for key in ("degree", "radius"):
                if getattr(g, key) is None:
                    out.append(f"graph.{key}: required for a tree ball")
        if g.type == "tetra" and g.radius is None:
            out.append("graph.radius: required for a tetra-tree ball")

        m = self.model
        if m.type == "ladder" and (m.a is None or m.b is None):
            out.append("model.a / model.b: required for a ladder rule")
        if m.type != "contact" and m.spontaneous:
            out.append("model.spontaneous: only meaningful for a contact rule")

        rule = None
        try:
            rule = self.rule()
        except (IpsimError, ValueError, TypeError) as exc:
            if m.type != "ladder" or (m.a is not None and m.b is not None):
                out.append(f"model: {exc}")
        if rule is not None:
            try:
                rule.alphabet.index(self.init.state)
            except IpsimError:
                out.append(f"init.state: {self.init.state!r} is not one of {list(rule.alphabet.labels)}")

        s = self.sim
        grid = s.expanded_grid
        if not grid:
            out.append("sim.grid: empty")
        for t in grid:
            if t < 0 or t > s.t_end + 1e-12:
                out.append(f"sim.grid: point {t} outside [0, sim.t_end={s.t_end}]")
                break
        if any(b < a for a, b in zip(grid, grid[1:])):
            out.append("sim.grid: times must be non-decreasing")

        a = self.analysis
        for t in a.times or []:
            if not any(abs(t - p) < 1e-9 for p in grid):
                out.append(f"analysis.times: {t} is not a point of sim.grid")
        for t in a.bound_times + a.smooth_times:
            if t < 0:
                out.append(f"analysis: negative time {t}")
        if any(b <= a_ for a_, b in zip(a.ladder, a.ladder[1:])):
            out.append("analysis.ladder: must be strictly increasing")
        if g.type == "torus" and g.side is not None and any(s_ > g.side for s_ in a.ladder):
            out.append(f"analysis.ladder: block sides must be <= graph.side={g.side}")
        if g.type in ("tree", "tetra") and g.radius is not None and any(r >= g.radius for r in a.ladder):
            out.append(f"analysis.ladder: ball radii must be < graph.radius={g.radius}")
        return out


def expand_grid(grid: Union[str, List[float]]) -> List[float]:
    if isinstance(grid, str):
        match = LINSPACE.match(grid)
        if not match:
            raise ConfigError([f"sim.grid: cannot parse {grid!r}"])
        t0, t1, count = float(match.group(1)), float(match.group(2)), int(match.group(3))
        return [float(t) for t in np.linspace(t0, t1, count)]
    return [float(t) for t in grid]


def _format_error(err) -> str:
    loc = ".".join(str(p) for p in err["loc"])
    if loc.startswith("model.lambda_"):
        loc = loc.replace("lambda_", "lambda", 1)
    return f"{loc}: {err['msg']}"


def parse_config(text: str) -> ExperimentConfig:
    """Validate a TOML document; every violation is reported, not just the first."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"TOML syntax: {exc}"]) from exc
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError([_format_error(e) for e in exc.errors()]) from exc
    problems = cfg.violations()
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"]) from exc


def emit_config(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(cfg.model_dump(by_alias=True, exclude_none=True))


def config_hash(cfg: ExperimentConfig) -> str:
    """Digest of everything that shapes the results; the output directory is left out."""
    body = tomli_w.dumps(cfg.model_dump(by_alias=True, exclude_none=True, exclude={"output"}))
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


def apply_overrides(
    cfg: ExperimentConfig,
    seed: Optional[int] = None,
    replicas: Optional[int] = None,
    out: Optional[str] = None,
    beta: Optional[float] = None,
) -> ExperimentConfig:
    """Command-line flags win over the file."""
    sim = cfg.sim.model_copy(update={k: v for k, v in {"seed": seed, "replicas": replicas}.items() if v is not None})
    output = cfg.output.model_copy(update={"directory": out}) if out is not None else cfg.output
    analysis = cfg.analysis.model_copy(update={"beta": beta}) if beta is not None else cfg.analysis
    updated = cfg.model_copy(update={"sim": sim, "output": output, "analysis": analysis})
    problems = updated.violations()
    if problems:
        raise ConfigError(problems)
    return updated
