# ipsim/graph/graph_metrics.py
"""Distances, balls, spheres, regions and growth diagnostics."""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel

from ipsim.exceptions import GraphError
from ipsim.graph.graph_builder import TREE_KINDS, Graph, GraphKind, torus_index

logger = logging.getLogger(__name__)


def rho_s3(r: int) -> float:
    """Growth rate log(r-1) used by the covariance inequality."""
    return math.log(r - 1) if r > 1 else 0.0


def rho_s7(r: int) -> float:
    """Growth rate ln(max(r,4)-1) used by the random-field CLT."""
    return math.log(max(r, 4) - 1)


@dataclass(frozen=True)
class Region:
    members: FrozenSet[int]
    boundary: FrozenSet[int]
    label: str = "R"

    @classmethod
    def of(cls, g: Graph, members: Iterable[int], label: str = "R") -> "Region":
        members = frozenset(g.check_vertex(x) for x in members)
        return cls(members=members, boundary=region_boundary(g, members), label=label)

    @classmethod
    def whole(cls, g: Graph, label: str = "S") -> "Region":
        return cls.of(g, g.vertices, label)

    def __len__(self) -> int:
        return len(self.members)

    def as_array(self) -> np.ndarray:
        return np.fromiter(sorted(self.members), dtype=np.int64, count=len(self.members))

    @property
    def boundary_fraction(self) -> float:
        return len(self.boundary) / len(self.members) if self.members else 0.0


def bfs_distance(g: Graph, x: int, y: int) -> int:
    g.check_vertex(y)
    dist = g.distances_from(x)
    if y not in dist:
        raise GraphError(f"vertices {x} and {y} are not connected")
    return dist[y]


def _check_truncation(g: Graph, x: int, n: int) -> None:
    if n < 0:
        raise GraphError(f"radius must be >= 0, got {n}")
    if g.kind in TREE_KINDS and n > int(g.interior_radius_map[x]):
        raise GraphError(
            f"radius {n} around vertex {x} crosses the truncation "
            f"(interior radius {int(g.interior_radius_map[x])})"
        )


def sphere(g: Graph, x: int, n: int) -> FrozenSet[int]:
    x = g.check_vertex(x)
    _check_truncation(g, x, n)
    return frozenset(y for y, d in g.distances_from(x, cutoff=n).items() if d == n)


def ball(g: Graph, x: int, n: int) -> FrozenSet[int]:
    x = g.check_vertex(x)
    _check_truncation(g, x, n)
    return frozenset(g.distances_from(x, cutoff=n))


def region_boundary(g: Graph, members: Iterable[int] | Region) -> FrozenSet[int]:
    """{x in R : some neighbour of x lies outside R}."""
    if isinstance(members, Region):
        members = members.members
    inside = frozenset(members)
    return frozenset(x for x in inside if any(y not in inside for y in g.neighbors(x)))


# ---------------------------------------------------------------- regions
def interior_core(g: Graph, margin: int, label: str = "core") -> Region:
    """Vertices whose distance to the truncation exceeds ``margin``."""
    core = [x for x in g.vertices if int(g.interior_radius_map[x]) >= margin]
    if not core:
        raise GraphError(f"no vertex of {g.describe()} has interior radius >= {margin}")
    return Region.of(g, core, label)


def default_margin(t_end: float, total_rate: float, rule_range: int, radius: int) -> int:
    """ceil(t_end * B * range), capped at radius/2."""
    return int(min(math.ceil(t_end * total_rate * rule_range), radius // 2))


def block_ladder(g: Graph, sides: Sequence[int]) -> List[Region]:
    """Nested cubic blocks [0, s)^d of a torus anchored at vertex 0."""
    if g.kind != GraphKind.TORUS:
        raise GraphError("block ladders are defined on tori only")
    d, side = g.params["dim"], g.params["side"]
    regions = []
    for s in sorted(sides):
        if s > side:
            raise GraphError(f"block side {s} exceeds torus side {side}")
        members = [torus_index(c, side) for c in np.ndindex(*([s] * d))]
        regions.append(Region.of(g, members, label=f"block{s}"))
    return regions


def ball_ladder(g: Graph, center: int, radii: Sequence[int]) -> List[Region]:
    return [Region.of(g, ball(g, center, n), label=f"ball{n}") for n in sorted(radii)]


def region_ladder(g: Graph, ladder: Sequence[int]) -> List[Region]:
    if g.kind == GraphKind.TORUS:
        return block_ladder(g, ladder)
    return ball_ladder(g, g.root, ladder)


# ----------------------------------------------------------------- growth
def quoted_sphere_formula(g: Graph, n: int) -> Optional[float]:
    """Sphere sizes as quoted in the literature for the tree families."""
    if g.kind == GraphKind.TREE_BALL:
        return float(g.params["degree"] ** n)
    if g.kind == GraphKind.TETRA_TREE_BALL:
        if n == 0:
            return 1.0
        return 4.0 * 3 ** (n // 2) if n % 2 == 0 else 6.0 * 3 ** ((n - 1) // 2)
    return None


def closed_form_sphere(g: Graph, n: int) -> Optional[int]:
    """Exact sphere size around an interior vertex where one is known."""
    if g.kind == GraphKind.TREE_BALL:
        r = g.params["degree"]
        return 1 if n == 0 else r * (r - 1) ** (n - 1)
    if g.kind == GraphKind.TORUS and g.params["dim"] == 1:
        side = g.params["side"]
        if n == 0:
            return 1
        if 2 * n < side:
            return 2
        return 1 if 2 * n == side else 0
    return None


def growth_report(g: Graph, x: Optional[int] = None) -> pd.DataFrame:
    """
    Table of (n, |sphere|, |ball|, 2e^{n rho}) around ``x`` (default: root)
    for both growth-rate conventions, plus the quoted sphere formula and
    whether each bound holds.
    """
    x = g.root if x is None else g.check_vertex(x)
    radius = int(g.interior_radius_map[x])
    if radius < 1:
        raise GraphError(f"vertex {x} has interior radius {radius}, need >= 1")

    dist = g.distances_from(x, cutoff=radius)
    shells = Counter(dist.values())
    r = g.degree
    rho3, rho7 = rho_s3(r), rho_s7(r)

    rows = []
    cumulative = 0
    for n in range(radius + 1):
        size = shells.get(n, 0)
        if size == 0 and n > 0:
            break
        cumulative += size
        bound3 = 2.0 * math.exp(n * rho3)
        bound7 = 2.0 * math.exp(n * rho7)
        formula = quoted_sphere_formula(g, n)
        rows.append(
            {
                "n": n,
                "sphere": size,
                "ball": cumulative,
                "bound_s3": bound3,
                "bound_s7": bound7,
                "formula": np.nan if formula is None else formula,
                "holds_s3": cumulative <= bound3,
                "holds_s7": cumulative <= bound7,
            }
        )
    df = pd.DataFrame(rows)
    mismatch = df[df["formula"].notna() & (df["formula"] != df["sphere"])]
    if len(mismatch):
        logger.info(
            "%s: quoted sphere formula disagrees with BFS at n=%s",
            g.describe(), mismatch["n"].tolist(),
        )
    return df


# ------------------------------------------------------------ transitivity
class WitnessReport(BaseModel):
    passed: bool
    degree_uniform: bool
    profiles_equal: bool
    compared: int
    truncated: int
    radius: Optional[int] = None
    note: str = (
        "necessary condition only: equal degrees and distance profiles do not "
        "prove vertex-transitivity"
    )


def distance_profile(g: Graph, x: int, radius: Optional[int] = None) -> tuple:
    shells = Counter(g.distances_from(x, cutoff=radius).values())
    top = max(shells) if radius is None else radius
    return tuple(shells.get(n, 0) for n in range(top + 1))


def transitivity_witness(g: Graph, margin: int = 1) -> WitnessReport:
    """Audit degree uniformity and equality of distance profiles."""
    if g.kind in TREE_KINDS:
        compared = [x for x in g.vertices if int(g.interior_radius_map[x]) >= margin]
        radius = int(min(g.interior_radius_map[x] for x in compared)) if compared else 0
    else:
        compared = list(g.vertices)
        radius = None
    truncated = g.V - len(compared)

    degrees = {int(g.degrees[x]) for x in compared}
    degree_uniform = len(degrees) <= 1
    profiles = {distance_profile(g, x, radius) for x in compared}
    profiles_equal = len(profiles) <= 1

    if truncated:
        logger.debug("%s: %d truncated vertices left out of the audit", g.describe(), truncated)
    return WitnessReport(
        passed=degree_uniform and profiles_equal,
        degree_uniform=degree_uniform,
        profiles_equal=profiles_equal,
        compared=len(compared),
        truncated=truncated,
        radius=radius,
    )


def diameter(g: Graph) -> int:
    if g.kind == GraphKind.TORUS:
        # transitive: every eccentricity is the same
        return max(g.distances_from(0).values())
    if g.kind == GraphKind.TREE_BALL:
        far = max(g.distances_from(0).items(), key=lambda kv: kv[1])[0]
        return max(g.distances_from(far).values())
    return max(max(g.distances_from(x).values()) for x in g.vertices)
