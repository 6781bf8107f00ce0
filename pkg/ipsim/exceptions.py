"""Error hierarchy shared by every ipsim module."""

from __future__ import annotations

from typing import List, Optional


class IpsimError(Exception):
    """Base class; the CLI maps these to exit status 2."""


class GraphError(IpsimError):
    pass


class SizeCapError(GraphError):
    pass


class RuleError(IpsimError):
    pass


class EnumerationCapError(IpsimError):
    pass


class StateSpaceCapError(IpsimError):
    pass


class NotMonotoneError(IpsimError):
    pass


class SimulationError(IpsimError):
    pass


class CouplingOrderError(IpsimError):
    """Pointwise order broke inside a monotone coupling."""


class ObservationError(IpsimError):
    pass


class EstimationError(IpsimError):
    pass


class HittingError(IpsimError):
    pass


class CensoringError(HittingError):
    pass


class ConfigError(IpsimError):
    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.violations))


class ArtifactError(IpsimError):
    def __init__(self, path: str, reason: Optional[str] = None):
        self.path = path
        super().__init__(f"could not write {path}: {reason}" if reason else f"could not write {path}")
