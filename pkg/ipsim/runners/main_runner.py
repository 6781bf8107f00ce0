# ipsim/runners/main_runner.py

import logging
from typing import Optional

from ipsim.exceptions import ArtifactError, CouplingOrderError, IpsimError
from ipsim.experiment_config import ExperimentConfig
from ipsim.runners.context import RunContext, default_out_dir
from ipsim.runners.oracle_runner import OracleRunner
from ipsim.runners.simulation_runner import SimulationRunner

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("graph-info", "simulate", "exact", "clt-check", "variance-scan", "hitting")

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_ERROR = 2


class MainRunner:
    """Routes a subcommand to the runner that owns it and writes the manifest last."""

    def __init__(self, cfg: ExperimentConfig, out_dir: Optional[str] = None, threads: int = 1):
        self.cfg = cfg
        self.out_dir = out_dir
        self.threads = max(1, int(threads))

    def _route(self, subcommand: str, ctx: RunContext):
        oracle = OracleRunner(ctx)
        sim = SimulationRunner(ctx)
        return {
            "graph-info": oracle.graph_info,
            "exact": oracle.exact,
            "simulate": sim.simulate,
            "clt-check": sim.clt_check,
            "variance-scan": sim.variance_scan,
            "hitting": sim.hitting,
        }[subcommand]

    def run(self, subcommand: str) -> dict:
        if subcommand not in SUBCOMMANDS:
            return {
                "success": False,
                "message": f"unknown subcommand {subcommand!r}; expected one of {', '.join(SUBCOMMANDS)}",
                "exit_status": EXIT_ERROR,
                "artifacts": [],
            }
        out_dir = self.out_dir or default_out_dir(self.cfg, subcommand)
        ctx = RunContext(self.cfg, subcommand, out_dir, threads=self.threads)
        logger.info("%s -> %s (config %s, seed %d)", subcommand, out_dir, ctx.hash[:12], self.cfg.sim.seed)

        try:
            result = self._route(subcommand, ctx)()
        except CouplingOrderError as exc:
            logger.error("%s", exc)
            result = {"success": False, "message": str(exc), "exit_status": EXIT_ASSERTION}
        except ArtifactError as exc:
            logger.error("%s", exc)
            return {"success": False, "message": str(exc), "exit_status": EXIT_ERROR, "artifacts": ctx.artifacts}
        except IpsimError as exc:
            logger.error("%s failed: %s", subcommand, exc)
            result = {"success": False, "message": str(exc), "exit_status": EXIT_ERROR}

        try:
            ctx.finish(result["exit_status"], notes=result["message"])
        except ArtifactError as exc:
            return {"success": False, "message": str(exc), "exit_status": EXIT_ERROR, "artifacts": ctx.artifacts}
        result["artifacts"] = list(ctx.artifacts)
        return result
