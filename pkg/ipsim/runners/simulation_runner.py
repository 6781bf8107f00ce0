# ipsim/runners/simulation_runner.py

import logging
import math

import pandas as pd

from ipsim.dynamics.rules import WORKING_FAILED
from ipsim.graph.graph_metrics import region_ladder
from ipsim.runners.context import RunContext, ceil_threshold, is_pure_birth_independent
from ipsim.simulate.replicas import run_replicas
from ipsim.stats.hitting import hitting_analysis, hitting_frame, kout_of_n_mode
from ipsim.stats.moments import estimate_moments
from ipsim.stats.normality import clt_check
from ipsim.stats.variance_scan import variance_ratio_scan

logger = logging.getLogger(__name__)


class SimulationRunner:
    """Monte Carlo subcommands: simulate, clt-check, variance-scan, hitting."""

    def __init__(self, ctx: RunContext):
        self.ctx = ctx
        self.cfg = ctx.cfg

    def _replicas(self, **extra):
        ctx, sim = self.ctx, self.cfg.sim
        return run_replicas(
            ctx.graph, ctx.rule, ctx.eta0, sim.t_end, sim.replicas, sim.seed,
            threads=ctx.threads, **extra,
        )

    def simulate(self) -> dict:
        ctx = self.ctx
        region = ctx.observation_region()
        results = self._replicas(
            grid=self.cfg.sim.expanded_grid, region=region, f=ctx.f, keep_logs=self.cfg.sim.keep_logs,
        )
        series = pd.concat([s.to_frame() for s in results.series], ignore_index=True)
        ctx.write(series, "series.csv")
        for replica_id, log in sorted(results.logs.items()):
            header = [f"seed={log.seed}, replica_id={replica_id}, config_hash={ctx.hash}"]
            ctx.write(log.to_frame(), f"events_r{replica_id}.csv", header_lines=header)
        return {
            "success": True,
            "message": f"{results.n_replicas} replicas on |R|={len(region)}, "
                       f"{results.event_counts.mean():.1f} events per replica",
            "exit_status": 0,
        }

    def clt_check(self) -> dict:
        ctx, analysis = self.ctx, self.cfg.analysis
        region = ctx.observation_region()
        results = self._replicas(grid=self.cfg.sim.expanded_grid, region=region, f=ctx.f)
        moments = estimate_moments(results.series)
        report = clt_check(results.series, self.cfg.analysis_times(), significance=analysis.significance)
        ctx.write(moments.moments_frame(), "moments.csv")
        ctx.write(moments.gamma_frame(self.cfg.analysis_times()), "gamma.csv")
        ctx.write(report.to_frame(), "clt.csv")
        ctx.write(report.qq_frame(), "clt_qq.csv")
        verdict = "pass" if report.passed else "FAIL"
        return {
            "success": True,
            "message": f"KS at {analysis.significance:g}: {verdict} "
                       f"({report.degenerate_cells} degenerate cells flagged)",
            "exit_status": 0,
        }

    def variance_scan(self) -> dict:
        ctx, analysis, sim = self.ctx, self.cfg.analysis, self.cfg.sim
        ladder = region_ladder(ctx.graph, analysis.ladder)
        t = self.cfg.analysis_times()[-1]
        report = variance_ratio_scan(
            ctx.graph, ctx.rule, ctx.eta0, ladder, t, sim.replicas, sim.seed,
            f=ctx.f, ell=analysis.ell, reference=analysis.reference, threads=ctx.threads,
        )
        ctx.write(report.to_frame(), "varratio.csv")
        last = report.rows[-1]
        return {
            "success": True,
            "message": f"t={t}: Var/|B_n| = {last.ratio:.4f} +/- {last.se:.4f} at |B_n|={last.Bn}, "
                       f"boundary fraction decreasing: {report.boundary_decreasing}",
            "exit_status": 0,
        }

    def hitting(self) -> dict:
        ctx, analysis, sim = self.ctx, self.cfg.analysis, self.cfg.sim
        region = ctx.observation_region()
        rule = ctx.rule
        if rule.alphabet == WORKING_FAILED:
            mode = kout_of_n_mode(analysis.alpha, len(region), rule.alphabet)
            f, threshold = mode.f, mode.k
        else:
            f, threshold = ctx.f, ceil_threshold(analysis.alpha, len(region))

        results = self._replicas(grid=sim.expanded_grid, region=region, f=f, threshold=threshold)
        moments = estimate_moments(results.series)
        analytic_t = analytic_s2 = None
        if is_pure_birth_independent(self.cfg, rule) and 0 < analysis.alpha < 1:
            lam = self.cfg.model.lambda_
            analytic_t = -math.log(1 - analysis.alpha) / lam
            analytic_s2 = analysis.alpha / (lam ** 2 * (1 - analysis.alpha))

        report = hitting_analysis(
            results.crossings, moments, analysis.alpha, threshold, sim.t_end,
            bandwidth_c=analysis.bandwidth_c, significance=analysis.significance,
            analytic_t_alpha=analytic_t, analytic_sigma2=analytic_s2,
        )
        ctx.write(hitting_frame(results.crossings), "hitting.csv")
        ctx.write(report.summary_frame(), "hitting_summary.csv")
        ctx.write(moments.moments_frame(), "moments.csv")
        if report.degenerate:
            message = f"degenerate: {report.note}"
        else:
            message = (
                f"t_alpha={report.t_alpha:.4f}, sigma2={report.sigma2:.4f}, "
                f"KS {report.ks if report.ks is None else round(report.ks, 4)} vs {report.crit}, "
                f"censored={report.censored}"
            )
        return {"success": True, "message": message, "exit_status": 0}
