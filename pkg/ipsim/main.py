# ipsim/main.py
"""Command-line entry: ``python -m ipsim.main <subcommand> --config PATH``."""

import argparse
import logging
import sys

from ipsim import __version__
from ipsim.config import config
from ipsim.exceptions import ConfigError
from ipsim.experiment_config import apply_overrides, config_hash, load_config
from ipsim.runners.main_runner import EXIT_ERROR, SUBCOMMANDS, MainRunner

logger = logging.getLogger("ipsim")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ipsim",
        description="Interacting particle systems on bounded-degree graphs: simulation, exact oracles and statistics",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, metavar="PATH", help="experiment TOML file")
    parser.add_argument("--seed", type=int, default=None, metavar="U64", help="master seed (overrides sim.seed)")
    parser.add_argument("--out", default=None, metavar="DIR", help="artifact directory")
    parser.add_argument("--replicas", type=int, default=None, metavar="N", help="overrides sim.replicas")
    parser.add_argument("--threads", type=int, default=config.THREADS, metavar="N",
                        help="worker processes (default IPSIM_THREADS)")
    parser.add_argument("--beta", type=float, default=None, help="decay exponent of the covariance bound")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(config.LOG_LEVEL).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, seed=args.seed, replicas=args.replicas, out=args.out, beta=args.beta)
    except ConfigError as exc:
        logger.error("config %s rejected with %d violation(s)", args.config, len(exc.violations))
        print(f"config error in {args.config}:", file=sys.stderr)
        for violation in exc.violations:
            print(f"  - {violation}", file=sys.stderr)
        return EXIT_ERROR

    print(f"ipsim {__version__} :: {args.subcommand}")
    print(f"  config:  {args.config}")
    print(f"  seed:    {cfg.sim.seed}")
    print(f"  threads: {args.threads}")

    logger.info("dispatching %s (config hash %s)", args.subcommand, config_hash(cfg)[:12])
    result = MainRunner(cfg, out_dir=args.out, threads=args.threads).run(args.subcommand)

    stream = sys.stdout if result["success"] else sys.stderr
    print(result["message"], file=stream)
    for path in result.get("artifacts", []):
        print(f"  wrote {path}")
    return int(result["exit_status"])


if __name__ == "__main__":
    sys.exit(main())
