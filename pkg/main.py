import argparse
import logging
import sys

from src import config as cfg
from src import pipeline
from src import utils  # Importing utils to access the logging setup


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="main.py", description="Exact log de Rham-Witt verification runner")
    commands = parser.add_subparsers(dest="command", required=True)
    run = commands.add_parser("run", help="run the verification suites described by a config file")
    run.add_argument("--config", required=True, help="JSON RunConfig document")
    run.add_argument("--out", default=None, help="report path (default: versioned file in outputs/reports)")
    run.add_argument("--suite", nargs="+", default=None, choices=cfg.SUITES, help="restrict to these suites")
    run.add_argument("--seed", type=int, default=None, help="seed for sampled and randomized checks")
    run.add_argument("--format", choices=["json", "table"], default="json",
                     help="'table' also prints per-degree invariant factors")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    # 1. ACTIVATE LOGS FIRST!
    utils.setup_logging()
    logger = logging.getLogger("MAIN")

    logger.info(">>> STARTING DE RHAM-WITT VERIFICATION RUN <<<")

    try:
        overrides = {"suites": args.suite, "seed": args.seed, "output": args.out}
        config = cfg.load_run_config(args.config, overrides)
        report = pipeline.run(config)
        path = pipeline.save_report(report)

        if args.format == "table":
            print(pipeline.render_tables(report))

        if report.passed:
            logger.info(">>> ALL SUITES PASSED <<<")
        else:
            failed = [s.name for s in report.suites if not s.passed]
            logger.error(f">>> SUITE FAILURE: {failed} <<<")
        logger.info(f"Report written to '{path}'.")
        return report.exit_status

    except cfg.ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return 2

    except KeyboardInterrupt:
        logger.warning("Run interrupted by the user (Ctrl+C).")
        return 0

    except Exception as e:
        logger.critical(f"UNHANDLED ERROR: {e}", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
