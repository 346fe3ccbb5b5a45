#!/usr/bin/env python3
"""
Main entrypoint for MV-SDE stationary-measure jobs.
"""
import argparse
import logging
import sys

from src.config.job import COMMANDS, FORMATS, parse_config
from src.config.settings import Settings
from src.core.errors import ConfigError
from src.core.pipeline import EXIT_CONFIG, EXIT_OK, run_job


def main(argv=None):
    """Parse the job file, run its command and write the artifacts."""
    parser = argparse.ArgumentParser(description="Stationary measures and critical thresholds of MV-SDEs")
    parser.add_argument("command", nargs="?", choices=COMMANDS, help="Override the command named in the job file")
    parser.add_argument("--config", required=True, help="Path to the JSON job file")
    parser.add_argument("--output", help="Output path prefix (extensions are added)")
    parser.add_argument("--format", choices=FORMATS, help="Artifact format")
    parser.add_argument("--threads", type=int, help="Worker threads for sweeps")
    parser.add_argument("--sigma", type=float, help="Noise level for 'roots' and 'simulate'")
    args = parser.parse_args(argv)

    settings = Settings.load()
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s | %(levelname)s | %(name)s | %(message)s",
    )

    try:
        overrides = {"command": args.command, "output": args.output, "format": args.format,
                     "threads": args.threads, "sigma": args.sigma}
        cfg = parse_config(args.config, settings, overrides)
    except ConfigError as e:
        print(f"✗ Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    print("=" * 50)
    print(f"MV-SDE job: {cfg.command}")
    print("=" * 50)

    try:
        outcome = run_job(cfg, settings)
    except Exception as e:
        print(f"✗ Unexpected error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    if outcome.exit_code == EXIT_OK:
        print("\n" + "=" * 50)
        print("✓ Job completed successfully!")
        print("=" * 50)
        for path in outcome.paths:
            print(f"  {path}")
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
