"""CLI entrypoint for geoscore experiments."""

from __future__ import annotations

import argparse
import logging
import sys

from src.config.experimentConfig import loadExperimentConfig
from src.errors import GeoscoreError
from src.pipeline.geoscorePipeline import buildContext, commands

commandHelp = {
    'synth': 'Generate the synthetic benchmark (or ingest STMP files from datasetDir).',
    'train': 'Train one transformation classifier per catalog and seed.',
    'score': 'Fit Dirichlet scorers and thresholds, then score the test split.',
    'select': 'Build the discrimination matrix and prune redundant transformations.',
    'eval': 'Compute AUROC/accuracy per run and the aggregate table with Welch rows.',
    'report': 'Collect evaluation and selection results into report.txt.',
    'pipeline': 'Run synth, train, score, eval and report in order.',
}


def buildParser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='geoscore',
        description='Transformation-based one-class anomaly detection on image stamps.',
    )
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name, helpText in commandHelp.items():
        sub = subparsers.add_parser(name, help=helpText, description=helpText)
        sub.add_argument('--config', default=None, help='Experiment config JSON (or a stage manifest to rerun).')
        sub.add_argument('--out', default=None, help='Output directory; overrides outputDir from the config.')
        sub.add_argument('--force', action='store_true', help='Rerun stages even when their fingerprint is unchanged.')
        sub.add_argument(
            '--deterministic',
            action='store_true',
            default=None,
            help='Single-threaded torch with deterministic algorithms.',
        )
        sub.add_argument('--jobs', type=int, default=None, help='Parallel runs / pair jobs (default: GEOSCORE_JOBS or 1).')
        sub.add_argument('--verbose', action='store_true', help='Log at DEBUG level.')
    return parser


def main(argv: list[str] | None = None) -> int:
    args = buildParser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )

    try:
        config = loadExperimentConfig(args.config)
        ctx = buildContext(config, outDir=args.out, force=args.force, jobs=args.jobs, deterministic=args.deterministic)
        commands[args.command](ctx)
    except (GeoscoreError, FileNotFoundError) as error:
        print(f'error: {error}', file=sys.stderr)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
