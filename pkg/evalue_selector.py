#!/usr/bin/env python3
"""
Familial e-value SNP selector
Simulate family GWAS data, select SNPs with bootstrap e-values under an ACE
mixed model, run replicated simulation studies and plot the results.
"""

import argparse
import logging
import sys
import warnings
from pathlib import Path
from typing import Optional

from src.analysis.study_runner import StudyRunner
from src.config.config_manager import PRESETS, ConfigManager
from src.errors import NUMERICAL_ERRORS, ConvergenceWarning, EvalueError
from src.exports.csv_exporter import TRUTH_FILE, CSVExporter
from src.reports.plot_generator import PlotGenerator
from src.simulation.genotype_simulator import replicate_streams, simulate_dataset

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


def setup_logging(log_level: str = "INFO", log_file: Optional[Path] = None):
    """Setup logging configuration"""
    handlers = [logging.StreamHandler()]
    if log_file is not None:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=getattr(logging, log_level.upper()),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )
    logging.captureWarnings(True)
    warnings.simplefilter("default", ConvergenceWarning)


def cmd_simulate(args) -> int:
    manager = ConfigManager(args.config, preset=args.preset)
    config = manager.get_config()
    sim = config.sim_config()

    dataset, truth = simulate_dataset(sim, replicate_streams(config.seed, 0))
    exporter = CSVExporter()
    paths = exporter.export_dataset(dataset, args.out)
    exporter.export_truth(truth, sim.blocks, dataset.snp_ids, Path(args.out) / TRUTH_FILE)
    manager.save_config(Path(args.out) / "config_used.yaml")

    logging.getLogger(__name__).info(f"Simulated data written: {', '.join(p.name for p in paths.values())}")
    return EXIT_OK


def cmd_select(args) -> int:
    manager = ConfigManager(args.config, preset=args.preset)
    runner = StudyRunner(manager.get_config(), args.out)
    runner.run_select(args.ped, args.pheno, args.geno, args.covar, args.snp_info,
                      dump_distributions=args.dump_distributions)
    manager.save_config(Path(args.out) / "config_used.yaml")
    return EXIT_OK


def cmd_study(args) -> int:
    manager = ConfigManager(args.config, preset=args.preset)
    runner = StudyRunner(manager.get_config(), args.out)
    paths = runner.run_study()
    manager.save_config(Path(args.out) / "config_used.yaml")
    print(f"Aggregate table: {paths['aggregate']}")
    return EXIT_OK


def cmd_plot(args) -> int:
    written = PlotGenerator().emit_plots(args.input, args.out)
    print(f"Wrote {len(written)} plot files to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Bootstrap e-value SNP selection for family data")
    parser.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help='Logging level (default: INFO)')
    parser.add_argument('--log-file', type=Path, help='Also write the log to this file')

    subparsers = parser.add_subparsers(dest='command', required=True)

    def add_config_options(sub):
        sub.add_argument('--config', type=Path, help='YAML run configuration')
        sub.add_argument('--preset', choices=sorted(PRESETS), help='Apply a configuration preset')
        sub.add_argument('--out', type=Path, required=True, help='Output directory')

    simulate = subparsers.add_parser('simulate', help='Write a simulated family dataset')
    add_config_options(simulate)
    simulate.set_defaults(handler=cmd_simulate)

    select = subparsers.add_parser('select', help='Run e-value selection on input files')
    select.add_argument('--ped', type=Path, required=True, help='Pedigree CSV')
    select.add_argument('--pheno', type=Path, required=True, help='Phenotype CSV')
    select.add_argument('--geno', type=Path, required=True, help='Genotype CSV')
    select.add_argument('--covar', type=Path, help='Covariate CSV (optional)')
    select.add_argument('--snp-info', type=Path, help='SNP position CSV (optional)')
    select.add_argument('--dump-distributions', action='store_true',
                        help='Write evaluation score samples for every s (needed by plot)')
    add_config_options(select)
    select.set_defaults(handler=cmd_select)

    study = subparsers.add_parser('study', help='Run the replicated simulation study')
    add_config_options(study)
    study.set_defaults(handler=cmd_study)

    plot = subparsers.add_parser('plot', help='Plot densities and e-values from a select run')
    plot.add_argument('--in', dest='input', type=Path, required=True, help='Directory of a select run')
    plot.add_argument('--out', type=Path, required=True, help='Output directory')
    plot.set_defaults(handler=cmd_plot)

    return parser


def main(argv=None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level, args.log_file)
    logger = logging.getLogger(__name__)

    try:
        return args.handler(args)
    except NUMERICAL_ERRORS as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL
    except EvalueError as e:
        logger.error(str(e))
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
