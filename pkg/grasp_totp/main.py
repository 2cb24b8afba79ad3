"""
Command-line interface.

    python -m grasp_totp.main distribute --gripper preset:six_cup_testbed --wrench 0 0 0 0 0 -50
    python -m grasp_totp.main plan scenario.yaml --output out/
    python -m grasp_totp.main maxload scenario.yaml --trajectory out/trajectory.csv
    python -m grasp_totp.main fitweights dataset.csv --gripper preset:six_cup_testbed --seed 7
    python -m grasp_totp.main presets

Exit codes: 0 ok, 2 parse, 3 singular, 4 statically infeasible, 5 not converged,
6 insufficient data, 1 any other library error.
"""
import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from .config.settings import Settings, get_settings, set_settings
from .core.calibration import fit_weights, load_samples
from .core.load_distribution import (
    compare_distributions,
    distribute_with_adjustment,
    normal_weights,
    solve_distribution,
    solve_lp_distribution,
)
from .core.se3 import Wrench
from .exceptions import GraspPlanningError, NotConverged, StaticallyInfeasible
from .services.document_loader import DocumentLoader, list_presets
from .services.report_writer import ReportWriter
from .workflows.scenario_workflow import ScenarioWorkflow

logger = logging.getLogger(__name__)


def setup_logging(log_level: str = "INFO", log_file: Optional[str] = None):
    """Setup logging configuration; stdout is reserved for command output"""
    log_format = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=getattr(logging, log_level.upper()),
        format=log_format,
        handlers=handlers,
        force=True,
    )


def _print_json(data: dict) -> None:
    print(json.dumps(data, indent=2, allow_nan=False))


def cmd_distribute(args: argparse.Namespace, settings: Settings) -> int:
    gripper = DocumentLoader().load_gripper(args.gripper)
    wrench = Wrench.from_vector(args.wrench)
    writer = ReportWriter(settings.output.output_directory, settings.output.significant_digits)
    limit = settings.load_distribution.singular_condition_limit

    if args.compare:
        comparison = compare_distributions(
            wrench, gripper, support_threshold=settings.load_distribution.support_relative_threshold
        )
        print("QP (minimum energy)")
        print(writer.format_table(writer.distribution_dataframe(comparison.qp)))
        print("LP (minimum L1)")
        print(writer.format_table(writer.distribution_dataframe(comparison.lp)))
        _print_json(writer.comparison_summary(comparison))
        distribution = comparison.qp
    elif args.mode == "lp":
        distribution = solve_lp_distribution(wrench, gripper, method=settings.solver.lp_method)
    elif args.mode == "adjusted":
        distribution = distribute_with_adjustment(wrench, gripper, condition_limit=limit)
    else:
        distribution = solve_distribution(wrench, gripper, normal_weights(gripper), condition_limit=limit)

    if not args.compare:
        print(writer.format_table(writer.distribution_dataframe(distribution)))
        print(writer.format_table(writer.ring_force_dataframe(distribution)))
    if args.csv:
        writer.write_distribution(distribution, Path(args.csv).resolve())
    return 0


def cmd_plan(args: argparse.Namespace, settings: Settings) -> int:
    overrides = {}
    if args.grasp is not None:
        overrides["grasp_constraints_enabled"] = args.grasp
    if args.n_knots is not None:
        overrides["n_knots"] = args.n_knots
    if args.lp_method is not None:
        overrides["lp_method"] = args.lp_method

    workflow = ScenarioWorkflow(settings)
    try:
        state = workflow.run_plan(args.scenario, args.output, overrides)
    except (StaticallyInfeasible, NotConverged):
        print((Path(args.output) / "summary.json").read_text(encoding="utf-8"), end="")
        raise
    _print_json(state["summary"])
    return 0


def cmd_maxload(args: argparse.Namespace, settings: Settings) -> int:
    state = ScenarioWorkflow(settings).run_max_load(args.scenario, args.trajectory, args.output)
    _print_json(state["summary"])
    return 0


def cmd_fitweights(args: argparse.Namespace, settings: Settings) -> int:
    gripper = DocumentLoader().load_gripper(args.gripper)
    samples = load_samples(args.dataset)
    config = settings.calibration
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.starts is not None:
        config = replace(config, n_starts=args.starts)

    result = fit_weights(samples, gripper, config, strict=args.strict)
    writer = ReportWriter(args.output, settings.output.significant_digits)
    summary = writer.fit_summary(result)
    writer.write_json(summary, "fit.json")
    writer.write_residuals(result)
    _print_json(summary)
    return 0


def cmd_presets(args: argparse.Namespace, settings: Settings) -> int:
    for category, names in list_presets().items():
        print(f"{category}:")
        for name in names:
            print(f"  preset:{name}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grasp_totp",
        description="Suction-grasp load distribution and grasp-constrained time-optimal planning",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="Documents are YAML; gripper and scenario references accept 'preset:<name>'.",
    )
    parser.add_argument("--settings", type=str, help="YAML file overriding default settings")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="Set logging level (default: from settings, INFO)")
    parser.add_argument("--log-file", type=str, help="Also write the log to this file")
    subparsers = parser.add_subparsers(dest="command", required=True)

    distribute = subparsers.add_parser("distribute", help="Distribute a tool wrench over the cups")
    distribute.add_argument("--gripper", required=True, help="Gripper document or preset:<name>")
    distribute.add_argument("--wrench", required=True, nargs=6, type=float,
                            metavar=("MX", "MY", "MZ", "FX", "FY", "FZ"), help="Tool wrench (N m, N)")
    mode = distribute.add_mutually_exclusive_group()
    mode.add_argument("--qp", dest="mode", action="store_const", const="qp",
                      help="Minimum spring energy solve with normal weights (default)")
    mode.add_argument("--lp", dest="mode", action="store_const", const="lp", help="Minimum L1 solve")
    mode.add_argument("--adjusted", dest="mode", action="store_const", const="adjusted",
                      help="Minimum energy solve with the compressed-cup weight switch")
    mode.add_argument("--compare", action="store_true", help="Print QP vs LP norms and support sizes")
    distribute.add_argument("--csv", type=str, help="Also write the per-cup table to this CSV")
    distribute.set_defaults(mode="qp", handler=cmd_distribute)

    plan = subparsers.add_parser("plan", help="Time-optimal parameterization of a scenario path")
    plan.add_argument("scenario", help="Scenario document or preset:<name>")
    plan.add_argument("--output", "-o", default="output", help="Output directory (default: output)")
    plan.add_argument("--grasp", action=argparse.BooleanOptionalAction, default=None,
                      help="Enable or disable grasp constraints (default: from scenario)")
    plan.add_argument("--n-knots", type=int, help="Number of grid cells")
    plan.add_argument("--lp-method", choices=["simplex", "highs"], help="LP backend")
    plan.set_defaults(handler=cmd_plan)

    maxload = subparsers.add_parser("maxload", help="Largest object mass holdable along a trajectory")
    maxload.add_argument("scenario", help="Scenario document or preset:<name>")
    maxload.add_argument("--trajectory", required=True, help="Trajectory CSV written by 'plan'")
    maxload.add_argument("--output", "-o", default="output", help="Output directory (default: output)")
    maxload.set_defaults(handler=cmd_maxload)

    fit = subparsers.add_parser("fitweights", help="Fit stiffness weights to measured cup wrenches")
    fit.add_argument("dataset", help="Wrench dataset CSV")
    fit.add_argument("--gripper", required=True, help="Gripper document or preset:<name>")
    fit.add_argument("--seed", type=int, help="Random seed for the multi-start (default: from settings)")
    fit.add_argument("--starts", type=int, help="Number of optimizer starts")
    fit.add_argument("--strict", action="store_true", help="Fail on a degenerate fit")
    fit.add_argument("--output", "-o", default="output", help="Output directory (default: output)")
    fit.set_defaults(handler=cmd_fitweights)

    presets = subparsers.add_parser("presets", help="List shipped presets")
    presets.set_defaults(handler=cmd_presets)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code"""
    args = build_parser().parse_args(argv)
    try:
        settings = Settings.from_file(args.settings) if args.settings else get_settings()
    except GraspPlanningError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    set_settings(settings)
    setup_logging(args.log_level or settings.log.log_level, args.log_file or settings.log.log_file)

    try:
        return args.handler(args, settings)
    except GraspPlanningError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
