#!/usr/bin/env python3
"""
vflat - exact value functions of nonnegative integer programs over a lattice box
"""

import argparse
import logging
import sys
from typing import Optional, Sequence

from dotenv import load_dotenv

from vflat.config import EXPORT_FORMATS, RETENTION_MODES, RunConfig, load_config
from vflat.errors import InstanceError, VflatError
from vflat.export import (
    atomic_write,
    export_components,
    export_heatmaps,
    export_summary,
    export_values,
)
from vflat.instance import Instance, classify_columns, dominance_violations, load_instance, order_columns
from vflat.level_sets import level_set, lsm_saturation, lsm_set
from vflat.mc_level import common_optima, component_of, isovalue_path, label_components, lsm_frontier
from vflat.solutions import build_dag
from vflat.value_table import (
    Retention,
    build_stack,
    floor_point,
    level_value_set,
    query,
    table_summary,
)
from vflat.verify import Structures, VerifyConfig, run_suite

logger = logging.getLogger(__name__)

COMMANDS = ("build", "query", "levels", "lsm", "mc", "path", "order", "verify", "export")

EPILOG = '''
Examples:
  # Tabulate z_0..z_n over 0 <= beta <= (3,3) and write CSVs plus summary.json
  python -m vflat.main build instances/six_column.json --b 3 3

  # Value at a fractional right-hand side (rounded down)
  python -m vflat.main query instances/six_column.json --b 3 3 --k 6 --beta 1.7 1.2

  # Level-set-minimal points of z_3
  python -m vflat.main lsm instances/six_column.json --k 3

  # MC-level set through a point, with frontier and common optima
  python -m vflat.main mc instances/six_column.json --b 3 3 --at 1 1

  # Run every property check and keep a JSON copy of the report
  python -m vflat.main verify instances/six_column.json --b 3 3 --report out/report.json

Exit codes:
  0  success (declined checks only warn)
  1  usage or runtime error
  2  invalid instance document
  3  a verification check FAILED
'''


class CliParser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; 2 is reserved for invalid instances here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(
        prog="vflat",
        description="Exact value functions, level sets and MC-level sets of max{cx : Ax <= beta, x in Z+^n}",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=EPILOG,
    )
    parser.add_argument('command', choices=COMMANDS, help='What to compute')
    parser.add_argument('instance', help='Path to the instance JSON document')
    parser.add_argument('--b', nargs='+', type=int, help='Override the box bound b from the file')
    parser.add_argument(
        '--retention',
        choices=RETENTION_MODES,
        help='Which levels z_k to keep (default: VFLAT_RETENTION or all)',
    )
    parser.add_argument('--k', type=int, help='Level k (default: n)')
    parser.add_argument('--beta', nargs='+', help='Right-hand side; decimals allowed for query')
    parser.add_argument('--alpha', type=int, help='Only this value for levels')
    parser.add_argument('--at', nargs='+', help='Point whose MC-level set mc describes')
    parser.add_argument('--from', dest='start', nargs='+', help='Start point for path')
    parser.add_argument('--to', dest='end', nargs='+', help='End point for path')
    parser.add_argument('--optima-cap', type=int, help='Stop optima enumeration after this many')
    parser.add_argument('--enumeration-cap', type=int, help='Largest brute-force search allowed')
    parser.add_argument('--pair-budget', type=int, help='Superadditivity pairs checked exhaustively')
    parser.add_argument('--seed', type=int, help='Sampling seed (default: VFLAT_SEED or 0)')
    parser.add_argument('--output-dir', help='Directory for build/export files')
    parser.add_argument(
        '--formats',
        nargs='+',
        choices=EXPORT_FORMATS,
        help='Export formats (default: all; heatmap needs m = 2)',
    )
    parser.add_argument('--report', help='Also write the verification report as JSON to this path')
    return parser


def _fmt(point: Sequence) -> str:
    return "(" + ",".join(str(v) for v in point) + ")"


def _level(args, inst: Instance) -> int:
    k = inst.n if args.k is None else args.k
    if not 0 <= k <= inst.n:
        raise ValueError(f"--k must lie in 0..{inst.n}, got {k}")
    return k


def _require_point(values, flag: str) -> list:
    if not values:
        raise ValueError(f"{flag} is required for this command")
    return values


def cmd_build(run: RunConfig, args, inst: Instance) -> int:
    stack = build_stack(inst, Retention(run.retention))
    summary = table_summary(stack)
    low, high = summary["value_range"]
    print(f"Instance: {inst.name or run.instance_path} (m={inst.m}, n={inst.n}, b={_fmt(stack.box.b)})")
    print(f"Cells: {summary['cell_count']}")
    print(f"Levels retained: {summary['levels_retained']}")
    print(f"z_{inst.n} range: [{low}, {high}]")
    print(f"Step-up terms: {summary['stepup_terms']}, classic terms: {summary['classic_terms']}")
    print(f"Build time: {summary['build_seconds']:.3f}s")
    paths = export_values(stack, run.output_dir) + [export_summary(stack, run.output_dir)]
    print(f"Wrote {len(paths)} files to {run.output_dir}")
    return 0


def cmd_query(run: RunConfig, args, inst: Instance) -> int:
    stack = build_stack(inst, Retention(run.retention))
    k = _level(args, inst)
    beta = _require_point(args.beta, "--beta")
    value = query(stack, k, beta)
    print(f"z_{k}{_fmt(floor_point(beta))} = {value}")
    return 0


def cmd_levels(run: RunConfig, args, inst: Instance) -> int:
    stack = build_stack(inst, Retention(run.retention))
    k = _level(args, inst)
    values = [args.alpha] if args.alpha is not None else level_value_set(stack, k)
    print(f"Values of z_{k}: {level_value_set(stack, k)}")
    for alpha in values:
        members = level_set(stack, k, alpha).members
        print(f"  alpha={alpha}: {len(members)} points: {' '.join(_fmt(p) for p in members)}")
    return 0


def cmd_lsm(run: RunConfig, args, inst: Instance) -> int:
    stack = build_stack(inst, Retention.ALL_K)
    k = _level(args, inst)
    members = lsm_set(stack, k).members()
    print(f"Level-set-minimal points of z_{k} ({len(members)} of {stack.box.cell_count}):")
    for point in members:
        print(f"  {_fmt(point)}  z={stack.value(k, point)}")
    first = lsm_saturation(stack)
    print("Saturation: " + ("none" if first is None else f"every point minimal from k={first}"))
    return 0


def cmd_mc(run: RunConfig, args, inst: Instance) -> int:
    stack = build_stack(inst, Retention.ALL_K)
    cmap = label_components(stack)
    component = cmap.component(component_of(cmap, _require_point(args.at, "--at")))
    print(f"Component {component.id}: alpha={component.value}, {len(component.members)} points")
    print(f"  members: {' '.join(_fmt(p) for p in component.members)}")
    frontier = lsm_frontier(cmap, stack, component.id)
    print(f"  frontier: {' '.join(_fmt(p) for p in frontier)}")
    if component.boundary_touching:
        axes = [a + 1 for a in component.boundary_axes]
        print(f"  touches the box boundary on axes {axes}")
    else:
        print("  interior to the box")
    dag = build_dag(stack)
    for entry in common_optima(cmap, stack, dag, component.id, cap=run.optima_cap):
        vectors = sorted(entry.optima.vectors())
        suffix = " (truncated)" if entry.optima.truncated else ""
        print(f"  optima at {_fmt(entry.base)}: {' '.join(_fmt(x) for x in vectors)}{suffix}, "
              f"optimal on {len(entry.region)} members")
    return 0


def cmd_path(run: RunConfig, args, inst: Instance) -> int:
    stack = build_stack(inst, Retention.FINAL_ONLY)
    cmap = label_components(stack)
    path = isovalue_path(cmap, _require_point(args.start, "--from"), _require_point(args.end, "--to"))
    steps = path.steps()
    print(f"Isovalue path with {len(steps)} points:")
    for point in steps:
        print(f"  {_fmt(point)}")
    return 0


def cmd_order(run: RunConfig, args, inst: Instance) -> int:
    ordered, permutation = order_columns(inst)
    if dominance_violations(ordered):
        raise VflatError("column ordering left a dominating column before a dominated one")
    stack = build_stack(ordered, Retention.ALL_K)
    classification = classify_columns(ordered, stack, permutation)
    print(f"Column order: {[j + 1 for j in permutation]}")
    for info in classification.columns:
        flags = []
        if info.lsm_flag:
            flags.append("minimal")
        if info.necessary_flag:
            flags.append("necessary")
        print(f"  k={info.level}: column {info.original_index + 1} {_fmt(ordered.column(info.level - 1))} "
              f"{info.case.value} (z_{info.level - 1}={info.witness}, c={int(ordered.c[info.level - 1])})"
              f"{' ' + ','.join(flags) if flags else ''}")
    print(f"Necessary columns: {[j + 1 for j in classification.necessary_columns()]}")
    return 0


def cmd_verify(run: RunConfig, args, inst: Instance) -> int:
    structures = Structures.build(inst)
    report = run_suite(structures, VerifyConfig(
        optima_cap=run.optima_cap,
        enumeration_cap=run.enumeration_cap,
        pair_budget=run.pair_budget,
        seed=run.seed,
    ))
    print(report.to_text(), end="")
    if args.report:
        atomic_write(args.report, report.to_json())
    if report.declined:
        logger.warning(f"{len(report.declined)} checks declined: "
                       f"{', '.join(r.check_id for r in report.declined)}")
    return 0 if report.passed else 3


def cmd_export(run: RunConfig, args, inst: Instance) -> int:
    stack = build_stack(inst, Retention(run.retention))
    paths = []
    if "heatmap" in run.export_formats and inst.m != 2:
        raise ValueError(f"heatmap export needs m = 2, instance has m = {inst.m}")
    if "values" in run.export_formats:
        paths += export_values(stack, run.output_dir)
    if "components" in run.export_formats:
        paths.append(export_components(label_components(stack), stack, run.output_dir))
    if "heatmap" in run.export_formats:
        paths += export_heatmaps(stack, run.output_dir)
    for path in paths:
        print(path)
    return 0


HANDLERS = {
    "build": cmd_build,
    "query": cmd_query,
    "levels": cmd_levels,
    "lsm": cmd_lsm,
    "mc": cmd_mc,
    "path": cmd_path,
    "order": cmd_order,
    "verify": cmd_verify,
    "export": cmd_export,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv(override=True)

    try:
        config = load_config()
    except ValueError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return 1

    logging.basicConfig(
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        level=getattr(logging, config.log_level, logging.INFO),
    )

    args = build_parser().parse_args(argv)
    try:
        run = RunConfig.from_mapping({
            "command": args.command,
            "instance_path": args.instance,
            "b_override": args.b,
            "retention": args.retention,
            "optima_cap": args.optima_cap,
            "enumeration_cap": args.enumeration_cap,
            "pair_budget": args.pair_budget,
            "seed": args.seed,
            "output_dir": args.output_dir,
            "export_formats": args.formats,
        }, defaults=config)
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1

    try:
        inst = load_instance(run.instance_path, b_override=run.b_override)
    except InstanceError as e:
        print(f"Invalid instance {run.instance_path}:\n{e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1

    try:
        return HANDLERS[run.command](run, args, inst)
    except (VflatError, ValueError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
