"""Command-line surface.

Subcommands: adjust (procedures on a table), simulate (scenario files),
fdr (two-groups curves), hier (tree testing), ci (selection-adjusted
intervals), diagnose (null agreement checks).  Outputs land in
--output-dir; summaries go to stdout.  Exit codes: 0 success, 2 for
input or validation problems, 3 for runtime failures.

Commands are pure functions of their inputs and flags.  The only
environment hook is FDRLAB_WORKERS as a default worker count, and
worker count never changes results, only wall time.
"""

import argparse
import os
import sys

from .errors import EmptyFilterError, ValidationError
from .procedures import (
    adjusted_pvalues,
    adaptive_step_down,
    bh_step_up,
    bonferroni,
    by_step_up,
    two_stage_adaptive,
    weighted_bh,
)
from .selective import EstimateSet, fcr_intervals
from .simlab import execute_run, load_run_config
from .structured import HypothesisTree, hierarchical_test
from .two_groups import (
    NormalSpec,
    diagnose_null,
    estimate_local_fdr,
    estimate_p0_lambda,
    fit_empirical_null,
    p_from_z,
)
from . import tables

_PROCEDURE_CHOICES = (
    "bh",
    "by",
    "adaptive_step_down",
    "two_stage_adaptive",
    "weighted_bh",
    "bonferroni",
)


def _add_output_dir(parser):
    parser.add_argument(
        "--output-dir",
        default=".",
        help="directory for report files (created if missing)",
    )


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="fdrlab",
        description="False discovery rate procedures with a Monte Carlo "
        "verification lab.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_adjust = sub.add_parser(
        "adjust", help="run a multiple-testing procedure on a p/z table"
    )
    p_adjust.add_argument("input", help="CSV with id and p (or z) columns")
    p_adjust.add_argument("--procedure", default="bh", choices=_PROCEDURE_CHOICES)
    p_adjust.add_argument("--q", type=float, default=0.05)
    p_adjust.add_argument(
        "--sidedness",
        default="two_sided",
        choices=("one_sided", "two_sided"),
        help="conversion rule for z inputs",
    )
    p_adjust.add_argument(
        "--bound-variant",
        default="canonical",
        choices=("canonical", "discounted"),
        help="null-count estimate used by two_stage_adaptive",
    )
    _add_output_dir(p_adjust)

    p_sim = sub.add_parser("simulate", help="execute a scenario file")
    p_sim.add_argument("scenario_file", help="JSON run configuration")
    p_sim.add_argument(
        "--workers",
        type=int,
        default=int(os.environ.get("FDRLAB_WORKERS", "1")),
        help="worker threads; never changes results",
    )
    p_sim.add_argument(
        "--seed", type=int, default=None, help="override the configured master seed"
    )
    _add_output_dir(p_sim)

    p_fdr = sub.add_parser("fdr", help="estimate local fdr curves from z-values")
    p_fdr.add_argument("input", help="CSV with id and z columns")
    p_fdr.add_argument(
        "--null",
        default="theoretical",
        choices=("theoretical", "empirical"),
        help="null component: standard normal or fitted from the data center",
    )
    p_fdr.add_argument("--p0-lambda", type=float, default=0.5)
    p_fdr.add_argument("--grid-points", type=int, default=512)
    p_fdr.add_argument("--tail", default="right", choices=("right", "left"))
    _add_output_dir(p_fdr)

    p_hier = sub.add_parser("hier", help="gated testing down a hypothesis tree")
    p_hier.add_argument("tree_file", help="CSV edge list: node_id, parent_id, members")
    p_hier.add_argument("input", help="CSV with id and p (or z) columns")
    p_hier.add_argument("--q", type=float, default=0.05)
    p_hier.add_argument(
        "--method", default="fisher", choices=("fisher", "stouffer", "simes")
    )
    p_hier.add_argument(
        "--sidedness", default="two_sided", choices=("one_sided", "two_sided")
    )
    _add_output_dir(p_hier)

    p_ci = sub.add_parser("ci", help="FCR-adjusted intervals for selected estimates")
    p_ci.add_argument("input", help="CSV with id, estimate, std_error columns")
    p_ci.add_argument("--q", type=float, default=0.05)
    _add_output_dir(p_ci)

    p_diag = sub.add_parser("diagnose", help="check z-values against a claimed null")
    p_diag.add_argument("input", help="CSV with id and z columns")
    p_diag.add_argument(
        "--null", default="theoretical", choices=("theoretical", "empirical")
    )
    _add_output_dir(p_diag)

    return parser


def _table_pvalues(table, sidedness):
    if table.kind == "p":
        return table.values
    return p_from_z(table.values, sidedness)


def _require_z(table, command):
    if table.kind != "z":
        raise ValidationError(f"{command} needs a z-value table (a 'z' column)")
    return table.values


def _cmd_adjust(args):
    table = tables.read_input_table(args.input)
    out_path = os.path.join(args.output_dir, "adjustments.csv")
    adjusted = None
    if table.n == 0:
        print("warning: empty input table; writing empty report", file=sys.stderr)
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write("id,p,weight,rank,threshold,rejected\n")
        print(f"adjust: 0 hypotheses, 0 rejected -> {out_path}")
        return 0
    p = _table_pvalues(table, args.sidedness)
    if args.procedure == "bh":
        result = bh_step_up(p, args.q)
        adjusted = adjusted_pvalues(p, "bh")
    elif args.procedure == "by":
        result = by_step_up(p, args.q)
        adjusted = adjusted_pvalues(p, "by")
    elif args.procedure == "adaptive_step_down":
        result = adaptive_step_down(p, args.q)
    elif args.procedure == "two_stage_adaptive":
        result = two_stage_adaptive(p, args.q, bound_variant=args.bound_variant)
    elif args.procedure == "bonferroni":
        result = bonferroni(p, args.q)
    else:
        if table.weights is None:
            raise ValidationError("weighted_bh needs a 'weight' column")
        result = weighted_bh(p, table.weights, args.q)
    tables.write_rejection_csv(
        out_path, result, table.ids, p, weights=table.weights, adjusted=adjusted
    )
    print(
        f"adjust: {result.n} hypotheses, {result.r} rejected by "
        f"{result.method} at q={args.q} -> {out_path}"
    )
    if result.stage_trace is not None:
        trace = result.stage_trace
        stage2 = (
            f"{trace.stage2_level:.6g}" if trace.stage2_level is not None else "skipped"
        )
        print(
            f"stage 1 at {trace.stage1_level:.6g} rejected {trace.r1}; "
            f"null estimate {trace.n0_estimate:.6g}; stage 2 level {stage2}"
        )
    return 0


def _cmd_simulate(args):
    config = load_run_config(args.scenario_file)
    if args.seed is not None:
        if "scenario" in config:
            config["scenario"]["seed"] = args.seed
        elif "means" in config:
            config["means"]["seed"] = args.seed
        else:
            config["seed"] = args.seed
    if args.workers < 1:
        raise ValidationError(f"workers must be >= 1, got {args.workers}")
    report = execute_run(config, workers=args.workers)
    payload = report.to_dict()
    json_path = os.path.join(args.output_dir, "report.json")
    csv_path = os.path.join(args.output_dir, "report.csv")
    tables.write_json_report(json_path, payload)
    tables.write_key_value_csv(csv_path, tables.flatten_dict(payload))
    for line in report.summary():
        print(line)
    print(f"report -> {json_path}")
    return 0


def _cmd_fdr(args):
    table = tables.read_input_table(args.input)
    z = _require_z(table, "fdr")
    if args.null == "empirical":
        null = fit_empirical_null(z)
    else:
        null = NormalSpec()
    u = p_from_z((z - null.mean) / null.sd, "two_sided")
    p0_hat = estimate_p0_lambda(u, args.p0_lambda)
    curve = estimate_local_fdr(
        z, p0_hat, null=null, grid_size=args.grid_points, tail=args.tail
    )
    diag = diagnose_null(z, null)
    curve_path = os.path.join(args.output_dir, "curve.csv")
    summary_path = os.path.join(args.output_dir, "fdr_summary.json")
    tables.write_curve_csv(curve_path, curve, args.null)
    tables.write_json_report(
        summary_path,
        {
            "n": table.n,
            "null_kind": args.null,
            "null": {"mean": null.mean, "sd": null.sd},
            "p0_lambda": args.p0_lambda,
            "p0_hat": p0_hat,
            "tail": args.tail,
            "diagnostics": {
                "central_fraction": diag.central_fraction,
                "expected_central_fraction": diag.expected_central_fraction,
                "dip_statistic": diag.dip_statistic,
                "ks_statistic": diag.ks_statistic,
                "ks_pvalue": diag.ks_pvalue,
                "ks_critical_5pct": diag.ks_critical_5pct,
            },
        },
    )
    print(
        f"fdr: n={table.n}, null={args.null} (mean={null.mean:.4f}, "
        f"sd={null.sd:.4f}), p0_hat={p0_hat:.4f}"
    )
    print(f"curve -> {curve_path}")
    return 0


def _cmd_hier(args):
    table = tables.read_input_table(args.input)
    if table.n == 0:
        raise ValidationError(f"{args.input}: hier needs a non-empty table")
    p = _table_pvalues(table, args.sidedness)
    rows = tables.read_tree_rows(args.tree_file)
    id_to_index = {id_: i for i, id_ in enumerate(table.ids)}
    nodes = tables.build_tree_nodes(rows, id_to_index)
    tree = HypothesisTree(tuple(nodes))
    result = hierarchical_test(tree, p, args.q, node_method=args.method)
    nodes_path = os.path.join(args.output_dir, "nodes.csv")
    families_path = os.path.join(args.output_dir, "families.csv")
    tables.write_hier_files(nodes_path, families_path, tree, result)
    non_root_rejected = sorted(set(result.rejected_nodes) - set(tree.roots))
    print(
        f"hier: visited {result.visited} families, rejected "
        f"{len(non_root_rejected)} nodes below the roots"
    )
    print(f"nodes -> {nodes_path}")
    print(f"families -> {families_path}")
    return 0


def _cmd_ci(args):
    ids, estimates, std_errors = tables.read_estimate_table(args.input)
    intervals = fcr_intervals(EstimateSet(estimates, std_errors), args.q)
    out_path = os.path.join(args.output_dir, "intervals.csv")
    tables.write_intervals_csv(out_path, intervals, ids)
    z_star = f"{intervals.z_star:.6f}" if intervals.z_star is not None else "NA"
    print(
        f"ci: selected {intervals.r} of {intervals.n}, marginal level "
        f"{intervals.marginal_level:.6f}, z*={z_star}"
    )
    print(f"intervals -> {out_path}")
    return 0


def _cmd_diagnose(args):
    table = tables.read_input_table(args.input)
    z = _require_z(table, "diagnose")
    if args.null == "empirical":
        null = fit_empirical_null(z)
    else:
        null = NormalSpec()
    diag = diagnose_null(z, null)
    flat = {
        "n": diag.n,
        "null_kind": args.null,
        "null.mean": null.mean,
        "null.sd": null.sd,
        "central_fraction": diag.central_fraction,
        "expected_central_fraction": diag.expected_central_fraction,
        "dip_statistic": diag.dip_statistic,
        "ks_statistic": diag.ks_statistic,
        "ks_pvalue": diag.ks_pvalue,
        "ks_critical_5pct": diag.ks_critical_5pct,
    }
    out_path = os.path.join(args.output_dir, "diagnostics.csv")
    tables.write_key_value_csv(out_path, flat)
    print(
        f"diagnose: n={diag.n}, central dip={diag.dip_statistic:+.4f}, "
        f"KS={diag.ks_statistic:.4f} (5% critical {diag.ks_critical_5pct:.4f})"
    )
    print(f"diagnostics -> {out_path}")
    return 0


_COMMANDS = {
    "adjust": _cmd_adjust,
    "simulate": _cmd_simulate,
    "fdr": _cmd_fdr,
    "hier": _cmd_hier,
    "ci": _cmd_ci,
    "diagnose": _cmd_diagnose,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        os.makedirs(args.output_dir, exist_ok=True)
        return _COMMANDS[args.command](args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EmptyFilterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # runtime failure, distinct from bad input
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
