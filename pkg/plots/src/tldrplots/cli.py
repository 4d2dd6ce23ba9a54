"""Command-line entry point: plot coverage|goals|heatmap."""

from __future__ import annotations

import argparse
import sys

from . import figures
from .series import SchemaError, load_series

REQUIRED = {
    "coverage": ("env_steps", "coverage_cells"),
    "goals": ("env_steps", "goals_reached", "mean_goal_distance"),
}


def _build_series(csv_groups, labels, required):
    """Each --csv argument is a comma-separated group of per-seed CSVs
    forming one series; labels pair up with groups in order."""
    if labels is None:
        labels = [f"series{i}" for i in range(len(csv_groups))]
    if len(labels) != len(csv_groups):
        raise SchemaError(f"{len(csv_groups)} series but {len(labels)} labels")
    return [load_series(label, group.split(","), required=required)
            for label, group in zip(labels, csv_groups)]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plot",
                                     description="Render tldrgrid run CSVs into figures")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, descr in (("coverage", "state-coverage curves"),
                        ("goals", "goals-reached and goal-distance curves")):
        p = sub.add_parser(name, help=descr)
        p.add_argument("--csv", nargs="+", required=True,
                       help="per-series groups; comma-separate seeds within a group")
        p.add_argument("--label", nargs="+")
        p.add_argument("--out", required=True)
    p = sub.add_parser("heatmap", help="maze visitation heatmap")
    p.add_argument("--csv", required=True, help="visits dump (x,y,count)")
    p.add_argument("--label", help="figure title")
    p.add_argument("--layout", required=True, help="maze layout text file")
    p.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "heatmap":
            with open(args.layout) as fh:
                layout_text = fh.read()
            visits = figures.read_visits(args.csv)
            fig = figures.plot_heatmap(layout_text, visits, args.out)
            if args.label:
                fig.axes[0].set_title(args.label)
                fig.savefig(args.out, dpi=figures.DPI)
        else:
            series = _build_series(args.csv, args.label, REQUIRED[args.command])
            if args.command == "coverage":
                figures.plot_coverage(series, args.out)
            else:
                figures.plot_goal_metrics(series, args.out)
    except (SchemaError, figures.BoundsError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
