"""Command line: ``superform-lab run`` executes suites, ``superform-lab render`` prints a report.

Exit statuses: 0 all checks pass, 1 some check failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .report import Report, render
from .scenario import SUITES, Scenario, ScenarioError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# flag name -> scenario key
FLAG_KEYS = {
    "suite": "suite", "n": "n", "base_dim": "base_dim", "jet_order": "jet_order", "mode": "mode",
    "seed": "seed", "t": "t", "s": "s", "lattice_scale": "lattice_scale", "radius": "radius",
    "tol": "tol", "workers": "workers",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="superform-lab", description="Verify superform, lattice-sum and torsion identities.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="execute suites and write a report")
    r.add_argument("scenario", nargs="?", help="key=value scenario file (flags override it)")
    r.add_argument("--suite", choices=SUITES)
    r.add_argument("--n", type=int)
    r.add_argument("--base-dim", type=int)
    r.add_argument("--jet-order", type=int)
    r.add_argument("--mode", choices=("exact", "float"))
    r.add_argument("--seed", type=int)
    r.add_argument("--t", help="t value or comma-separated grid")
    r.add_argument("--s", help="s value or comma-separated list")
    r.add_argument("--lattice-scale")
    r.add_argument("--radius", help="'auto' or a window radius")
    r.add_argument("--tol", type=float)
    r.add_argument("--workers", type=int, help="suites run in parallel processes (default 1)")
    r.add_argument("--report", default="report.json", help="report path (default report.json)")
    r.add_argument("--csv", help="directory for CSV traces")
    r.add_argument("--quiet", action="store_true", help="do not print the summary table")
    v = sub.add_parser("render", help="print a report as a sorted table")
    v.add_argument("report")
    return p


def scenario_from_args(args: argparse.Namespace) -> Scenario:
    sc = Scenario.from_file(args.scenario) if args.scenario else Scenario()
    overrides = {}
    for attr, key in FLAG_KEYS.items():
        val = getattr(args, attr, None)
        if val is not None:
            overrides[key] = str(val)
    return sc.merged(overrides).validate()


def _run_one(name: str, sc: Scenario) -> tuple[str, list, dict, float]:
    from .suites import SUITE_FUNCTIONS

    traces: dict = {}
    t0 = time.perf_counter()
    checks = SUITE_FUNCTIONS[name](sc, traces)
    return name, checks, traces, time.perf_counter() - t0


def execute(sc: Scenario) -> tuple[Report, dict, dict]:
    """Run the scenario's suites; returns the report, CSV traces and per-suite wall times."""
    from .suites import SUITE_FUNCTIONS

    names = list(SUITE_FUNCTIONS) if sc.suite == "all" else [sc.suite]
    if sc.workers > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=min(sc.workers, len(names))) as pool:
            results = list(pool.map(_run_one, names, [sc] * len(names)))
    else:
        results = [_run_one(n, sc) for n in names]
    report = Report(scenario=sc.as_dict())
    traces: dict = {}
    times: dict = {}
    for name, checks, tr, dt in results:
        report.add(checks)
        traces.update(tr)
        times[name] = round(dt, 3)
    return report, traces, times


def write_report(report: Report, times: dict, path: str | Path) -> dict:
    doc = {"header": {**report.header(), "suite_wall_time": times}, "payload": report.payload()}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc


def write_traces(traces: dict, directory: str | Path) -> list[Path]:
    from .lattice import write_csv

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, (header, rows) in sorted(traces.items()):
        p = d / f"{name}.csv"
        write_csv(p, header, rows)
        paths.append(p)
    return paths


def cmd_run(args: argparse.Namespace) -> int:
    try:
        sc = scenario_from_args(args)
    except ScenarioError as exc:
        print(f"superform-lab: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report, traces, times = execute(sc)
    doc = write_report(report, times, args.report)
    if args.csv:
        write_traces(traces, args.csv)
    if not args.quiet:
        print(render(doc))
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_render(args: argparse.Namespace) -> int:
    try:
        doc = json.loads(Path(args.report).read_text())
        print(render(doc))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"superform-lab: cannot render report: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    return cmd_render(args)


if __name__ == "__main__":
    raise SystemExit(main())
