"""``satconsensus`` command line.

Exit codes:
    0  success (all monitors passed, or every parameter condition held)
    1  input, usage or assumption error; also feasibility failures under --strict
    2  a runtime monitor or plant-bounds check failed
    3  check-params found failing conditions (non-strict mode)
"""

from __future__ import annotations

import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from .controller import Variant, suggest_params
from .engine import run as run_scenario
from .errors import ConsensusError
from .graph import (
    DirectedGraph,
    has_spanning_tree,
    in_degrees,
    is_strongly_connected,
    left_eigenvector,
    perron_frobenius_form,
)
from .presets import REPRODUCTION_CASES, reproduction
from .scenario import Scenario

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_MONITOR = 2
EXIT_WARN = 3

TRACE_FILE = "trace.csv"
MONITOR_FILE = "monitor_report.json"
FEASIBILITY_FILE = "feasibility_report.json"
SCENARIO_FILE = "scenario.json"

log = logging.getLogger("satconsensus")


class InputError(Exception):
    """Bad user input; reported on stderr with exit code 1."""


def _read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc


def load_scenario(path, dt=None, t_end=None, seed=None) -> Scenario:
    data = _read_json(path)
    try:
        scenario = Scenario.from_json(data)
        if dt is not None or t_end is not None or seed is not None:
            scenario = scenario.with_overrides(dt=dt, t_end=t_end, seed=seed)
    except ConsensusError as exc:
        raise InputError(f"{path}: {exc}") from exc
    return scenario


def feasibility_json(scenario: Scenario, reports) -> dict:
    degrees = in_degrees(scenario.graph)
    rows = []
    for i, rep in enumerate(reports):
        for cond in rep.to_json():
            rows.append({"agent": i + 1, **cond})
    return {
        "variant": scenario.variant.value,
        "uses_graph_degrees": scenario.variant is not Variant.FILTER,
        "in_degrees": degrees.tolist(),
        "pass": all(r.ok for r in reports),
        "conditions": rows,
    }


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2) + "\n")


def format_table(reports) -> str:
    lines = [f"{'agent':>5}  {'status':<6} {'margin':>24}  condition"]
    for i, rep in enumerate(reports):
        for c in rep.conditions:
            status = "ok" if c.passed else "FAIL"
            lines.append(f"{i + 1:>5}  {status:<6} {c.margin!r:>24}  {c.condition}")
    return "\n".join(lines)


def execute(scenario: Scenario, out_dir, strict: bool = False) -> tuple[int, str]:
    """Check, simulate and export one scenario. Returns (exit code, summary)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / SCENARIO_FILE).write_text(scenario.dumps())
    try:
        scenario.check_graph_assumptions()
        reports = scenario.feasibility()
    except ConsensusError as exc:
        _write_json(out / FEASIBILITY_FILE, {"variant": scenario.variant.value, "pass": False, "error": str(exc)})
        return EXIT_INPUT, f"{scenario.name}: {exc}"
    feas = feasibility_json(scenario, reports)
    _write_json(out / FEASIBILITY_FILE, feas)
    if not feas["pass"]:
        failed = sorted({row["condition"] for row in feas["conditions"] if not row["pass"]})
        msg = f"{scenario.name}: parameter conditions failing: {'; '.join(failed)}"
        if strict:
            return EXIT_INPUT, msg + " (--strict: not simulated)"
        log.warning("%s", msg)
    try:
        trace, report = run_scenario(scenario)
    except ConsensusError as exc:
        return EXIT_MONITOR, f"{scenario.name}: {exc}"
    trace.to_csv(out / TRACE_FILE)
    _write_json(out / MONITOR_FILE, report.to_json())
    summary = (
        f"{scenario.name}: monitors {'passed' if report.passed else 'FAILED'}; "
        f"input violations {report.input_violations}, velocity excess {report.velocity_excess!r}, "
        f"final spread {report.final_spread!r}, final velocity error {report.final_velocity_error!r}"
    )
    return (EXIT_OK if report.passed else EXIT_MONITOR), summary


def _execute_path(args) -> tuple[int, str]:
    path, out_dir, strict, dt, t_end, seed = args
    try:
        scenario = load_scenario(path, dt, t_end, seed)
    except InputError as exc:
        return EXIT_INPUT, str(exc)
    return execute(scenario, out_dir, strict)


def _options(f):
    f = click.option("--seed", type=int, default=None, help="Reseed noise models (agent i uses seed + i).")(f)
    f = click.option("--t-end", "t_end", type=float, default=None, help="Override the horizon in seconds.")(f)
    f = click.option("--dt", type=float, default=None, help="Override the RK4 step in seconds.")(f)
    f = click.option("--strict", is_flag=True, help="Treat failing parameter conditions as errors.")(f)
    return f


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def cli(verbose):
    """Saturated consensus simulation and parameter tools."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, format="%(levelname)s: %(message)s")


@cli.command()
@click.argument("scenarios", nargs=-1, required=True, type=click.Path())
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="out", show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True, help="Scenarios to run concurrently.")
@_options
def run(scenarios, out_dir, jobs, strict, dt, t_end, seed):
    """Simulate SCENARIOS and write trace, monitor and feasibility reports.

    With several scenarios each gets its own subdirectory named after the file.
    """
    out = Path(out_dir)
    dirs = [out] if len(scenarios) == 1 else [out / Path(s).stem for s in scenarios]
    tasks = [(s, d, strict, dt, t_end, seed) for s, d in zip(scenarios, dirs)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_execute_path, tasks))
    else:
        results = [_execute_path(t) for t in tasks]
    for code, msg in results:
        click.echo(msg, err=code != EXIT_OK)
    return max(code for code, _ in results)


@cli.command("check-params")
@click.argument("scenario", type=click.Path())
@click.option("--strict", is_flag=True, help="Exit 1 instead of 3 when a condition fails.")
def check_params(scenario, strict):
    """Print every agent's parameter conditions with margins."""
    sc = load_scenario(scenario)
    try:
        sc.check_graph_assumptions()
        reports = sc.feasibility()
    except ConsensusError as exc:
        raise InputError(str(exc)) from exc
    click.echo(f"variant: {sc.variant.value}")
    click.echo(format_table(reports))
    if all(r.ok for r in reports):
        return EXIT_OK
    n_fail = sum(len(r.failures) for r in reports)
    click.echo(f"{n_fail} condition(s) failing", err=True)
    return EXIT_INPUT if strict else EXIT_WARN


@cli.command("suggest-params")
@click.argument("scenario", type=click.Path())
@click.option("--safety", type=float, default=0.5, show_default=True)
@click.option("--gamma", type=float, default=1.5, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None, help="Write the updated scenario here.")
def suggest_params_cmd(scenario, safety, gamma, out_path):
    """Propose parameters satisfying every condition with margin."""
    sc = load_scenario(scenario)
    degrees = in_degrees(sc.graph)
    try:
        params = tuple(
            suggest_params(
                sc.variant, sc.bounds, sc.constraints,
                None if sc.variant is Variant.FILTER else float(degrees[i]), safety, gamma,
            )
            for i in range(sc.n)
        )
    except (ConsensusError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    for i, p in enumerate(params):
        click.echo(f"agent {i + 1}: m={p.m!r} alpha={p.alpha!r} z={p.z!r} k={p.k!r} gamma={p.gamma!r}")
    updated = Scenario.from_json({**sc.to_json(), "m": params[0].m, "params": [
        {"alpha": p.alpha, "z": p.z, "k": p.k, "gamma": p.gamma} for p in params
    ]})
    if out_path:
        Path(out_path).write_text(updated.dumps())
        click.echo(f"wrote {out_path}")
    return EXIT_OK


@cli.command("graph-info")
@click.argument("graph_path", type=click.Path())
def graph_info(graph_path):
    """Connectivity, left eigenvector and block structure of a graph file.

    Accepts a graph JSON or a scenario JSON (its ``graph`` entry is used).
    """
    data = _read_json(graph_path)
    try:
        g = DirectedGraph.from_json(data.get("graph", data))
    except (ConsensusError, KeyError, TypeError, ValueError, AttributeError) as exc:
        raise InputError(f"{graph_path}: invalid graph: {exc}") from exc
    sc = is_strongly_connected(g)
    st = has_spanning_tree(g)
    click.echo(f"n: {g.n}")
    click.echo(f"in-degrees: {in_degrees(g).tolist()}")
    click.echo(f"strongly connected: {'yes' if sc else 'no'}")
    click.echo(f"spanning tree: {'yes' if st else 'no'}")
    if sc:
        click.echo(f"omega: {left_eigenvector(g).tolist()}")
    else:
        click.echo("omega: n/a (graph is not strongly connected)")
    try:
        dec = perron_frobenius_form(g)
    except ConsensusError as exc:
        click.echo(f"block decomposition refused: {exc}")
        return EXIT_OK
    click.echo(f"permutation: {[int(i) + 1 for i in dec.permutation]}")
    for blk, kind in zip(dec.blocks, dec.block_kinds):
        click.echo(f"block {[int(i) + 1 for i in blk]}: {kind}")
    return EXIT_OK


@cli.command("reproduce-paper")
@click.argument("case")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Defaults to out/reproduction-CASE.")
@_options
def reproduce_paper(case, out_dir, strict, dt, t_end, seed):
    """Seven-manipulator study; CASE is 'symmetric' or 'asymmetric'."""
    if case not in REPRODUCTION_CASES:
        raise InputError(f"unknown case {case!r}; expected one of {', '.join(REPRODUCTION_CASES)}")
    scenario = reproduction(case)
    if dt is not None or t_end is not None or seed is not None:
        scenario = scenario.with_overrides(dt=dt, t_end=t_end, seed=seed)
    code, msg = execute(scenario, out_dir or f"out/reproduction-{case}", strict)
    click.echo(msg, err=code != EXIT_OK)
    return code


def main(argv=None) -> int:
    """Entry point; returns the process exit code instead of raising SystemExit."""
    try:
        code = cli.main(args=argv, prog_name="satconsensus", standalone_mode=False)
    except InputError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_INPUT
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_INPUT
    except click.ClickException as exc:
        exc.show()
        return EXIT_INPUT
    except click.exceptions.Exit as exc:
        return exc.exit_code
    return code if isinstance(code, int) else EXIT_OK


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
