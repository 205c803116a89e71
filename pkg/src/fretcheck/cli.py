"""Command-line entry point: lint, compile, sim, check and report.

Exit codes: 0 success; 1 lint diagnostics, a Violated verdict or an
oracle/formula disagreement; 2 any other failure (bad input files, pairs
that could not be checked, internal errors).
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .compiler import compile_requirement, emit, smv_ident
from .monitor import ERROR, check_project, passed, results_from_json, results_to_json
from .parser import ParseError, lint, parse_project
from .report import build_report, render
from .sim import load_scenario, simulate
from .traces import dumps_trace, load_bindings, load_trace
from .util import atomic_write, configure_logging, sha256_file

EXTENSIONS = {"cocospec": ".lus", "smv": ".smv", "ptltl": ".ptltl", "ltl": ".ltl"}

OK, FAILED, ERROR_EXIT = 0, 1, 2

log = logging.getLogger("fretcheck")


class CliError(Exception):
    pass


def _read_project(path):
    text = Path(path).read_text(encoding="utf-8")
    project = parse_project(text, file=str(path))
    log.info("%s: %d requirement(s)", path, len(project))
    return project


def _print_diags(diags, file=None):
    for d in diags:
        print(d.render(file), file=sys.stderr)


def cmd_lint(args) -> int:
    try:
        project = _read_project(args.reqs)
    except ParseError as exc:
        _print_diags(exc.diagnostics)
        return FAILED
    signals = params = components = None
    if args.signals:
        smap = load_bindings(args.signals)
        signals = smap.declared_signals()
        params = smap.params
        components = smap.components or None
    diags = lint(project, signals, params, components)
    _print_diags(diags, str(args.reqs))
    errors = [d for d in diags if d.severity == "error"]
    if not diags:
        print(f"{args.reqs}: {len(project)} requirement(s), no diagnostics")
    return FAILED if errors or (diags and args.strict) else OK


def cmd_compile(args) -> int:
    project = _read_project(args.reqs)
    out = Path(args.output)
    names = set()
    for req in project:
        text = emit(compile_requirement(req), args.emit)
        name = smv_ident(req.id)
        if name in names:
            raise CliError(f"requirement ids collide after sanitizing: {req.id}")
        names.add(name)
        target = out / (name + EXTENSIONS[args.emit])
        atomic_write(target, text + "\n")
        print(target)
    return OK


def cmd_sim(args) -> int:
    scn = load_scenario(args.scenario)
    result = simulate(scn)
    fmt = "json" if Path(args.output).suffix.lower() == ".json" else "csv"
    atomic_write(args.output, dumps_trace(result.trace, fmt))
    if args.metrics:
        atomic_write(args.metrics, result.metrics_json())
    print(f"{args.output}: {result.trace.length} steps")
    return OK


def _trace_ids(paths):
    ids = {}
    for p in paths:
        tid = Path(p).stem
        if tid in ids:
            tid = str(p)
        ids[tid] = p
    return ids


def cmd_check(args) -> int:
    project = _read_project(args.reqs)
    smap = load_bindings(args.map)
    traces = {tid: load_trace(p) for tid, p in _trace_ids(args.trace).items()}
    for tid, tr in traces.items():
        log.info("trace %s: %d steps of %gs", tid, tr.length, tr.timestep)
    rows = check_project(project, traces, smap, workers=args.workers)
    for r in rows:
        log.debug("%s/%s: triggers %s, past %s, future %s", r.req_id, r.trace_id,
                  r.trigger_indices, r.past_verdict, r.future_verdict)
    text = results_to_json(rows)
    if args.output:
        atomic_write(args.output, text)
    for r in rows:
        extra = ""
        if r.violation:
            extra = f" trigger={r.violation['trigger_index']} step={r.violation['failing_step']}"
        if not r.agreement and r.status != ERROR:
            extra += " DISAGREEMENT"
        if r.error:
            extra += f" error: {r.error}"
        print(f"{r.req_id}\t{r.trace_id}\t{r.status}{extra}")
    if any(r.status == ERROR for r in rows):
        return ERROR_EXIT
    return OK if passed(rows) else FAILED


def cmd_report(args) -> int:
    project = _read_project(args.reqs)
    rows = results_from_json(Path(args.results).read_text(encoding="utf-8"))
    provenance = {"inputs": {Path(args.reqs).name: "sha256:" + sha256_file(args.reqs),
                             Path(args.results).name: "sha256:" + sha256_file(args.results)},
                  "tool": f"fretcheck {__version__}"}
    model = build_report(project, None, rows, provenance)
    atomic_write(args.output, render(model, args.format))
    print(args.output)
    return OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fretcheck",
                                description="Structured requirements to temporal logic, "
                                            "contracts and trace verdicts.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("lint", help="parse and lint a requirements file")
    s.add_argument("reqs")
    s.add_argument("--signals", help="signal map JSON used for binding and type checks")
    s.add_argument("--strict", action="store_true", help="treat warnings as failures")
    s.set_defaults(func=cmd_lint)

    s = sub.add_parser("compile", help="emit one artifact per requirement")
    s.add_argument("reqs")
    s.add_argument("--emit", required=True, choices=sorted(EXTENSIONS))
    s.add_argument("-o", "--output", required=True, help="output directory")
    s.set_defaults(func=cmd_compile)

    s = sub.add_parser("sim", help="simulate a scenario into a trace")
    s.add_argument("scenario")
    s.add_argument("-o", "--output", required=True, help="trace file (.csv or .json)")
    s.add_argument("--metrics", help="metrics JSON sidecar")
    s.set_defaults(func=cmd_sim)

    s = sub.add_parser("check", help="check requirements against traces")
    s.add_argument("reqs")
    s.add_argument("--trace", action="append", required=True)
    s.add_argument("--map", required=True, help="signal map JSON")
    s.add_argument("-o", "--output", help="results JSON")
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("report", help="render a traceability report")
    s.add_argument("reqs")
    s.add_argument("--results", required=True)
    s.add_argument("--format", choices=("md", "json"), default="md")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        code = args.func(args)
        log.info("%s finished in %.3fs with exit code %d", args.command,
                 time.perf_counter() - start, code)
        return code
    except ParseError as exc:
        _print_diags(exc.diagnostics)
        return ERROR_EXIT
    except (CliError, OSError, ValueError) as exc:
        print(f"fretcheck {args.command}: error: {exc}", file=sys.stderr)
        return ERROR_EXIT
    except Exception as exc:  # noqa: BLE001 - last-resort guard for the exit-code contract
        log.debug("internal error", exc_info=True)
        print(f"fretcheck {args.command}: internal error: {exc!r}", file=sys.stderr)
        return ERROR_EXIT


if __name__ == "__main__":
    sys.exit(main())
