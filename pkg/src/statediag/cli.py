"""Command-line entry point.

Exit codes: 0 success or all bindings satisfied, 1 specification falsified,
2 usage error, 3 analysis error (a JSON object ``{phase, detail}`` is printed
on stderr).
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys

from . import __version__
from .diagnose import compute_map, diagnosis_statements
from .errors import LinkError, StatediagError
from .instrument import build_plan, load_plan, plan_points
from .metrics import evaluate, load_ground_truth, parse_level, proximities
from .miniproc import ProgramPoint, parse_program, pretty_print
from .monitor import check
from .runtime import execute, filter_trace, read_trace, write_trace
from .scfg import build_all, export_dot, label
from .specs import parse_spec
from .testkit import GenConfig, gen_program, gen_spec_text

EXIT_OK, EXIT_FALSIFIED, EXIT_USAGE, EXIT_ANALYSIS = 0, 1, 2, 3


def _read(path, binary=False):
    with open(path, "rb" if binary else "r", encoding=None if binary else "utf-8") as fh:
        return fh.read()


def _write(path, data):
    if path in (None, "-"):
        if isinstance(data, bytes):
            sys.stdout.buffer.write(data)
            sys.stdout.buffer.flush()
        else:
            sys.stdout.write(data)
        return
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(path, mode, **({} if isinstance(data, bytes) else {"encoding": "utf-8"})) as fh:
        fh.write(data)


def _parse_args_list(text):
    if not text:
        return []
    try:
        return [int(a) for a in text.split(",") if a.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--args must be comma-separated integers, got {text!r}")


def _load_system(path):
    return parse_program(_read(path))


def _load_spec(path, system):
    return parse_spec(_read(path), system)


# -- subcommands -------------------------------------------------------------


def cmd_scfg(args):
    system = _load_system(args.program)
    graphs = build_all(system)
    names = [args.proc] if args.proc else system.names()
    for name in names:
        if name not in graphs:
            raise StatediagError(f"unknown procedure {name!r}")
    out = []
    for name in names:
        g = graphs[name]
        if args.dot:
            out.append(export_dot(g))
        else:
            out.append(f"procedure {name}\n")
            for v in g.vertices:
                succ = ", ".join(s.name for s in g.successors(v))
                out.append(f"  {label(v)} -> [{succ}]\n")
    _write(args.out, "".join(out))
    return EXIT_OK


def cmd_instrument(args):
    system = _load_system(args.program)
    spec = _load_spec(args.spec, system)
    plan = build_plan(spec, system)
    _write(args.out, plan.to_json())
    return EXIT_OK


def _plan_states(plan_text, graphs):
    states = set()
    for entries in plan_points(plan_text).values():
        for proc, line, _ in entries:
            try:
                states.add(graphs[proc].state_at(line))
            except KeyError:
                raise LinkError(f"plan names {proc}:{line}, which is not in the program") from None
    return states


def cmd_run(args):
    system = _load_system(args.program)
    graphs = build_all(system)
    trace = execute(system, args.entry, args.args, graphs=graphs)
    if not args.all:
        trace = filter_trace(trace, _plan_states(_read(args.points), graphs))
    _write(args.out, write_trace(trace))
    return EXIT_OK


def cmd_check(args):
    system = _load_system(args.program) if args.program else None
    spec = parse_spec(_read(args.spec), system)
    graphs = build_all(system) if system is not None else None
    trace = read_trace(_read(args.trace, binary=True), graphs)
    verdicts = check(trace, spec)
    lines = []
    for i, (binding, verdict) in enumerate(verdicts.items()):
        lines.append(f"binding#{i} {binding.describe(trace)} -> {'true' if verdict.value else 'false'}\n")
    _write(None, "".join(lines))
    return EXIT_OK if verdicts.satisfied else EXIT_FALSIFIED


def cmd_diagnose(args):
    system = _load_system(args.program)
    spec = _load_spec(args.spec, system)
    graphs = build_all(system)
    if args.plan:
        plan = load_plan(_read(args.plan), spec, graphs)
    else:
        plan = build_plan(spec, system, graphs)
    if args.trace:
        trace = read_trace(_read(args.trace, binary=True), graphs)
    else:
        full = execute(system, args.entry, args.args, graphs=graphs)
        trace = filter_trace(full, plan.union)
    verdicts = check(trace, spec)
    diagnosis = compute_map(spec, trace, plan, verdicts)
    _write(args.out, diagnosis.to_json())
    points = diagnosis_statements(diagnosis, executed_only=args.executed_only)
    falsified = len(verdicts.falsified())
    summary = [f"bindings: {len(verdicts)} falsified: {falsified}\n"]
    for p in sorted(points):
        summary.append(f"inspect {p}\n")
    sys.stderr.write("".join(summary))
    return EXIT_FALSIFIED if falsified else EXIT_OK


def _predicted_points(text):
    data = json.loads(text)
    points = set()
    if isinstance(data, dict):  # instrumentation plan
        for entry in data.values():
            points.update(ProgramPoint(p["proc"], p["line"]) for p in entry["points"])
    else:  # diagnosis
        for item in data:
            points.update(ProgramPoint(p["proc"], p["line"]) for p in item["slice"])
    return points


def cmd_metrics(args):
    predicted = _predicted_points(_read(args.predicted))
    gt = load_ground_truth(_read(args.gt))
    system = _load_system(args.program) if args.program else None
    predicted_proximity = None
    if system is not None and args.violation:
        dist = proximities(args.violation, system)
        predicted_proximity = {p: dist.get(p.procedure, float("inf")) for p in predicted}
    report = evaluate(predicted, gt, args.levels, predicted_proximity, system)
    _write(args.out, report.table())
    return EXIT_OK


def cmd_testkit_gen(args):
    config = GenConfig(seed=args.seed, allow_recursion=args.recursion)
    system = gen_program(config)
    _write(args.out, pretty_print(system))
    if args.spec_out:
        text = gen_spec_text(system, random.Random(args.seed))
        if text is not None:
            _write(args.spec_out, text + "\n")
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _existing(path):
    if not os.path.isfile(path):
        raise argparse.ArgumentTypeError(f"no such file: {path}")
    return path


def _levels(text):
    try:
        return [parse_level(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad level list {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="statediag",
        description="Instrumentation, trace checking and diagnosis for MiniProc programs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scfg", help="print or export symbolic control-flow graphs")
    p.add_argument("--program", required=True, type=_existing)
    p.add_argument("--proc", help="only this procedure")
    p.add_argument("--dot", action="store_true", help="Graphviz output")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_scfg)

    p = sub.add_parser("instrument", help="compute the instrumentation plan")
    p.add_argument("--program", required=True, type=_existing)
    p.add_argument("--spec", required=True, type=_existing)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_instrument)

    p = sub.add_parser("run", help="execute a program and write its trace")
    p.add_argument("--program", required=True, type=_existing)
    p.add_argument("--entry", required=True)
    p.add_argument("--args", type=_parse_args_list, default=[])
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--points", type=_existing, help="plan file; keep only its points")
    group.add_argument("--all", action="store_true", help="record every event")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="check a trace against a specification")
    p.add_argument("--trace", required=True, type=_existing)
    p.add_argument("--spec", required=True, type=_existing)
    p.add_argument("--program", type=_existing)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("diagnose", help="diagnose falsified bindings")
    p.add_argument("--program", required=True, type=_existing)
    p.add_argument("--spec", required=True, type=_existing)
    p.add_argument("--trace", type=_existing)
    p.add_argument("--plan", type=_existing)
    p.add_argument("--entry")
    p.add_argument("--args", type=_parse_args_list, default=[])
    p.add_argument("--executed-only", action="store_true", help="list only executed points")
    p.add_argument("--out", default="diagnosis.json")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("metrics", help="precision/recall per proximity level and CR ratios")
    p.add_argument("--predicted", required=True, type=_existing, help="plan or diagnosis JSON")
    p.add_argument("--gt", required=True, type=_existing)
    p.add_argument("--levels", type=_levels, default=[0, 1, 5, float("inf")])
    p.add_argument("--program", type=_existing, help="enables CR ratios")
    p.add_argument("--violation", help="procedure of the violation, for predicted proximities")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("testkit", help="test corpus utilities")
    tk = p.add_subparsers(dest="testkit_command", required=True)
    g = tk.add_parser("gen", help="generate a random program")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", default="-")
    g.add_argument("--spec-out", help="also write a random specification")
    g.add_argument("--recursion", action="store_true")
    g.set_defaults(func=cmd_testkit_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "diagnose" and not args.trace and not args.entry:
        parser.error("diagnose needs --trace or --entry")
    try:
        return args.func(args)
    except StatediagError as exc:
        sys.stderr.write(json.dumps({"phase": exc.phase, "detail": str(exc)}) + "\n")
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
