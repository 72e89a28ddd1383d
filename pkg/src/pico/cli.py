"""Command-line entry point: ``pico check | graph | run``.

Exit codes: 0 success, 1 usage or I/O error (including unreadable inputs and
unbound endpoint names), 2 program rejected (syntax, names or types), 3
runtime error while processing data.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .collections import WindowingPolicy
from .dataflow import build_graph, export_dot
from .executor import EndpointError, ExecConfig, ExecutionError, run_graph
from .lexer import PicoSyntaxError
from .parser import CyclicDefinition, DuplicateName, parse_program
from .kernel import UnresolvedName
from .typecheck import PicoTypeError, check_toplevel, type_pipeline

EXIT_OK, EXIT_USAGE, EXIT_REJECTED, EXIT_RUNTIME = 0, 1, 2, 3

_STATIC_ERRORS = (PicoSyntaxError, UnresolvedName, DuplicateName, CyclicDefinition, PicoTypeError)


class _UsageError(Exception):
    pass


def _binding(text: str) -> tuple:
    name, sep, value = text.partition("=")
    if not sep or not name or not value:
        raise argparse.ArgumentTypeError("expected NAME=VALUE, got %r" % text)
    return name, value


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pico", description="Type-check, graph and run PiCo pipelines.")
    sub = ap.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="type-check the entry pipeline as a top-level program")
    check.add_argument("file")
    check.add_argument("--all", action="store_true", help="also print the type of every declared pipeline")

    graph = sub.add_parser("graph", help="print or write the dataflow graph in DOT")
    graph.add_argument("file")
    graph.add_argument("--dot", metavar="PATH", help="write DOT here instead of stdout")
    graph.add_argument("--pipeline", metavar="NAME", help="graph this pipeline instead of the entry")

    run = sub.add_parser("run", help="execute the entry pipeline")
    run.add_argument("file")
    run.add_argument("--in", dest="in_path", metavar="PATH", help="shorthand for --file in=PATH")
    run.add_argument("--out", dest="out_path", metavar="PATH", help="shorthand for --file out=PATH")
    for flag, dest, what in (
        ("--file", "file_bind", "NAME=PATH"),
        ("--replay", "replay", "NAME=PATH"),
        ("--socket", "socket", "NAME=HOST:PORT"),
    ):
        run.add_argument(flag, dest=dest, action="append", type=_binding, default=[], metavar=what,
                         help="bind an endpoint name")
    run.add_argument("--batch", type=int, metavar="N", help="tumbling batch size for map on streams")
    run.add_argument("--nondeterministic-merge", action="store_true")
    run.add_argument("--emit-report", metavar="PATH", help="write a JSON run report")
    return ap


def _load(path: str):
    try:
        src = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise _UsageError("cannot read %s: %s" % (path, e.strerror or e)) from None
    return parse_program(src, path)


def _check(args) -> int:
    prog = _load(args.file)
    if args.all:
        for name, p in prog.pipelines.items():
            print("%s : %s" % (name, type_pipeline(p, prog.filename)))
    t = check_toplevel(prog)
    print("%s : %s" % (prog.main, t))
    return EXIT_OK


def _graph(args) -> int:
    prog = _load(args.file)
    if args.pipeline is not None:
        if args.pipeline not in prog.pipelines:
            raise _UsageError("no pipeline named %r in %s" % (args.pipeline, args.file))
        name, p = args.pipeline, prog.pipelines[args.pipeline]
    else:
        name, p = prog.main, prog.entry
    type_pipeline(p, prog.filename)
    dot = export_dot(build_graph(p), name)
    if args.dot:
        try:
            Path(args.dot).write_text(dot, encoding="utf-8")
        except OSError as e:
            raise _UsageError("cannot write %s: %s" % (args.dot, e.strerror or e)) from None
    else:
        sys.stdout.write(dot)
    return EXIT_OK


def _run(args) -> int:
    prog = _load(args.file)
    check_toplevel(prog)
    bindings = {}
    for name, value in args.file_bind + args.replay + args.socket:
        bindings[name] = value
    if args.in_path:
        bindings["in"] = args.in_path
    if args.out_path:
        bindings["out"] = args.out_path
    if args.batch is not None and args.batch < 1:
        raise _UsageError("--batch must be positive")
    cfg = ExecConfig(
        bindings=bindings,
        base_dir=Path(args.file).resolve().parent,
        deterministic_merge=not args.nondeterministic_merge,
    )
    if args.batch is not None:
        cfg.batch = WindowingPolicy(args.batch, args.batch, "count")
    try:
        report = run_graph(build_graph(prog.entry), cfg)
    except EndpointError as e:
        raise _UsageError(str(e)) from None
    except ExecutionError as e:
        print("%s: runtime error %s" % (args.file, e), file=sys.stderr)
        return EXIT_RUNTIME
    if args.emit_report:
        try:
            Path(args.emit_report).write_text(report.to_json() + "\n", encoding="utf-8")
        except OSError as e:
            raise _UsageError("cannot write %s: %s" % (args.emit_report, e.strerror or e)) from None
    return EXIT_OK


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    handler = {"check": _check, "graph": _graph, "run": _run}[args.command]
    try:
        return handler(args)
    except _STATIC_ERRORS as e:
        print(str(e), file=sys.stderr)
        return EXIT_REJECTED
    except _UsageError as e:
        print("pico: %s" % e, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
