"""``layers`` command-line driver."""

import argparse
import os
import sys
from pathlib import Path

from . import ir, sema
from .diagnostics import (EngineError, IRFormatError, LayersError, LexError,
                          ParseError, SemanticError)
from .dot import to_dot
from .engine.runtime import DEFAULT_SEED, Engine, resolve_log_path
from .parser import dump_ast, parse_source

EXIT_OK, EXIT_COMPILE, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2, 3


class CompileFailed(Exception):
    def __init__(self, diagnostics):
        super().__init__("compilation failed")
        self.diagnostics = diagnostics


def front_end(source, base_dir=None):
    """Lex, parse and analyze ``source``; returns ``(ast, analysis)``.

    Raises CompileFailed with the diagnostics (sorted by position).
    """
    try:
        exp = parse_source(source)
    except (LexError, ParseError) as exc:
        raise CompileFailed([exc.diagnostic]) from None
    try:
        analysis = sema.analyze(exp, base_dir=base_dir)
    except SemanticError as exc:
        raise CompileFailed(exc.diagnostics) from None
    return exp, analysis


def compile_source(source, base_dir=None):
    """Source text to ``(IRProgram, warnings)``."""
    _, analysis = front_end(source, base_dir)
    return ir.lower(analysis), analysis.warnings


def rebase_paths(prog, src_dir, dst_dir):
    """Rewrite relative paths so they keep naming the same files when the
    program is interpreted relative to ``dst_dir`` instead of ``src_dir``."""
    src_dir, dst_dir = Path(src_dir).resolve(), Path(dst_dir).resolve()
    if src_dir == dst_dir:
        return prog

    def move(p):
        if os.path.isabs(p):
            return p
        return os.path.relpath(src_dir / p, dst_dir)

    for d in prog.data:
        d.file = move(d.file)
    if prog.constants.log_explicit:
        prog.constants.log = move(prog.constants.log)
    for a in prog.actions:
        if "file" in a.args:
            a.args["file"] = move(a.args["file"])
    return prog


def load_program(path):
    """Read a ``.lyr`` source or ``.lir`` IR file; returns ``(prog, warnings)``."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if text.startswith(ir.HEADER):
        return ir.deserialize(text), []
    return compile_source(text, path.parent)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser():
    p = _Parser(prog="layers", description="Compile and run Layers experiments.")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True

    c = sub.add_parser("check", help="report diagnostics")
    c.add_argument("file")

    c = sub.add_parser("compile", help="emit the IR")
    c.add_argument("file")
    c.add_argument("-o", "--output", required=True)

    c = sub.add_parser("run", help="compile (if needed) and execute")
    c.add_argument("file")
    c.add_argument("--seed", type=int, default=DEFAULT_SEED)
    c.add_argument("--threads", type=int)
    c.add_argument("--log")

    c = sub.add_parser("graph", help="write the network topology as DOT")
    c.add_argument("file")
    c.add_argument("--dot", required=True)

    c = sub.add_parser("fmt", help="print the program in canonical form")
    c.add_argument("file")
    return p


def _report(diags, filename):
    for d in sorted(diags, key=lambda d: d.sort_key()):
        print(d.format(filename), file=sys.stderr)


def _read(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _Usage(f"cannot read {path}: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise _Usage(f"{path} is not UTF-8 text") from None


class _Usage(Exception):
    pass


def _front(args):
    src = _read(args.file)
    _, analysis = front_end(src, Path(args.file).parent)
    _report(analysis.warnings, args.file)
    return analysis


def cmd_check(args):
    _front(args)
    return EXIT_OK


def cmd_compile(args):
    prog = ir.lower(_front(args))
    out = Path(args.output)
    rebase_paths(prog, Path(args.file).parent, out.parent)
    out.write_text(ir.serialize(prog), encoding="utf-8")
    return EXIT_OK


def cmd_run(args):
    text = _read(args.file)
    base = Path(args.file).parent
    if text.startswith(ir.HEADER):
        try:
            prog = ir.deserialize(text)
        except IRFormatError as exc:
            print(f"{args.file}: error: {exc}", file=sys.stderr)
            return EXIT_COMPILE
    else:
        prog = ir.lower(_front(args))
    if args.threads is not None and args.threads < 1:
        raise _Usage("--threads must be at least 1")
    log = resolve_log_path(prog.constants, args.log)
    with Engine(prog, base, seed=args.seed, threads=args.threads, log_path=log) as engine:
        engine.run()
    return EXIT_OK


def cmd_graph(args):
    prog = ir.lower(_front(args))
    Path(args.dot).write_text(to_dot(prog), encoding="utf-8")
    return EXIT_OK


def cmd_fmt(args):
    try:
        exp = parse_source(_read(args.file))
    except (LexError, ParseError) as exc:
        raise CompileFailed([exc.diagnostic]) from None
    sys.stdout.write(dump_ast(exp))
    return EXIT_OK


COMMANDS = {"check": cmd_check, "compile": cmd_compile, "run": cmd_run,
            "graph": cmd_graph, "fmt": cmd_fmt}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except _Usage as exc:
        print(f"layers: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CompileFailed as exc:
        _report(exc.diagnostics, args.file)
        return EXIT_COMPILE
    except (EngineError, LayersError) as exc:
        print(f"{args.file}: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"{args.file}: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
