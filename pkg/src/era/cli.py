"""Command-line entry point.

Exit status: 0 clean, 1 findings reported, 2 usage or parse error,
3 the analysis did not stabilise.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .engine import Divergence, EngineConfig, analyze
from .eqstate import dump
from .frontend import ParseError, SourceProgram, load
from .report import (annotate, build_report, diagnose, find_point, optimize,
                     parse_expr, query)

EXIT_CLEAN, EXIT_FINDINGS, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--interp-level", type=int, choices=(0, 1, 2), default=2)
    common.add_argument("--widening-threshold", type=_positive, default=None, metavar="D",
                        help="grammar size above which widening applies (default 8 per variable)")
    common.add_argument("--no-widening", action="store_true")
    common.add_argument("--cap", type=_positive, default=64,
                        help="iteration cap when widening is off")
    common.add_argument("--no-primed", action="store_true")
    common.add_argument("--strict-indefinite", type=_on_off, default=True, metavar="on|off")
    common.add_argument("--format", choices=("text", "json"), default="text")

    p = argparse.ArgumentParser(prog="era", description="Equality analysis of IMP programs.")
    sub = p.add_subparsers(dest="command", required=True)
    a = sub.add_parser("analyze", parents=[common], help="report findings")
    a.add_argument("file")
    o = sub.add_parser("optimize", parents=[common], help="write <name>.opt.imp")
    o.add_argument("file")
    o.add_argument("-o", "--output", default=None)
    q = sub.add_parser("query", parents=[common], help="terms equal to an expression")
    q.add_argument("file")
    q.add_argument("--point", required=True,
                   help="line:col[:pre|post|then|else] of a statement, or end")
    q.add_argument("--expr", required=True)
    q.add_argument("--depth", type=_positive, default=3)
    d = sub.add_parser("dump-state", parents=[common], help="print grammar states")
    d.add_argument("file")
    d.add_argument("--point", default=None)
    s = sub.add_parser("selftest", parents=[common], help="run the oracle campaign")
    s.add_argument("--programs", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--depth", type=_positive, default=3)
    return p


def config_from(args) -> EngineConfig:
    return EngineConfig(level=args.interp_level, widening=not args.no_widening,
                        threshold=args.widening_threshold, cap=args.cap,
                        primed=not args.no_primed, strict=args.strict_indefinite)


def _emit(args, text: str, payload) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, ensure_ascii=False, default=str))
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def cmd_analyze(args, out) -> int:
    core = load(SourceProgram.read(args.file))
    r = analyze(core, config_from(args))
    diags = diagnose(r)
    rep = build_report(r, diags)
    text = annotate(SourceProgram.read(args.file).text, diags)
    text += "".join(d.text(args.file) + "\n" for d in diags)
    _emit(args, text, rep.to_json())
    return EXIT_FINDINGS if diags else EXIT_CLEAN


def cmd_optimize(args, out) -> int:
    core = load(SourceProgram.read(args.file))
    res = optimize(core, config_from(args))
    path = Path(args.output) if args.output else Path(args.file).with_suffix(".opt.imp")
    original = SourceProgram.read(args.file).text
    body = res.text if any(w.action != "keep" for w in res.rewrites) else original
    path.write_text(body)
    log = ["%s:%d:%d: %s %s%s  [%s]" % (args.file, w.line, w.col, w.action, w.before,
                                        " -> " + w.after if w.after else "",
                                        w.justification.kind) for w in res.rewrites]
    log.append("wrote %s; statements %d -> %d" % (path, res.statements_before,
                                                  res.statements_after))
    payload = {"output": str(path), "rewrites": [w.to_json() for w in res.rewrites],
               "diagnostics": [d.to_json() for d in res.diagnostics],
               "stats": {"statements_before": res.statements_before,
                         "statements_after": res.statements_after}}
    _emit(args, "\n".join(log), payload)
    return EXIT_CLEAN


def cmd_query(args, out) -> int:
    core = load(SourceProgram.read(args.file))
    r = analyze(core, config_from(args))
    try:
        point = find_point(r, args.point)
        expr = parse_expr(args.expr)
    except (ValueError, ParseError) as e:
        print("era: %s" % e, file=sys.stderr)
        return EXIT_USAGE
    ans = query(r, point, expr, args.depth)
    if ans.inaccessible:
        text = "inaccessible"
    else:
        text = "{%s}" % ", ".join(ans.terms)
        if ans.related:
            text += "\n" + "\n".join(ans.related)
    _emit(args, text, {"point": point, "expr": args.expr, "terms": ans.terms,
                       "related": ans.related, "inaccessible": ans.inaccessible})
    return EXIT_CLEAN


def cmd_dump(args, out) -> int:
    core = load(SourceProgram.read(args.file))
    r = analyze(core, config_from(args))
    if args.point is not None:
        try:
            points = [find_point(r, args.point)]
        except ValueError as e:
            print("era: %s" % e, file=sys.stderr)
            return EXIT_USAGE
    else:
        points = [p.id for p in r.cfg.points]
    chunks, payload = [], []
    for pid in points:
        p = r.cfg.points[pid]
        text = dump(r.state(pid))
        if args.point is None:
            chunks.append("point %d %d:%d %s%s\n%s" % (pid, p.span.line, p.span.col, p.kind,
                                                      " in " + p.unit if p.unit else "", text))
        else:
            chunks.append(text)
        payload.append({"id": pid, "line": p.span.line, "col": p.span.col, "state": text})
    _emit(args, "\n".join(chunks), payload)
    return EXIT_CLEAN


def cmd_selftest(args, out) -> int:
    from .oracle import ProgramGenerator, check_soundness
    config = config_from(args)
    failures = []
    for seed in range(args.seed, args.seed + args.programs):
        g = ProgramGenerator(seed=seed)
        src = g.program()
        core = load(src)
        r = analyze(core, config)
        rep = check_soundness(r, g.inputs(), depth=args.depth)
        if not rep.ok:
            failures.append({"seed": seed, "violations": [str(v) for v in rep.violations]})
    text = "%d programs, %d unsound" % (args.programs, len(failures))
    _emit(args, text, {"programs": args.programs, "failures": failures})
    return EXIT_FINDINGS if failures else EXIT_CLEAN


COMMANDS = {"analyze": cmd_analyze, "optimize": cmd_optimize, "query": cmd_query,
            "dump-state": cmd_dump, "selftest": cmd_selftest}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config_from(args)
    except ValueError as e:
        print("era: %s" % e, file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, sys.stdout)
    except ParseError as e:
        for line in e.lines():
            print(line, file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print("era: %s" % e, file=sys.stderr)
        return EXIT_USAGE
    except Divergence as e:
        print("era: divergence: %s" % e, file=sys.stderr)
        if args.format == "json":
            print(json.dumps({"divergence": {"line": e.line, "head_sizes": e.sizes}}))
        else:
            print("head grammar sizes per iteration: %s" % " ".join(map(str, e.sizes)))
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
