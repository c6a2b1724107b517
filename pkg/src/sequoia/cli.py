"""Command-line interface: check, tcc, prove, serve, fmt."""

import argparse
import json
import os
import sys
from pathlib import Path

from . import corpus as C
from . import parser as PS
from . import printer as P
from .engine import CommandError
from .workspace import Workspace, WorkspaceError


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="sequoia",
        description="typecheck PVSL theories, discharge proof obligations, "
                    "and replay or develop sequent-calculus proofs")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="typecheck, compare manifests, and "
                                     "replay proof scripts")
    p.add_argument("path", help="corpus directory or a single .pvsl file")
    p.add_argument("--json", action="store_true",
                   help="machine-readable report")

    p = sub.add_parser("tcc", help="print generated proof obligations")
    p.add_argument("file", help=".pvsl file")
    p.add_argument("--theory", default=None,
                   help="theory name (default: the file's stem)")
    p.add_argument("--json", action="store_true",
                   help="machine-readable report")

    p = sub.add_parser("prove", help="interactive proof loop")
    p.add_argument("file", help=".pvsl file")
    p.add_argument("formula", help="conjecture or obligation to prove")

    p = sub.add_parser("serve", help="start the HTTP API")
    p.add_argument("--port", type=int,
                   default=int(os.environ.get("SEQUOIA_PORT", "8711")))
    p.add_argument("--workspace",
                   default=os.environ.get("SEQUOIA_WORKSPACE", "."))
    p.add_argument("--idle-timeout-secs", type=float, default=3600.0,
                   help="expire sessions idle longer than this")

    p = sub.add_parser("fmt", help="pretty-print a theory file in place")
    p.add_argument("file", help=".pvsl file")

    return ap


# -- check -------------------------------------------------------------------


def _cmd_check(args) -> int:
    path = Path(args.path)
    try:
        if path.is_dir():
            entries = C.load_dir(path)
            context = ()
        else:
            entries = [C._load_entry(path.parent, path.stem)]
            context = [PS.parse_theory(p.read_text())
                       for p in path.parent.glob("*.pvsl") if p != path]
        report = C.check_all(entries, context=context)
    except (C.CorpusError, PS.ParseError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    if args.json:
        print(json.dumps({
            "green": report.green,
            "summary": report.summary(),
            "mismatches": report.mismatches(),
            "results": [{"theory": r.theory, "formula": r.name,
                         "expected": r.expected, "status": r.status,
                         "detail": r.detail} for r in report.results]}))
    else:
        print(report.summary())
        for m in report.mismatches():
            print(f"  {m}")
    return 0 if report.green else 1


# -- tcc ---------------------------------------------------------------------


def _cmd_tcc(args) -> int:
    path = Path(args.file)
    if not path.exists():
        print(f"error: no such file {path}", file=sys.stderr)
        return 2
    ws = Workspace(path.parent)
    name = args.theory or path.stem
    try:
        checked = ws.checked(name)
    except WorkspaceError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    if args.json:
        print(json.dumps({"theory": name, "tccs": [
            {"name": fe.name, "kind": fe.tcc.kind, "origin": fe.tcc.origin,
             "formula": P.expr_to_text(fe.tcc.formula, implies_keyword=True)}
            for fe in checked.tccs]}))
    else:
        for fe in checked.tccs:
            text = P.expr_to_text(fe.tcc.formula, implies_keyword=True)
            print(f"{fe.name}: OBLIGATION {text}")
    return 0


# -- prove -------------------------------------------------------------------


def _cmd_prove(args) -> int:
    path = Path(args.file)
    if not path.exists():
        print(f"error: no such file {path}", file=sys.stderr)
        return 2
    ws = Workspace(path.parent)
    try:
        session = ws.session(path.stem, args.formula)
    except (WorkspaceError, CommandError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"proving {args.formula}; enter (command ...) forms, "
          "'quit' saves the transcript")
    while True:
        print()
        print(session.render())
        n = len(session.open_goals())
        try:
            line = input(f"[{n} open] > ").strip()
        except EOFError:
            line = "quit"
        if not line:
            continue
        if line == "quit":
            break
        try:
            for sx in PS.parse_sexps(line):
                session.apply(sx)
        except (CommandError, PS.ParseError) as err:
            print(f"error: {err}")
    if session.transcript:
        target = ws.save_script(path.stem, args.formula, session.transcript)
        print(f"transcript written to {target}")
    return 0 if session.proved() else 1


# -- serve ---------------------------------------------------------------------


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import build_app
    root = Path(args.workspace)
    if not root.is_dir():
        print(f"error: no such workspace {root}", file=sys.stderr)
        return 2
    static = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    app = build_app(Workspace(root),
                    idle_timeout_secs=args.idle_timeout_secs,
                    static_dir=static if static.is_dir() else None)
    uvicorn.run(app, host="127.0.0.1", port=args.port)
    return 0


# -- fmt ---------------------------------------------------------------------


def _cmd_fmt(args) -> int:
    path = Path(args.file)
    if not path.exists():
        print(f"error: no such file {path}", file=sys.stderr)
        return 2
    try:
        theories = PS.parse_theories(path.read_text())
    except PS.ParseError as err:
        print(f"error: {path.name}: {err}", file=sys.stderr)
        return 2
    path.write_text("\n".join(P.theory_to_text(t) for t in theories))
    print(f"formatted {path}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return {"check": _cmd_check, "tcc": _cmd_tcc, "prove": _cmd_prove,
            "serve": _cmd_serve, "fmt": _cmd_fmt}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
