"""JSON-over-HTTP proof session service.

Sessions live in memory; every successfully applied command is also appended
to a per-session journal file (``.jnl``, one command per line) so a restarted
server rebuilds identical proof trees from the journals.  Per-session command
application is serialized: a second command arriving while one is mid-flight
is rejected with 409 rather than interleaved.
"""

import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import parser as PS
from . import printer as P
from .engine import COMMANDS, CommandError, ProofSession
from .workspace import Workspace, WorkspaceError

JOURNAL_DIR = ".journals"
DRAFT_SUFFIX = ".draft.prfl"


class NewSession(BaseModel):
    theory: str
    formula: str


class Command(BaseModel):
    text: str


@dataclass
class SessionRecord:
    id: str
    theory: str
    formula: str
    session: ProofSession
    journal: Path
    created: float = field(default_factory=time.monotonic)
    touched: float = field(default_factory=time.monotonic)
    lock: threading.Lock = field(default_factory=threading.Lock)


def _goal_json(seq):
    pr = P.Printer(sugar_sets=True)
    return {"antecedents": [pr.expr(f) for f in seq.antecedents],
            "succedents": [pr.expr(f) for f in seq.succedents]}


def _tree_json(node, focus):
    return {"goal": _goal_json(node.goal),
            "rule": node.rule,
            "status": node.status,
            "focused": node is focus,
            "children": [_tree_json(c, focus) for c in node.children]}


def _session_json(rec: SessionRecord, tree: bool = False):
    s = rec.session
    focused = _goal_json(s.focus.goal) if s.focus is not None \
        else {"antecedents": [], "succedents": []}
    out = {"session_id": rec.id,
           "theory": rec.theory,
           "formula": rec.formula,
           "goal": dict(focused, text=s.render()),
           "open_goals": len(s.open_goals()),
           "proved": s.proved(),
           "transcript": [PS.sexp_to_text(sx) for sx in s.transcript]}
    if tree:
        out["tree"] = _tree_json(s.root, s.focus)
    return out


def _error(status: int, reason: str):
    return JSONResponse(status_code=status, content={"detail": reason})


def build_app(workspace: Workspace, idle_timeout_secs: float = 3600.0,
              static_dir: Path = None) -> FastAPI:
    app = FastAPI(title="sequoia prover")
    sessions = {}
    registry_lock = threading.Lock()
    journal_dir = workspace.root / JOURNAL_DIR
    app.state.workspace = workspace
    app.state.sessions = sessions

    def journal_path(sid, theory, formula):
        return journal_dir / f"{sid}__{theory}__{formula}.jnl"

    def new_record(theory, formula, sid=None):
        session = workspace.session(theory, formula)
        sid = sid or uuid.uuid4().hex
        rec = SessionRecord(sid, theory, formula, session,
                            journal_path(sid, theory, formula))
        return rec

    def recover():
        """Rebuild sessions from journals left by a previous process."""
        if not journal_dir.is_dir():
            return
        for jf in sorted(journal_dir.glob("*.jnl")):
            parts = jf.stem.split("__")
            if len(parts) != 3:
                continue
            sid, theory, formula = parts
            try:
                rec = new_record(theory, formula, sid=sid)
                for sx in PS.parse_sexps(jf.read_text()):
                    rec.session.apply(sx)
            except (CommandError, PS.ParseError, WorkspaceError):
                continue  # stale journal (source changed); leave it on disk
            sessions[sid] = rec

    def expire():
        if idle_timeout_secs is None:
            return
        now = time.monotonic()
        with registry_lock:
            dead = [sid for sid, rec in sessions.items()
                    if now - rec.touched > idle_timeout_secs]
            for sid in dead:
                del sessions[sid]

    def get_record(sid):
        expire()
        return sessions.get(sid)

    recover()

    # -- capability & listing endpoints ------------------------------------

    @app.get("/capabilities")
    def capabilities():
        return {"commands": [{"name": name, "args": args, "help": doc}
                             for name, (args, doc) in COMMANDS.items()]}

    @app.get("/theories")
    def theories():
        try:
            statuses = workspace.statuses()
        except WorkspaceError as err:
            return _error(422, str(err))
        out = []
        for name in workspace.theories():
            checked = workspace.checked(name)
            status = statuses[name]
            out.append({
                "name": name,
                "formulas": [{"name": fe.name, "role": fe.role,
                              "status": status[fe.name]}
                             for fe in checked.formulas],
                "tccs": [{"name": fe.name, "kind": fe.tcc.kind,
                          "origin": fe.tcc.origin,
                          "formula": P.expr_to_text(fe.tcc.formula,
                                                    implies_keyword=True),
                          "status": status[fe.name]}
                         for fe in checked.tccs]})
        return {"theories": out}

    # -- session lifecycle ---------------------------------------------------

    @app.post("/sessions")
    def create_session(body: NewSession):
        expire()
        try:
            workspace.checked(body.theory)
        except WorkspaceError as err:
            return _error(404, str(err))
        try:
            rec = new_record(body.theory, body.formula)
        except CommandError as err:
            reason = str(err)
            status = 404 if "no formula named" in reason else 422
            return _error(status, reason)
        except WorkspaceError as err:
            return _error(422, str(err))
        with registry_lock:
            sessions[rec.id] = rec
        journal_dir.mkdir(exist_ok=True)
        rec.journal.write_text("")
        return _session_json(rec, tree=True)

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        rec = get_record(sid)
        if rec is None:
            return _error(404, f"unknown session {sid}")
        rec.touched = time.monotonic()
        return _session_json(rec, tree=True)

    @app.post("/sessions/{sid}/command")
    def run_command(sid: str, body: Command):
        rec = get_record(sid)
        if rec is None:
            return _error(404, f"unknown session {sid}")
        if not rec.lock.acquire(blocking=False):
            return _error(409, "session busy: a command is mid-application")
        try:
            rec.touched = time.monotonic()
            try:
                rec.session.apply(body.text)
            except (CommandError, PS.ParseError) as err:
                return _error(422, str(err))
            _journal(rec)
            return _session_json(rec, tree=True)
        finally:
            rec.lock.release()

    @app.post("/sessions/{sid}/undo")
    def undo(sid: str):
        rec = get_record(sid)
        if rec is None:
            return _error(404, f"unknown session {sid}")
        if not rec.lock.acquire(blocking=False):
            return _error(409, "session busy: a command is mid-application")
        try:
            rec.touched = time.monotonic()
            try:
                rec.session.undo()
            except CommandError as err:
                return _error(422, str(err))
            _journal(rec)
            return _session_json(rec, tree=True)
        finally:
            rec.lock.release()

    @app.delete("/sessions/{sid}")
    def close_session(sid: str):
        rec = get_record(sid)
        if rec is None:
            return _error(404, f"unknown session {sid}")
        with registry_lock:
            sessions.pop(sid, None)
        draft = None
        if rec.session.transcript:
            path = workspace.root / f"{rec.theory}.{rec.formula}{DRAFT_SUFFIX}"
            workspace.save_script(rec.theory, rec.formula,
                                  rec.session.transcript, path=path)
            draft = str(path)
        rec.journal.unlink(missing_ok=True)
        return {"session_id": sid, "draft": draft}

    def _journal(rec):
        journal_dir.mkdir(exist_ok=True)
        rec.journal.write_text(
            "".join(PS.sexp_to_text(sx) + "\n"
                    for sx in rec.session.transcript))

    # -- optional static frontend ------------------------------------------

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="ui")

    return app
