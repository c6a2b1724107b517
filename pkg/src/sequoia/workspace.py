"""A directory of theories with content-hash-cached typechecking.

A workspace is a flat directory of ``<name>.pvsl`` sources with optional
``<name>.prfl`` proof scripts.  Typechecking the whole directory is cached
against a hash of every source file; touching any ``.pvsl`` invalidates the
cache and the next access rebuilds the world from scratch.
"""

import hashlib
from pathlib import Path

from . import parser as PS
from . import prelude
from . import typecheck as TC
from .corpus import ORDER
from .engine import CommandError, ProofSession


class WorkspaceError(Exception):
    pass


class Workspace:
    def __init__(self, root):
        self.root = Path(root)
        self._hash = None
        self._world = None
        self._checked = {}  # theory name -> CheckedTheory
        self._scripts = {}  # theory name -> {formula -> [Sexp]}
        self._statuses = None  # theory name -> {formula -> status}

    # -- discovery -----------------------------------------------------------

    def source_files(self) -> list:
        files = sorted(self.root.glob("*.pvsl"))
        rank = {name: i for i, name in enumerate(ORDER)}
        files.sort(key=lambda p: (rank.get(p.stem, len(rank)), p.stem))
        return files

    def script_file(self, theory: str) -> Path:
        return self.root / f"{theory}.prfl"

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for p in self.source_files():
            h.update(p.name.encode())
            h.update(p.read_bytes())
            s = self.script_file(p.stem)
            if s.exists():
                h.update(s.read_bytes())
        return h.hexdigest()

    # -- cached world ----------------------------------------------------------

    def _ensure(self):
        digest = self.content_hash()
        if digest == self._hash:
            return
        world = prelude.standard_world()
        names = []
        for p in self.source_files():
            try:
                theory = PS.parse_theory(p.read_text())
            except PS.ParseError as err:
                raise WorkspaceError(f"{p.name}: {err}")
            world.add_raw(theory)
            names.append(theory.name)
        checked = {}
        for name in names:
            try:
                checked[name] = TC.check_theory(world, name)
            except TC.TypecheckError as err:
                raise WorkspaceError(f"{name}: {err}")
        scripts = {}
        for name in names:
            scripts[name] = {}
            sf = self.script_file(name)
            if sf.exists():
                try:
                    parsed = PS.parse_proof_script(sf.read_text())
                except PS.ParseError as err:
                    raise WorkspaceError(f"{sf.name}: {err}")
                scripts[name] = dict(parsed.entries)
        self._world, self._checked = world, checked
        self._scripts, self._statuses = scripts, None
        self._hash = digest

    @property
    def world(self):
        self._ensure()
        return self._world

    def theories(self) -> list:
        self._ensure()
        return list(self._checked)

    def checked(self, name: str):
        self._ensure()
        got = self._checked.get(name)
        if got is None:
            raise WorkspaceError(f"unknown theory {name}")
        return got

    def scripts(self, name: str) -> dict:
        self._ensure()
        return self._scripts.get(name, {})

    def session(self, theory: str, formula: str) -> ProofSession:
        return ProofSession(self.world, self.checked(theory), formula)

    # -- formula statuses ------------------------------------------------------

    def statuses(self) -> dict:
        """theory -> {formula -> axiom | proved | open | error | unproved},
        replaying any available scripts; cached per content hash."""
        self._ensure()
        if self._statuses is not None:
            return self._statuses
        out = {}
        for name, checked in self._checked.items():
            scripts = self._scripts.get(name, {})
            per = {}
            for fe in checked.formulas + checked.tccs:
                if fe.role == TC.AXIOM:
                    per[fe.name] = "axiom"
                    continue
                cmds = scripts.get(fe.name)
                if cmds is None:
                    per[fe.name] = "unproved"
                    continue
                try:
                    session = ProofSession(self.world, checked, fe.name)
                    for sx in cmds:
                        session.apply(sx)
                except (CommandError, PS.ParseError):
                    per[fe.name] = "error"
                    continue
                per[fe.name] = "proved" if session.proved() else "open"
            out[name] = per
        self._statuses = out
        return out

    # -- script persistence ------------------------------------------------------

    def save_script(self, theory: str, formula: str, commands,
                    path: Path = None) -> Path:
        """Write (or replace) one (proof ...) entry; returns the file path."""
        target = path if path is not None else self.script_file(theory)
        entries = []
        if target.exists():
            entries = PS.parse_proof_script(target.read_text()).entries
        entries = [(n, c) for n, c in entries if n != formula]
        entries.append((formula, list(commands)))
        target.write_text(PS.script_to_text(PS.ProofScript(entries)))
        return target
