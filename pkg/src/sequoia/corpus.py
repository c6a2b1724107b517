"""Bundled golden corpus: theories, proof scripts, and expectations.

Each corpus entry is a triple of files sharing a base name:

* ``<name>.pvsl``     -- the theory source
* ``<name>.prfl``     -- proof scripts, one ``(proof "formula" cmd ...)`` per
                         proved formula
* ``<name>.manifest`` -- line-oriented expectations: ``formula: status`` for
                         every axiom, conjecture, and proof obligation, plus
                         ``tccs <decl>: <id> ...`` lines pinning the exact
                         obligation ids each declaration must generate

``load_corpus`` reads and cross-validates the bundle; ``check_all`` replays
it against a fresh world and reports every deviation.
"""

from dataclasses import dataclass, field
from pathlib import Path

from . import parser as PS
from . import prelude
from . import terms as T
from . import typecheck as TC
from .engine import CommandError, ProofSession

# Later theories import earlier ones, so checking order is fixed.
ORDER = ["prop_groups", "primes_topology", "picks_theorem",
         "pred_algebra", "symmetric"]

DEFAULT_ROOT = Path(__file__).resolve().parents[2] / "corpus"

STATUSES = ("axiom", "proved")


class CorpusError(Exception):
    """The bundle on disk is internally inconsistent."""


@dataclass
class Manifest:
    statuses: dict  # formula name -> "axiom" | "proved"
    tcc_groups: dict  # declaration base name -> [tcc id, ...] in order


@dataclass
class CorpusEntry:
    name: str
    theory_file: Path
    script_file: Path
    manifest_file: Path
    theory: object  # raw parsed Theory
    scripts: dict  # formula name -> [command Sexp, ...]
    manifest: Manifest


@dataclass
class FormulaResult:
    theory: str
    name: str
    expected: str
    status: str  # axiom | proved | open | pending-dependencies | error
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status == self.expected


@dataclass
class CorpusReport:
    results: list = field(default_factory=list)
    problems: list = field(default_factory=list)  # structural mismatches

    @property
    def green(self) -> bool:
        return not self.problems and all(r.ok for r in self.results)

    def mismatches(self) -> list:
        out = list(self.problems)
        out.extend(f"{r.theory}.{r.name}: expected {r.expected}, "
                   f"got {r.status}" + (f" ({r.detail})" if r.detail else "")
                   for r in self.results if not r.ok)
        return out

    def summary(self) -> str:
        theories = len({r.theory for r in self.results})
        if self.green:
            return f"{theories} theories, all proved"
        return f"{theories} theories, {len(self.mismatches())} mismatches"


def parse_manifest(text: str) -> Manifest:
    statuses = {}
    groups = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise CorpusError(f"manifest line {lineno}: expected 'name: ...'")
        head, tail = (s.strip() for s in line.split(":", 1))
        if head.startswith("tccs "):
            base = head[len("tccs "):].strip()
            if base in groups:
                raise CorpusError(f"manifest line {lineno}: "
                                  f"duplicate tccs entry for {base}")
            groups[base] = tail.split()
        else:
            if head in statuses:
                raise CorpusError(f"manifest line {lineno}: "
                                  f"duplicate status for {head}")
            if tail not in STATUSES:
                raise CorpusError(f"manifest line {lineno}: "
                                  f"unknown status {tail!r}")
            statuses[head] = tail
    return Manifest(statuses, groups)


def _load_entry(root: Path, name: str) -> CorpusEntry:
    theory_file = root / f"{name}.pvsl"
    script_file = root / f"{name}.prfl"
    manifest_file = root / f"{name}.manifest"
    for p in (theory_file, script_file, manifest_file):
        if not p.exists():
            raise CorpusError(f"missing corpus file {p}")
    try:
        theory = PS.parse_theory(theory_file.read_text())
    except PS.ParseError as err:
        raise CorpusError(f"{theory_file.name}: {err}")
    if theory.name != name:
        raise CorpusError(f"{theory_file.name} declares theory {theory.name}")
    try:
        script = PS.parse_proof_script(script_file.read_text())
    except PS.ParseError as err:
        raise CorpusError(f"{script_file.name}: {err}")
    scripts = {}
    for target, cmds in script.entries:
        if target in scripts:
            raise CorpusError(f"{script_file.name}: duplicate proof "
                              f"for {target}")
        scripts[target] = cmds
    try:
        manifest = parse_manifest(manifest_file.read_text())
    except CorpusError as err:
        raise CorpusError(f"{manifest_file.name}: {err}")
    entry = CorpusEntry(name, theory_file, script_file, manifest_file,
                        theory, scripts, manifest)
    _validate_entry(entry)
    return entry


def _validate_entry(entry: CorpusEntry) -> None:
    """Cross-check manifest against source and scripts (pre-typecheck)."""
    name = entry.name
    statuses = dict(entry.manifest.statuses)
    tcc_ids = {i for ids in entry.manifest.tcc_groups.values() for i in ids}

    for decl in entry.theory.decls:
        if isinstance(decl, T.AxiomDecl):
            want = "axiom"
        elif isinstance(decl, T.FormulaDecl):
            want = "proved"
        else:
            continue
        got = statuses.pop(decl.name, None)
        if got is None:
            raise CorpusError(f"{name}: formula {decl.name} missing "
                              "from manifest")
        if got != want:
            raise CorpusError(f"{name}: formula {decl.name} expected "
                              f"{want}, manifest says {got}")
    for tid in tcc_ids:
        if statuses.pop(tid, None) is None:
            raise CorpusError(f"{name}: obligation {tid} has no status line")
    if statuses:
        extra = ", ".join(sorted(statuses))
        raise CorpusError(f"{name}: manifest names unknown formulas: {extra}")

    for target in entry.scripts:
        if entry.manifest.statuses.get(target) != "proved":
            raise CorpusError(f"{name}: script for {target}, which the "
                              "manifest does not expect proved")
    for fname, status in entry.manifest.statuses.items():
        if status == "proved" and fname not in entry.scripts:
            raise CorpusError(f"{name}: no proof script for {fname}")


def load_corpus(root=None) -> list:
    root = Path(root) if root is not None else DEFAULT_ROOT
    return [_load_entry(root, name) for name in ORDER]


def load_dir(root) -> list:
    """Corpus entries for every theory in a directory, import order first."""
    root = Path(root)
    names = [p.stem for p in root.glob("*.pvsl")]
    if not names:
        raise CorpusError(f"no .pvsl files in {root}")
    rank = {n: i for i, n in enumerate(ORDER)}
    names.sort(key=lambda n: (rank.get(n, len(rank)), n))
    return [_load_entry(root, name) for name in names]


def _tcc_groups(checked) -> dict:
    groups = {}
    for fe in checked.tccs:
        groups.setdefault(TC.tcc_base_name(fe.tcc.origin), []).append(fe.name)
    return groups


def _replay(world, checked, target, cmds):
    """Run one script; returns (closed, cited refs, expanded names, detail)."""
    sx = None
    try:
        session = ProofSession(world, checked, target)
        for sx in cmds:
            session.apply(sx)
    except (CommandError, PS.ParseError) as err:
        at = PS.sexp_to_text(sx) if sx is not None else ""
        return False, set(), set(), f"{at}: {err}" if at else str(err)
    if not session.proved():
        n = len(session.open_goals())
        return False, set(), set(), f"{n} open goals"
    return True, set(session.cited), set(session.expanded), ""


def check_all(entries, context=()) -> CorpusReport:
    """Typecheck, compare obligations against manifests, replay scripts.

    `context` supplies extra raw theories the entries may import without
    themselves being checked (used when checking a single file in place)."""
    report = CorpusReport()
    world = prelude.standard_world()
    for entry in entries:
        world.add_raw(entry.theory)
    have = {entry.name for entry in entries}
    for theory in context:
        if theory.name not in have:
            world.add_raw(theory)

    ref_key = {}  # formula ref -> (theory, name) within the corpus
    closed = {}  # (theory, name) -> (cited refs, expanded defs) or None
    checked_by_name = {}

    for entry in entries:
        try:
            checked = TC.check_theory(world, entry.name)
        except TC.TypecheckError as err:
            report.problems.append(f"{entry.name}: {err}")
            continue
        checked_by_name[entry.name] = checked

        got = _tcc_groups(checked)
        if got != entry.manifest.tcc_groups:
            for base in sorted(set(got) | set(entry.manifest.tcc_groups)):
                want_ids = entry.manifest.tcc_groups.get(base, [])
                got_ids = got.get(base, [])
                if want_ids != got_ids:
                    report.problems.append(
                        f"{entry.name}: obligations of {base}: manifest "
                        f"{want_ids or 'none'}, typechecker "
                        f"{got_ids or 'none'}")

        for fe in checked.formulas + checked.tccs:
            key = (entry.name, fe.name)
            ref_key[fe.ref] = key
            expected = entry.manifest.statuses.get(fe.name)
            if expected is None:
                report.problems.append(f"{entry.name}: typechecker produced "
                                       f"{fe.name}, absent from manifest")
                continue
            if fe.role == TC.AXIOM:
                report.results.append(
                    FormulaResult(entry.name, fe.name, expected, "axiom"))
                continue
            ok, cited, expanded, detail = _replay(
                world, checked, fe.name, entry.scripts[fe.name])
            if ok:
                closed[key] = (cited, expanded)
                # status settled after the dependency pass below
                report.results.append(
                    FormulaResult(entry.name, fe.name, expected, "proved"))
            else:
                status = "error" if detail and "open goals" not in detail \
                    else "open"
                report.results.append(
                    FormulaResult(entry.name, fe.name, expected, status,
                                  detail))

    _settle_dependencies(report, closed, ref_key, checked_by_name)
    return report


def _settle_dependencies(report, closed, ref_key, checked_by_name):
    """A closed proof counts as proved only once every conjecture it cites
    and every obligation of every definition it expands is proved too."""
    deps = {}
    for key, (cited, expanded) in closed.items():
        wants = set()
        for ref in cited:
            got = ref_key.get(ref)
            if got is not None:
                wants.add(got)
        for dname in expanded:
            for tname, checked in checked_by_name.items():
                for fe in checked.tccs:
                    if fe.tcc.origin == dname:
                        wants.add((tname, fe.name))
        deps[key] = wants

    # a formula is grounded once all its dependencies are; circular
    # citations never become grounded
    grounded = set()
    changed = True
    while changed:
        changed = False
        for key, wants in deps.items():
            if key not in grounded and wants <= grounded:
                grounded.add(key)
                changed = True

    for r in report.results:
        key = (r.theory, r.name)
        if key in closed and key not in grounded:
            missing = sorted(f"{t}.{n}" for t, n in deps[key] - grounded)
            r.status = "pending-dependencies"
            r.detail = "awaiting " + ", ".join(missing)
