"""The sequent-calculus proof engine.

A ProofSession holds a goal tree for one formula.  Commands map to
Gentzen rules: flatten applies the invertible rules, split the
branching ones, and assert runs the simplifier (beta reduction, ground
evaluation, equational rewriting, and linear arithmetic).  The
transcript of applied commands is the single source of truth: undo and
replay both rebuild the tree from it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from . import linarith as LA
from . import parser as PS
from . import prelude as PR
from . import printer as P
from . import terms as T
from . import typecheck as TC
from .terms import (App, BVar, Binder, BoolLit, Const, Eq, Exists, Forall,
                    Implies, Iff, Ite, Lambda, Not, Num, Or, And,
                    TFun, BOOL, INT, NAT, Sequent, ProofNode,
                    OPEN, CLOSED, EXPANDED, beta_reduce, open_expr,
                    abstract_expr, shift_bvars)

TRUE = BoolLit(True)
FALSE = BoolLit(False)


class CommandError(T.SequoiaError):
    pass


# Palette metadata: name -> (argument schema, one-line help).
COMMANDS = {
    "flatten": ("", "apply the invertible rules L-AND, R-OR, R-IMPLIES, "
                "L-NOT, R-NOT exhaustively"),
    "split": ("", "branch on the first R-AND, L-OR, L-IMPLIES or IFF "
              "formula, one goal per premise"),
    "prop": ("", "flatten and split to fixpoint, closing goals whose "
             "antecedents meet their succedents"),
    "lemma": ("\"name\" [\"type-actual\" ...]", "add the named axiom, lemma "
              "or prelude formula as antecedent [-1]"),
    "rewrite": ("\"name\" [\"type-actual\" ...]", "rewrite with the named "
                "universally closed equation, left to right"),
    "inst": ("fnum \"term\" ...", "instantiate a universal antecedent or "
             "existential succedent with the given terms"),
    "skolem": ("fnum [\"name\" ...]", "replace outermost existential-"
               "antecedent / universal-succedent binders by fresh constants"),
    "skeep": ("[fnum]", "skolemize, then flatten"),
    "expand": ("\"name\" [fnum [occurrence]]", "unfold a definition and "
               "beta-reduce; RECURSIVE definitions unfold one step"),
    "case": ("\"formula\"", "split into one goal assuming the formula and "
             "one proving it"),
    "replace": ("fnum", "rewrite with antecedent equality fnum, left to "
                "right, throughout the goal"),
    "assert": ("", "simplify arithmetic and ground terms; close the goal "
               "when the linear-arithmetic fragment is valid"),
    "induct": ("\"var\"", "induction over nat on the outermost universal "
               "succedent: base P(0) and step FORALL j: P(j) => P(j+1)"),
    "measure-induct": ("\"var\" \"measure\"", "well-founded induction on a "
                       "nat-valued measure of the outermost universal"),
    "decompose-equality": ("[fnum]", "reduce a function or set (dis)equality "
                           "to its pointwise FORALL form"),
    "then": ("(cmd) ...", "apply the first command, then each following one "
             "to every resulting subgoal"),
    "spread": ("(cmd) ((cmd...) ...)", "apply the first command, then the "
               "i-th branch script to the i-th subgoal"),
    "postpone": ("", "rotate focus to the next open goal"),
    "undo": ("", "pop the last transcript entry and rebuild the tree"),
}


# ---------------------------------------------------------------------------
# Sequent utilities
# ---------------------------------------------------------------------------


def _dedup(fs):
    out = []
    for f in fs:
        if f not in out:
            out.append(f)
    return tuple(out)


def mk_seq(ante, succ) -> Sequent:
    ante = _dedup(f for f in ante if f != TRUE)
    succ = _dedup(f for f in succ if f != FALSE)
    return Sequent(ante, succ)


def trivially_closed(seq: Sequent) -> bool:
    if FALSE in seq.antecedents or TRUE in seq.succedents:
        return True
    return any(a in seq.succedents for a in seq.antecedents)


def flatten_seq(seq: Sequent) -> Sequent:
    """Exhaustive L-AND, R-OR, R-IMPLIES, L-NOT, R-NOT."""
    ante, succ = list(seq.antecedents), list(seq.succedents)
    changed = True
    while changed:
        changed = False
        for i, f in enumerate(ante):
            if isinstance(f, And):
                ante[i:i + 1] = [f.lhs, f.rhs]
            elif isinstance(f, Not):
                del ante[i]
                succ.append(f.arg)
            else:
                continue
            changed = True
            break
        if changed:
            continue
        for i, f in enumerate(succ):
            if isinstance(f, Or):
                succ[i:i + 1] = [f.lhs, f.rhs]
            elif isinstance(f, Implies):
                succ[i] = f.rhs
                ante.append(f.lhs)
            elif isinstance(f, Not):
                del succ[i]
                ante.append(f.arg)
            else:
                continue
            changed = True
            break
    return mk_seq(ante, succ)


def split_seq(seq: Sequent):
    """One application of R-AND / L-OR / L-IMPLIES / IFF; None if none."""
    ante, succ = list(seq.antecedents), list(seq.succedents)
    for i, f in enumerate(ante):
        rest = ante[:i] + ante[i + 1:]
        if isinstance(f, Or):
            return [mk_seq(rest + [f.lhs], succ), mk_seq(rest + [f.rhs], succ)]
        if isinstance(f, Implies):
            return [mk_seq(rest, succ + [f.lhs]), mk_seq(rest + [f.rhs], succ)]
        if isinstance(f, Iff):
            return [mk_seq(rest + [f.lhs, f.rhs], succ),
                    mk_seq(rest, succ + [f.lhs, f.rhs])]
    for i, f in enumerate(succ):
        rest = succ[:i] + succ[i + 1:]
        if isinstance(f, And):
            return [mk_seq(ante, rest + [f.lhs]), mk_seq(ante, rest + [f.rhs])]
        if isinstance(f, Iff):
            return [mk_seq(ante + [f.lhs], rest + [f.rhs]),
                    mk_seq(ante + [f.rhs], rest + [f.lhs])]
    return None


def prop_leaves(seq: Sequent, budget=4096):
    """Flatten/split to fixpoint; returns the unclosed leaf sequents."""
    work, out = [seq], []
    while work:
        if len(work) + len(out) > budget:
            raise CommandError("propositional search exceeded its budget")
        s = flatten_seq(work.pop())
        if trivially_closed(s):
            continue
        kids = split_seq(s)
        if kids is None:
            out.append(s)
        else:
            work.extend(kids)
    return out


# ---------------------------------------------------------------------------
# Propositional oracle
# ---------------------------------------------------------------------------


def prop_tautology(seq: Sequent, limit=20) -> bool:
    """Truth-table validity over opaque non-propositional atoms."""
    atoms = []

    def scan(e):
        if isinstance(e, (And, Or, Implies, Iff)):
            scan(e.lhs)
            scan(e.rhs)
        elif isinstance(e, Not):
            scan(e.arg)
        elif isinstance(e, BoolLit):
            pass
        elif e not in atoms:
            atoms.append(e)

    for f in seq.antecedents + seq.succedents:
        scan(f)
    if len(atoms) > limit:
        raise CommandError(f"too many propositional atoms ({len(atoms)})")

    def ev(e, val):
        if isinstance(e, BoolLit):
            return e.value
        if isinstance(e, Not):
            return not ev(e.arg, val)
        if isinstance(e, And):
            return ev(e.lhs, val) and ev(e.rhs, val)
        if isinstance(e, Or):
            return ev(e.lhs, val) or ev(e.rhs, val)
        if isinstance(e, Implies):
            return (not ev(e.lhs, val)) or ev(e.rhs, val)
        if isinstance(e, Iff):
            return ev(e.lhs, val) == ev(e.rhs, val)
        return val[atoms.index(e)]

    for bits in itertools.product((False, True), repeat=len(atoms)):
        if all(ev(a, bits) for a in seq.antecedents) \
                and not any(ev(s, bits) for s in seq.succedents):
            return False
    return True


# ---------------------------------------------------------------------------
# Arithmetic closing
# ---------------------------------------------------------------------------


def _goal_constraints(seq: Sequent):
    cons = []
    for f in seq.antecedents:
        c = LA.constraint_of(f, True)
        if c:
            cons.extend(c)
    for f in seq.succedents:
        c = LA.constraint_of(f, False)
        if c:
            cons.extend(c)
    return cons


def _atom_facts(world, cons):
    """Numeric range facts and int-ness derived from atom types."""
    from fractions import Fraction
    atoms = {a for p, _ in cons for m in p if m != () for a, _ in m}
    int_atoms, nonneg_atoms = set(), set()
    extra = []
    for a in atoms:
        try:
            ty = TC.infer_type(world, a)
        except T.SequoiaError:
            continue
        chain = TC.subtype_chain(ty)
        if INT in chain:
            int_atoms.add(a)
        if NAT in chain:
            nonneg_atoms.add(a)
        for step in chain[:-1]:
            try:
                fact = TC.type_pred(step, a)
            except T.SequoiaError:
                continue
            c = LA.constraint_of(fact, True)
            if c:
                extra.extend(c)
    # products of nonnegative atoms are nonnegative (the one nonlinear
    # fact goals like `n * m >= 0` over nat need)
    monos = {m for p, _ in cons for m in p if m != ()}
    for m in monos:
        if (len(m) > 1 or any(k > 1 for _, k in m)) \
                and all(a in nonneg_atoms for a, _ in m):
            extra.append(({m: Fraction(-1)}, "<="))
    return extra, int_atoms


def _int_monos(cons, int_atoms):
    monos = {m for p, _ in cons for m in p if m != ()}
    return {m for m in monos if all(a in int_atoms for a, _ in m)}


def linarith_valid(seq: Sequent, world=None) -> bool:
    """Validity of the goal's linear-arithmetic fragment.

    Negates the goal into constraints and runs elimination; with a
    `world` the atoms' declared types contribute range facts (nat >= 0)
    and integrality.  False means "cannot decide", never unsoundness.
    """
    cons = _goal_constraints(seq)
    if not cons:
        return False
    int_monos = frozenset()
    if world is not None:
        extra, int_atoms = _atom_facts(world, cons)
        cons = cons + extra
        int_monos = _int_monos(cons, int_atoms)
    return LA.refute(cons, int_monos)


# ---------------------------------------------------------------------------
# Assert: the simplifier
# ---------------------------------------------------------------------------


def _simp(e):
    """Bottom-up constant folding and arithmetic normalization."""
    if isinstance(e, Not):
        a = _simp(e.arg)
        if isinstance(a, BoolLit):
            return BoolLit(not a.value)
        return Not(a, neq_style=e.neq_style)
    if isinstance(e, And):
        l, r = _simp(e.lhs), _simp(e.rhs)
        if l == FALSE or r == FALSE:
            return FALSE
        if l == TRUE:
            return r
        if r == TRUE:
            return l
        return And(l, r)
    if isinstance(e, Or):
        l, r = _simp(e.lhs), _simp(e.rhs)
        if l == TRUE or r == TRUE:
            return TRUE
        if l == FALSE:
            return r
        if r == FALSE:
            return l
        return Or(l, r)
    if isinstance(e, Implies):
        l, r = _simp(e.lhs), _simp(e.rhs)
        if l == FALSE or r == TRUE:
            return TRUE
        if l == TRUE:
            return r
        return Implies(l, r)
    if isinstance(e, Iff):
        l, r = _simp(e.lhs), _simp(e.rhs)
        if l == TRUE:
            return r
        if r == TRUE:
            return l
        if l == FALSE:
            return _simp(Not(r))
        if r == FALSE:
            return _simp(Not(l))
        if l == r:
            return TRUE
        return Iff(l, r)
    if isinstance(e, Ite):
        c = _simp(e.cond)
        if c == TRUE:
            return _simp(e.then)
        if c == FALSE:
            return _simp(e.els)
        return Ite(c, _simp(e.then), _simp(e.els))
    if isinstance(e, Eq):
        l, r = _simp(e.lhs), _simp(e.rhs)
        if l == r:
            return TRUE
        d = LA.poly_sub(LA.poly_of(l), LA.poly_of(r))
        if not d:
            return TRUE
        if LA.poly_is_const(d):
            return FALSE
        return Eq(l, r)
    if isinstance(e, App) and isinstance(e.fn, Const) and e.fn.ref in LA._RELS:
        l, r = _simp(e.args[0]), _simp(e.args[1])
        d = LA.poly_sub(LA.poly_of(l), LA.poly_of(r))
        if LA.poly_is_const(d):
            c = d.get((), 0)
            rel = LA._RELS[e.fn.ref]
            return BoolLit({"<": c < 0, "<=": c <= 0,
                            ">": c > 0, ">=": c >= 0}[rel])
        return App(e.fn, (l, r))
    if isinstance(e, (Num, BoolLit, Const, BVar, T.Var)):
        return e
    e = T.map_expr(e, _simp)
    # canonical polynomial form for arithmetic applications, so that
    # equal arithmetic subterms become structurally identical
    if isinstance(e, App) and isinstance(e.fn, Const):
        ref = e.fn.ref
        if ref in (LA._ADD | LA._SUB | LA._NEG | LA._MUL | LA._DIV):
            return LA.poly_to_expr(LA.poly_of(e))
    return e


def _rewrite_everywhere(e, lhs, rhs):
    if e == lhs:
        return rhs
    return T.map_expr(e, lambda x: _rewrite_everywhere(x, lhs, rhs))


def _equational_pass(seq: Sequent) -> Sequent:
    """Use antecedent equations as rewrites, larger side to smaller."""
    ante, succ = list(seq.antecedents), list(seq.succedents)
    for _ in range(4):
        changed = False
        for i, f in enumerate(ante):
            if not isinstance(f, Eq) or f.lhs == f.rhs:
                continue
            big, small = f.lhs, f.rhs
            if _size(small) > _size(big):
                big, small = small, big
            if _occurs(small, big):
                continue
            for j, g in enumerate(ante):
                if j != i:
                    g2 = _rewrite_everywhere(g, big, small)
                    if g2 != g:
                        ante[j] = g2
                        changed = True
            for j, g in enumerate(succ):
                g2 = _rewrite_everywhere(g, big, small)
                if g2 != g:
                    succ[j] = g2
                    changed = True
        if not changed:
            break
    return mk_seq(ante, succ)


def _size(e):
    return 1 + sum(_size(s) for s in T.subexprs(e) if isinstance(s, T.Expr))


def _occurs(needle, hay):
    if needle == hay:
        return True
    return any(_occurs(needle, s) for s in T.subexprs(hay)
               if isinstance(s, T.Expr))


def _ground_truth(world, e):
    """Ground value of a closed formula, or None if not evaluable."""
    try:
        v = PR.ground_eval(world, e)
    except T.SequoiaError:
        return None
    except (KeyError, IndexError, TypeError, OverflowError):
        return None
    return v if isinstance(v, bool) else None


def _context_pass(seq: Sequent) -> Sequent:
    """Discharge antecedent implications whose hypothesis is present."""
    ante, succ = list(seq.antecedents), list(seq.succedents)
    changed = True
    while changed:
        changed = False
        for i, f in enumerate(ante):
            if isinstance(f, Implies) and f.lhs in ante:
                ante[i] = f.rhs
                changed = True
            elif isinstance(f, Iff) and f.lhs in ante:
                ante[i] = f.rhs
                changed = True
            elif isinstance(f, Iff) and f.rhs in ante:
                ante[i] = f.lhs
                changed = True
    return mk_seq(ante, succ)


def _resolve_ites(world, seq: Sequent) -> Sequent:
    """Decide IF conditions entailed or refuted by the goal's arithmetic
    context: other antecedents, negated other succedents, and declared
    atom types.  The formula being rewritten is excluded from its own
    context."""
    ante_cons = [LA.constraint_of(f, True) or [] for f in seq.antecedents]
    succ_cons = [LA.constraint_of(f, False) or [] for f in seq.succedents]

    def context_for(skip_ante, skip_succ, extra):
        cons = list(extra)
        for i, c in enumerate(ante_cons):
            if i != skip_ante:
                cons.extend(c)
        for i, c in enumerate(succ_cons):
            if i != skip_succ:
                cons.extend(c)
        facts, int_atoms = _atom_facts(world, cons)
        return cons + facts, _int_monos(cons + facts, int_atoms)

    def decide(cond, skip_ante, skip_succ):
        pos = LA.constraint_of(cond, True)
        neg = LA.constraint_of(cond, False)
        if pos is None or neg is None:
            return None
        cons, monos = context_for(skip_ante, skip_succ, neg)
        if LA.refute(cons, monos):
            return True
        cons, monos = context_for(skip_ante, skip_succ, pos)
        if LA.refute(cons, monos):
            return False
        return None

    def walk(e, sa, ss):
        if isinstance(e, (Num, BoolLit, Const, BVar)):
            return e
        if isinstance(e, Ite) and TC.max_loose_depth(e.cond) < 0:
            v = decide(e.cond, sa, ss)
            if v is True:
                return walk(e.then, sa, ss)
            if v is False:
                return walk(e.els, sa, ss)
        return T.map_expr(e, lambda x: walk(x, sa, ss))

    return mk_seq([walk(f, i, None) for i, f in enumerate(seq.antecedents)],
                  [walk(f, None, i) for i, f in enumerate(seq.succedents)])


def assert_seq(world, seq: Sequent):
    """Returns None when the goal closes, else the simplified sequent."""
    ante = [_simp(beta_reduce(f)) for f in seq.antecedents]
    succ = [_simp(beta_reduce(f)) for f in seq.succedents]
    for i, f in enumerate(ante):
        v = _ground_truth(world, f)
        if v is not None:
            ante[i] = BoolLit(v)
    for i, f in enumerate(succ):
        v = _ground_truth(world, f)
        if v is not None:
            succ[i] = BoolLit(v)
    seq = mk_seq(ante, succ)
    for _ in range(3):
        before = seq
        seq = _resolve_ites(world, seq)
        seq = _equational_pass(_context_pass(seq))
        seq = mk_seq([_simp(f) for f in seq.antecedents],
                     [_simp(f) for f in seq.succedents])
        if trivially_closed(seq):
            return None
        if seq == before:
            break
    if linarith_valid(seq, world):
        return None
    if any(_type_entailed(world, f) for f in seq.succedents):
        return None
    return seq


def _type_entailed(world, f):
    """A succedent P(t) holds outright when P is a subtype predicate of
    t's inferred type."""
    if not (isinstance(f, App) and len(f.args) == 1):
        return False
    t = f.args[0]
    try:
        chain = TC.subtype_chain(TC.infer_type(world, t))
    except T.SequoiaError:
        return False
    for step in chain[:-1]:
        try:
            if _simp(beta_reduce(TC.type_pred(step, t))) == f:
                return True
        except T.SequoiaError:
            continue
    return False


# ---------------------------------------------------------------------------
# Pattern matching for rewrite
# ---------------------------------------------------------------------------


def _match(pat, tgt, depth, binds):
    """First-order match of `pat` (with BVars < depth free) against `tgt`."""
    if isinstance(pat, BVar) and pat.depth >= depth:
        key = pat.depth - depth
        prev = binds.get(key)
        if prev is None:
            binds[key] = tgt
            return True
        return prev == tgt
    if type(pat) is not type(tgt):
        return False
    if isinstance(pat, (Num, BoolLit, Const, BVar)):
        return pat == tgt
    if isinstance(pat, App):
        return len(pat.args) == len(tgt.args) \
            and _match(pat.fn, tgt.fn, depth, binds) \
            and all(_match(a, b, depth, binds)
                    for a, b in zip(pat.args, tgt.args))
    if isinstance(pat, Eq):
        return _match(pat.lhs, tgt.lhs, depth, binds) \
            and _match(pat.rhs, tgt.rhs, depth, binds)
    if isinstance(pat, Not):
        return _match(pat.arg, tgt.arg, depth, binds)
    if isinstance(pat, (And, Or, Implies, Iff)):
        return _match(pat.lhs, tgt.lhs, depth, binds) \
            and _match(pat.rhs, tgt.rhs, depth, binds)
    if isinstance(pat, Ite):
        return _match(pat.cond, tgt.cond, depth, binds) \
            and _match(pat.then, tgt.then, depth, binds) \
            and _match(pat.els, tgt.els, depth, binds)
    return False  # matching under binders is out of scope


def _find_match(pat, e, nvars):
    binds = {}
    if _match(pat, e, 0, binds) and len(binds) == nvars:
        return binds
    for s in T.subexprs(e):
        if isinstance(s, T.Expr):
            got = _find_match(pat, s, nvars)
            if got is not None:
                return got
    return None


# ---------------------------------------------------------------------------
# Proof sessions
# ---------------------------------------------------------------------------


class _SessionWorld:
    """A read-only view of the world plus session-local skolem constants."""

    def __init__(self, base):
        self.base = base
        self.extra = {}

    def entry(self, ref):
        got = self.extra.get(ref)
        return got if got is not None else self.base.entry(ref)

    def __getattr__(self, name):
        return getattr(self.base, name)


class ProofSession:
    def __init__(self, world, checked: TC.CheckedTheory, target: str):
        ent = checked.formula_named(target)
        if ent is None:
            raise CommandError(f"no formula named {target} "
                               f"in theory {checked.name}")
        if ent.role == TC.AXIOM:
            raise CommandError(f"{target} is an axiom; nothing to prove")
        if ent.tyvars:
            raise CommandError(f"{target} is schematic and not provable "
                               "interactively")
        self.world = _SessionWorld(world)
        self.checked = checked
        self.target = target
        self.entry = ent
        self.transcript = []  # applied top-level command sexps
        self.cited = set()  # conjecture names this proof depends on
        self.expanded = set()  # definition names unfolded by expand
        self._reset()

    # -- tree bookkeeping --------------------------------------------------

    def _reset(self):
        self.root = ProofNode(Sequent((), (self.entry.formula,)))
        self.focus = self.root
        self.skolems = 0
        self.world.extra.clear()
        self.cited.clear()
        self.expanded.clear()

    def proved(self) -> bool:
        return self.root.proved()

    def open_goals(self) -> list:
        return self.root.open_leaves()

    def render(self) -> str:
        if self.focus is None:
            return "Q.E.D."
        return P.sequent_to_text(self.focus.goal)

    def _advance(self, prefer=None):
        leaves = self.root.open_leaves()
        if not leaves:
            self.focus = None
        elif prefer is not None and prefer in leaves:
            self.focus = prefer
        elif self.focus in leaves:
            pass  # postpone may have moved focus; keep it
        else:
            self.focus = leaves[0]

    def _resolve(self, node, seqs, rule):
        node.rule = rule
        if seqs is None or not seqs:
            node.status = CLOSED
            node.children = []
            return
        node.children = [ProofNode(s) for s in seqs]
        node.status = EXPANDED
        for child in node.children:
            if trivially_closed(child.goal):
                child.status = CLOSED
                child.rule = "(trivial)"

    # -- public entry points -------------------------------------------------

    def apply(self, command):
        """Apply a command (text or parsed sexp) to the focused goal."""
        if isinstance(command, str):
            sexps = PS.parse_sexps(command)
            if len(sexps) != 1:
                raise CommandError("expected a single (command ...) form")
            command = sexps[0]
        if not command.is_list() or not command.items \
                or command.items[0].is_list():
            raise CommandError("commands are (name arg ...) forms")
        if command.items[0].atom == "undo":
            self.undo()
            return
        if self.focus is None:
            raise CommandError("the proof is already complete")
        if command.items[0].atom == "postpone":
            leaves = self.root.open_leaves()
            i = leaves.index(self.focus)
            self.focus = leaves[(i + 1) % len(leaves)]
            self.transcript.append(command)
            return
        node = self.focus
        self._run(command, node)
        self.transcript.append(command)
        under = node.open_leaves()
        self._advance(prefer=under[0] if under else None)

    def undo(self):
        if not self.transcript:
            raise CommandError("nothing to undo")
        script = self.transcript[:-1]
        self._reset()
        self.transcript = []
        for sx in script:
            self.apply(sx)

    # -- command dispatch ----------------------------------------------------

    def _run(self, sx, node):
        if node is None or node.status != OPEN:
            raise CommandError("no open goal in focus")
        name = sx.items[0].atom
        args = list(sx.items[1:])
        handler = getattr(self, "_cmd_" + name.replace("-", "_"), None)
        if handler is None:
            raise CommandError(f"unknown command {name}")
        handler(node, args, PS.sexp_to_text(sx))

    def _subgoals_of(self, node):
        return [c for c in node.children if c.status == OPEN] \
            if node.status == EXPANDED else []

    def _cmd_then(self, node, args, rule):
        if not args:
            raise CommandError("(then ...) needs at least one command")
        self._run(args[0], node)
        for step in args[1:]:
            for leaf in list(node.open_leaves()):
                self._run(step, leaf)

    def _cmd_spread(self, node, args, rule):
        if len(args) < 2 or not args[1].is_list():
            raise CommandError("(spread (cmd) ((cmd...) ...)) expected")
        self._run(args[0], node)
        leaves = list(node.open_leaves())
        branches = list(args[1].items)
        if len(branches) > len(leaves):
            raise CommandError(f"spread got {len(branches)} branches for "
                               f"{len(leaves)} subgoals")
        for leaf, branch in zip(leaves, branches):
            if not branch.is_list():
                raise CommandError("each spread branch must be a list")
            for step in branch.items:
                open_here = leaf.open_leaves()
                if not open_here:
                    break
                for sub in open_here:
                    self._run(step, sub)

    def _cmd_flatten(self, node, args, rule):
        out = flatten_seq(node.goal)
        if out == node.goal:
            raise CommandError("nothing to flatten")
        self._resolve(node, None if trivially_closed(out) else [out], rule)

    def _cmd_split(self, node, args, rule):
        kids = split_seq(node.goal)
        if kids is None:
            raise CommandError("no formula to split on")
        self._resolve(node, kids, rule)

    def _cmd_prop(self, node, args, rule):
        self._resolve(node, prop_leaves(node.goal), rule)

    def _cmd_assert(self, node, args, rule):
        out = assert_seq(self.world, node.goal)
        self._resolve(node, None if out is None else [out], rule)

    # -- formula fetch and elaboration ---------------------------------------

    def _env(self):
        env = TC.Env(self.world, theory_key=self.checked.key,
                     scope=self.checked.scope)
        for ent in self.world.extra.values():
            env.add(ent.name, ent)
        return env

    def _fnum(self, sx, optional=False):
        if sx is None:
            if optional:
                return None
            raise CommandError("a formula number is required")
        try:
            k = int(sx.atom)
        except (TypeError, ValueError):
            raise CommandError(f"expected a formula number, got "
                               f"{PS.sexp_to_text(sx)}")
        if k == 0:
            raise CommandError("formula numbers are nonzero")
        return k

    def _formula_at(self, seq, k):
        try:
            return seq.formula(k)
        except IndexError:
            raise CommandError(f"no formula numbered {k} in this goal")

    def _parse_arg_expr(self, sx, expected=None):
        if not isinstance(sx.atom, str) or sx.is_list():
            raise CommandError("expected a quoted term")
        try:
            raw = PS.parse_expr(sx.atom)
        except PS.ParseError as err:
            raise CommandError(f"cannot parse term {sx.atom!r}: {err}")
        env = self._env()
        try:
            core, ty = TC.elab(env, raw, expected)
        except T.SequoiaError as err:
            raise CommandError(f"ill-typed term {sx.atom!r}: {err}")
        if core is not None and TC.max_loose_depth(core) >= 0:
            raise CommandError(f"term {sx.atom!r} mentions bound variables")
        side = [f for _, f in env.tcc_buffer]
        if expected is not None and core is not None:
            try:
                side.extend(TC.assign_obligations(ty, expected, core, env))
            except T.SequoiaError as err:
                raise CommandError(f"ill-typed term {sx.atom!r}: {err}")
        return core, ty, side

    def _parse_type_actual(self, sx):
        try:
            raw = PS.parse_type(sx.atom)
        except PS.ParseError as err:
            raise CommandError(f"cannot parse type {sx.atom!r}: {err}")
        try:
            return TC.elab_type(self._env(), raw)
        except T.SequoiaError as err:
            raise CommandError(f"bad type actual {sx.atom!r}: {err}")

    def _named_formula(self, name):
        for ent in self._env().lookup(name):
            if isinstance(ent, TC.FormulaEntry):
                return ent
        raise CommandError(f"no axiom or lemma named {name}")

    def _lemma_instance(self, args):
        name = args[0].atom
        ent = self._named_formula(name)
        formula = ent.formula
        if ent.tyvars:
            if len(args) - 1 != len(ent.tyvars):
                raise CommandError(
                    f"{name} needs {len(ent.tyvars)} type actuals")
            acts = [self._parse_type_actual(a) for a in args[1:]]
            formula = TC.subst_tyvars_expr(
                formula, dict(zip(ent.tyvars, acts)))
        elif len(args) > 1:
            raise CommandError(f"{name} takes no type actuals")
        if ent.role == TC.CONJECTURE or ent.tcc is not None:
            self.cited.add(ent.delegate or ent.ref)
        return formula

    def _side_goals(self, node, side):
        """Try to auto-discharge obligations; return the stubborn ones."""
        out = []
        for f in side:
            goal = mk_seq(node.goal.antecedents,
                          tuple(node.goal.succedents) + (f,))
            if assert_seq(self.world, goal) is None:
                continue
            if prop_tautology_safe(goal):
                continue
            out.append(goal)
        return out

    def _cmd_lemma(self, node, args, rule):
        if not args:
            raise CommandError("(lemma \"name\") expected")
        formula = self._lemma_instance(args)
        seq = mk_seq((formula,) + node.goal.antecedents, node.goal.succedents)
        self._resolve(node, [seq], rule)

    def _cmd_inst(self, node, args, rule):
        k = self._fnum(args[0] if args else None)
        terms = args[1:]
        if not terms:
            raise CommandError("(inst fnum \"term\" ...) expected")
        f = self._formula_at(node.goal, k)
        side = []
        for tx in terms:
            if k < 0 and isinstance(f, Forall) \
                    or k > 0 and isinstance(f, Exists):
                core, ty, tccs = self._parse_arg_expr(tx, f.binder.type)
                side.extend(tccs)
                f = beta_reduce(open_expr(f.body, (core,)))
            else:
                raise CommandError(
                    "inst needs a universal antecedent or "
                    "existential succedent")
        ante, succ = list(node.goal.antecedents), list(node.goal.succedents)
        if k < 0:
            ante[-k - 1] = f
        else:
            succ[k - 1] = f
        goals = [mk_seq(ante, succ)] + self._side_goals(node, side)
        self._resolve(node, goals, rule)

    def _skolemize(self, f, names, polarity):
        """Open leading binders with fresh constants; returns (formula,
        type-predicate antecedents)."""
        facts = []
        want = (Exists,) if polarity < 0 else (Forall,)
        i = 0
        while isinstance(f, want):
            b = f.binder
            if names and i < len(names):
                nm = names[i]
            else:
                self.skolems += 1
                nm = f"{b.name}!{self.skolems}"
            ref = f"{self.checked.key}.{self.target}.sk.{nm}"
            ent = TC.ConstEntry(ref, nm, (), b.type, theory=self.checked.key)
            self.world.extra[ref] = ent
            c = Const(ref, nm)
            for step in TC.subtype_chain(b.type)[:-1]:
                try:
                    fact = TC.type_pred(step, c)
                except T.SequoiaError:
                    continue
                # numeric range facts stay implicit (assert consults the
                # declared type); predicate facts become antecedents
                if LA.constraint_of(fact, True) is None:
                    facts.append(fact)
            f = open_expr(f.body, (c,))
            i += 1
        if i == 0:
            raise CommandError("no binder to skolemize")
        return f, facts

    def _cmd_skolem(self, node, args, rule):
        k = self._fnum(args[0] if args else None)
        names = [a.atom for a in args[1:]]
        f = self._formula_at(node.goal, k)
        f, facts = self._skolemize(f, names, polarity=k)
        ante, succ = list(node.goal.antecedents), list(node.goal.succedents)
        if k < 0:
            ante[-k - 1] = f
        else:
            succ[k - 1] = f
        self._resolve(node, [mk_seq(ante + facts, succ)], rule)

    def _cmd_skeep(self, node, args, rule):
        k = self._fnum(args[0] if args else None, optional=True)
        if k is None:
            k = next((i + 1 for i, f in enumerate(node.goal.succedents)
                      if isinstance(f, Forall)), None)
            if k is None:
                k = next((-i - 1 for i, f in enumerate(node.goal.antecedents)
                          if isinstance(f, Exists)), None)
            if k is None:
                raise CommandError("nothing to skolemize")
        f = self._formula_at(node.goal, k)
        f, facts = self._skolemize(f, [], polarity=k)
        ante, succ = list(node.goal.antecedents), list(node.goal.succedents)
        if k < 0:
            ante[-k - 1] = f
        else:
            succ[k - 1] = f
        out = flatten_seq(mk_seq(ante + facts, succ))
        self._resolve(node, None if trivially_closed(out) else [out], rule)

    def _expand_entries(self, name):
        out = []
        for ent in self._env().lookup(name):
            if isinstance(ent, TC.ConstEntry) and ent.body is not None:
                out.append(ent)
        if not out:
            raise CommandError(f"no expandable definition named {name}")
        return out

    def _cmd_expand(self, node, args, rule):
        if not args:
            raise CommandError("(expand \"name\") expected")
        name = args[0].atom
        ents = {e.ref: e for e in self._expand_entries(name)}
        self.expanded.add(name)
        only = None
        if len(args) > 1:
            only = self._fnum(args[1])
        occ = None
        if len(args) > 2:
            occ = self._fnum(args[2])
        seen = [0]  # occurrence counter, bottom-up traversal order

        def want_this():
            seen[0] += 1
            return occ is None or seen[0] == occ

        def unfold(e):
            if isinstance(e, (Num, BoolLit, Const, BVar, T.Var)):
                return _unfold_leaf(e)
            e = T.map_expr(e, unfold)
            if isinstance(e, App):
                root, argss = _spine(e)
                if isinstance(root, Const) and root.ref in ents:
                    ent = ents[root.ref]
                    got = _open_def(ent, root.actuals, argss)
                    if got is not None and want_this():
                        return got
            return e

        def _unfold_leaf(e):
            if isinstance(e, Const) and e.ref in ents:
                got = _open_def(ents[e.ref], e.actuals, [])
                if got is not None and want_this():
                    return got
            return e

        def visit(f, k):
            if only is not None and k != only:
                return f
            return beta_reduce(unfold(f))

        ante = [visit(f, -(i + 1))
                for i, f in enumerate(node.goal.antecedents)]
        succ = [visit(f, i + 1) for i, f in enumerate(node.goal.succedents)]
        out = mk_seq(ante, succ)
        if out == node.goal:
            raise CommandError(f"{name} does not occur in this goal")
        self._resolve(node, None if trivially_closed(out) else [out], rule)

    def _cmd_case(self, node, args, rule):
        if not args:
            raise CommandError("(case \"formula\") expected")
        f, ty, side = self._parse_arg_expr(args[0], BOOL)
        goals = [mk_seq((f,) + node.goal.antecedents, node.goal.succedents),
                 mk_seq(node.goal.antecedents, (f,) + node.goal.succedents)]
        self._resolve(node, goals + self._side_goals(node, side), rule)

    def _cmd_replace(self, node, args, rule):
        k = self._fnum(args[0] if args else None)
        f = self._formula_at(node.goal, k)
        if k > 0 or not isinstance(f, Eq):
            raise CommandError("replace needs an antecedent equality")
        lhs, rhs = f.lhs, f.rhs
        if len(args) > 1:
            if args[1].atom != "rl":
                raise CommandError("replace direction must be rl")
            lhs, rhs = rhs, lhs
        ante, succ = list(node.goal.antecedents), list(node.goal.succedents)
        for i, g in enumerate(ante):
            if i != -k - 1:
                ante[i] = _rewrite_everywhere(g, lhs, rhs)
        succ = [_rewrite_everywhere(g, lhs, rhs) for g in succ]
        out = mk_seq(ante, succ)
        self._resolve(node, None if trivially_closed(out) else [out], rule)

    def _cmd_rewrite(self, node, args, rule):
        if not args:
            raise CommandError("(rewrite \"name\") expected")
        formula = self._lemma_instance(args)
        nvars = 0
        while isinstance(formula, Forall):
            formula = formula.body
            nvars += 1
        if not isinstance(formula, (Eq, Iff)):
            raise CommandError("rewrite needs an equation or equivalence")
        pat, rhs = formula.lhs, formula.rhs
        binds = None
        for g in node.goal.antecedents + node.goal.succedents:
            binds = _find_match(pat, g, nvars)
            if binds is not None:
                break
        if binds is None:
            raise CommandError("no subterm matches the rewrite's left side")
        reps = tuple(binds[i] for i in range(nvars))
        lhs_i = beta_reduce(_open_all(pat, reps, nvars))
        rhs_i = beta_reduce(_open_all(rhs, reps, nvars))
        ante = [_rewrite_everywhere(g, lhs_i, rhs_i)
                for g in node.goal.antecedents]
        succ = [_rewrite_everywhere(g, lhs_i, rhs_i)
                for g in node.goal.succedents]
        out = mk_seq(ante, succ)
        self._resolve(node, None if trivially_closed(out) else [out], rule)

    def _cmd_induct(self, node, args, rule):
        if not args:
            raise CommandError("(induct \"var\") expected")
        var = args[0].atom
        if not node.goal.succedents:
            raise CommandError("no succedent to induct on")
        f = node.goal.succedents[0]
        if not isinstance(f, Forall) or f.binder.name != var:
            raise CommandError(
                f"succedent [1] is not FORALL ({var}: nat): ...")
        if TC.widen_all(f.binder.type) != INT or NAT not in \
                TC.subtype_chain(f.binder.type):
            raise CommandError("induction is over nat variables only")
        body = f.body
        base = beta_reduce(open_expr(body, (Num(0),)))
        tmp = Const(f"tmp${self.world.fresh_ph()}", var)
        succ_j = open_expr(body, (tmp,))
        plus1 = App(Const("prelude.+#int", "+"), (tmp, Num(1)))
        succ_j1 = open_expr(body, (plus1,))
        step = Forall(Binder(NAT, var),
                      abstract_expr(Implies(succ_j, succ_j1), (tmp.ref,)))
        rest_succ = node.goal.succedents[1:]
        goals = [mk_seq(node.goal.antecedents, (base,) + rest_succ),
                 mk_seq(node.goal.antecedents, (step,) + rest_succ)]
        self._resolve(node, goals, rule)

    def _cmd_measure_induct(self, node, args, rule):
        if len(args) < 2:
            raise CommandError("(measure-induct \"var\" \"measure\") expected")
        var = args[0].atom
        if not node.goal.succedents:
            raise CommandError("no succedent to induct on")
        f = node.goal.succedents[0]
        if not isinstance(f, Forall) or f.binder.name != var:
            raise CommandError(
                f"succedent [1] is not FORALL ({var}: ...): ...")
        try:
            raw = PS.parse_expr(args[1].atom)
        except PS.ParseError as err:
            raise CommandError(f"cannot parse measure: {err}")
        env = self._env()
        with env.push([(var, f.binder.type)]):
            try:
                m, _ = TC.elab(env, raw, NAT)
            except T.SequoiaError as err:
                raise CommandError(f"ill-typed measure: {err}")
        body = f.body
        inner = Forall(Binder(f.binder.type, "w"),
                       Implies(TC.mk_lt(m, shift_bvars(m, 1)), body))
        strengthened = Forall(f.binder,
                              Implies(inner, body))
        rest_succ = node.goal.succedents[1:]
        self._resolve(node, [mk_seq(node.goal.antecedents,
                                    (strengthened,) + rest_succ)], rule)

    def _cmd_decompose_equality(self, node, args, rule):
        k = self._fnum(args[0] if args else None, optional=True)
        spots = [k] if k is not None else \
            [-(i + 1) for i in range(len(node.goal.antecedents))] + \
            [i + 1 for i in range(len(node.goal.succedents))]
        for spot in spots:
            f = self._formula_at(node.goal, spot)
            neg = isinstance(f, Not)
            eq = f.arg if neg else f
            if not isinstance(eq, Eq):
                continue
            ft = self._fun_type_of(eq.lhs)
            if ft is None:
                continue
            pointwise = _pointwise(eq.lhs, eq.rhs, ft)
            ante = list(node.goal.antecedents)
            succ = list(node.goal.succedents)
            if neg:
                # the (dis)equality holds iff the pointwise form does;
                # the negation flips which side receives it
                if spot < 0:
                    del ante[-spot - 1]
                    succ.append(pointwise)
                else:
                    del succ[spot - 1]
                    ante.append(pointwise)
            else:
                if spot < 0:
                    ante[-spot - 1] = pointwise
                else:
                    succ[spot - 1] = pointwise
            out = mk_seq(ante, succ)
            self._resolve(node, None if trivially_closed(out) else [out],
                          rule)
            return
        raise CommandError("no function or set (dis)equality to decompose")

    def _fun_type_of(self, e):
        try:
            ty = TC.infer_type(self.world, e)
        except T.SequoiaError:
            return None
        w = TC.widen_all(ty)
        return w if isinstance(w, TFun) else None


def _pointwise(l, r, ft: TFun):
    """FORALL (x: dom): l(x) = r(x), with Iff at bool codomain."""
    n = len(ft.doms)
    args = tuple(BVar(n - 1 - i, 0) for i in range(n))
    la = beta_reduce(App(shift_bvars(l, n), args))
    ra = beta_reduce(App(shift_bvars(r, n), args))
    if ft.cod == BOOL:
        body = _simp(Iff(la, ra))
    else:
        body = Eq(la, ra)
    for i in range(n - 1, -1, -1):
        body = Forall(Binder(TC.shift_type(ft.doms[i], i), f"x{i + 1}"
                             if n > 1 else "x"), body)
    return body


def prop_tautology_safe(seq) -> bool:
    try:
        return prop_tautology(seq)
    except CommandError:
        return False


def _spine(e):
    argss = []
    while isinstance(e, App):
        argss.append(e.args)
        e = e.fn
    return e, list(reversed(argss))


def _open_all(e, reps, nvars):
    """Open `e` whose BVars (depth 0..nvars-1, slot 0) are pattern vars."""
    for d in range(nvars):
        e = open_expr(e, (reps[d],))
    return e


def _open_def(ent: TC.ConstEntry, actuals, argss):
    """Substitute a definition body for an application, or None."""
    body = ent.body
    if body is None:
        return None
    if ent.tyvars:
        body = TC.subst_tyvars_expr(body, dict(zip(ent.tyvars, actuals)))
    if len(argss) < len(ent.groups):
        if argss:
            return None  # partial applications stay folded
        groups = ent.groups
        if ent.tyvars:
            m = dict(zip(ent.tyvars, actuals))
            groups = tuple(
                tuple(Binder(TC.subst_tyvars(b.type, m), b.name) for b in g)
                for g in groups)
        for g in reversed(groups):
            body = Lambda(g, body)
        return body
    take = argss[:len(ent.groups)]
    rest = argss[len(ent.groups):]
    for args in reversed(take):
        body = open_expr(body, tuple(args))
    for args in rest:
        body = App(body, tuple(args))
    return body


# ---------------------------------------------------------------------------
# Script replay
# ---------------------------------------------------------------------------


@dataclass
class ReplayEntry:
    name: str
    status: str  # proved | open | error | unscripted | axiom | delegated
    detail: str = ""
    open_goals: int = 0
    pending: bool = False  # closed while citing a then-unproved conjecture
    cited: set = field(default_factory=set)
    expanded: set = field(default_factory=set)


@dataclass
class ReplayReport:
    theory: str
    entries: list

    def entry(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        return None

    @property
    def all_proved(self):
        return all(e.status in ("proved", "axiom", "delegated")
                   for e in self.entries)


def replay(world, checked: TC.CheckedTheory, script: PS.ProofScript,
           outside_proved=frozenset()) -> ReplayReport:
    """Replay every script entry and settle proved-ness by fixpoint.

    A formula counts proved only when its tree is closed, every
    conjecture its proof cites is proved, and every TCC of every
    definition it expands is proved.  `outside_proved` carries refs
    already established elsewhere (imports of this theory).
    """
    scripted = dict(script.entries)
    entries = []
    closed = {}  # ref -> ReplayEntry for closed trees
    for fe in checked.formulas + checked.tccs:
        if fe.role == TC.AXIOM:
            entries.append(ReplayEntry(fe.name, "axiom"))
            continue
        if fe.delegate is not None and fe.name not in scripted:
            e = ReplayEntry(fe.name, "delegated", detail=fe.delegate)
            e.cited = {fe.delegate}
            entries.append(e)
            closed[fe.ref] = e
            continue
        if fe.name not in scripted:
            entries.append(ReplayEntry(fe.name, "unscripted"))
            continue
        entry = _replay_one(world, checked, fe, scripted[fe.name])
        entries.append(entry)
        if entry.status == "proved":
            closed[fe.ref] = entry

    # dependency fixpoint: an entry stays proved only if everything it
    # cites (and the TCCs of what it expands) is proved
    tcc_of_def = {}
    for fe in checked.tccs:
        if fe.tcc is not None:
            tcc_of_def.setdefault(fe.tcc.origin, []).append(fe.ref)
    proved = set(closed) | set(outside_proved)
    proved |= {fe.ref for fe in checked.formulas if fe.role == TC.AXIOM}
    changed = True
    while changed:
        changed = False
        for ref, entry in closed.items():
            if ref not in proved:
                continue
            deps = set(entry.cited)
            for d in entry.expanded:
                deps.update(tcc_of_def.get(d, []))
            missing = {d for d in deps if _dep_unproved(d, proved, checked)}
            if missing:
                proved.discard(ref)
                entry.status = "open"
                entry.detail = "unproved dependencies: " + \
                    ", ".join(sorted(_short(m) for m in missing))
                changed = True
    for ref, entry in closed.items():
        if ref in proved and entry.pending:
            entry.status = "proved"
    return ReplayReport(checked.key, entries)


def _short(ref):
    return ref.rsplit(".", 1)[-1]


def _dep_unproved(dep, proved, checked):
    if dep in proved:
        return False
    # expanded definitions are recorded by name; any theory may own them
    if "." not in dep:
        return False
    return True


def _replay_one(world, checked, fe, steps):
    try:
        session = ProofSession(world, checked, fe.name)
    except CommandError as err:
        return ReplayEntry(fe.name, "error", detail=str(err))
    pending = False
    for i, sx in enumerate(steps):
        try:
            session.apply(sx)
        except CommandError as err:
            return ReplayEntry(
                fe.name, "error",
                detail=f"step {i + 1} {PS.sexp_to_text(sx)}: {err}",
                open_goals=len(session.open_goals()),
                cited=set(session.cited), expanded=set(session.expanded))
    entry = ReplayEntry(fe.name,
                        "proved" if session.proved() else "open",
                        open_goals=len(session.open_goals()),
                        cited=set(session.cited),
                        expanded=set(session.expanded))
    entry.pending = bool(session.cited) and session.proved()
    return entry
