"""Elaboration and typechecking.

Turns raw parser output into core terms (de Bruijn binders, resolved
constants) while generating type-correctness conditions (TCCs):

* subtype obligations whenever a value flows into a predicate subtype,
* termination obligations for recursive definitions,
* nonemptiness obligations for `choose`,
* existence obligations for nonempty-type actuals of theory imports.

Obligations are closed over exactly the binders they need, and guards
accumulated from the logical structure (left conjuncts, negated left
disjuncts, implication antecedents, IF conditions) become antecedents.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field, replace
from typing import Optional

from . import printer as P
from . import terms as T
from .terms import (App, BVar, Binder, BoolLit, Const, Eq, Exists, Expr,
                    Forall, Implies, Iff, Ite, Lambda, Name, Not, Num, Or,
                    And, RawBind, Var, TCC, TypeExpr, TBase, TBelow, TFun,
                    TSub, TTuple, TApp, BOOL, INT, NAT, POSNAT, REAL, tset)


class TypecheckError(T.SequoiaError):
    pass


class ResolutionError(TypecheckError):
    """A resolution candidate does not fit; callers may try the next one."""


# ---------------------------------------------------------------------------
# Entries: what names resolve to
# ---------------------------------------------------------------------------


@dataclass
class ConstEntry:
    """A constant or definition.

    `groups` is the chain of argument groups; each group is a tuple of
    Binders forming one binder frame.  Types in later groups and the
    return type may reference earlier groups through BVars (the frame
    immediately enclosing is depth 0).  `body` and `measure` live under
    the full chain.  `tyvars` lists schematic type variables (prelude
    polymorphism); they appear in types as TBase names starting with "'".
    """

    ref: str
    name: str
    groups: tuple
    rettype: TypeExpr
    body: Optional[Expr] = None
    tyvars: tuple = ()
    recursive: bool = False
    measure: Optional[Expr] = None
    kind: str = "const"  # const | def | param | skolem
    theory: str = ""


@dataclass
class TypeEntry:
    ref: str
    name: str
    value: Optional[TypeExpr] = None  # None => uninterpreted (prints as name)
    nonempty: bool = True


@dataclass
class ExprAlias:
    """A theory constant parameter bound to an actual expression."""

    name: str
    expr: Expr
    type: TypeExpr


AXIOM = "axiom"
CONJECTURE = "conjecture"
OBLIGATION = "obligation"


@dataclass
class FormulaEntry:
    ref: str
    name: str
    formula: Expr
    role: str  # axiom | conjecture | obligation
    tyvars: tuple = ()
    theory: str = ""
    tcc: Optional[TCC] = None
    # Proof of the named generic formula also establishes this instance.
    delegate: Optional[str] = None


@dataclass
class CheckedTheory:
    name: str
    instkey: str  # "" for the generic (uninstantiated) form
    scope: dict
    var_types: dict
    formulas: list  # FormulaEntry for axioms/conjectures in order
    tccs: list  # FormulaEntry with role=obligation, in generation order
    imports: list = field(default_factory=list)
    exports: list = field(default_factory=list)  # (name, entry) visible to importers

    @property
    def key(self):
        return self.name if not self.instkey else f"{self.name}[{self.instkey}]"

    def formula_named(self, name):
        for f in self.formulas + self.tccs:
            if f.name == name:
                return f
        return None


# ---------------------------------------------------------------------------
# Type utilities
# ---------------------------------------------------------------------------


def is_tyvar(t) -> bool:
    return isinstance(t, TBase) and t.name.startswith("'")


def has_tyvars(t) -> bool:
    if isinstance(t, TBase):
        return is_tyvar(t)
    if isinstance(t, TFun):
        return any(has_tyvars(d) for d in t.doms) or has_tyvars(t.cod)
    if isinstance(t, TTuple):
        return any(has_tyvars(p) for p in t.parts)
    if isinstance(t, TSub):
        return (t.base is not None and has_tyvars(t.base)) or expr_has_tyvars(t.pred)
    if isinstance(t, TBelow):
        return expr_has_tyvars(t.bound)
    return False


def expr_has_tyvars(e) -> bool:
    for s in T.walk(e):
        if isinstance(s, Const) and any(has_tyvars(a) for a in s.actuals):
            return True
        if isinstance(s, Lambda) and any(has_tyvars(b.type) for b in s.binders):
            return True
        if isinstance(s, (Forall, Exists)) and has_tyvars(s.binder.type):
            return True
    return False


def subst_tyvars(t: TypeExpr, m: dict) -> TypeExpr:
    if isinstance(t, TBase):
        return m.get(t.name, t)
    if isinstance(t, TFun):
        return TFun(tuple(subst_tyvars(d, m) for d in t.doms),
                    subst_tyvars(t.cod, m))
    if isinstance(t, TTuple):
        return TTuple(tuple(subst_tyvars(p, m) for p in t.parts))
    if isinstance(t, TSub):
        base = subst_tyvars(t.base, m) if t.base is not None else None
        return TSub(base, subst_tyvars_expr(t.pred, m))
    if isinstance(t, TBelow):
        return TBelow(subst_tyvars_expr(t.bound, m))
    return t


def subst_tyvars_expr(e: Expr, m: dict) -> Expr:
    if isinstance(e, Const) and e.actuals:
        return Const(e.ref, e.name, tuple(subst_tyvars(a, m) for a in e.actuals))
    if isinstance(e, Lambda):
        bs = tuple(Binder(subst_tyvars(b.type, m), b.name) for b in e.binders)
        return Lambda(bs, subst_tyvars_expr(e.body, m), e.style)
    if isinstance(e, (Forall, Exists)):
        b = Binder(subst_tyvars(e.binder.type, m), e.binder.name)
        return type(e)(b, subst_tyvars_expr(e.body, m))
    return T.map_expr(e, lambda x: subst_tyvars_expr(x, m))


def shift_type(t: TypeExpr, amount: int, cutoff: int = 0) -> TypeExpr:
    return T.map_type(t, lambda e: T.shift_bvars(e, amount, cutoff))


def open_type(t: TypeExpr, replacements: tuple, depth: int = 0) -> TypeExpr:
    return T.map_type(t, lambda e: T.open_expr(e, replacements, depth))


def max_loose_depth(e: Expr, d: int = -1) -> int:
    """Greatest depth of a BVar escaping `d` nesting levels (-1 if none)."""
    best = -1
    if isinstance(e, BVar):
        return e.depth
    if isinstance(e, Lambda):
        for b in e.binders:
            best = max(best, type_loose_depth(b.type))
        inner = max_loose_depth(e.body)
        return max(best, inner - 1)
    if isinstance(e, (Forall, Exists)):
        best = type_loose_depth(e.binder.type)
        return max(best, max_loose_depth(e.body) - 1)
    for s in T.subexprs(e):
        best = max(best, max_loose_depth(s))
    return best


def type_loose_depth(t: TypeExpr) -> int:
    best = -1
    for e in T.type_exprs(t):
        best = max(best, max_loose_depth(e))
    return best


# -- subtype widening ---------------------------------------------------------


def widen_once(t: TypeExpr) -> Optional[TypeExpr]:
    if isinstance(t, TSub):
        return t.base
    if isinstance(t, TBelow):
        return NAT
    if t == POSNAT:
        return NAT
    if t == NAT:
        return INT
    return None


def widen_all(t: TypeExpr) -> TypeExpr:
    while True:
        w = widen_once(t)
        if w is None:
            return t
        t = w


def subtype_chain(t: TypeExpr) -> list:
    out = [t]
    while True:
        w = widen_once(out[-1])
        if w is None:
            return out
        out.append(w)


# Refs for the arithmetic primitives used when constructing obligations.
REF_LT = "prelude.<"
REF_LE = "prelude.<="
REF_GT = "prelude.>"
REF_GE = "prelude.>="
REF_NONEMPTY = "prelude.nonempty?"
REF_CHOOSE = "prelude.choose"


def mk_lt(a, b):
    return App(Const(REF_LT, "<"), (a, b))


def mk_le(a, b):
    return App(Const(REF_LE, "<="), (a, b))


def mk_ge(a, b):
    return App(Const(REF_GE, ">="), (a, b))


def mk_and(parts):
    parts = list(parts)
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = And(p, out)
    return out


def type_pred(t: TypeExpr, x: Expr) -> Expr:
    """The predicate separating `t` from its one-step widening, at `x`."""
    if isinstance(t, TSub):
        return T.beta_reduce(App(t.pred, (x,)))
    if isinstance(t, TBelow):
        return mk_lt(x, t.bound)
    if t == POSNAT:
        return mk_ge(x, Num(1))
    if t == NAT:
        return mk_ge(x, Num(0))
    raise TypecheckError(f"type {t!r} has no separating predicate")


def numeric_le(a: TypeExpr, b: TypeExpr) -> bool:
    return a == INT and b == REAL


def pt(t) -> str:
    try:
        return P.Printer().type(t)
    except Exception:
        return repr(t)


def assign_obligations(at: TypeExpr, et: TypeExpr, expr: Expr,
                       env: "Env" = None) -> list:
    """Proof obligations for a value of type `at` used at type `et`.

    Raises ResolutionError when the types are incompatible outright.
    """
    achain = subtype_chain(at)
    echain = subtype_chain(et)
    for k, e_t in enumerate(echain):
        if any(a == e_t for a in achain) or numeric_le(achain[-1], e_t):
            return [type_pred(echain[j], expr) for j in range(k)]
    ab, eb = achain[-1], echain[-1]
    if isinstance(ab, TFun) and isinstance(eb, TFun) \
            and len(ab.doms) == len(eb.doms):
        ob = _fun_obligation(ab, eb, echain, expr, env)
        return [] if ob == T.TRUE else [ob]
    raise ResolutionError(f"type mismatch: expected {pt(et)}, got {pt(at)}")


def _fun_obligation(ab: TFun, eb: TFun, echain, expr, env) -> Expr:
    """Covariant-codomain obligation: values at each expected-domain point
    land in the expected codomain (and satisfy any expected fun-subtype
    predicates).  Domains are checked contravariantly."""
    counter = env.fresh_ph if env is not None else _module_ph
    names = [f"x{i + 1}" if len(eb.doms) > 1 else "x"
             for i in range(len(eb.doms))]
    phs = [Const(counter(), n) for n in names]
    obls = []
    for ph, ed, ad in zip(phs, eb.doms, ab.doms):
        obls.extend(assign_obligations(ed, ad, ph, env))
    obls.extend(assign_obligations(ab.cod, eb.cod, App(expr, tuple(phs)), env))
    for sub in echain[:-1]:
        obls.append(type_pred(sub, expr))
    if not obls:
        return T.TRUE
    return forall_close(list(zip(phs, names, eb.doms)), mk_and(obls))


_ph_counter = [0]


def _module_ph():
    _ph_counter[0] += 1
    return f"ph${_ph_counter[0]}"


def forall_close(pairs, body: Expr) -> Expr:
    """Universally close `body` over placeholder constants.

    `pairs` is a list of (placeholder Const, display name, type) from
    outermost to innermost; types may mention earlier placeholders.
    """
    for ph, name, ty in reversed(pairs):
        body = Forall(Binder(ty, name), T.abstract_expr(body, (ph.ref,)))
    return body


def join_type(a: TypeExpr, b: TypeExpr) -> TypeExpr:
    """Least common widening (branches of IF, sides of =)."""
    if a == b:
        return a
    ach, bch = subtype_chain(a), subtype_chain(b)
    for t in ach:
        if t in bch:
            return t
    wa, wb = ach[-1], bch[-1]
    if {wa, wb} == {INT, REAL} or (wa == REAL and wb == REAL):
        return REAL
    if numeric_le(wa, wb) or numeric_le(wb, wa):
        return REAL
    raise ResolutionError(f"incompatible types {pt(a)} and {pt(b)}")


# ---------------------------------------------------------------------------
# World: global registry of theories and entries
# ---------------------------------------------------------------------------


class World:
    def __init__(self):
        self.raw = {}  # theory name -> raw Theory
        self.checked = {}  # (name, instkey) -> CheckedTheory
        self.entries = {}  # ref -> entry
        self.prelude_scope = {}  # name -> [entries], appended in order
        self._ph = 0

    def fresh_ph(self) -> str:
        self._ph += 1
        return f"ph${self._ph}"

    def register(self, entry):
        if entry.ref in self.entries:
            raise TypecheckError(f"duplicate ref {entry.ref}")
        self.entries[entry.ref] = entry

    def add_prelude(self, entry):
        self.register(entry)
        self.prelude_scope.setdefault(entry.name, []).append(entry)

    def add_raw(self, theory):
        if theory.name in self.raw:
            raise TypecheckError(f"theory {theory.name} already loaded")
        self.raw[theory.name] = theory

    def entry(self, ref):
        e = self.entries.get(ref)
        if e is None:
            raise TypecheckError(f"unknown reference {ref}")
        return e


# ---------------------------------------------------------------------------
# Elaboration environment
# ---------------------------------------------------------------------------


class Env:
    def __init__(self, world: World, theory_key: str = "", scope=None):
        self.world = world
        self.theory_key = theory_key
        # name -> list of entries; earlier in the list binds tighter
        self.scope = {k: list(v) for k, v in (scope or world.prelude_scope).items()}
        self.added = []  # (name, entry) in addition order, excluding prelude
        self.frames = []  # list of list[(name, TypeExpr)]
        self.guards = []  # list of (expr, depth at record time)
        self.var_types = {}  # VAR declarations
        self.var_seen = []  # free Var occurrence order (for closure)
        self.tcc_buffer = []  # (kind, closed formula)
        self.recursive_ref = None  # set while elaborating a recursive body
        self.rec_groups = None
        self.rec_measure = None
        self.rec_depth = 0
        self.collect_tccs = True

    # -- scope ------------------------------------------------------------

    def add(self, name, entry, front=True):
        lst = self.scope.setdefault(name, [])
        if entry in lst:
            return
        if front:
            lst.insert(0, entry)
        else:
            lst.append(entry)
        self.added.append((name, entry))

    def lookup(self, name):
        return self.scope.get(name, [])

    def fresh_ph(self):
        return self.world.fresh_ph()

    # -- binder frames ------------------------------------------------------

    @property
    def depth(self):
        return len(self.frames)

    @contextlib.contextmanager
    def push(self, frame):
        self.frames.append(frame)
        try:
            yield
        finally:
            self.frames.pop()

    @contextlib.contextmanager
    def guard(self, expr):
        self.guards.append((expr, self.depth))
        try:
            yield
        finally:
            self.guards.pop()

    def find_binder(self, name):
        for d in range(len(self.frames)):
            frame = self.frames[-1 - d]
            for slot, (n, ty) in enumerate(frame):
                if n == name:
                    return BVar(d, slot), shift_type(ty, d + 1)
        return None

    # -- TCC emission -------------------------------------------------------

    def emit_tcc(self, kind, core):
        if not self.collect_tccs:
            return
        self.tcc_buffer.append((kind, self.close_obligation(core)))

    def close_obligation(self, core: Expr) -> Expr:
        """Close a raw obligation over needed binders, guards, and VARs."""
        flat = []  # (placeholder Const, name, opened type)
        phs = []  # per-frame tuples of placeholders
        for frame in self.frames:
            opened = []
            for name, ty in frame:
                t = ty
                for repl in reversed(phs):
                    t = open_type(t, repl, 0)
                opened.append(t)
            frame_ph = tuple(Const(self.fresh_ph(), n) for n, _ in frame)
            for ph, (name, _), t in zip(frame_ph, frame, opened):
                flat.append((ph, name, t))
            phs.append(frame_ph)

        def fully_open(e):
            for repl in reversed(phs):
                e = T.open_expr(e, repl)
            return e

        body = fully_open(core)
        gs = []
        for g, d in self.guards:
            gs.append(fully_open(T.shift_bvars(g, self.depth - d)))
        if gs:
            body = Implies(mk_and(gs), body)
        # free VARs become outermost quantifiers
        vnames = []
        for v in _vars_in(body):
            if v not in vnames:
                vnames.append(v)
        order = [v for v in self.var_seen if v in vnames]
        for v in vnames:
            if v not in order:
                order.append(v)
        vpairs = []
        vsub = {}
        for v in order:
            ph = Const(self.fresh_ph(), v)
            vpairs.append((ph, v, self.var_types[v]))
            vsub[v] = ph
        if vsub:
            body = T.substitute(body, vsub)
        # prune binders not (transitively) needed
        needed = set()
        frontier = {r for r in T.free_consts(body)}
        for ph, name, ty in reversed(flat):
            if ph.ref in frontier:
                needed.add(ph.ref)
                for e in T.type_exprs(ty):
                    frontier |= T.free_consts(e)
        pairs = vpairs + [p for p in flat if p[0].ref in needed]
        return forall_close(pairs, body)


def _vars_in(e):
    out = []
    for s in T.walk(e):
        if isinstance(s, Var):
            out.append(s.name)
    return out


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


def elab_type(env: Env, raw: TypeExpr) -> TypeExpr:
    if isinstance(raw, TBase):
        for ent in env.lookup(raw.name):
            if isinstance(ent, TypeEntry):
                return ent.value if ent.value is not None else TBase(ent.name)
        raise TypecheckError(f"unknown type {raw.name}")
    if isinstance(raw, TFun):
        return TFun(tuple(elab_type(env, d) for d in raw.doms),
                    elab_type(env, raw.cod))
    if isinstance(raw, TTuple):
        return TTuple(tuple(elab_type(env, p) for p in raw.parts))
    if isinstance(raw, TSub):
        if raw.base is not None:  # already elaborated
            return raw
        pe, pt = elab(env, raw.pred)
        w = widen_all(pt)
        if not (isinstance(w, TFun) and len(w.doms) == 1 and w.cod == BOOL):
            raise TypecheckError("subtype predicate must be a set")
        return TSub(w.doms[0], pe)
    if isinstance(raw, TApp):
        if raw.name in ("set", "pred"):
            if len(raw.args) != 1:
                raise TypecheckError(f"{raw.name} takes one argument")
            return tset(to_type_actual(env, raw.args[0]))
        if raw.name == "below":
            if len(raw.args) != 1 or isinstance(raw.args[0], TypeExpr):
                raise TypecheckError("below takes one numeric argument")
            be, bt = elab(env, raw.args[0], expected=NAT)
            for obl in assign_obligations(bt, NAT, be, env):
                env.emit_tcc("subtype", obl)
            return TBelow(be)
        raise TypecheckError(f"unknown type constructor {raw.name}")
    raise TypecheckError(f"cannot elaborate type {raw!r}")


def to_type_actual(env: Env, raw) -> TypeExpr:
    """Interpret an actual parameter as a type.

    A bare name may denote a type directly; any set-valued expression
    denotes the corresponding predicate subtype.
    """
    if isinstance(raw, TypeExpr):
        return elab_type(env, raw)
    if isinstance(raw, Name) and raw.actuals is not None \
            and raw.name in ("set", "pred", "below"):
        return elab_type(env, TApp(raw.name, raw.actuals))
    if isinstance(raw, Name) and raw.actuals is None \
            and env.find_binder(raw.name) is None:
        for ent in env.lookup(raw.name):
            if isinstance(ent, TypeEntry):
                return ent.value if ent.value is not None else TBase(ent.name)
    e, t = elab(env, raw)
    w = widen_all(t)
    if isinstance(w, TFun) and len(w.doms) == 1 and w.cod == BOOL:
        return TSub(w.doms[0], e)
    raise TypecheckError("actual parameter is neither a type nor a set")


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


def num_type(v: int) -> TypeExpr:
    if v > 0:
        return POSNAT
    if v == 0:
        return NAT
    return INT


def _spine(raw):
    argss = []
    while isinstance(raw, App):
        argss.insert(0, raw.args)
        raw = raw.fn
    return raw, argss


def elab(env: Env, raw: Expr, expected: Optional[TypeExpr] = None):
    """Elaborate a raw expression; returns (core expr, type)."""
    if isinstance(raw, Num):
        return raw, num_type(raw.value)
    if isinstance(raw, BoolLit):
        return raw, BOOL
    if isinstance(raw, Name):
        return _resolve_application(env, raw, [], expected)
    if isinstance(raw, App):
        root, argss = _spine(raw)
        if isinstance(root, Name):
            return _resolve_application(env, root, argss, expected)
        fe, ft = elab(env, root)
        return _apply_value(env, fe, ft, argss)
    if isinstance(raw, RawBind):
        return _elab_bind(env, raw)
    if isinstance(raw, Ite):
        ce, _ = _check_bool(env, raw.cond)
        with env.guard(ce):
            te, tt = elab(env, raw.then, expected)
        with env.guard(Not(ce)):
            ee, et = elab(env, raw.els, expected)
        return Ite(ce, te, ee), join_type(tt, et)
    if isinstance(raw, Eq):
        # one side may need the other's type to resolve (e.g. emptyset)
        try:
            le, lt = elab(env, raw.lhs)
        except TypecheckError:
            re_, rt = elab(env, raw.rhs)
            le, lt = elab(env, raw.lhs, expected=rt)
        else:
            re_, rt = elab(env, raw.rhs, expected=lt)
        join_type(lt, rt)  # raises on incompatibility
        return Eq(le, re_), BOOL
    if isinstance(raw, Not):
        ae, _ = _check_bool(env, raw.arg)
        return Not(ae, raw.neq_style), BOOL
    if isinstance(raw, And):
        le, _ = _check_bool(env, raw.lhs)
        with env.guard(le):
            re_, _ = _check_bool(env, raw.rhs)
        return And(le, re_), BOOL
    if isinstance(raw, Or):
        le, _ = _check_bool(env, raw.lhs)
        with env.guard(Not(le)):
            re_, _ = _check_bool(env, raw.rhs)
        return Or(le, re_), BOOL
    if isinstance(raw, Implies):
        le, _ = _check_bool(env, raw.lhs)
        with env.guard(le):
            re_, _ = _check_bool(env, raw.rhs)
        return Implies(le, re_), BOOL
    if isinstance(raw, Iff):
        le, _ = _check_bool(env, raw.lhs)
        re_, _ = _check_bool(env, raw.rhs)
        return Iff(le, re_), BOOL
    raise TypecheckError(f"cannot elaborate {raw!r}")


def _check_bool(env, raw):
    e, t = elab(env, raw, expected=BOOL)
    if widen_all(t) != BOOL:
        raise ResolutionError(f"expected a boolean, got {pt(t)}")
    return e, t


def _elab_bind(env: Env, raw: RawBind):
    if raw.kind in ("forall", "exists"):
        cls = Forall if raw.kind == "forall" else Exists
        items = []
        for names, ty in raw.groups:
            for n in names:
                items.append((n, ty))

        def go(i):
            if i == len(items):
                e, _ = _check_bool(env, raw.body)
                return e
            name, rawty = items[i]
            ty = _binder_type(env, name, rawty)
            with env.push([(name, ty)]):
                inner = go(i + 1)
            return cls(Binder(ty, name), inner)

        return go(0), BOOL
    # lambda / set comprehension: one frame with all binders
    frame = []
    binders = []
    for names, ty in raw.groups:
        for n in names:
            t = _binder_type(env, n, ty)
            frame.append((n, t))
            binders.append(Binder(t, n))
    with env.push(frame):
        if raw.kind == "set":
            body, _ = _check_bool(env, raw.body)
            return Lambda(tuple(binders), body, "set"), tset(frame[0][1])
        body, bt = elab(env, raw.body)
    cod = _close_cod(bt)
    return Lambda(tuple(binders), body), TFun(tuple(b.type for b in binders), cod)


def _close_cod(bt: TypeExpr) -> TypeExpr:
    """Widen a lambda body type until it no longer mentions the lambda's
    own binders, then re-express it outside the binder frame."""
    cod = bt
    while _refs_frame0(cod):
        w = widen_once(cod)
        if w is None:
            raise TypecheckError("lambda body type depends on its argument")
        cod = w
    return shift_type(cod, -1)


def _refs_frame0(t: TypeExpr) -> bool:
    def loose0(e, d=0):
        if isinstance(e, BVar):
            return e.depth == d
        if isinstance(e, Lambda):
            return any(loose0(x, d) for b in e.binders
                       for x in T.type_exprs(b.type)) or loose0(e.body, d + 1)
        if isinstance(e, (Forall, Exists)):
            return any(loose0(x, d) for x in T.type_exprs(e.binder.type)) \
                or loose0(e.body, d + 1)
        return any(loose0(s, d) for s in T.subexprs(e))
    return any(loose0(e) for e in T.type_exprs(t))


def _binder_type(env: Env, name: str, rawty) -> TypeExpr:
    if rawty is not None:
        return elab_type(env, rawty)
    if name in env.var_types:
        return env.var_types[name]
    raise TypecheckError(f"binder {name} has no type and no VAR declaration")


# -- application / resolution -------------------------------------------------


def _resolve_application(env: Env, root: Name, argss, expected):
    if root.name == "member" and root.actuals is None:
        if len(argss) != 1 or len(argss[0]) != 2:
            raise TypecheckError("member takes two arguments")
        xr, sr = argss[0]
        se, st = elab(env, sr)
        w = widen_all(st)
        if not (isinstance(w, TFun) and len(w.doms) == 1 and w.cod == BOOL):
            raise TypecheckError("second argument of member must be a set")
        xe, xt = elab(env, xr, expected=w.doms[0])
        for obl in assign_obligations(xt, w.doms[0], xe, env):
            env.emit_tcc("subtype", obl)
        return App(se, (xe,)), BOOL

    hit = env.find_binder(root.name)
    if hit is not None and root.actuals is None:
        be, bt = hit
        return _apply_value(env, be, bt, argss)
    if root.name in env.var_types and root.actuals is None:
        env.var_seen.append(root.name) if root.name not in env.var_seen else None
        return _apply_value(env, Var(root.name), env.var_types[root.name], argss)

    candidates = env.lookup(root.name)
    if not candidates:
        raise TypecheckError(f"unknown name {root.name}")
    errors = []
    for ent in candidates:
        if isinstance(ent, ExprAlias):
            if root.actuals is not None:
                continue
            mark = len(env.tcc_buffer)
            try:
                return _apply_value(env, ent.expr, ent.type, argss)
            except ResolutionError as ex:
                del env.tcc_buffer[mark:]
                errors.append(f"{ent.name}: {ex}")
                continue
        if isinstance(ent, TypeEntry):
            continue
        if isinstance(ent, FormulaEntry):
            continue
        mark = len(env.tcc_buffer)
        try:
            return _apply_entry(env, ent, root.actuals, argss, expected)
        except ResolutionError as ex:
            del env.tcc_buffer[mark:]
            errors.append(f"{ent.ref}: {ex}")
    raise TypecheckError(
        f"no resolution for {root.name}: " + "; ".join(errors) if errors
        else f"{root.name} does not name a constant")


def _apply_value(env: Env, fe: Expr, ft: TypeExpr, argss):
    for args in argss:
        w = widen_all(ft)
        if not isinstance(w, TFun):
            raise ResolutionError(f"cannot apply a value of type {pt(ft)}")
        if len(args) != len(w.doms):
            raise ResolutionError(
                f"expected {len(w.doms)} arguments, got {len(args)}")
        elab_args = []
        for raw_arg, dom in zip(args, w.doms):
            ae, at = elab(env, raw_arg, expected=dom)
            for obl in assign_obligations(at, dom, ae, env):
                env.emit_tcc("subtype", obl)
            elab_args.append(ae)
        fe = App(fe, tuple(elab_args))
        ft = w.cod
    return fe, ft


def entry_value_type(ent: ConstEntry) -> Optional[TypeExpr]:
    """The curried function type of an entry, or None if dependent."""
    t = ent.rettype
    for g in reversed(ent.groups):
        if type_loose_depth(t) >= 0:
            ok = False
            while True:
                w = widen_once(t)
                if w is None:
                    break
                t = w
                if type_loose_depth(t) < 0:
                    ok = True
                    break
            if not ok and type_loose_depth(t) >= 0:
                return None
        if any(type_loose_depth(b.type) >= 0 for b in g):
            return None
        t = TFun(tuple(b.type for b in g), t)
    return t


def tyvar_names(t) -> set:
    out = set()
    if isinstance(t, TBase):
        if is_tyvar(t):
            out.add(t.name)
        return out
    if isinstance(t, TFun):
        for d in t.doms:
            out |= tyvar_names(d)
        return out | tyvar_names(t.cod)
    if isinstance(t, TTuple):
        for p in t.parts:
            out |= tyvar_names(p)
        return out
    if isinstance(t, TSub):
        if t.base is not None:
            out |= tyvar_names(t.base)
        for s in T.walk(t.pred):
            if isinstance(s, Const):
                for a in s.actuals:
                    out |= tyvar_names(a)
            elif isinstance(s, Lambda):
                for b in s.binders:
                    out |= tyvar_names(b.type)
            elif isinstance(s, (Forall, Exists)):
                out |= tyvar_names(s.binder.type)
        return out
    return out


def _apply_entry(env: Env, ent: ConstEntry, explicit_actuals, argss, expected):
    # rename the entry's type variables apart from any schematic types
    # already in play (a prelude body may use the same letters)
    fresh_map = {}
    fresh_vars = []
    for tv in ent.tyvars:
        fv = f"{tv}${env.fresh_ph()[3:]}"
        fresh_map[tv] = TBase(fv)
        fresh_vars.append(fv)
    if fresh_map:
        ent = replace(ent,
                      groups=tuple(
                          tuple(Binder(subst_tyvars(b.type, fresh_map), b.name)
                                for b in g) for g in ent.groups),
                      rettype=subst_tyvars(ent.rettype, fresh_map),
                      tyvars=tuple(fresh_vars))

    binds = {}
    if explicit_actuals is not None:
        if len(explicit_actuals) != len(ent.tyvars):
            raise ResolutionError(
                f"{ent.name} takes {len(ent.tyvars)} type actuals")
        for tv, a in zip(ent.tyvars, explicit_actuals):
            binds[tv] = to_type_actual(env, a)

    groups = list(ent.groups)
    rettype = ent.rettype
    arg_groups = []
    consumed = 0
    for args in argss:
        if consumed >= len(groups):
            # spill into plain function application on the result type
            break
        group = groups[consumed]
        if len(args) != len(group):
            raise ResolutionError(
                f"{ent.name} expects {len(group)} arguments here")
        done = []
        fresh_set = set(ent.tyvars)
        for raw_arg, binder in zip(args, group):
            want = subst_tyvars(binder.type, binds)
            if tyvar_names(want) & fresh_set:
                ae, at = elab(env, raw_arg)
                if not _unify(want, at, binds, fresh_set):
                    raise ResolutionError(
                        f"cannot match {pt(at)} against {pt(binder.type)}")
            else:
                ae, at = elab(env, raw_arg, expected=want)
            done.append((ae, at))
        # with bindings complete, check assignability
        for (ae, at), binder in zip(done, group):
            want = subst_tyvars(binder.type, binds)
            if tyvar_names(want) & fresh_set:
                raise ResolutionError(f"cannot infer type actuals for {ent.name}")
            for obl in assign_obligations(at, want, ae, env):
                env.emit_tcc("subtype", obl)
        arg_exprs = tuple(ae for ae, _ in done)
        arg_groups.append(arg_exprs)
        consumed += 1
        # open the remaining chain with this group's arguments
        rest = []
        for j in range(consumed, len(groups)):
            rest.append(tuple(
                Binder(open_type(b.type, arg_exprs, j - consumed), b.name)
                for b in groups[j]))
        groups[consumed:] = rest
        rettype = open_type(rettype, arg_exprs, len(groups) - consumed)

    if ent.tyvars:
        missing = [tv for tv in ent.tyvars if tv not in binds]
        if missing:
            vt = entry_value_type(ent)
            if expected is not None and vt is not None \
                    and _unify(vt, expected, binds, set(ent.tyvars)):
                missing = [tv for tv in ent.tyvars if tv not in binds]
            if missing:
                raise ResolutionError(
                    f"cannot infer type actuals for {ent.name}")
    actuals = tuple(binds[tv] for tv in ent.tyvars)
    expr = Const(ent.ref, ent.name, actuals)
    for ga in arg_groups:
        expr = App(expr, ga)

    rettype = subst_tyvars(rettype, binds)
    if consumed < len(groups):
        # partially applied: the remaining chain must curry into a plain type
        t = rettype
        gs = [tuple(Binder(subst_tyvars(b.type, binds), b.name) for b in g)
              for g in groups[consumed:]]
        for g in reversed(gs):
            while type_loose_depth(t) >= 0:
                w = widen_once(t)
                if w is None:
                    raise ResolutionError(
                        f"{ent.name} is used with too few arguments")
                t = w
            if any(type_loose_depth(b.type) >= 0 for b in g):
                raise ResolutionError(
                    f"{ent.name} is used with too few arguments")
            t = TFun(tuple(b.type for b in g), t)
        rettype = t

    # special obligations
    if ent.ref == REF_CHOOSE and arg_groups:
        sel = arg_groups[0][0]
        env.emit_tcc("nonemptiness",
                     App(Const(REF_NONEMPTY, "nonempty?", actuals), (sel,)))
    if env.recursive_ref is not None and ent.ref == env.recursive_ref \
            and consumed == len(ent.groups) and consumed == len(argss):
        m = env.rec_measure
        for ga in reversed(arg_groups):
            m = T.open_expr(m, ga)
        extra = env.depth - env.rec_depth
        m_self = T.shift_bvars(env.rec_measure, extra)
        # m_self still references the definition frames directly
        env.emit_tcc("termination", mk_lt(m, m_self))

    # leftover raw argument groups apply to the result as a plain value
    leftover = argss[consumed:]
    if leftover:
        return _apply_value(env, expr, rettype, leftover)
    return expr, rettype


def _unify(pat: TypeExpr, act: TypeExpr, binds: dict, uvars: set) -> bool:
    pat = subst_tyvars(pat, binds)
    if not (tyvar_names(pat) & uvars):
        try:
            join_type(pat, act)
            return True
        except (ResolutionError, TypecheckError):
            # defer judgement to assignability (widening may still apply)
            return _compatible_shapes(pat, act)
    if is_tyvar(pat) and pat.name in uvars:
        binds[pat.name] = act
        return True
    a = widen_all(act)
    if isinstance(pat, TFun) and isinstance(a, TFun) \
            and len(pat.doms) == len(a.doms):
        return all(_unify(d, ad, binds, uvars)
                   for d, ad in zip(pat.doms, a.doms)) \
            and _unify(pat.cod, a.cod, binds, uvars)
    if isinstance(pat, TTuple) and isinstance(a, TTuple) \
            and len(pat.parts) == len(a.parts):
        return all(_unify(p, ap, binds, uvars)
                   for p, ap in zip(pat.parts, a.parts))
    return False


def _compatible_shapes(a: TypeExpr, b: TypeExpr) -> bool:
    wa, wb = widen_all(a), widen_all(b)
    if wa == wb:
        return True
    if wa in (INT, REAL) and wb in (INT, REAL):
        return True
    if isinstance(wa, TFun) and isinstance(wb, TFun) \
            and len(wa.doms) == len(wb.doms):
        return all(_compatible_shapes(x, y) for x, y in zip(wa.doms, wb.doms)) \
            and _compatible_shapes(wa.cod, wb.cod)
    return False


# ---------------------------------------------------------------------------
# Theory checking
# ---------------------------------------------------------------------------


TCC_NAME_MAP = {
    "^": "caret", "*": "times", "+": "plus", "-": "minus", "/": "div",
    "o": "comp", "<": "lt", "<=": "le", ">": "gt", ">=": "ge", "=": "equal",
}


def tcc_base_name(origin: str) -> str:
    return TCC_NAME_MAP.get(origin, origin)


def check_theory(world: World, name: str, actuals=None,
                 importer: Optional[Env] = None) -> CheckedTheory:
    """Typecheck a theory; `actuals` instantiates its formal parameters.

    Instantiation re-elaborates the theory with parameters bound, so the
    same instance (same printed actuals) is checked once and memoized.
    """
    raw = world.raw.get(name)
    if raw is None:
        raise TypecheckError(f"unknown theory {name}")
    if actuals is None and len(raw.params) > 0 and importer is not None:
        raise TypecheckError(f"theory {name} requires actual parameters")

    generic = None
    if actuals is not None:
        if len(actuals) != len(raw.params):
            raise TypecheckError(
                f"theory {name} takes {len(raw.params)} parameters")
        generic = check_theory(world, name)  # ensures generic obligations exist
        bindings, instkey = _bind_params(world, raw, actuals, importer)
    else:
        bindings, instkey = None, ""

    memo = world.checked.get((name, instkey))
    if memo is not None:
        return memo

    env = Env(world)
    tkey = name if not instkey else f"{name}[{instkey}]"
    env.theory_key = tkey

    if bindings is None:
        for p in raw.params:
            if p.kind == "type":
                ent = TypeEntry(f"{tkey}.{p.name}", p.name, None, p.nonempty)
                world.register(ent)
                env.add(p.name, ent)
            else:
                ty = elab_type(env, p.type)
                ent = ConstEntry(f"{tkey}.{p.name}", p.name, (), ty,
                                 kind="param", theory=tkey)
                world.register(ent)
                env.add(p.name, ent)
    else:
        for p, bound in zip(raw.params, bindings):
            env.add(p.name, bound)

    checked = CheckedTheory(name, instkey, {}, {}, [], [])
    counters = {}
    positions = {}

    def next_tcc_id(origin):
        base = tcc_base_name(origin)
        counters[base] = counters.get(base, 0) + 1
        return f"{base}_TCC{counters[base]}"

    def flush_tccs(origin, position):
        for kind, formula in env.tcc_buffer:
            tid = next_tcc_id(origin)
            tcc = TCC(tid, kind, formula, origin, position)
            fe = FormulaEntry(f"{tkey}.{tid}", tid, formula, OBLIGATION,
                              theory=tkey, tcc=tcc)
            if generic is not None:
                gen = generic.formula_named(tid)
                if gen is not None and gen.role == OBLIGATION:
                    fe.delegate = gen.ref
            world.register(fe)
            env.add(tid, fe)
            checked.tccs.append(fe)
        env.tcc_buffer.clear()

    for pos, decl in enumerate(raw.decls):
        env.var_seen = []
        _check_decl(world, env, checked, decl, tkey, pos, generic, flush_tccs)

    checked.scope = {k: list(v) for k, v in env.scope.items()}
    checked.var_types = dict(env.var_types)
    added = {id(e) for _, e in env.added}
    checked.exports = [(nm, e) for nm, lst in env.scope.items()
                       for e in lst if id(e) in added]
    world.checked[(name, instkey)] = checked
    return checked


def _bind_params(world, raw, actuals, importer):
    """Elaborate import actuals in the importing theory; returns the
    per-parameter bindings for the instance plus the printed instance key."""
    env = importer if importer is not None else Env(world)
    pr = P.Printer()
    bindings = []
    keys = []
    # parameter types may reference earlier parameters: maintain a scratch
    # scope holding the bindings made so far
    scratch = Env(world)
    for p, a in zip(raw.params, actuals):
        if p.kind == "type":
            ty = to_type_actual(env, a)
            if p.nonempty:
                env.emit_tcc("existence", Exists(Binder(ty, "x"), T.TRUE))
            ent = TypeEntry(f"actual.{world.fresh_ph()}", p.name, ty)
            bindings.append(ent)
            scratch.add(p.name, ent)
            keys.append(pr.type(ty))
        else:
            expect = elab_type(scratch, p.type)
            ae, at = elab(env, a, expected=expect)
            for obl in assign_obligations(at, expect, ae, env):
                env.emit_tcc("subtype", obl)
            alias = ExprAlias(p.name, ae, expect)
            bindings.append(alias)
            scratch.add(p.name, ConstEntry(
                f"actual.{world.fresh_ph()}", p.name, (), expect, kind="param"))
            keys.append(pr.expr(ae))
    return bindings, ", ".join(keys)


def _check_decl(world, env, checked, decl, tkey, pos, generic, flush_tccs):
    if isinstance(decl, T.ImportDecl):
        target = world.raw.get(decl.theory)
        if target is None:
            raise TypecheckError(f"unknown theory {decl.theory}")
        acts = decl.actuals if decl.actuals else None
        if acts is None and target.params:
            raise TypecheckError(
                f"theory {decl.theory} requires actual parameters")
        inst = check_theory(world, decl.theory, actuals=acts,
                            importer=env if acts else None)
        flush_tccs(f"IMP_{decl.theory}", pos)
        _merge_import(env, inst)
        checked.imports.append(inst)
        return
    if isinstance(decl, T.VarDecl):
        ty = elab_type(env, decl.type)
        for n in decl.names:
            env.var_types[n] = ty
        flush_tccs(decl.names[0], pos)
        return
    if isinstance(decl, T.TypeDecl):
        ent = TypeEntry(f"{tkey}.{decl.name}", decl.name, None, decl.nonempty)
        world.register(ent)
        env.add(decl.name, ent)
        return
    if isinstance(decl, T.ConstDecl):
        ty = elab_type(env, decl.type)
        for n in decl.names:
            ent = ConstEntry(f"{tkey}.{n}@{pos}", n, (), ty, theory=tkey)
            world.register(ent)
            env.add(n, ent)
        flush_tccs(decl.names[0], pos)
        return
    if isinstance(decl, T.DefDecl):
        _check_def(world, env, decl, tkey, pos)
        flush_tccs(decl.name, pos)
        return
    if isinstance(decl, (T.AxiomDecl, T.FormulaDecl)):
        fe, _ = _check_bool(env, decl.formula)
        formula = _close_vars(env, fe)
        role = AXIOM if isinstance(decl, T.AxiomDecl) else CONJECTURE
        flush_tccs(decl.name, pos)
        entry = FormulaEntry(f"{tkey}.{decl.name}", decl.name, formula, role,
                             theory=tkey)
        if generic is not None:
            gen = generic.formula_named(decl.name)
            if gen is not None:
                entry.delegate = gen.ref
        world.register(entry)
        env.add(decl.name, entry)
        checked.formulas.append(entry)
        return
    raise TypecheckError(f"cannot check declaration {decl!r}")


def _merge_import(env, inst: CheckedTheory):
    # prepend the instance's entries, preserving their relative order
    for nm, e in reversed(inst.exports):
        env.add(nm, e)
    for v, ty in inst.var_types.items():
        env.var_types.setdefault(v, ty)


def _close_vars(env, e: Expr) -> Expr:
    names = []
    for v in _vars_in(e):
        if v not in names:
            names.append(v)
    pairs = []
    sub = {}
    for v in names:
        ph = Const(env.fresh_ph(), v)
        pairs.append((ph, v, env.var_types[v]))
        sub[v] = ph
    if not pairs:
        return e
    return forall_close(pairs, T.substitute(e, sub))


def _check_def(world, env: Env, decl: T.DefDecl, tkey, pos):
    groups = []
    frames = []
    for raw_group in decl.groups:
        frame = []
        binders = []
        for names, rawty in raw_group:
            for n in names:
                ty = _binder_type(env, n, rawty)
                frame.append((n, ty))
                binders.append(Binder(ty, n))
        # the frame's types were elaborated outside it; push before the next
        env.frames.append(frame)
        frames.append(frame)
        groups.append(tuple(binders))
    try:
        rettype = elab_type(env, decl.rettype)
        measure = None
        if decl.recursive:
            me, mt = elab(env, decl.measure, expected=NAT)
            for obl in assign_obligations(mt, NAT, me, env):
                env.emit_tcc("subtype", obl)
            measure = me
        ent = ConstEntry(f"{tkey}.{decl.name}@{pos}", decl.name,
                         tuple(groups), rettype, None, (),
                         decl.recursive, measure, "def", tkey)
        world.register(ent)
        env.add(decl.name, ent)
        if decl.recursive:
            env.recursive_ref = ent.ref
            env.rec_measure = measure
            env.rec_depth = env.depth
        try:
            body, bt = elab(env, decl.body, expected=rettype)
        finally:
            env.recursive_ref = None
            env.rec_measure = None
        for obl in assign_obligations(bt, rettype, body, env):
            env.emit_tcc("subtype", obl)
        ent.body = body
    finally:
        for _ in frames:
            env.frames.pop()


# ---------------------------------------------------------------------------
# Type inference on elaborated terms (used by the proof engine)
# ---------------------------------------------------------------------------


def infer_type(world: World, e: Expr, frames=()) -> TypeExpr:
    frames = list(frames)

    def go(x, fr):
        if isinstance(x, Num):
            return num_type(x.value)
        if isinstance(x, BoolLit):
            return BOOL
        if isinstance(x, BVar):
            name, ty = fr[-1 - x.depth][x.slot]
            return shift_type(ty, x.depth + 1)
        if isinstance(x, Const):
            ent = world.entry(x.ref)
            if isinstance(ent, ConstEntry):
                vt = entry_value_type(ent)
                if vt is None:
                    raise TypecheckError(
                        f"{ent.name} is not usable as a plain value")
                return subst_tyvars(vt, dict(zip(ent.tyvars, x.actuals)))
            raise TypecheckError(f"{x.ref} is not a constant")
        if isinstance(x, App):
            root, argss = _spine(x)
            if isinstance(root, Const):
                ent = world.entry(root.ref)
                if isinstance(ent, ConstEntry) and ent.groups:
                    return _const_app_type(ent, root.actuals, argss, fr, go)
            ft = go(x.fn, fr)
            w = widen_all(ft)
            if not isinstance(w, TFun):
                raise TypecheckError("application of a non-function")
            return w.cod
        if isinstance(x, Lambda):
            frame = [(b.name, b.type) for b in x.binders]
            bt = go(x.body, fr + [frame])
            return TFun(tuple(b.type for b in x.binders), _close_cod(bt))
        if isinstance(x, (Forall, Exists, Eq, Not, And, Or, Implies, Iff)):
            return BOOL
        if isinstance(x, Ite):
            return join_type(go(x.then, fr), go(x.els, fr))
        if isinstance(x, Var):
            raise TypecheckError(f"free variable {x.name} has no type here")
        raise TypecheckError(f"cannot type {x!r}")

    return go(e, frames)


def _const_app_type(ent, actuals, argss, fr, go):
    m = dict(zip(ent.tyvars, actuals))
    groups = [tuple(Binder(subst_tyvars(b.type, m), b.name) for b in g)
              for g in ent.groups]
    rettype = subst_tyvars(ent.rettype, m)
    consumed = 0
    for args in argss:
        if consumed >= len(groups):
            break
        group = groups[consumed]
        if len(args) != len(group):
            raise TypecheckError("arity mismatch in application")
        consumed += 1
        rest = []
        for j in range(consumed, len(groups)):
            rest.append(tuple(
                Binder(open_type(b.type, tuple(args), j - consumed), b.name)
                for b in groups[j]))
        groups[consumed:] = rest
        rettype = open_type(rettype, tuple(args), len(groups) - consumed)
    t = rettype
    for g in reversed(groups[consumed:]):
        while type_loose_depth(t) >= 0:
            w = widen_once(t)
            if w is None:
                raise TypecheckError("dependent partial application")
            t = w
        t = TFun(tuple(b.type for b in g), t)
    if consumed < len(argss):
        for args in argss[consumed:]:
            w = widen_all(t)
            t = w.cod if type_loose_depth(w.cod) < 0 \
                else open_type(w.cod, tuple(args), 0)
    return t
