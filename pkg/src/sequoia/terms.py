"""Core data model: types, expressions, sequents, theories, proof trees.

Expressions use a locally nameless representation: bound variables are
de Bruijn references (`BVar`) into enclosing binder nodes, while free
variables and constants are named.  Alpha-equivalence is therefore plain
structural equality; surface names are carried only for display and are
excluded from comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Union


class SequoiaError(Exception):
    """Base class for errors raised by this package."""


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


class TypeExpr:
    """Base class for type expressions."""

    __slots__ = ()


@dataclass(frozen=True)
class TBase(TypeExpr):
    """A named base type (bool, int, real, nat, posnat, or a theory type)."""

    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class TFun(TypeExpr):
    """Function type [d1, ..., dn -> cod]."""

    doms: tuple
    cod: TypeExpr


@dataclass(frozen=True)
class TTuple(TypeExpr):
    parts: tuple


@dataclass(frozen=True)
class TSub(TypeExpr):
    """Predicate subtype (P).  `base` is filled in during typechecking."""

    base: Optional[TypeExpr]
    pred: "Expr"


@dataclass(frozen=True)
class TBelow(TypeExpr):
    """below[n]: the naturals strictly less than `bound`."""

    bound: "Expr"


@dataclass(frozen=True)
class TApp(TypeExpr):
    """Unresolved type application, e.g. set[int] (parser output only)."""

    name: str
    args: tuple


BOOL = TBase("bool")
INT = TBase("int")
REAL = TBase("real")
NAT = TBase("nat")
POSNAT = TBase("posnat")


def tset(elem: TypeExpr) -> TFun:
    """set[T] and pred[T] are the function type [T -> bool]."""
    return TFun((elem,), BOOL)


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Name(Expr):
    """Unresolved identifier reference (parser output only)."""

    name: str
    actuals: Optional[tuple] = None


@dataclass(frozen=True)
class Var(Expr):
    """A free variable (declared with VAR, not yet universally closed)."""

    name: str


@dataclass(frozen=True)
class BVar(Expr):
    """Bound variable: `depth` binder nodes out, slot within that binder."""

    depth: int
    slot: int = 0


@dataclass(frozen=True)
class Const(Expr):
    """Resolved constant.  `ref` is the globally unique resolution key."""

    ref: str
    name: str = field(compare=False, default="")
    actuals: tuple = ()

    def __repr__(self):
        return f"Const({self.ref})"


@dataclass(frozen=True)
class Num(Expr):
    value: int


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


TRUE = BoolLit(True)
FALSE = BoolLit(False)


@dataclass(frozen=True)
class App(Expr):
    fn: Expr
    args: tuple


@dataclass(frozen=True)
class Binder:
    type: TypeExpr
    name: str = field(compare=False, default="x")


@dataclass(frozen=True)
class Lambda(Expr):
    """N-ary lambda.  `style` is "set" for {x: T | P} comprehensions."""

    binders: tuple
    body: Expr
    style: str = field(compare=False, default="lambda")


@dataclass(frozen=True)
class Forall(Expr):
    binder: Binder
    body: Expr


@dataclass(frozen=True)
class Exists(Expr):
    binder: Binder
    body: Expr


@dataclass(frozen=True)
class Ite(Expr):
    cond: Expr
    then: Expr
    els: Expr


@dataclass(frozen=True)
class Eq(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr
    # Display /= for parsed disequalities; irrelevant to comparisons.
    neq_style: bool = field(compare=False, default=False)


@dataclass(frozen=True)
class And(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Or(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Implies(Expr):
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Iff(Expr):
    lhs: Expr
    rhs: Expr


# Raw binder groups appear in parser output inside RawForall etc.
@dataclass(frozen=True)
class RawBind(Expr):
    """Parser-level binder node (FORALL/EXISTS/LAMBDA/set comprehension)."""

    kind: str  # forall | exists | lambda | set
    groups: tuple  # tuple of (names tuple, raw TypeExpr)
    body: Expr


# ---------------------------------------------------------------------------
# Generic traversal helpers
# ---------------------------------------------------------------------------


def map_expr(e: Expr, f) -> Expr:
    """Rebuild `e` with `f` applied to every immediate subexpression."""
    if isinstance(e, Const):
        if not e.actuals:
            return e
        return Const(e.ref, e.name,
                     tuple(map_type(a, f) if isinstance(a, TypeExpr) else f(a)
                           for a in e.actuals))
    if isinstance(e, App):
        return App(f(e.fn), tuple(f(a) for a in e.args))
    if isinstance(e, Lambda):
        return Lambda(tuple(Binder(map_type(b.type, f), b.name) for b in e.binders),
                      f(e.body), e.style)
    if isinstance(e, Forall):
        return Forall(Binder(map_type(e.binder.type, f), e.binder.name), f(e.body))
    if isinstance(e, Exists):
        return Exists(Binder(map_type(e.binder.type, f), e.binder.name), f(e.body))
    if isinstance(e, Ite):
        return Ite(f(e.cond), f(e.then), f(e.els))
    if isinstance(e, Eq):
        return Eq(f(e.lhs), f(e.rhs))
    if isinstance(e, Not):
        return Not(f(e.arg), e.neq_style)
    if isinstance(e, (And, Or, Implies, Iff)):
        return type(e)(f(e.lhs), f(e.rhs))
    return e


def map_type(t: TypeExpr, f) -> TypeExpr:
    if isinstance(t, TFun):
        return TFun(tuple(map_type(d, f) for d in t.doms), map_type(t.cod, f))
    if isinstance(t, TTuple):
        return TTuple(tuple(map_type(p, f) for p in t.parts))
    if isinstance(t, TSub):
        return TSub(map_type(t.base, f) if t.base is not None else None, f(t.pred))
    if isinstance(t, TBelow):
        return TBelow(f(t.bound))
    if isinstance(t, TApp):
        return TApp(t.name, tuple(map_type(a, f) if isinstance(a, TypeExpr) else f(a)
                                  for a in t.args))
    return t


def subexprs(e: Expr) -> Iterator[Expr]:
    """Immediate subexpressions, including those inside binder types
    and type actuals."""
    if isinstance(e, Const):
        for a in e.actuals:
            if isinstance(a, TypeExpr):
                yield from type_exprs(a)
            else:
                yield a
    elif isinstance(e, App):
        yield e.fn
        yield from e.args
    elif isinstance(e, Lambda):
        for b in e.binders:
            yield from type_exprs(b.type)
        yield e.body
    elif isinstance(e, (Forall, Exists)):
        yield from type_exprs(e.binder.type)
        yield e.body
    elif isinstance(e, Ite):
        yield e.cond
        yield e.then
        yield e.els
    elif isinstance(e, (Eq, And, Or, Implies, Iff)):
        yield e.lhs
        yield e.rhs
    elif isinstance(e, Not):
        yield e.arg


def type_exprs(t: TypeExpr) -> Iterator[Expr]:
    """Expressions embedded in a type."""
    if isinstance(t, TFun):
        for d in t.doms:
            yield from type_exprs(d)
        yield from type_exprs(t.cod)
    elif isinstance(t, TTuple):
        for p in t.parts:
            yield from type_exprs(p)
    elif isinstance(t, TSub):
        if t.base is not None:
            yield from type_exprs(t.base)
        yield t.pred
    elif isinstance(t, TBelow):
        yield t.bound


def walk(e: Expr) -> Iterator[Expr]:
    yield e
    for s in subexprs(e):
        yield from walk(s)


# ---------------------------------------------------------------------------
# Substitution / binding operations
# ---------------------------------------------------------------------------


def shift_bvars(e: Expr, amount: int, cutoff: int = 0) -> Expr:
    if isinstance(e, BVar):
        if e.depth >= cutoff:
            return BVar(e.depth + amount, e.slot)
        return e
    if isinstance(e, (Lambda, Forall, Exists)):
        inner = lambda x: (shift_bvars(x, amount, cutoff + 1)
                           if isinstance(x, Expr) else x)
        # binder types are at the outer level for their own annotations:
        # annotation expressions live *outside* the new binder scope?  No:
        # a binder's type may refer to outer binders, so it shifts at the
        # outer cutoff while the body shifts one deeper.
        if isinstance(e, Lambda):
            bs = tuple(Binder(map_type(b.type, lambda x: shift_bvars(x, amount, cutoff)),
                              b.name) for b in e.binders)
            return Lambda(bs, shift_bvars(e.body, amount, cutoff + 1), e.style)
        b = Binder(map_type(e.binder.type, lambda x: shift_bvars(x, amount, cutoff)),
                   e.binder.name)
        return type(e)(b, shift_bvars(e.body, amount, cutoff + 1))
    return map_expr(e, lambda x: shift_bvars(x, amount, cutoff))


def open_expr(body: Expr, replacements: tuple, depth: int = 0) -> Expr:
    """Replace BVar(depth, slot) with replacements[slot]; lower deeper refs.

    The replacement expressions must contain no loose bound variables.
    """
    def go(e, d):
        if isinstance(e, BVar):
            if e.depth == d:
                return replacements[e.slot]
            if e.depth > d:
                return BVar(e.depth - 1, e.slot)
            return e
        if isinstance(e, Lambda):
            bs = tuple(Binder(map_type(b.type, lambda x: go(x, d)), b.name)
                       for b in e.binders)
            return Lambda(bs, go(e.body, d + 1), e.style)
        if isinstance(e, (Forall, Exists)):
            b = Binder(map_type(e.binder.type, lambda x: go(x, d)), e.binder.name)
            return type(e)(b, go(e.body, d + 1))
        return map_expr(e, lambda x: go(x, d))

    return go(body, depth)


def abstract_expr(e: Expr, refs: tuple, depth: int = 0) -> Expr:
    """Inverse of open_expr: turn Const occurrences (by ref) into BVars."""
    index = {r: i for i, r in enumerate(refs)}

    def go(x, d):
        if isinstance(x, Const) and x.ref in index:
            return BVar(d, index[x.ref])
        if isinstance(x, BVar) and x.depth >= d:
            return BVar(x.depth + 1, x.slot)
        if isinstance(x, Lambda):
            bs = tuple(Binder(map_type(b.type, lambda y: go(y, d)), b.name)
                       for b in x.binders)
            return Lambda(bs, go(x.body, d + 1), x.style)
        if isinstance(x, (Forall, Exists)):
            b = Binder(map_type(x.binder.type, lambda y: go(y, d)), x.binder.name)
            return type(x)(b, go(x.body, d + 1))
        return map_expr(x, lambda y: go(y, d))

    return go(e, depth)


def substitute(e: Expr, bindings: dict) -> Expr:
    """Simultaneous substitution of named free variables.

    Keys may name `Var` nodes or `Const` refs (used for skolem constants).
    Capture cannot occur: bound variables are de Bruijn references.
    """
    if isinstance(e, Var) and e.name in bindings:
        return bindings[e.name]
    if isinstance(e, Const) and e.ref in bindings:
        return bindings[e.ref]
    return map_expr(e, lambda x: substitute(x, bindings))


def alpha_eq(a: Expr, b: Expr) -> bool:
    """True iff equal up to bound-variable renaming (structural equality)."""
    return a == b


def free_vars(e: Expr) -> set:
    """Names of free variables (Var nodes); constants are excluded."""
    out = set()
    for sub in walk(e):
        if isinstance(sub, Var):
            out.add(sub.name)
    return out


def free_consts(e: Expr) -> set:
    return {s.ref for s in walk(e) if isinstance(s, Const)}


def beta_reduce(e: Expr) -> Expr:
    """Exhaustive beta reduction (corpus terms are strongly normalizing)."""
    e = map_expr(e, beta_reduce)
    if isinstance(e, App) and isinstance(e.fn, Lambda):
        if len(e.fn.binders) == len(e.args):
            return beta_reduce(open_expr(e.fn.body, tuple(e.args)))
    return e


# ---------------------------------------------------------------------------
# Sequents and proof trees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sequent:
    antecedents: tuple
    succedents: tuple

    def formula(self, k: int) -> Expr:
        """Fetch by display number: negative = antecedent, positive = succedent."""
        if k < 0:
            return self.antecedents[-k - 1]
        if k > 0:
            return self.succedents[k - 1]
        raise IndexError("formula numbers are nonzero")


OPEN = "open"
CLOSED = "closed"
EXPANDED = "expanded"


class ProofNode:
    """A node in the goal tree.  Mutated only by the proof engine."""

    def __init__(self, goal: Sequent):
        self.goal = goal
        self.rule = None  # textual command that was applied here
        self.children: list = []
        self.status = OPEN

    def proved(self) -> bool:
        if self.status == CLOSED:
            return True
        if self.status == EXPANDED:
            return all(c.proved() for c in self.children)
        return False

    def open_leaves(self) -> list:
        if self.status == OPEN:
            return [self]
        return [leaf for c in self.children for leaf in c.open_leaves()]


# ---------------------------------------------------------------------------
# Theories (surface AST)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TheoryParam:
    name: str
    kind: str  # "type" | "const"
    type: Optional[TypeExpr] = None  # for const params
    nonempty: bool = False  # TYPE+ vs TYPE


@dataclass
class TypeDecl:
    name: str
    nonempty: bool = False


@dataclass
class VarDecl:
    names: tuple
    type: TypeExpr


@dataclass
class ConstDecl:
    names: tuple
    type: TypeExpr


@dataclass
class DefDecl:
    name: str
    groups: tuple  # tuple of binder groups: ((names, TypeExpr), ...) per group
    rettype: TypeExpr
    body: Expr
    recursive: bool = False
    measure: Optional[Expr] = None


@dataclass
class AxiomDecl:
    name: str
    formula: Expr


CONJECTURE = "conjecture"
LEMMA = "lemma"
PROVED = "proved"
OBLIGATION = "obligation"


@dataclass
class FormulaDecl:
    name: str
    formula: Expr
    status: str = CONJECTURE  # conjecture | lemma (= proved)


@dataclass
class ImportDecl:
    theory: str
    actuals: tuple = ()


Declaration = Union[TypeDecl, VarDecl, ConstDecl, DefDecl, AxiomDecl,
                    FormulaDecl, ImportDecl]


@dataclass
class Theory:
    name: str
    params: tuple = ()
    decls: tuple = ()


@dataclass(frozen=True)
class TCC:
    """A generated proof obligation."""

    id: str
    kind: str  # termination | nonemptiness | subtype | existence
    formula: Expr
    origin: str  # originating declaration name
    position: int  # declaration index within the theory
