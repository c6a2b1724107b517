"""The built-in context available to every theory.

Three layers:

* primitives: numeric types, arithmetic/comparison operators, `choose`;
* a defined library of set and function notions (union, complement,
  subset?, nonempty?, emptyset, injective?, surjective?, bijective?,
  associative?, commutative?, identity?, is_finite, composition `o`),
  all with expandable bodies;
* trusted lemmas about those notions, plus the library theory
  `sets_aux@set_of_functions` providing `finite_function_space`.

Trusted lemmas carry no proof inside the system; `ground_eval` lets the
test suite validate each of them exhaustively on small finite domains.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

from . import parser as PS
from . import terms as T
from . import typecheck as TC
from .terms import (App, BVar, Binder, BoolLit, Const, Eq, Exists, Forall,
                    Implies, Iff, Ite, Lambda, Not, Num, Or, And, Var,
                    TBase, TBelow, TFun, TSub, BOOL, INT, NAT, POSNAT, REAL,
                    tset)
from .typecheck import ConstEntry, Env, FormulaEntry, TypeEntry, World

PRELUDE = "prelude"

_NUM2 = ((Binder(INT, "x"), Binder(INT, "y")),)
_REAL2 = ((Binder(REAL, "x"), Binder(REAL, "y")),)

_NZ_REAL = TSub(REAL, Lambda((Binder(REAL, "x"),),
                             Not(Eq(BVar(0, 0), Num(0)), neq_style=True)))

# Definition sources for the set/function library.  `D`, `R`, `S` are
# schematic type variables; each declaration is elaborated with them in
# scope as opaque types and becomes polymorphic in them.
_DEFINITIONS = [
    ("emptyset", ("D",),
     "emptyset: set[D] = {x: D | FALSE}"),
    ("nonempty?", ("D",),
     "nonempty?(A: set[D]): bool = EXISTS (x: D): member(x, A)"),
    ("union", ("D",),
     "union(A: set[D], B: set[D]): set[D] = "
     "{x: D | member(x, A) OR member(x, B)}"),
    ("intersection", ("D",),
     "intersection(A: set[D], B: set[D]): set[D] = "
     "{x: D | member(x, A) AND member(x, B)}"),
    ("complement", ("D",),
     "complement(A: set[D]): set[D] = {x: D | NOT member(x, A)}"),
    ("subset?", ("D",),
     "subset?(A: set[D], B: set[D]): bool = "
     "FORALL (x: D): member(x, A) => member(x, B)"),
    ("injective?", ("D", "R"),
     "injective?(f: [D -> R]): bool = "
     "FORALL (x, y: D): f(x) = f(y) => x = y"),
    ("surjective?", ("D", "R"),
     "surjective?(f: [D -> R]): bool = "
     "FORALL (y: R): EXISTS (x: D): f(x) = y"),
    ("bijective?", ("D", "R"),
     "bijective?(f: [D -> R]): bool = injective?(f) AND surjective?(f)"),
    ("associative?", ("D",),
     "associative?(op: [D, D -> D]): bool = "
     "FORALL (x, y, z: D): op(op(x, y), z) = op(x, op(y, z))"),
    ("commutative?", ("D",),
     "commutative?(op: [D, D -> D]): bool = "
     "FORALL (x, y: D): op(x, y) = op(y, x)"),
    ("identity?", ("D",),
     "identity?(op: [D, D -> D])(one: D): bool = "
     "FORALL (x: D): op(one, x) = x AND op(x, one) = x"),
    ("o", ("D", "R", "S"),
     "o(f: [R -> S], g: [D -> R]): [D -> S] = LAMBDA (x: D): f(g(x))"),
    ("is_finite", ("D",),
     "is_finite(A: set[D]): bool = EXISTS (N: nat): "
     "EXISTS (f: [(A) -> below[N]]): injective?[(A), below[N]](f)"),
]

# Trusted lemmas.  Every entry here is validated exhaustively on small
# finite domains by the test suite (see ground_eval).
_LEMMAS = [
    ("choose_member", ("D",),
     "FORALL (A: set[D]): nonempty?(A) => member(choose(A), A)"),
    ("complement_complement", ("D",),
     "FORALL (X: set[D]): complement(complement(X)) = X"),
    ("composition_injective", ("D", "R", "S"),
     "FORALL (f: [D -> R], g: [R -> S]): "
     "injective?(f) AND injective?(g) => injective?(g o f)"),
    ("composition_bijective", ("D",),
     "FORALL (f, g: [D -> D]): "
     "bijective?(f) AND bijective?(g) => bijective?(f o g)"),
    ("bijective_identity", ("D",),
     "bijective?(LAMBDA (x: D): x)"),
    ("composition_associative", ("D",),
     "FORALL (f, g, h: [D -> D]): (f o g) o h = f o (g o h)"),
    ("composition_identity", ("D",),
     "FORALL (f: [D -> D]): (LAMBDA (x: D): x) o f = f AND "
     "f o (LAMBDA (x: D): x) = f"),
    ("bijective_inverse_exists", ("D",),
     "FORALL (f: [D -> D]): bijective?(f) => EXISTS (g: [D -> D]): "
     "bijective?(g) AND f o g = (LAMBDA (x: D): x) AND "
     "g o f = (LAMBDA (x: D): x)"),
    ("no_injection_below", (),
     "FORALL (N: nat): FORALL (h: [below[N + 1] -> below[N]]): "
     "NOT injective?(h)"),
]

_LIBRARY_THEORIES = ["""
sets_aux@set_of_functions[D: TYPE, R: TYPE]: THEORY
BEGIN
  finite_function_space: AXIOM EXISTS (N: nat):
    EXISTS (h: [[D -> R] -> below[N]]): injective?(h)
END sets_aux@set_of_functions
"""]


def standard_world() -> World:
    world = World()
    _install_types(world)
    _install_arith(world)
    world.add_prelude(ConstEntry(
        TC.REF_CHOOSE, "choose",
        ((Binder(tset(TBase("'D")), "A"),),),
        TSub(TBase("'D"), BVar(0, 0)), tyvars=("'D",), theory=PRELUDE))
    env = Env(world)
    env.collect_tccs = False
    for name, tyvars, source in _DEFINITIONS:
        _install_definition(world, env, name, tyvars, source)
    for name, tyvars, source in _LEMMAS:
        _install_lemma(world, env, name, tyvars, source)
    for src in _LIBRARY_THEORIES:
        world.add_raw(PS.parse_theory(src))
    return world


def _install_types(world):
    for name, ty in [("bool", BOOL), ("int", INT), ("real", REAL),
                     ("nat", NAT), ("posnat", POSNAT)]:
        world.add_prelude(TypeEntry(f"{PRELUDE}.{name}", name, ty))


def _install_arith(world):
    def op(ref, name, groups, ret):
        world.add_prelude(ConstEntry(ref, name, groups, ret, theory=PRELUDE))

    op("prelude.+#int", "+", _NUM2, INT)
    op("prelude.+#real", "+", _REAL2, REAL)
    op("prelude.-#int", "-", _NUM2, INT)
    op("prelude.-#real", "-", _REAL2, REAL)
    op("prelude.neg#int", "-", ((Binder(INT, "x"),),), INT)
    op("prelude.neg#real", "-", ((Binder(REAL, "x"),),), REAL)
    op("prelude.*#int", "*", _NUM2, INT)
    op("prelude.*#real", "*", _REAL2, REAL)
    op("prelude./", "/", ((Binder(REAL, "x"), Binder(_NZ_REAL, "y")),), REAL)
    for sym, ref in [("<", TC.REF_LT), ("<=", TC.REF_LE),
                     (">", TC.REF_GT), (">=", TC.REF_GE)]:
        op(ref, sym, _REAL2, BOOL)


def _tyvar_scope(env, tyvars):
    entries = []
    for tv in tyvars:
        ent = TypeEntry(f"{PRELUDE}.'{tv}", tv, TBase(f"'{tv}"))
        env.add(tv, ent)
        entries.append((tv, ent))
    return entries


def _drop_scope(env, entries):
    for name, ent in entries:
        env.scope[name].remove(ent)


def _install_definition(world, env, name, tyvars, source):
    th = PS.parse_theory(f"PRELUDE_SRC: THEORY BEGIN {source} END PRELUDE_SRC")
    decl = th.decls[0]
    saved = _tyvar_scope(env, tyvars)
    try:
        groups = []
        frames = 0
        for raw_group in decl.groups:
            frame = []
            binders = []
            for names, rawty in raw_group:
                for n in names:
                    ty = TC.elab_type(env, rawty)
                    frame.append((n, ty))
                    binders.append(Binder(ty, n))
            env.frames.append(frame)
            frames += 1
            groups.append(tuple(binders))
        rettype = TC.elab_type(env, decl.rettype)
        ent = ConstEntry(f"{PRELUDE}.{name}", name, tuple(groups), rettype,
                         None, tuple(f"'{tv}" for tv in tyvars),
                         kind="def", theory=PRELUDE)
        world.add_prelude(ent)
        env.add(name, ent, front=False)
        body, bt = TC.elab(env, decl.body, expected=rettype)
        TC.assign_obligations(bt, rettype, body, env)
        ent.body = body
    finally:
        for _ in range(frames):
            env.frames.pop()
        _drop_scope(env, saved)


def _install_lemma(world, env, name, tyvars, source):
    saved = _tyvar_scope(env, tyvars)
    try:
        raw = PS.parse_expr(source)
        formula, _ = TC._check_bool(env, raw)
    finally:
        _drop_scope(env, saved)
    ent = FormulaEntry(f"{PRELUDE}.{name}", name, formula, TC.AXIOM,
                       tyvars=tuple(f"'{tv}" for tv in tyvars),
                       theory=PRELUDE)
    world.add_prelude(ent)


# ---------------------------------------------------------------------------
# Ground evaluation over finite domains
# ---------------------------------------------------------------------------


class GroundError(T.SequoiaError):
    pass


def enumerate_type(world, t, eval_expr, tyenv=None):
    """All values of `t`, for enumerable types.

    Functions are tabulated as dicts from argument tuples to results;
    `eval_expr` evaluates embedded expressions (subtype predicates,
    below bounds) in the caller's frame context.  `tyenv` maps schematic
    type variable names to their value lists.
    """
    tyenv = tyenv or {}
    if isinstance(t, TBase) and TC.is_tyvar(t):
        if t.name not in tyenv:
            raise GroundError(f"unbound type variable {t.name}")
        return tyenv[t.name]
    if t == BOOL:
        return [False, True]
    if isinstance(t, TBelow):
        n = eval_expr(t.bound)
        return list(range(int(n)))
    if isinstance(t, TSub):
        pred = eval_expr(t.pred)
        return [v for v in enumerate_type(world, t.base, eval_expr, tyenv)
                if _apply_value(pred, (v,))]
    if isinstance(t, TFun):
        dom_lists = [enumerate_type(world, d, eval_expr, tyenv)
                     for d in t.doms]
        keys = [tuple(_freeze(v) for v in vals)
                for vals in itertools.product(*dom_lists)]
        cod = enumerate_type(world, t.cod, eval_expr, tyenv)
        out = []
        for vals in itertools.product(cod, repeat=len(keys)):
            out.append(dict(zip(keys, vals)))
        return out
    raise GroundError(f"cannot enumerate type {TC.pt(t)}")


def _freeze(v):
    """A hashable stand-in for a value, so tabulated functions can be
    keyed by arguments that are themselves tabulated functions."""
    if isinstance(v, dict):
        return ("fn",) + tuple(sorted(((k, _freeze(x)) for k, x in v.items()),
                                      key=repr))
    if isinstance(v, tuple):
        return tuple(_freeze(x) for x in v)
    return v


def _apply_value(f, args):
    if isinstance(f, dict):
        return f[tuple(_freeze(a) for a in args)]
    return f(*args)


def ground_eval(world, e, frames=(), tymap=None):
    """Evaluate a closed elaborated expression over finite domains.

    `frames` is a stack of value tuples matching the BVar frames.
    `tymap` substitutes schematic type variables first (for evaluating
    polymorphic prelude lemmas at concrete small types).
    """
    if tymap:
        e = TC.subst_tyvars_expr(e, tymap)
    return _geval(world, e, list(frames), {})


_ARITH = {
    "prelude.+#int": lambda a, b: a + b,
    "prelude.+#real": lambda a, b: a + b,
    "prelude.-#int": lambda a, b: a - b,
    "prelude.-#real": lambda a, b: a - b,
    "prelude.neg#int": lambda a: -a,
    "prelude.neg#real": lambda a: -a,
    "prelude.*#int": lambda a, b: a * b,
    "prelude.*#real": lambda a, b: a * b,
    "prelude./": lambda a, b: Fraction(a) / Fraction(b),
    TC.REF_LT: lambda a, b: a < b,
    TC.REF_LE: lambda a, b: a <= b,
    TC.REF_GT: lambda a, b: a > b,
    TC.REF_GE: lambda a, b: a >= b,
}


def _enum(world, t, frames, tyenv):
    return enumerate_type(
        world, t, lambda x: _geval(world, x, frames, tyenv), tyenv)


def _geval(world, e, frames, tyenv):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, BVar):
        return frames[-1 - e.depth][e.slot]
    if isinstance(e, Const):
        return _const_value(world, e, frames, tyenv, ())
    if isinstance(e, App):
        root, argss = _app_spine(e)
        if isinstance(root, Const):
            vals = tuple(
                tuple(_geval(world, a, frames, tyenv) for a in args)
                for args in argss)
            return _const_value(world, root, frames, tyenv, vals)
        f = _geval(world, root, frames, tyenv)
        for args in argss:
            f = _apply_value(
                f, tuple(_geval(world, a, frames, tyenv) for a in args))
        return f
    if isinstance(e, Lambda):
        dom_lists = [_enum(world, b.type, frames, tyenv) for b in e.binders]
        out = {}
        for key in itertools.product(*dom_lists):
            out[key] = _geval(world, e.body, frames + [key], tyenv)
        return out
    if isinstance(e, (Forall, Exists)):
        vals = _enum(world, e.binder.type, frames, tyenv)
        agg = all if isinstance(e, Forall) else any
        return agg(_geval(world, e.body, frames + [(v,)], tyenv) for v in vals)
    if isinstance(e, Ite):
        branch = e.then if _geval(world, e.cond, frames, tyenv) else e.els
        return _geval(world, branch, frames, tyenv)
    if isinstance(e, Eq):
        return _geval(world, e.lhs, frames, tyenv) \
            == _geval(world, e.rhs, frames, tyenv)
    if isinstance(e, Not):
        return not _geval(world, e.arg, frames, tyenv)
    if isinstance(e, And):
        return _geval(world, e.lhs, frames, tyenv) \
            and _geval(world, e.rhs, frames, tyenv)
    if isinstance(e, Or):
        return _geval(world, e.lhs, frames, tyenv) \
            or _geval(world, e.rhs, frames, tyenv)
    if isinstance(e, Implies):
        return (not _geval(world, e.lhs, frames, tyenv)) \
            or _geval(world, e.rhs, frames, tyenv)
    if isinstance(e, Iff):
        return _geval(world, e.lhs, frames, tyenv) \
            == _geval(world, e.rhs, frames, tyenv)
    raise GroundError(f"cannot evaluate {e!r}")


def _app_spine(e):
    argss = []
    while isinstance(e, App):
        argss.insert(0, e.args)
        e = e.fn
    return e, argss


def _const_value(world, c, frames, tyenv, arg_groups):
    if c.ref in _ARITH:
        if not arg_groups:
            raise GroundError(f"{c.name} needs arguments")
        (args,) = arg_groups
        return _ARITH[c.ref](*args)
    if c.ref == TC.REF_CHOOSE:
        (args,) = arg_groups
        (sel,) = args
        for v in _enum(world, c.actuals[0], frames, tyenv):
            if _apply_value(sel, (v,)):
                return v
        raise GroundError("choose applied to an empty set")
    ent = world.entry(c.ref)
    if not isinstance(ent, ConstEntry) or ent.body is None:
        raise GroundError(f"{c.ref} has no definition to evaluate")
    if len(arg_groups) < len(ent.groups):
        raise GroundError(f"{c.name} is only partially applied")
    # enumerate actuals in the caller's context; the body sees them as
    # schematic type variables bound in its own tyenv
    inner_tyenv = {tv: _enum(world, a, frames, tyenv)
                   for tv, a in zip(ent.tyvars, c.actuals)}
    # definition bodies are closed except for their own argument groups
    inner = [list(g) for g in arg_groups[:len(ent.groups)]]
    val = _geval(world, ent.body, inner, inner_tyenv)
    for extra in arg_groups[len(ent.groups):]:
        val = _apply_value(val, extra)
    return val
