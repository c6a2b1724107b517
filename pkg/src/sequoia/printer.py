"""Rendering of types, expressions, theories and sequents.

Two dialects share one engine:

* file mode -- what `pretty_print` and `fmt` emit; reparses to an equal AST.
* display mode -- sequent rendering for the prover UI/CLI; allows the
  `{1, -1}` sugar for finite comprehensions and spells IMPLIES for TCCs.
"""

from __future__ import annotations

from . import terms as T

# Precedence levels, tighter binds higher.
PREC_IFF = 1
PREC_IMPLIES = 2
PREC_OR = 3
PREC_AND = 4
PREC_NOT = 5
PREC_REL = 6
PREC_ADD = 7
PREC_MUL = 8
PREC_EXP = 9
PREC_APP = 10

INFIX = {
    "+": (PREC_ADD, "left"),
    "-": (PREC_ADD, "left"),
    "*": (PREC_MUL, "left"),
    "/": (PREC_MUL, "left"),
    "o": (PREC_MUL, "left"),
    "^": (PREC_EXP, "left"),
    "<": (PREC_REL, "none"),
    "<=": (PREC_REL, "none"),
    ">": (PREC_REL, "none"),
    ">=": (PREC_REL, "none"),
}


class Printer:
    def __init__(self, implies_keyword=False, sugar_sets=False):
        self.implies_keyword = implies_keyword
        self.sugar_sets = sugar_sets

    # -- types --------------------------------------------------------------

    def type(self, t, names=()):
        if isinstance(t, T.TBase):
            return t.name
        if isinstance(t, T.TFun):
            if len(t.doms) == 1 and t.cod == T.BOOL:
                return f"set[{self.type(t.doms[0], names)}]"
            doms = ", ".join(self.type(d, names) for d in t.doms)
            return f"[{doms} -> {self.type(t.cod, names)}]"
        if isinstance(t, T.TTuple):
            return "[" + ", ".join(self.type(p, names) for p in t.parts) + "]"
        if isinstance(t, T.TSub):
            return f"({self.expr(t.pred, 0, names)})"
        if isinstance(t, T.TBelow):
            return f"below[{self.expr(t.bound, 0, names)}]"
        if isinstance(t, T.TApp):
            args = ", ".join(
                self.type(a, names) if isinstance(a, T.TypeExpr)
                else self.expr(a, 0, names) for a in t.args)
            return f"{t.name}[{args}]"
        raise TypeError(f"unprintable type {t!r}")

    # -- expressions ----------------------------------------------------------

    def expr(self, e, prec=0, names=()):
        """Render `e`; parenthesize if its own precedence is below `prec`.

        `names` is the stack of binder display-name tuples (innermost last).
        """
        s, p = self._expr(e, names)
        if p < prec:
            return f"({s})"
        return s

    def _used_names(self, e):
        used = set()
        for sub in T.walk(e):
            if isinstance(sub, T.Const):
                used.add(sub.name or sub.ref.rsplit(".", 1)[-1])
            elif isinstance(sub, (T.Var, T.Name)):
                used.add(sub.name)
        return used

    def _fresh(self, wanted, used):
        name = wanted
        while name in used:
            name += "'"
        return name

    def _binder_names(self, binders, body, names):
        used = self._used_names(body)
        for frame in names:
            used |= set(frame)
        out = []
        for b in binders:
            n = self._fresh(b.name or "x", used)
            used.add(n)
            out.append(n)
        return tuple(out)

    def _bind_groups(self, kind, e, names):
        """Collect a chain of unary Forall/Exists into one binder list."""
        groups = []
        frames = list(names)
        while isinstance(e, kind):
            n = self._binder_names((e.binder,), e.body, tuple(frames))[0]
            groups.append((n, e.binder.type, tuple(frames)))
            frames.append((n,))
            e = e.body
        return groups, e, tuple(frames)

    def _group_text(self, groups):
        # merge adjacent binders with identical rendered types
        parts = []
        for n, ty, frames in groups:
            tytext = self.type(ty, frames)
            if parts and parts[-1][1] == tytext:
                parts[-1][0].append(n)
            else:
                parts.append([[n], tytext])
        return ", ".join(f"{', '.join(ns)}: {ty}" for ns, ty in parts)

    def _expr(self, e, names):
        if isinstance(e, T.Name):
            if e.actuals is not None:
                inner = ", ".join(
                    self.type(a, names) if isinstance(a, T.TypeExpr)
                    else self.expr(a, 0, names) for a in e.actuals)
                return f"{e.name}[{inner}]", PREC_APP
            return e.name, PREC_APP
        if isinstance(e, T.Var):
            return e.name, PREC_APP
        if isinstance(e, T.BVar):
            frame = names[-1 - e.depth]
            return frame[e.slot], PREC_APP
        if isinstance(e, T.Const):
            label = e.name or e.ref.rsplit(".", 1)[-1]
            if e.actuals:
                inner = ", ".join(
                    self.type(a, names) if isinstance(a, T.TypeExpr)
                    else self.expr(a, 0, names) for a in e.actuals)
                return f"{label}[{inner}]", PREC_APP
            return label, PREC_APP
        if isinstance(e, T.Num):
            if e.value < 0:
                return f"-{-e.value}", PREC_EXP
            return str(e.value), PREC_APP
        if isinstance(e, T.BoolLit):
            return ("TRUE" if e.value else "FALSE"), PREC_APP
        if isinstance(e, T.App):
            return self._app(e, names)
        if isinstance(e, T.Lambda):
            return self._lambda(e, names)
        if isinstance(e, (T.Forall, T.Exists)):
            kw = "FORALL" if isinstance(e, T.Forall) else "EXISTS"
            groups, body, frames = self._bind_groups(type(e), e, names)
            return (f"{kw} ({self._group_text(groups)}): "
                    f"{self.expr(body, 0, frames)}"), 0
        if isinstance(e, T.Ite):
            return self._ite(e, names), 0
        if isinstance(e, T.Eq):
            l = self.expr(e.lhs, PREC_REL + 1, names)
            r = self.expr(e.rhs, PREC_REL + 1, names)
            return f"{l} = {r}", PREC_REL
        if isinstance(e, T.Not):
            if e.neq_style and isinstance(e.arg, T.Eq):
                l = self.expr(e.arg.lhs, PREC_REL + 1, names)
                r = self.expr(e.arg.rhs, PREC_REL + 1, names)
                return f"{l} /= {r}", PREC_REL
            return f"NOT {self.expr(e.arg, PREC_NOT, names)}", PREC_NOT
        if isinstance(e, T.And):
            return self._binop(e, "AND", PREC_AND, names)
        if isinstance(e, T.Or):
            return self._binop(e, "OR", PREC_OR, names)
        if isinstance(e, T.Implies):
            kw = "IMPLIES" if self.implies_keyword else "=>"
            l = self.expr(e.lhs, PREC_IMPLIES + 1, names)
            r = self.expr(e.rhs, PREC_IMPLIES, names)
            return f"{l} {kw} {r}", PREC_IMPLIES
        if isinstance(e, T.Iff):
            l = self.expr(e.lhs, PREC_IFF + 1, names)
            r = self.expr(e.rhs, PREC_IFF + 1, names)
            return f"{l} <=> {r}", PREC_IFF
        if isinstance(e, T.RawBind):
            return self._rawbind(e, names)
        raise TypeError(f"unprintable expression {e!r}")

    def _binop(self, e, op, prec, names):
        l = self.expr(e.lhs, prec, names)
        r = self.expr(e.rhs, prec + 1, names)
        return f"{l} {op} {r}", prec

    def _app(self, e, names):
        fn = e.fn
        if isinstance(fn, (T.Const, T.Name)):
            label = fn.name if isinstance(fn, T.Name) else (
                fn.name or fn.ref.rsplit(".", 1)[-1])
            has_actuals = getattr(fn, "actuals", None)
            if label in INFIX and len(e.args) == 2 and not has_actuals:
                prec, assoc = INFIX[label]
                lp = prec if assoc == "left" else prec + 1
                rp = prec + 1 if assoc == "left" else prec
                l = self.expr(e.args[0], lp, names)
                r = self.expr(e.args[1], rp, names)
                return f"{l} {label} {r}", prec
            if label == "-" and len(e.args) == 1 and not has_actuals:
                return f"-{self.expr(e.args[0], PREC_EXP + 1, names)}", PREC_EXP
        fntext = self.expr(fn, PREC_APP, names)
        args = ", ".join(self.expr(a, 0, names) for a in e.args)
        return f"{fntext}({args})", PREC_APP

    def _lambda(self, e, names):
        ns = self._binder_names(e.binders, e.body, names)
        frames = names + (ns,)
        if e.style == "set":
            if self.sugar_sets:
                lits = self._finite_set_literals(e)
                if lits is not None:
                    return "{" + ", ".join(str(v) for v in lits) + "}", PREC_APP
            n = ns[0]
            ty = self.type(e.binders[0].type, names)
            return (f"{{{n}: {ty} | {self.expr(e.body, 0, frames)}}}",
                    PREC_APP)
        groups = [(n, b.type, names) for n, b in zip(ns, e.binders)]
        return (f"LAMBDA ({self._group_text(groups)}): "
                f"{self.expr(e.body, 0, frames)}"), 0

    def _finite_set_literals(self, e):
        """{x | x = a OR x = b OR ...} with numeric literals, else None."""
        vals = []
        def collect(b):
            if isinstance(b, T.Or):
                return collect(b.lhs) and collect(b.rhs)
            if (isinstance(b, T.Eq) and b.lhs == T.BVar(0, 0)
                    and isinstance(b.rhs, T.Num)):
                vals.append(b.rhs.value)
                return True
            if (isinstance(b, T.Eq) and b.lhs == T.BVar(0, 0)
                    and isinstance(b.rhs, T.App)
                    and isinstance(b.rhs.fn, T.Const)
                    and (b.rhs.fn.name or "") == "-"
                    and len(b.rhs.args) == 1
                    and isinstance(b.rhs.args[0], T.Num)):
                vals.append(-b.rhs.args[0].value)
                return True
            return False
        if collect(e.body) and vals:
            return vals
        return None

    def _ite(self, e, names):
        out = [f"IF {self.expr(e.cond, 0, names)} THEN {self.expr(e.then, 0, names)}"]
        els = e.els
        while isinstance(els, T.Ite):
            out.append(f"ELSIF {self.expr(els.cond, 0, names)} "
                       f"THEN {self.expr(els.then, 0, names)}")
            els = els.els
        out.append(f"ELSE {self.expr(els, 0, names)} ENDIF")
        return " ".join(out)

    def _rawbind(self, e, names):
        kws = {"forall": "FORALL", "exists": "EXISTS", "lambda": "LAMBDA"}
        flat = []
        for group_names, ty in e.groups:
            for n in group_names:
                flat.append((n,))
        frames = names + tuple(flat)
        gtext = ", ".join(f"{', '.join(ns)}: {self.type(ty, names)}"
                          for ns, ty in e.groups)
        if e.kind == "set":
            (ns, ty), = e.groups
            return (f"{{{ns[0]}: {self.type(ty, names)} | "
                    f"{self.expr(e.body, 0, frames)}}}"), PREC_APP
        return f"{kws[e.kind]} ({gtext}): {self.expr(e.body, 0, frames)}", 0


def expr_to_text(e, implies_keyword=False, sugar_sets=False):
    return Printer(implies_keyword, sugar_sets).expr(e)


def type_to_text(t):
    return Printer().type(t)


# ---------------------------------------------------------------------------
# Theories
# ---------------------------------------------------------------------------


def theory_to_text(th) -> str:
    p = Printer()
    lines = []
    header = th.name
    if th.params:
        parts = []
        for prm in th.params:
            if prm.kind == "type":
                parts.append(f"{prm.name}: TYPE{'+' if prm.nonempty else ''}")
            else:
                parts.append(f"{prm.name}: {p.type(prm.type)}")
        header += "[" + ", ".join(parts) + "]"
    lines.append(f"{header}: THEORY")
    lines.append("BEGIN")
    lines.append("")
    for d in th.decls:
        lines.extend(_decl_lines(d, p))
    lines.append("")
    lines.append(f"END {th.name}")
    return "\n".join(lines) + "\n"


def _decl_lines(d, p):
    ind = "  "
    if isinstance(d, T.ImportDecl):
        if d.actuals:
            inner = ", ".join(
                p.type(a) if isinstance(a, T.TypeExpr) else p.expr(a)
                for a in d.actuals)
            return [f"{ind}IMPORTING {d.theory}[{inner}]"]
        return [f"{ind}IMPORTING {d.theory}"]
    if isinstance(d, T.TypeDecl):
        return [f"{ind}{d.name}: TYPE{'+' if d.nonempty else ''}"]
    if isinstance(d, T.VarDecl):
        return [f"{ind}{', '.join(d.names)}: VAR {p.type(d.type)}"]
    if isinstance(d, T.ConstDecl):
        return [f"{ind}{', '.join(d.names)}: {p.type(d.type)}"]
    if isinstance(d, T.DefDecl):
        sig = d.name
        for names_types in d.groups:
            inner = ", ".join(
                ", ".join(ns) if ty is None
                else f"{', '.join(ns)}: {p.type(ty)}"
                for ns, ty in names_types)
            sig += f"({inner})"
        kw = "RECURSIVE " if d.recursive else ""
        line = f"{ind}{sig}: {kw}{p.type(d.rettype)} = {p.expr(d.body)}"
        if d.recursive:
            line += f" MEASURE {p.expr(d.measure)}"
        return [line]
    if isinstance(d, T.AxiomDecl):
        return [f"{ind}{d.name}: AXIOM {p.expr(d.formula)}"]
    if isinstance(d, T.FormulaDecl):
        kw = "LEMMA" if d.status in (T.LEMMA, T.PROVED) else "CONJECTURE"
        return [f"{ind}{d.name}: {kw} {p.expr(d.formula)}"]
    raise TypeError(f"unprintable declaration {d!r}")


# ---------------------------------------------------------------------------
# Sequents
# ---------------------------------------------------------------------------


def sequent_to_text(seq) -> str:
    """Stable display: [-k] antecedents, a rule line, [k] succedents."""
    p = Printer(sugar_sets=True)
    lines = []
    for i, f in enumerate(seq.antecedents):
        lines.append(f"[-{i + 1}]  {p.expr(f)}")
    lines.append("  |-------")
    for i, f in enumerate(seq.succedents):
        lines.append(f"[{i + 1}]  {p.expr(f)}")
    return "\n".join(lines)
