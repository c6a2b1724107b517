"""Arithmetic normalization and a linear-arithmetic decision procedure.

Expressions are normalized into polynomials: mappings from monomials
(sorted tuples of (subterm, power) pairs) to rational coefficients.
Non-arithmetic subterms are treated as opaque atoms, so the procedure
is sound for mixed goals: it simply under-approximates.

Refutation runs Gaussian elimination on equalities, then
Fourier-Motzkin elimination on the inequalities.  Constraints whose
atoms are all integer-sorted are tightened first (a < b becomes
a + 1 <= b after scaling to integral coefficients), which is what
closes goals like `n /= 0 IMPLIES n - 1 < n` over nat.
"""

from __future__ import annotations

import itertools
import math
import random
from fractions import Fraction

from .terms import App, Const, Eq, Not, Num
from . import typecheck as TC

# polynomial: {monomial: Fraction}; the empty monomial () is the
# constant term.  A monomial is a sorted tuple of (atom, power).

_ADD = {"prelude.+#int", "prelude.+#real"}
_SUB = {"prelude.-#int", "prelude.-#real"}
_NEG = {"prelude.neg#int", "prelude.neg#real"}
_MUL = {"prelude.*#int", "prelude.*#real"}
_DIV = {"prelude./"}
_RELS = {TC.REF_LT: "<", TC.REF_LE: "<=", TC.REF_GT: ">", TC.REF_GE: ">="}

FM_LIMIT = 5000  # constraint cap; past it we give up (return unknown)


def poly_const(c) -> dict:
    c = Fraction(c)
    return {(): c} if c else {}


def poly_atom(a) -> dict:
    return {((a, 1),): Fraction(1)}


def poly_add(p, q) -> dict:
    out = dict(p)
    for m, c in q.items():
        c2 = out.get(m, Fraction(0)) + c
        if c2:
            out[m] = c2
        else:
            out.pop(m, None)
    return out


def poly_scale(p, k) -> dict:
    k = Fraction(k)
    if not k:
        return {}
    return {m: c * k for m, c in p.items()}


def poly_sub(p, q) -> dict:
    return poly_add(p, poly_scale(q, -1))


def _mono_mul(m1, m2):
    pows = {}
    for a, k in itertools.chain(m1, m2):
        pows[a] = pows.get(a, 0) + k
    return tuple(sorted(((a, k) for a, k in pows.items() if k),
                        key=lambda ak: repr(ak[0])))


def poly_mul(p, q) -> dict:
    out = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = _mono_mul(m1, m2)
            c = out.get(m, Fraction(0)) + c1 * c2
            if c:
                out[m] = c
            else:
                out.pop(m, None)
    return out


def poly_of(e) -> dict:
    """Normalize an expression into a polynomial over opaque atoms."""
    if isinstance(e, Num):
        return poly_const(e.value)
    if isinstance(e, App) and isinstance(e.fn, Const) and len(e.args) in (1, 2):
        ref = e.fn.ref
        if ref in _ADD:
            return poly_add(poly_of(e.args[0]), poly_of(e.args[1]))
        if ref in _SUB:
            return poly_sub(poly_of(e.args[0]), poly_of(e.args[1]))
        if ref in _NEG and len(e.args) == 1:
            return poly_scale(poly_of(e.args[0]), -1)
        if ref in _MUL:
            return poly_mul(poly_of(e.args[0]), poly_of(e.args[1]))
        if ref in _DIV:
            q = poly_of(e.args[1])
            if set(q) <= {()} and q.get((), 0):
                return poly_scale(poly_of(e.args[0]), 1 / q[()])
    return poly_atom(e)


def poly_is_const(p) -> bool:
    return set(p) <= {()}


def poly_to_expr(p):
    """Rebuild a canonical expression; used to simplify numeric terms."""
    def mono_expr(m, c):
        parts = []
        for a, k in m:
            parts.extend([a] * k)
        e = None
        for part in parts:
            e = part if e is None else _times(e, part)
        if e is None:
            return _num(c)
        if c == 1:
            return e
        return _times(_num(c), e)

    monos = sorted(p.items(), key=lambda mc: (len(mc[0]), repr(mc[0])))
    out = None
    for m, c in monos:
        term = mono_expr(m, c)
        out = term if out is None else App(
            Const("prelude.+#real", "+"), (out, term))
    return out if out is not None else Num(0)


def _num(c):
    c = Fraction(c)
    if c.denominator == 1:
        if c >= 0:
            return Num(int(c))
        return App(Const("prelude.neg#int", "-"), (Num(-int(c)),))
    return App(Const("prelude./", "/"),
               (_num(c.numerator), _num(c.denominator)))


def _times(a, b):
    return App(Const("prelude.*#real", "*"), (a, b))


# ---------------------------------------------------------------------------
# constraints: (poly, rel) meaning poly REL 0 with rel in {"=", "<=", "<"}


def constraint_of(e, positive=True):
    """Turn a literal into constraints, or None if non-arithmetic.

    `positive` False means the literal is negated (a succedent, or
    under NOT).  Returns a list of (poly, rel) conjuncts, or the string
    "diseq" paired with the poly for disequalities (p /= 0), which the
    caller must case-split.
    """
    if isinstance(e, Not):
        return constraint_of(e.arg, not positive)
    if isinstance(e, Eq):
        p = poly_sub(poly_of(e.lhs), poly_of(e.rhs))
        return [(p, "=")] if positive else [(p, "diseq")]
    if isinstance(e, App) and isinstance(e.fn, Const) and e.fn.ref in _RELS:
        rel = _RELS[e.fn.ref]
        if not positive:
            rel = {"<": ">=", "<=": ">", ">": "<=", ">=": "<"}[rel]
        p = poly_sub(poly_of(e.args[0]), poly_of(e.args[1]))
        if rel == ">":
            return [(poly_scale(p, -1), "<")]
        if rel == ">=":
            return [(poly_scale(p, -1), "<=")]
        return [(p, rel)]
    return None


def _tighten(p, strict, int_monos):
    """Integral tightening.  For p REL 0 with every monomial integer:
    clear denominators, turn p < 0 into p + 1 <= 0, and divide by the
    gcd of the variable coefficients rounding the bound inward."""
    if not p or not all(m in int_monos for m in p if m != ()):
        return p, strict
    denom = math.lcm(*(c.denominator for c in p.values()))
    p = {m: c * denom for m, c in p.items()}
    if strict:
        c = p.get((), Fraction(0)) + 1
        p.pop((), None)
        if c:
            p[()] = c
        strict = False
    coeffs = [int(c) for m, c in p.items() if m != ()]
    if coeffs:
        g = math.gcd(*coeffs)
        if g > 1:
            const = p.get((), Fraction(0))
            p = {m: c / g for m, c in p.items() if m != ()}
            # sum a x + c <= 0  ->  sum (a/g) x + ceil(c/g) <= 0
            c = Fraction(math.ceil(Fraction(const, g)))
            if c:
                p[()] = c
    return p, strict


def _subst_eq(p, var, sol):
    """Replace `var` in p by the polynomial `sol`."""
    if var not in p:
        return p
    c = p[var]
    rest = {m: k for m, k in p.items() if m != var}
    return poly_add(rest, poly_scale(sol, c))


def refute(constraints, int_monos=frozenset()):
    """True if the conjunction of constraints is unsatisfiable.

    False means "satisfiable or unknown" (never a wrong refutation).
    Disequalities are case-split into the two strict sides.
    """
    eqs, ineqs, diseqs = [], [], []
    for p, rel in constraints:
        if rel == "=":
            eqs.append(p)
        elif rel == "diseq":
            diseqs.append(p)
        else:
            ineqs.append((p, rel == "<"))

    if diseqs:
        if len(diseqs) > 8:
            return False
        first, rest = diseqs[0], diseqs[1:]
        base = [(p, "=") for p in eqs] \
            + [(p, "<" if s else "<=") for p, s in ineqs] \
            + [(p, "diseq") for p in rest]
        return refute(base + [(first, "<")], int_monos) \
            and refute(base + [(poly_scale(first, -1), "<")], int_monos)

    # Gaussian elimination on equalities
    eqs = [p for p in eqs if p]
    while eqs:
        p = eqs.pop()
        var = next((m for m in p if m != ()), None)
        if var is None:
            if p.get((), 0):
                return True  # c = 0 with c nonzero
            continue
        c = p[var]
        sol = poly_scale({m: k for m, k in p.items() if m != var}, -1 / c)
        eqs = [q for q in (_subst_eq(q, var, sol) for q in eqs) if q]
        ineqs = [(_subst_eq(q, var, sol), s) for q, s in ineqs]

    # Fourier-Motzkin on what remains
    work = []
    for p, s in ineqs:
        p, s = _tighten(p, s, int_monos)
        work.append((p, s))
    variables = sorted({m for p, _ in work for m in p if m != ()},
                       key=repr)
    for var in variables:
        lower, upper, rest = [], [], []
        for p, s in work:
            c = p.get(var, Fraction(0))
            if c > 0:
                upper.append((p, s))
            elif c < 0:
                lower.append((p, s))
            else:
                rest.append((p, s))
        if len(rest) + len(lower) * len(upper) > FM_LIMIT:
            return False
        for (lo, s1), (up, s2) in itertools.product(lower, upper):
            comb = poly_add(poly_scale(lo, up[var]),
                            poly_scale(up, -lo[var]))
            comb.pop(var, None)
            comb, strict = _tighten(comb, s1 or s2, int_monos)
            rest.append((comb, strict))
        work = rest

    for p, s in work:
        c = p.get((), Fraction(0))
        if set(p) <= {()} and (c > 0 or (s and c >= 0)):
            return True
    return False


def random_falsify(constraints, int_monos=frozenset(), samples=10000,
                   seed=0):
    """Search for a satisfying assignment by random sampling.

    Returns an assignment dict if one is found (meaning the constraint
    set is satisfiable, so `refute` must not claim otherwise), else
    None.  This is the independent check used by the test suite.
    """
    rng = random.Random(seed)
    atoms = sorted({m for p, _ in constraints for m in p if m != ()},
                   key=repr)
    for _ in range(samples):
        assign = {}
        for m in atoms:
            if m in int_monos:
                assign[m] = Fraction(rng.randint(-12, 12))
            else:
                assign[m] = Fraction(rng.randint(-120, 120), 10)
        if all(_holds(p, rel, assign) for p, rel in constraints):
            return assign
    return None


def _holds(p, rel, assign):
    v = sum((c * assign[m] for m, c in p.items() if m != ()),
            p.get((), Fraction(0)))
    if rel == "=":
        return v == 0
    if rel == "diseq":
        return v != 0
    if rel == "<":
        return v < 0
    return v <= 0
