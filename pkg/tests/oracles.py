"""Independent oracles and generators used across the test suite.

Everything here is deliberately dumb: truth tables by exhaustive
enumeration, random sampling for arithmetic, and a tiny textual theory
generator.  None of it shares code with the engine being tested.
"""

import random

from sequoia.terms import (And, BoolLit, Iff, Implies, Not, Or, Sequent)


# -- propositional truth tables -----------------------------------------------


def prop_atoms(e, acc):
    if isinstance(e, (And, Or, Implies, Iff)):
        prop_atoms(e.lhs, acc)
        prop_atoms(e.rhs, acc)
    elif isinstance(e, Not):
        prop_atoms(e.arg, acc)
    elif isinstance(e, BoolLit):
        pass
    elif e not in acc:
        acc.append(e)
    return acc


def prop_eval(e, val):
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, Not):
        return not prop_eval(e.arg, val)
    if isinstance(e, And):
        return prop_eval(e.lhs, val) and prop_eval(e.rhs, val)
    if isinstance(e, Or):
        return prop_eval(e.lhs, val) or prop_eval(e.rhs, val)
    if isinstance(e, Implies):
        return (not prop_eval(e.lhs, val)) or prop_eval(e.rhs, val)
    if isinstance(e, Iff):
        return prop_eval(e.lhs, val) == prop_eval(e.rhs, val)
    return val[e]


def truth_table_valid(formula) -> bool:
    return sequent_valid(Sequent((), (formula,)))


def sequent_valid(seq: Sequent) -> bool:
    atoms = []
    for f in seq.antecedents + seq.succedents:
        prop_atoms(f, atoms)
    n = len(atoms)
    for bits in range(1 << n):
        val = {a: bool(bits >> i & 1) for i, a in enumerate(atoms)}
        if all(prop_eval(f, val) for f in seq.antecedents) \
                and not any(prop_eval(f, val) for f in seq.succedents):
            return False
    return True


# -- random propositional formulas --------------------------------------------


def random_prop_text(rng: random.Random, names, depth=3) -> str:
    """A random formula in concrete syntax over the given atom names."""
    if depth == 0 or rng.random() < 0.3:
        return rng.choice(names)
    op = rng.choice(["AND", "OR", "=>", "<=>", "NOT"])
    if op == "NOT":
        return f"NOT ({random_prop_text(rng, names, depth - 1)})"
    lhs = random_prop_text(rng, names, depth - 1)
    rhs = random_prop_text(rng, names, depth - 1)
    return f"({lhs}) {op} ({rhs})"


def random_prop(rng: random.Random, atoms, depth=3):
    """A random formula as an AST over the given atom expressions."""
    if depth == 0 or rng.random() < 0.3:
        return rng.choice(atoms)
    kind = rng.randrange(5)
    if kind == 0:
        return Not(random_prop(rng, atoms, depth - 1))
    lhs = random_prop(rng, atoms, depth - 1)
    rhs = random_prop(rng, atoms, depth - 1)
    return [And, Or, Implies, Iff][kind - 1](lhs, rhs)


def random_sequent(rng: random.Random, atoms) -> Sequent:
    ante = tuple(random_prop(rng, atoms)
                 for _ in range(rng.randrange(3)))
    succ = tuple(random_prop(rng, atoms)
                 for _ in range(1 + rng.randrange(2)))
    return Sequent(ante, succ)


# -- random theory sources ------------------------------------------------------


def random_theory_text(rng: random.Random, index: int) -> str:
    """A small random theory exercising the declaration forms."""
    lines = [f"gen{index}: THEORY", "BEGIN", ""]
    bools = [f"p{i}" for i in range(2 + rng.randrange(3))]
    nats = [f"k{i}" for i in range(1 + rng.randrange(3))]
    lines.append(f"  {', '.join(bools)}: bool")
    lines.append(f"  {', '.join(nats)}: nat")
    for i in range(rng.randrange(3)):
        body = random_prop_text(rng, bools)
        lines.append(f"  d{i}(x: bool): bool = ({body}) OR x")
    for i in range(1 + rng.randrange(4)):
        kw = rng.choice(["AXIOM", "CONJECTURE"])
        if rng.random() < 0.5:
            f = random_prop_text(rng, bools)
        else:
            a, b = rng.choice(nats), rng.choice(nats)
            f = f"{a} + {b} >= {rng.randrange(5)}"
        lines.append(f"  f{i}: {kw} {f}")
    lines += ["", f"END gen{index}", ""]
    return "\n".join(lines)


# -- random linear constraint systems -----------------------------------------


def random_linear_goal(rng: random.Random, nvars=4, natoms=None):
    """A random linear constraint set in the solver's own format:
    (polynomial dict, relation) pairs read as poly rel 0."""
    from fractions import Fraction
    names = [f"v{i}" for i in range(nvars)]
    cons = []
    for _ in range(2 + rng.randrange(5)):
        poly = {(): Fraction(rng.randint(-10, 10))}
        for name in rng.sample(names, 1 + rng.randrange(min(3, nvars))):
            coeff = rng.choice([-5, -3, -2, -1, 1, 2, 3, 5])
            poly[((name, 1),)] = Fraction(coeff)
        rel = rng.choice(["<=", "<", "=", "diseq"])
        cons.append((poly, rel))
    return cons
