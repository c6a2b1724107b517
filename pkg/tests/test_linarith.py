import random
from fractions import Fraction

from sequoia import linarith as LA
from sequoia import parser as PS
from sequoia import prelude
from sequoia import typecheck as TC
from sequoia.engine import ProofSession, linarith_valid
from sequoia.terms import Sequent

from oracles import random_linear_goal


def test_refutations_withstand_random_falsification():
    """Whenever elimination claims a constraint set is unsatisfiable,
    random rational sampling must fail to satisfy it."""
    rng = random.Random(42)
    refuted = 0
    for _ in range(300):
        cons = random_linear_goal(rng)
        if LA.refute(cons):
            refuted += 1
            assert LA.random_falsify(cons, samples=2000) is None, cons
    assert refuted > 20


def test_satisfiable_sets_are_never_refuted():
    # sets built around a known satisfying point must not be refuted
    rng = random.Random(43)
    for _ in range(200):
        point = {(f"v{i}", 1): Fraction(rng.randint(-5, 5))
                 for i in range(3)}
        cons = []
        for _ in range(4):
            poly = {}
            for mono, val in point.items():
                k = rng.randint(-4, 4)
                if k:
                    poly[(mono,)] = Fraction(k)
            value = sum(c * point[m[0]] for m, c in poly.items())
            slack = Fraction(rng.randint(0, 6))
            poly[()] = -(value + slack)  # poly <= 0 at the point
            cons.append((poly, "<=" if slack else "="))
        assert not LA.refute(cons), cons


def test_integrality_tightening():
    # 1 <= 2x <= 1 has no integer solution but a rational one
    x = (("x", 1),)
    cons = [({x: Fraction(2), (): Fraction(-1)}, "<="),
            ({x: Fraction(-2), (): Fraction(1)}, "<=")]
    assert not LA.refute(cons)
    assert LA.refute(cons, int_monos=frozenset([x]))


def _pick_goal(corpus_world, formula):
    world, checked = corpus_world
    theory = checked["picks_theorem"]
    return world, theory, theory.formula_named(formula).formula


def test_euler_variant_needs_the_axiom(corpus_world):
    world, theory, goal = _pick_goal(corpus_world, "EulerFormula_variant")
    assert not linarith_valid(Sequent((), (goal,)), world)
    euler = theory.formula_named("EulerFormula").formula
    assert linarith_valid(Sequent((euler,), (goal,)), world)


def test_nat_range_facts_from_types(corpus_world):
    world, checked = corpus_world
    src = "FORALL (n: nat): n >= 0"
    env = TC.Env(world, theory_key="picks_theorem",
                 scope=checked["picks_theorem"].scope)
    core, _ = TC.elab(env, PS.parse_expr("ni + nb >= 0"))
    assert linarith_valid(Sequent((), (core,)), world)
    core2, _ = TC.elab(env, PS.parse_expr("ni - nb >= 0"))
    assert not linarith_valid(Sequent((), (core2,)), world)


def test_nonneg_product_of_nats(corpus_world):
    world, checked = corpus_world
    env = TC.Env(world, theory_key="picks_theorem",
                 scope=checked["picks_theorem"].scope)
    core, _ = TC.elab(env, PS.parse_expr("ni * nb >= 0"))
    assert linarith_valid(Sequent((), (core,)), world)


def test_pick_chain_closes_by_lemma_and_assert(corpus_world, corpus_entries):
    world, checked = corpus_world
    entry = next(e for e in corpus_entries if e.name == "picks_theorem")
    chain = ["Prop01", "Prop02", "Prop03", "EulerFormula_variant",
             "Pick_Theorem"]
    for name in chain:
        session = ProofSession(world, checked["picks_theorem"], name)
        for sx in entry.scripts[name]:
            assert sx.items[0].atom in ("lemma", "assert"), name
            session.apply(sx)
        assert session.proved(), name
