import random

from sequoia import parser as PS
from sequoia import prelude
from sequoia import typecheck as TC
from sequoia.engine import CommandError, ProofSession, prop_tautology
from sequoia.terms import Implies, Sequent

from oracles import random_prop_text, sequent_valid, truth_table_valid

ATOMS = ["a1", "a2", "a3", "a4", "a5", "a6"]


def _bool_theory(name, formulas):
    lines = [f"{name}: THEORY", "BEGIN", f"  {', '.join(ATOMS)}: bool"]
    lines += [f"  c{i}: CONJECTURE {f}" for i, f in enumerate(formulas)]
    lines += [f"END {name}"]
    world = prelude.standard_world()
    world.add_raw(PS.parse_theory("\n".join(lines)))
    return world, TC.check_theory(world, name)


def test_group_facts_are_truth_table_valid(corpus_world):
    _, checked = corpus_world
    theory = checked["prop_groups"]
    axioms = [fe.formula for fe in theory.formulas if fe.role == TC.AXIOM]
    conjectures = [fe for fe in theory.formulas if fe.role == TC.CONJECTURE]
    assert len(axioms) == 6 and len(conjectures) == 4
    for fe in conjectures:
        claim = fe.formula
        for ax in axioms:
            claim = Implies(ax, claim)
        assert truth_table_valid(claim), fe.name


def test_group_conjectures_close_with_lemma_and_prop(corpus_world,
                                                     corpus_entries):
    world, checked = corpus_world
    entry = next(e for e in corpus_entries if e.name == "prop_groups")
    for fe in checked["prop_groups"].formulas:
        if fe.role != TC.CONJECTURE:
            continue
        session = ProofSession(world, checked["prop_groups"], fe.name)
        for sx in entry.scripts[fe.name]:
            assert sx.items[0].atom in ("lemma", "prop")
            session.apply(sx)
        assert session.proved(), fe.name


def test_prop_command_agrees_with_truth_tables():
    """prop either closes the goal completely or leaves it open; whenever
    it closes, the formula is truth-table valid, and every truth-table
    valid formula is closed."""
    rng = random.Random(7)
    formulas = [random_prop_text(rng, ATOMS, depth=4) for _ in range(300)]
    world, checked = _bool_theory("fuzzprop", formulas)
    agree = 0
    for i, fe in enumerate(checked.formulas):
        session = ProofSession(world, checked, fe.name)
        session.apply("(prop)")
        closed = session.proved()
        seq = Sequent((), (fe.formula,))
        assert closed == prop_tautology(seq), formulas[i]
        assert closed == truth_table_valid(fe.formula), formulas[i]
        agree += 1
    assert agree == len(formulas)


def test_prop_tautology_matches_oracle_on_random_sequents(corpus_world):
    _, checked = corpus_world
    atoms = [fe.formula for fe in checked["prop_groups"].formulas
             if fe.role == TC.AXIOM][:4]
    from oracles import random_sequent
    rng = random.Random(99)
    for _ in range(400):
        seq = random_sequent(rng, atoms)
        assert prop_tautology(seq) == sequent_valid(seq)


def test_prop_atom_limit():
    import pytest
    names = [f"b{i}" for i in range(25)]
    world = prelude.standard_world()
    src = ("wide: THEORY\nBEGIN\n  " + ", ".join(names) + ": bool\n"
           "  c0: CONJECTURE " + " OR ".join(names) + "\nEND wide")
    world.add_raw(PS.parse_theory(src))
    checked = TC.check_theory(world, "wide")
    seq = Sequent((), (checked.formulas[0].formula,))
    with pytest.raises(CommandError):
        prop_tautology(seq)
