import random

import pytest

from sequoia import parser as PS
from sequoia import prelude
from sequoia import typecheck as TC
from sequoia.engine import (CommandError, ProofSession, flatten_seq, mk_seq,
                            split_seq, trivially_closed)
from sequoia.terms import And, Implies, Or, Sequent

from oracles import random_prop_text, truth_table_valid

ATOMS = ["a1", "a2", "a3", "a4"]
FUZZ_COMMANDS = ["(flatten)", "(split)", "(prop)", "(assert)", "(postpone)",
                 '(case "a1")', '(case "a2 AND a3")', "(undo)"]


def bool_theory(name, formulas):
    lines = [f"{name}: THEORY", "BEGIN", f"  {', '.join(ATOMS)}: bool"]
    lines += [f"  c{i}: CONJECTURE {f}" for i, f in enumerate(formulas)]
    lines += [f"END {name}"]
    world = prelude.standard_world()
    world.add_raw(PS.parse_theory("\n".join(lines)))
    return world, TC.check_theory(world, name)


def fuzz_sessions(count, seed, steps=8):
    """Random command sequences over random goals; yields
    (formula source, session) pairs after the commands ran."""
    rng = random.Random(seed)
    formulas = []
    for _ in range(count):
        f = random_prop_text(rng, ATOMS, depth=4)
        if rng.random() < 0.4:
            f = f"({f}) OR NOT ({f})"  # seed some valid goals
        formulas.append(f)
    world, checked = bool_theory(f"fuzz{seed}", formulas)
    for i, fe in enumerate(checked.formulas):
        session = ProofSession(world, checked, fe.name)
        for _ in range(rng.randrange(1, steps)):
            try:
                session.apply(rng.choice(FUZZ_COMMANDS))
            except CommandError:
                pass
        yield formulas[i], fe.formula, session


def test_fuzzed_command_sequences_never_prove_invalid_goals():
    closed = 0
    for src, formula, session in fuzz_sessions(250, seed=11):
        if session.proved():
            closed += 1
            assert truth_table_valid(formula), src
    assert closed > 10  # the fuzz actually closes a decent share


def test_undo_restores_previous_render(corpus_world):
    world, checked = corpus_world
    session = ProofSession(world, checked["prop_groups"], "Pr02")
    before = session.render()
    session.apply('(lemma "Ax03")')
    mid = session.render()
    session.apply("(flatten)")
    assert session.render() != mid
    session.apply("(undo)")
    assert session.render() == mid
    session.undo()
    assert session.render() == before
    with pytest.raises(CommandError):
        session.undo()


def test_flatten_is_gentzen_right_implies(corpus_world):
    world, checked = corpus_world
    session = ProofSession(world, checked["prop_groups"], "Pr02")
    session.apply("(flatten)")
    assert session.render() == "[-1]  Finite\n  |-------\n[1]  Torsion"


def test_split_branches_on_right_and(corpus_world):
    world, checked = corpus_world
    session = ProofSession(world, checked["pred_algebra"], "inv_property")
    session.apply("(skeep)")
    n = len(session.open_goals())
    session.apply("(split)")
    assert len(session.open_goals()) == n + 1


def test_postpone_rotates_focus():
    world, checked = bool_theory("rot", ["a1 AND a2"])
    session = ProofSession(world, checked, "c0")
    session.apply("(split)")
    first = session.render()
    session.apply("(postpone)")
    second = session.render()
    assert first != second
    session.apply("(postpone)")
    assert session.render() == first


def test_commands_error_once_proof_is_complete():
    world, checked = bool_theory("done", ["a1 => a1"])
    session = ProofSession(world, checked, "c0")
    session.apply("(prop)")
    assert session.proved()
    assert session.render() == "Q.E.D."
    with pytest.raises(CommandError):
        session.apply("(flatten)")


def test_axioms_are_not_provable(corpus_world):
    world, checked = corpus_world
    with pytest.raises(CommandError):
        ProofSession(world, checked["prop_groups"], "Ax01")
    with pytest.raises(CommandError):
        ProofSession(world, checked["prop_groups"], "NoSuch")


def test_transcript_replays_to_identical_state(corpus_world):
    world, checked = corpus_world
    session = ProofSession(world, checked["picks_theorem"], "Prop02")
    session.apply('(lemma "Prop01")')
    session.apply('(lemma "Ax02")')
    replay = ProofSession(world, checked["picks_theorem"], "Prop02")
    for sx in session.transcript:
        replay.apply(sx)
    assert replay.render() == session.render()
    assert len(replay.open_goals()) == len(session.open_goals())


def test_cited_lemmas_are_tracked(corpus_world):
    world, checked = corpus_world
    session = ProofSession(world, checked["picks_theorem"], "Prop02")
    session.apply('(lemma "Prop01")')
    session.apply('(lemma "Ax02")')
    assert "picks_theorem.Prop01" in session.cited
    assert not any(ref.endswith("Ax02") for ref in session.cited)


def test_expand_tracks_unfolded_definitions(corpus_world):
    world, checked = corpus_world
    session = ProofSession(world, checked["pred_algebra"], "inv_in_G")
    session.apply("(skeep)")
    session.apply('(expand "inv")')
    assert "inv" in session.expanded


def test_flatten_seq_preserves_truth():
    rng = random.Random(3)
    from oracles import random_sequent, sequent_valid
    world, checked = bool_theory("fl", ATOMS)
    atoms = [fe.formula for fe in checked.formulas]
    for _ in range(200):
        seq = random_sequent(rng, atoms)
        flat = flatten_seq(seq)
        assert sequent_valid(flat) == sequent_valid(seq)
        if trivially_closed(flat):
            assert sequent_valid(flat)
        parts = split_seq(flat)
        if parts:
            assert sequent_valid(flat) == all(sequent_valid(s)
                                              for s in parts)
