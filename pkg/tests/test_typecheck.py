import pytest

from sequoia import parser as PS
from sequoia import prelude
from sequoia import printer as P
from sequoia import typecheck as TC

CARET_TCC2 = "FORALL (n: nat): NOT n = 0 IMPLIES n - 1 < n"
INV_TCC1 = ("FORALL (G: (group?), x: (G)): "
            "nonempty?[(G)]({y: (G) | x * y = e AND y * x = e})")


def _tcc_text(checked, name):
    fe = checked.formula_named(name)
    assert fe is not None, f"no obligation {name}"
    return P.expr_to_text(fe.tcc.formula, implies_keyword=True)


def test_termination_obligation_snapshot(corpus_world):
    _, checked = corpus_world
    assert _tcc_text(checked["pred_algebra"], "caret_TCC2") == CARET_TCC2


def test_nonemptiness_obligation_snapshot(corpus_world):
    _, checked = corpus_world
    assert _tcc_text(checked["pred_algebra"], "inv_TCC1") == INV_TCC1


def test_tcc_ids_match_manifest(corpus_entries, corpus_world):
    _, checked = corpus_world
    for entry in corpus_entries:
        groups = {}
        for fe in checked[entry.name].tccs:
            base = TC.tcc_base_name(fe.tcc.origin)
            groups.setdefault(base, []).append(fe.name)
        assert groups == entry.manifest.tcc_groups, entry.name


def test_operator_symbol_gets_readable_tcc_names(corpus_world):
    _, checked = corpus_world
    names = [fe.name for fe in checked["pred_algebra"].tccs]
    assert "caret_TCC1" in names
    assert not any("^" in n for n in names)


def test_import_existence_obligation(corpus_world):
    _, checked = corpus_world
    fe = checked["symmetric"].formula_named("IMP_pred_algebra_TCC1")
    assert fe is not None
    assert fe.tcc.origin == "IMP_pred_algebra"


def _check_src(src, name):
    world = prelude.standard_world()
    for theory in PS.parse_theories(src):
        world.add_raw(theory)
    return world, TC.check_theory(world, name)


def test_rebound_operator_does_not_shadow_arithmetic():
    # `*` is a theory parameter here; `n * m` over nats must still
    # resolve to integer multiplication
    src = """
    t1[T: TYPE+, *: [T, T -> T]]: THEORY
    BEGIN
      c1: CONJECTURE FORALL (n, m: nat): n * m >= 0
      c2: CONJECTURE FORALL (x, y: T): x * y = y * x OR TRUE
    END t1
    """
    _check_src(src, "t1")


def test_instantiated_theory_formulas_delegate_to_generic():
    src = """
    base[T: TYPE+]: THEORY
    BEGIN
      refl: CONJECTURE FORALL (x: T): x = x
    END base

    uses: THEORY
    BEGIN
      IMPORTING base[int]
      also: CONJECTURE TRUE
    END uses
    """
    world, _ = _check_src(src, "base")
    TC.check_theory(world, "uses")
    inst = next(ck for (name, key), ck in world.checked.items()
                if name == "base" and key)
    fe = inst.formula_named("refl")
    assert fe.delegate == "base.refl"


def test_unknown_name_is_an_error():
    with pytest.raises(TC.TypecheckError):
        _check_src("t2: THEORY\nBEGIN\n  a: AXIOM missing\nEND t2\n", "t2")


def test_measure_must_decrease_generates_obligation():
    src = """
    t3: THEORY
    BEGIN
      f(n: nat): RECURSIVE nat = IF n = 0 THEN 0 ELSE f(n - 1) ENDIF
        MEASURE n
    END t3
    """
    _, checked = _check_src(src, "t3")
    kinds = [fe.tcc.kind for fe in checked.tccs]
    assert "termination" in kinds


def test_subtype_obligation_on_nat_subtraction():
    src = """
    t4: THEORY
    BEGIN
      k: nat
      g(n: nat): nat = n + 1
      use: CONJECTURE g(k - 1) >= 0
    END t4
    """
    _, checked = _check_src(src, "t4")
    assert any(fe.tcc.kind == "subtype" for fe in checked.tccs)


def test_theory_parameter_arity_is_checked():
    src = """
    p1[T: TYPE+]: THEORY
    BEGIN
      c: bool
    END p1

    p2: THEORY
    BEGIN
      IMPORTING p1[int, int]
    END p2
    """
    world = prelude.standard_world()
    for theory in PS.parse_theories(src):
        world.add_raw(theory)
    TC.check_theory(world, "p1")
    with pytest.raises(TC.TypecheckError):
        TC.check_theory(world, "p2")
