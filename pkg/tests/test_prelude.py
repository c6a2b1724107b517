import itertools

import pytest

from sequoia import parser as PS
from sequoia import prelude
from sequoia import typecheck as TC
from sequoia.prelude import enumerate_type, ground_eval
from sequoia.terms import Num, TBelow


@pytest.fixture(scope="module")
def world():
    return prelude.standard_world()


def _lemma(world, name):
    (ent,) = [e for e in world.prelude_scope[name]]
    return ent


def below(k):
    return TBelow(Num(k))


def _validate(world, name, tymap):
    ent = _lemma(world, name)
    assert ground_eval(world, ent.formula, tymap=tymap) is True, \
        (name, tymap)


@pytest.mark.parametrize("name", ["choose_member", "complement_complement"])
def test_set_lemmas_hold_on_all_small_domains(world, name):
    for k in range(6):
        _validate(world, name, {"'D": below(k)})


@pytest.mark.parametrize("name", [
    "composition_bijective", "bijective_identity",
    "composition_associative", "composition_identity",
])
def test_function_lemmas_hold_on_small_domains(world, name):
    for k in range(4):
        _validate(world, name, {"'D": below(k)})


def test_composition_injective_on_small_domains(world):
    for d, r, s in itertools.product(range(3), repeat=3):
        _validate(world, "composition_injective",
                  {"'D": below(d), "'R": below(r), "'S": below(s)})


def test_bijective_inverse_exists_on_small_domains(world):
    for k in range(4):
        _validate(world, "bijective_inverse_exists", {"'D": below(k)})


def _eval_src(world, src):
    env = TC.Env(world)
    env.collect_tccs = False
    core, _ = TC.elab(env, PS.parse_expr(src))
    return ground_eval(world, core)


def test_no_injection_below_bounded_instances(world):
    # the nat quantifier is not enumerable; check instances directly
    for n in range(4):
        src = (f"FORALL (h: [below[{n + 1}] -> below[{n}]]): "
               f"NOT injective?(h)")
        assert _eval_src(world, src) is True


def test_function_space_is_finite_bounded_instance(world):
    # witness the function-space axiom at small sizes: all 4 functions
    # below[2] -> below[2] embed injectively into below[4]
    src = ("EXISTS (h: [[below[2] -> below[2]] -> below[4]]): "
           "injective?(h)")
    assert _eval_src(world, src) is True
    src_too_small = ("EXISTS (h: [[below[2] -> below[2]] -> below[3]]): "
                     "injective?(h)")
    assert _eval_src(world, src_too_small) is False


def test_definitions_evaluate_as_expected(world):
    assert _eval_src(world, "member(1, union({x: below[3] | x = 0}, "
                            "{x: below[3] | x = 1}))") is True
    assert _eval_src(world, "subset?[below[3]]({x: below[3] | x = 1}, "
                            "{x: below[3] | x >= 1})") is True
    assert _eval_src(world, "(LAMBDA (x: below[3]): x) o "
                            "(LAMBDA (x: below[3]): x) = "
                            "(LAMBDA (x: below[3]): x)") is True


def test_ground_arithmetic(world):
    assert _eval_src(world, "4 - 5 + 3 = 2") is True
    assert _eval_src(world, "3 / 2 + 1 / 2 = 2") is True


def test_enumerate_type_counts(world):
    ev = lambda e: ground_eval(world, e)
    assert len(enumerate_type(world, below(3), ev)) == 3
    from sequoia.terms import BOOL, TFun
    assert len(enumerate_type(world, TFun((below(2),), below(3)), ev)) == 9
    assert enumerate_type(world, BOOL, ev) == [False, True]
