import random
import re

import pytest

from sequoia import parser as PS
from sequoia import printer as P

from conftest import CORPUS
from oracles import random_theory_text

SOURCES = sorted(CORPUS.glob("*.pvsl"))


@pytest.mark.parametrize("path", SOURCES, ids=lambda p: p.stem)
def test_roundtrip_corpus_theory(path):
    theory = PS.parse_theory(path.read_text())
    text = P.theory_to_text(theory)
    again = P.theory_to_text(PS.parse_theory(text))
    assert again == text


@pytest.mark.parametrize("path", SOURCES, ids=lambda p: p.stem)
def test_print_preserves_meaning_on_corpus(path):
    # printing then reparsing yields the same surface AST
    theory = PS.parse_theory(path.read_text())
    assert PS.parse_theory(P.theory_to_text(theory)) == theory


def test_roundtrip_generated_theories():
    rng = random.Random(20240)
    for i in range(500):
        src = random_theory_text(rng, i)
        theory = PS.parse_theory(src)
        text = P.theory_to_text(theory)
        assert PS.parse_theory(text) == theory, src


@pytest.mark.parametrize("path", sorted(CORPUS.glob("*.prfl")),
                         ids=lambda p: p.stem)
def test_roundtrip_proof_scripts(path):
    script = PS.parse_proof_script(path.read_text())
    text = PS.script_to_text(script)
    assert PS.parse_proof_script(text) == script


def _offset_to_pos(text, offset):
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


@pytest.mark.parametrize("path", SOURCES, ids=lambda p: p.stem)
def test_error_position_at_or_after_deletion(path):
    """Deleting one token either still parses or reports a position no
    earlier than the deletion point."""
    text = path.read_text()
    rng = random.Random(hash(path.stem) & 0xffff)
    tokens = [m for m in re.finditer(r"[A-Za-z0-9_?]+|[^\sA-Za-z0-9_?]", text)]
    for m in rng.sample(tokens, min(25, len(tokens))):
        mutated = text[:m.start()] + text[m.end():]
        try:
            PS.parse_theory(mutated)
        except PS.ParseError as err:
            line, col = _offset_to_pos(mutated, m.start())
            assert (err.line, err.column) >= (line, col), \
                f"deleted {m.group()!r} at {line}:{col}, " \
                f"error at {err.line}:{err.column}"


def test_parse_error_reports_position():
    with pytest.raises(PS.ParseError) as exc:
        PS.parse_theory("t: THEORY\nBEGIN\n  x: AXIOM AND\nEND t\n")
    assert exc.value.line == 3


def test_sexp_string_escapes():
    sx = PS.parse_sexps('(case "a \\"quoted\\" term")')[0]
    assert sx.items[1].atom == 'a "quoted" term'
    assert PS.parse_sexps(PS.sexp_to_text(sx))[0] == sx


def test_expr_precedence_roundtrip():
    for src in ["a AND b OR c", "NOT a => b <=> c", "x + 2 * y - 3",
                "f(x)(y, z)", "(LAMBDA (i: nat): i + 1)(4)"]:
        e = PS.parse_expr(src)
        assert PS.parse_expr(P.Printer().expr(e)) == e
