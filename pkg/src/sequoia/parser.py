"""Lexer and recursive-descent parser for theory sources and proof scripts.

Theory sources (`.pvsl`) follow the PVS-flavoured grammar used throughout
the corpus; proof scripts (`.prfl`) are parenthesized prefix command trees.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from . import terms as T


class ParseError(T.SequoiaError):
    def __init__(self, line, column, message, expected=()):
        self.line = line
        self.column = column
        self.message = message
        self.expected = tuple(expected)
        super().__init__(f"{line}:{column}: {message}")


KEYWORDS = {
    "THEORY", "BEGIN", "END", "IMPORTING", "VAR", "TYPE", "AXIOM",
    "CONJECTURE", "LEMMA", "OBLIGATION", "RECURSIVE", "MEASURE",
    "FORALL", "EXISTS", "LAMBDA", "IF", "THEN", "ELSIF", "ELSE", "ENDIF",
    "TRUE", "FALSE", "AND", "OR", "NOT", "IMPLIES",
}

TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>%[^\n]*)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z][A-Za-z0-9_?!'@]*(?:\.[A-Za-z][A-Za-z0-9_?!']*)?)
  | (?P<op><=>|=>|->|/=|<=|>=|[=<>+\-*/^(){}\[\],:|.])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str  # ident | keyword | num | op | eof
    text: str
    line: int
    column: int


def tokenize(text: str):
    tokens = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(line, col, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        tok = m.group()
        if kind not in ("ws", "comment"):
            if kind == "ident" and tok in KEYWORDS:
                tokens.append(Token("keyword", tok, line, col))
            else:
                tokens.append(Token(kind, tok, line, col))
        nl = tok.count("\n")
        if nl:
            line += nl
            col = len(tok) - tok.rfind("\n")
        else:
            col += len(tok)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


# Binary operators by precedence (see printer for the mirror table).
BINOPS = [
    {"<=>"},
    {"=>", "IMPLIES"},
    {"OR"},
    {"AND"},
    set(),  # NOT (prefix) level placeholder
    {"=", "/=", "<", "<=", ">", ">="},
    {"+", "-"},
    {"*", "/", "o"},
    {"^"},
]

OPERATOR_NAMES = {"*", "^", "o", "+", "-", "/", "=", "<", "<="}


class TheoryParser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    # -- token plumbing -------------------------------------------------------

    def peek(self, ahead=0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def fail(self, message, expected=()):
        tok = self.peek()
        raise ParseError(tok.line, tok.column, message, expected)

    def expect(self, text) -> Token:
        tok = self.peek()
        if tok.text != text:
            self.fail(f"expected {text!r}, found {tok.text!r}", [text])
        return self.next()

    def accept(self, text) -> bool:
        if self.peek().text == text:
            self.next()
            return True
        return False

    def ident(self) -> str:
        tok = self.peek()
        if tok.kind != "ident":
            self.fail(f"expected identifier, found {tok.text!r}", ["<identifier>"])
        return self.next().text

    def decl_name(self) -> str:
        """A declaration or parameter name; operator symbols are allowed."""
        tok = self.peek()
        if tok.kind == "ident":
            return self.next().text
        if tok.text in OPERATOR_NAMES:
            return self.next().text
        self.fail(f"expected declaration name, found {tok.text!r}")

    # -- theories -------------------------------------------------------------

    def parse_theory(self) -> T.Theory:
        name = self.ident()
        params = ()
        if self.accept("["):
            params = tuple(self.theory_params())
            self.expect("]")
        self.expect(":")
        self.expect("THEORY")
        self.expect("BEGIN")
        decls = []
        while self.peek().text != "END":
            if self.peek().kind == "eof":
                self.fail("unexpected end of file inside theory", ["END"])
            decls.extend(self.declaration())
        self.expect("END")
        endname = self.ident()
        if endname != name:
            self.fail(f"END {endname} does not match theory {name}")
        return T.Theory(name, params, tuple(decls))

    def theory_params(self):
        params = []
        while True:
            name = self.decl_name()
            self.expect(":")
            if self.peek().text == "TYPE":
                self.next()
                nonempty = self.accept("+")
                params.append(T.TheoryParam(name, "type", None, nonempty))
            else:
                params.append(T.TheoryParam(name, "const", self.type_expr()))
            if not self.accept(","):
                return params

    def declaration(self):
        if self.accept("IMPORTING"):
            out = []
            while True:
                theory = self.ident()
                actuals = ()
                if self.accept("["):
                    actuals = tuple(self.actuals())
                    self.expect("]")
                out.append(T.ImportDecl(theory, actuals))
                if not self.accept(","):
                    return out
        names = [self.decl_name()]
        while self.peek().text == "," and self.peek(1).kind == "ident":
            self.next()
            names.append(self.ident())
        if self.peek().text == "(":
            return [self.def_decl(names)]
        if self.peek().text == ",":
            # report the token after the comma, not the comma itself
            self.next()
            self.fail("expected identifier in name list")
        self.expect(":")
        tok = self.peek()
        if tok.text == "VAR":
            self.next()
            return [T.VarDecl(tuple(names), self.type_expr())]
        if tok.text == "TYPE":
            self.next()
            nonempty = self.accept("+")
            return [T.TypeDecl(n, nonempty) for n in names]
        if tok.text in ("AXIOM",):
            self.next()
            return [T.AxiomDecl(names[0], self.expr())]
        if tok.text in ("CONJECTURE", "LEMMA"):
            self.next()
            status = T.CONJECTURE if tok.text == "CONJECTURE" else T.LEMMA
            return [T.FormulaDecl(names[0], self.expr(), status)]
        if tok.text == "RECURSIVE":
            self.fail("RECURSIVE requires an argument list before the colon")
        ty = self.type_expr()
        if self.accept("="):
            body = self.expr()
            return [T.DefDecl(names[0], (), ty, body)]
        return [T.ConstDecl(tuple(names), ty)]

    def def_decl(self, names):
        if len(names) != 1:
            self.fail("definitions take a single name")
        groups = []
        while self.peek().text == "(":
            self.next()
            groups.append(tuple(self.binder_group_list()))
            self.expect(")")
        self.expect(":")
        recursive = self.accept("RECURSIVE")
        rettype = self.type_expr()
        self.expect("=")
        body = self.expr()
        measure = None
        if recursive:
            self.expect("MEASURE")
            measure = self.expr()
        return T.DefDecl(names[0], tuple(groups), rettype, body, recursive, measure)

    def binder_group_list(self):
        """idlist [':' type] (',' idlist [':' type])*

        Binders without a type annotation refer to VAR declarations and are
        resolved during typechecking.
        """
        groups = []
        pending = []
        while True:
            pending.append(self.decl_name())
            if self.accept(":"):
                ty = self.type_expr()
                groups.append((tuple(pending), ty))
                pending = []
                if not self.accept(","):
                    break
            elif self.accept(","):
                continue
            else:
                break
        if pending:
            groups.append((tuple(pending), None))
        return groups

    def actuals(self):
        out = [self.actual()]
        while self.accept(","):
            out.append(self.actual())
        return out

    def actual(self):
        # A '[' can only start a type; everything else parses as an
        # expression and is reinterpreted by the typechecker when the
        # corresponding formal is a type parameter.
        if self.peek().text == "[":
            return self.type_expr()
        return self.expr()

    # -- types ----------------------------------------------------------------

    def type_expr(self) -> T.TypeExpr:
        tok = self.peek()
        if tok.text == "[":
            self.next()
            parts = [self.type_expr()]
            while self.accept(","):
                parts.append(self.type_expr())
            if self.accept("->"):
                cod = self.type_expr()
                self.expect("]")
                return T.TFun(tuple(parts), cod)
            self.expect("]")
            return T.TTuple(tuple(parts))
        if tok.text == "(":
            self.next()
            pred = self.expr()
            self.expect(")")
            return T.TSub(None, pred)
        if tok.kind == "ident":
            name = self.next().text
            if self.accept("["):
                args = tuple(self.actuals())
                self.expect("]")
                return T.TApp(name, args)
            return T.TBase(name)
        self.fail(f"expected a type, found {tok.text!r}")

    # -- expressions ------------------------------------------------------------

    def expr(self) -> T.Expr:
        return self.binary_expr(0)

    def binary_expr(self, level: int) -> T.Expr:
        if level >= len(BINOPS):
            return self.unary_expr()
        if level == 4:  # NOT
            if self.peek().text == "NOT":
                self.next()
                return T.Not(self.binary_expr(4))
            return self.binary_expr(5)
        lhs = self.binary_expr(level + 1)
        while True:
            tok = self.peek()
            op = tok.text
            if op not in BINOPS[level]:
                return lhs
            if (op in OPERATOR_NAMES and self.peek(1).text == "("
                    and self.peek(2).kind == "ident"
                    and self.peek(3).text in (",", ":")):
                # start of a new operator declaration, e.g. ^(G: (group?))...
                return lhs
            self.next()
            right_assoc = level in (1,)
            rhs = self.binary_expr(level if right_assoc else level + 1)
            lhs = self.combine(op, lhs, rhs)
            if level in (0, 5):  # non-associative tiers
                nxt = self.peek().text
                if nxt in BINOPS[level]:
                    self.fail(f"operator {nxt!r} is non-associative")
                return lhs

    def combine(self, op, lhs, rhs):
        if op == "<=>":
            return T.Iff(lhs, rhs)
        if op in ("=>", "IMPLIES"):
            return T.Implies(lhs, rhs)
        if op == "OR":
            return T.Or(lhs, rhs)
        if op == "AND":
            return T.And(lhs, rhs)
        if op == "=":
            return T.Eq(lhs, rhs)
        if op == "/=":
            return T.Not(T.Eq(lhs, rhs), neq_style=True)
        return T.App(T.Name(op), (lhs, rhs))

    def unary_expr(self) -> T.Expr:
        if self.peek().text == "-":
            self.next()
            arg = self.unary_expr()
            if isinstance(arg, T.Num):
                return T.Num(-arg.value)
            return T.App(T.Name("-"), (arg,))
        return self.postfix_expr()

    def postfix_expr(self) -> T.Expr:
        e = self.atom()
        while self.peek().text == "(":
            self.next()
            args = [self.expr()]
            while self.accept(","):
                args.append(self.expr())
            self.expect(")")
            e = T.App(e, tuple(args))
        return e

    def atom(self) -> T.Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.next()
            return T.Num(int(tok.text))
        if tok.text == "TRUE":
            self.next()
            return T.TRUE
        if tok.text == "FALSE":
            self.next()
            return T.FALSE
        if tok.text in ("FORALL", "EXISTS", "LAMBDA"):
            kind = self.next().text.lower()
            self.expect("(")
            groups = tuple(self.binder_group_list())
            self.expect(")")
            self.expect(":")
            return T.RawBind(kind, groups, self.expr())
        if tok.text == "IF":
            return self.if_expr()
        if tok.text == "(":
            self.next()
            e = self.expr()
            self.expect(")")
            return e
        if tok.text == "{":
            self.next()
            name = self.ident()
            self.expect(":")
            ty = self.type_expr()
            self.expect("|")
            body = self.expr()
            self.expect("}")
            return T.RawBind("set", (((name,), ty),), body)
        if tok.kind == "ident":
            name = self.next().text
            if self.peek().text == "[":
                self.next()
                args = tuple(self.actuals())
                self.expect("]")
                return T.Name(name, args)
            return T.Name(name)
        if tok.text in OPERATOR_NAMES and tok.text != "-":
            # operator used as a plain constant: ^(y, n) or a bare * actual
            return T.Name(self.next().text)
        self.fail(f"expected an expression, found {tok.text!r}")

    def if_expr(self) -> T.Expr:
        self.expect("IF")
        cond = self.expr()
        self.expect("THEN")
        then = self.expr()
        arms = [(cond, then)]
        while self.accept("ELSIF"):
            c = self.expr()
            self.expect("THEN")
            arms.append((c, self.expr()))
        self.expect("ELSE")
        els = self.expr()
        self.expect("ENDIF")
        for c, t in reversed(arms):
            els = T.Ite(c, t, els)
        return els


def parse_theory(text: str) -> T.Theory:
    """Parse a single theory from source text."""
    p = TheoryParser(text)
    th = p.parse_theory()
    if p.peek().kind != "eof":
        p.fail("trailing input after theory")
    return th


def parse_theories(text: str):
    """Parse a file possibly containing several theories."""
    p = TheoryParser(text)
    out = [p.parse_theory()]
    while p.peek().kind != "eof":
        out.append(p.parse_theory())
    return out


def parse_expr(text: str) -> T.Expr:
    p = TheoryParser(text)
    e = p.expr()
    if p.peek().kind != "eof":
        p.fail("trailing input after expression")
    return e


def parse_type(text: str) -> T.TypeExpr:
    p = TheoryParser(text)
    t = p.type_expr()
    if p.peek().kind != "eof":
        p.fail("trailing input after type")
    return t


# ---------------------------------------------------------------------------
# Proof scripts: parenthesized prefix command trees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sexp:
    """Either an atom (symbol/number/string) or a parenthesized list."""

    items: Optional[tuple] = None
    atom: Optional[str] = None
    string: bool = False

    def is_list(self):
        return self.items is not None


SEXP_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>;[^\n]*|%[^\n]*)
  | (?P<str>"(?:[^"\\]|\\.)*")
  | (?P<paren>[()])
  | (?P<atom>[^()\s";]+)
""", re.VERBOSE)


def _sexp_tokens(text):
    line, col, pos = 1, 1, 0
    out = []
    while pos < len(text):
        m = SEXP_TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(line, col, f"unexpected character {text[pos]!r}")
        kind, tok = m.lastgroup, m.group()
        if kind not in ("ws", "comment"):
            out.append((kind, tok, line, col))
        nl = tok.count("\n")
        if nl:
            line += nl
            col = len(tok) - tok.rfind("\n")
        else:
            col += len(tok)
        pos = m.end()
    return out


def parse_sexps(text: str):
    tokens = _sexp_tokens(text)
    pos = 0

    def parse_one():
        nonlocal pos
        if pos >= len(tokens):
            raise ParseError(1, 1, "unexpected end of script")
        kind, tok, line, col = tokens[pos]
        pos += 1
        if kind == "str":
            body = tok[1:-1].replace('\\"', '"').replace("\\\\", "\\")
            return Sexp(atom=body, string=True)
        if kind == "atom":
            return Sexp(atom=tok)
        if tok == "(":
            items = []
            while True:
                if pos >= len(tokens):
                    raise ParseError(line, col, "unclosed parenthesis")
                if tokens[pos][1] == ")":
                    pos += 1
                    return Sexp(items=tuple(items))
                items.append(parse_one())
        raise ParseError(line, col, f"unexpected {tok!r}")

    out = []
    while pos < len(tokens):
        out.append(parse_one())
    return out


@dataclass
class ProofScript:
    """Named proof entries: formula name -> list of command sexps."""

    entries: list  # list of (name, [Sexp, ...])


def parse_proof_script(text: str) -> ProofScript:
    entries = []
    for sx in parse_sexps(text):
        if not sx.is_list() or len(sx.items) < 2 or sx.items[0].atom != "proof":
            raise ParseError(1, 1, "expected (proof \"name\" command...) entries")
        name = sx.items[1].atom
        steps = list(sx.items[2:])
        entries.append((name, steps))
    return ProofScript(entries)


def script_to_text(script: ProofScript) -> str:
    out = []
    for name, steps in script.entries:
        body = "\n".join("  " + sexp_to_text(s) for s in steps)
        out.append(f'(proof "{name}"\n{body})\n')
    return "\n".join(out)


def sexp_to_text(sx: Sexp) -> str:
    if sx.is_list():
        return "(" + " ".join(sexp_to_text(i) for i in sx.items) + ")"
    if sx.string:
        return '"' + sx.atom.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return sx.atom
