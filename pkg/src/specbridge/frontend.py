"""Lexing, parsing and name resolution for `.vcl` specification sources.

Layout is line-based: a declaration starts in column 1, continuation lines
are indented.  `--` starts a comment.  `@network` / `@dataset` /
`@parameter` / `@property` annotations sit on their own line above the
declaration they mark.

Operator precedence, tightest first:
    application > `!` > unary `-` > `*` `/` > `+` `-` > comparisons
    > `not` > `and` > `or` > `=>` (right associative)
Comparisons chain: `a <= b <= c` means `a <= b and b <= c`.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import LexError, ParseError, ResolveError
from . import syntax as S
from .syntax import (
    App, Binary, BoolLit, Decl, Expr, Fold, Foreach, If, Index, Lam, Let,
    NatLit, Program, Quant, RatLit, TBool, TFun, TIndex, TNat, TNatLit, TPi,
    TRat, TVar, Type, Unary, Var, VecLit, tensor,
)

KEYWORDS = {
    "type", "forall", "exists", "foreach", "let", "in", "if", "then", "else",
    "and", "or", "not", "true", "false", "fold",
    "Tensor", "Index", "Rat", "Bool", "Nat",
}

ANNOTATIONS = {"network", "dataset", "parameter", "property"}

_TWO_CHAR = {"->", "=>", "<=", ">=", "==", "!="}
_ONE_CHAR = set("()[]\\.,:=+-*/<>!@")


@dataclass(frozen=True)
class Token:
    kind: str   # ident kw nat rat op annotation eof
    text: str
    line: int
    col: int

    def __repr__(self):
        return f"{self.kind}:{self.text}@{self.line}:{self.col}"


def tokenize(source: str) -> list[Token]:
    """Lex the source.  Column-1 tokens mark declaration starts."""
    tokens: list[Token] = []
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("--", 1)[0].rstrip()
        i = 0
        n = len(line)
        while i < n:
            c = line[i]
            col = i + 1
            if c.isspace():
                i += 1
                continue
            if c.isdigit():
                j = i
                while j < n and line[j].isdigit():
                    j += 1
                if j < n and line[j] == "." and j + 1 < n and line[j + 1].isdigit():
                    j += 1
                    while j < n and line[j].isdigit():
                        j += 1
                    if j < n and (line[j].isalpha() or line[j] == "."):
                        raise LexError(f"malformed numeral at {lineno}:{col}")
                    tokens.append(Token("rat", line[i:j], lineno, col))
                else:
                    if j < n and line[j].isalpha():
                        raise LexError(f"malformed numeral at {lineno}:{col}")
                    tokens.append(Token("nat", line[i:j], lineno, col))
                i = j
                continue
            if c.isalpha() or c == "_":
                j = i
                while j < n and (line[j].isalnum() or line[j] in "_'"):
                    j += 1
                word = line[i:j]
                kind = "kw" if word in KEYWORDS else "ident"
                tokens.append(Token(kind, word, lineno, col))
                i = j
                continue
            if c == "@":
                j = i + 1
                while j < n and line[j].isalpha():
                    j += 1
                word = line[i + 1:j]
                if word not in ANNOTATIONS:
                    raise LexError(f"unknown annotation @{word} at {lineno}:{col}")
                tokens.append(Token("annotation", word, lineno, col))
                i = j
                continue
            if line[i:i + 2] in _TWO_CHAR:
                tokens.append(Token("op", line[i:i + 2], lineno, col))
                i += 2
                continue
            if c in _ONE_CHAR:
                tokens.append(Token("op", c, lineno, col))
                i += 1
                continue
            raise LexError(f"illegal character {c!r} at {lineno}:{col}")
    tokens.append(Token("eof", "", (tokens[-1].line + 1) if tokens else 1, 1))
    return tokens


def declaration_starts(tokens: list[Token]) -> list[int]:
    """Indices of tokens that open a new declaration.

    A column-1 token starts a declaration unless it is the name line of a
    preceding annotation or the definition line matching a signature.
    """
    out = []
    after_annotation = False
    pending_name = None
    for i, t in enumerate(tokens):
        if t.kind == "eof" or t.col != 1:
            continue
        if t.kind == "annotation":
            out.append(i)
            after_annotation = True
            pending_name = None
        elif t.kind == "ident" and after_annotation:
            after_annotation = False
            pending_name = t.text
        elif t.kind == "ident" and t.text == pending_name:
            pending_name = None
        else:
            out.append(i)
            after_annotation = False
            pending_name = t.text if t.kind == "ident" else None
    return out


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- token plumbing ----------------------------------------------------
    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        t = self.tokens[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        t = self.peek()
        if not self.at(kind, text):
            want = text or kind
            raise ParseError(
                f"expected {want!r} but found {t.text or 'end of input'!r} "
                f"at {t.line}:{t.col}")
        return self.next()

    def fail(self, expected: str):
        t = self.peek()
        raise ParseError(
            f"expected {expected} but found {t.text or 'end of input'!r} "
            f"at {t.line}:{t.col}")

    # -- declarations ------------------------------------------------------
    def declaration(self) -> Decl:
        t = self.peek()
        if t.col != 1:
            self.fail("a declaration starting in column 1")
        if t.kind == "annotation":
            self.next()
            return self._annotated(t.text, t.line)
        if t.kind == "kw" and t.text == "type":
            self.next()
            name = self.expect("ident").text
            self.expect("op", "=")
            ty = self.type_expr()
            return Decl(S.TYPE_SYNONYM, name, synonym=ty, line=t.line)
        if t.kind == "ident":
            return self._def(t.line)
        self.fail("a declaration")

    def _annotated(self, kind: str, line: int) -> Decl:
        name_tok = self.expect("ident")
        self.expect("op", ":")
        ty = self.type_expr()
        if kind == "property":
            eq_name = self.expect("ident")
            if eq_name.text != name_tok.text:
                raise ParseError(
                    f"property body must define {name_tok.text!r}, "
                    f"found {eq_name.text!r} at {eq_name.line}:{eq_name.col}")
            body = self._def_body()
            return Decl(S.PROPERTY, name_tok.text, signature=ty, body=body,
                        line=line)
        return Decl(kind, name_tok.text, signature=ty, line=line)

    def _def(self, line: int) -> Decl:
        name = self.expect("ident").text
        if self.at("op", ":"):
            self.next()
            ty = self.type_expr()
            eq_name = self.expect("ident")
            if eq_name.text != name:
                raise ParseError(
                    f"definition of {name!r} must follow its signature, "
                    f"found {eq_name.text!r} at {eq_name.line}:{eq_name.col}")
            body = self._def_body()
            return Decl(S.DEF, name, signature=ty, body=body, line=line)
        # unannotated definition: only literal aliases are allowed
        self.expect("op", "=")
        body = self.expr()
        if not isinstance(body, (NatLit, RatLit, BoolLit)):
            raise ParseError(
                f"definition {name!r} at line {line} needs a type signature "
                "(only literal constants may omit one)")
        return Decl(S.DEF, name, body=body, line=line)

    def _def_body(self) -> Expr:
        binders = []
        while self.at("ident"):
            binders.append(self.next().text)
        self.expect("op", "=")
        body = self.expr()
        for b in reversed(binders):
            body = Lam(b, None, body)
        return body

    # -- types -------------------------------------------------------------
    def type_expr(self) -> Type:
        if self.at("kw", "forall"):
            self.next()
            binders = []
            while self.at("ident"):
                binders.append(self.next().text)
            if not binders:
                self.fail("shape variable name")
            self.expect("op", ".")
            body = self.type_expr()
            for b in reversed(binders):
                body = TPi(b, body)
            return body
        return self._type_arrow()

    def _type_arrow(self) -> Type:
        dom = self._type_atom()
        if self.at("op", "->"):
            self.next()
            return TFun(dom, self._type_arrow())
        return dom

    def _type_atom(self) -> Type:
        t = self.peek()
        if self.at("op", "("):
            self.next()
            ty = self.type_expr()
            self.expect("op", ")")
            return ty
        if self.at("kw", "Rat"):
            self.next()
            return TRat()
        if self.at("kw", "Bool"):
            self.next()
            return TBool()
        if self.at("kw", "Nat"):
            self.next()
            return TNat()
        if self.at("kw", "Index"):
            self.next()
            return TIndex(self._dim())
        if self.at("kw", "Tensor"):
            self.next()
            elem = self._type_atom()
            self.expect("op", "[")
            dims = [self._dim()]
            while self.at("op", ","):
                self.next()
                dims.append(self._dim())
            self.expect("op", "]")
            return tensor(elem, dims)
        if self.at("nat"):
            return TNatLit(int(self.next().text))
        if self.at("ident"):
            return TVar(self.next().text)
        self.fail("a type")

    def _dim(self) -> Type:
        # dimensions are Nat-kinded, but accept any type atom here so the
        # kind checker can report `Bool where Nat expected` style errors
        return self._type_atom()

    # -- expressions ---------------------------------------------------------
    def expr(self) -> Expr:
        return self._implies()

    def _binder_head(self):
        """Parse `x`, `(x : T)` or a run of them before a dot/arrow."""
        binders = []
        while True:
            if self.at("ident"):
                binders.append((self.next().text, None))
            elif self.at("op", "(") and self.peek(1).kind == "ident" \
                    and self.peek(2).kind == "op" and self.peek(2).text == ":":
                self.next()
                name = self.next().text
                self.next()
                ty = self.type_expr()
                self.expect("op", ")")
                binders.append((name, ty))
            else:
                break
        if not binders:
            self.fail("a binder")
        return binders

    def _implies(self) -> Expr:
        if self.at("kw", "forall") or self.at("kw", "exists") \
                or self.at("kw", "foreach"):
            kind = self.next().text
            binders = self._binder_head()
            self.expect("op", ".")
            body = self.expr()
            for name, ann in reversed(binders):
                body = Quant(kind, name, ann, body)
            return body
        if self.at("kw", "let"):
            self.next()
            name = self.expect("ident").text
            self.expect("op", "=")
            bound = self.expr()
            self.expect("kw", "in")
            return Let(name, bound, self.expr())
        if self.at("kw", "if"):
            self.next()
            cond = self.expr()
            self.expect("kw", "then")
            then = self.expr()
            self.expect("kw", "else")
            return If(cond, then, self.expr())
        if self.at("op", "\\"):
            self.next()
            binders = self._binder_head()
            self.expect("op", "->")
            body = self.expr()
            for name, ann in reversed(binders):
                body = Lam(name, ann, body)
            return body
        lhs = self._or()
        if self.at("op", "=>"):
            self.next()
            return Binary("implies", lhs, self._implies())
        return lhs

    def _or(self) -> Expr:
        e = self._and()
        while self.at("kw", "or"):
            self.next()
            e = Binary("or", e, self._and())
        return e

    def _and(self) -> Expr:
        e = self._not()
        while self.at("kw", "and"):
            self.next()
            e = Binary("and", e, self._not())
        return e

    def _not(self) -> Expr:
        if self.at("kw", "not"):
            self.next()
            return Unary("not", self._not())
        return self._comparison()

    _CMP = {"<=": "leq", "<": "lt", ">=": "geq", ">": "gt",
            "==": "eq", "!=": "neq"}

    def _comparison(self) -> Expr:
        first = self._arith()
        links = []
        while self.at("op") and self.peek().text in self._CMP:
            op = self._CMP[self.next().text]
            links.append((op, self._arith()))
        if not links:
            return first
        atoms = []
        lhs = first
        for op, rhs in links:
            atoms.append(Binary(op, lhs, rhs))
            lhs = rhs
        out = atoms[0]
        for a in atoms[1:]:
            out = Binary("and", out, a)
        return out

    def _arith(self) -> Expr:
        e = self._term()
        while self.at("op") and self.peek().text in ("+", "-"):
            op = "add" if self.next().text == "+" else "sub"
            e = Binary(op, e, self._term())
        return e

    def _term(self) -> Expr:
        e = self._unary()
        while self.at("op") and self.peek().text in ("*", "/"):
            op = "mul" if self.next().text == "*" else "div"
            e = Binary(op, e, self._unary())
        return e

    def _unary(self) -> Expr:
        if self.at("op", "-"):
            self.next()
            return Unary("neg", self._unary())
        return self._index()

    def _index(self) -> Expr:
        e = self._app()
        while self.at("op", "!"):
            self.next()
            e = Index(e, self._app())
        return e

    def _app(self) -> Expr:
        if self.at("kw", "fold"):
            tok = self.next()
            args = []
            while self._starts_atom():
                args.append(self._atom())
            if len(args) != 3:
                raise ParseError(
                    f"fold takes exactly 3 arguments, got {len(args)} "
                    f"at {tok.line}:{tok.col}")
            return Fold(*args)
        e = self._atom()
        while self._starts_atom():
            e = App(e, self._atom())
        return e

    def _starts_atom(self) -> bool:
        t = self.peek()
        if t.kind in ("ident", "nat", "rat"):
            return True
        if t.kind == "kw" and t.text in ("true", "false"):
            return True
        return t.kind == "op" and t.text in ("(", "[")

    def _atom(self) -> Expr:
        t = self.peek()
        if t.kind == "ident":
            self.next()
            return Var(t.text)
        if t.kind == "nat":
            self.next()
            return NatLit(int(t.text))
        if t.kind == "rat":
            self.next()
            return RatLit(Fraction(t.text))
        if t.kind == "kw" and t.text in ("true", "false"):
            self.next()
            return BoolLit(t.text == "true")
        if self.at("op", "("):
            self.next()
            e = self.expr()
            self.expect("op", ")")
            return e
        if self.at("op", "["):
            self.next()
            items = []
            if not self.at("op", "]"):
                items.append(self.expr())
                while self.at("op", ","):
                    self.next()
                    items.append(self.expr())
            self.expect("op", "]")
            return VecLit(tuple(items))
        self.fail("an expression")


def parse(source: str) -> Program:
    """Parse a whole source file.

    Layout resolution: the token stream is segmented at declaration starts,
    so an expression can never run across a declaration boundary.
    """
    tokens = tokenize(source)
    starts = declaration_starts(tokens)
    decls = []
    bounds = starts + [len(tokens) - 1]  # final index is the eof token
    eof = tokens[-1]
    for a, b in zip(bounds, bounds[1:]):
        sub = _Parser(tokens[a:b] + [eof])
        decls.append(sub.declaration())
        if not sub.at("eof"):
            t = sub.peek()
            raise ParseError(
                f"unexpected {t.text!r} after declaration at {t.line}:{t.col}")
    return Program(tuple(decls))


# ---------------------------------------------------------------------------
# Name resolution
# ---------------------------------------------------------------------------

def resolve(program: Program) -> Program:
    """Tag every Var as bound (de Bruijn level) or global; reject forward
    references and duplicate declarations."""
    seen: dict[str, Decl] = {}
    out = []
    for d in program.decls:
        if d.name in seen:
            raise ResolveError(f"duplicate declaration {d.name!r}")
        body = _resolve_expr(d.body, seen, []) if d.body is not None else None
        rd = Decl(d.kind, d.name, signature=d.signature, body=body,
                  synonym=d.synonym, line=d.line)
        seen[d.name] = rd
        out.append(rd)
    return Program(tuple(out))


def _resolve_expr(e: Expr, globals_: dict, env: list[str]) -> Expr:
    if isinstance(e, Var):
        if e.name in env:
            level = len(env) - 1 - env[::-1].index(e.name)
            return Var(e.name, scope="bound", level=level)
        if e.name in globals_:
            return Var(e.name, scope="global")
        raise ResolveError(f"unbound identifier {e.name!r}")
    if isinstance(e, (RatLit, NatLit, BoolLit)):
        return e
    if isinstance(e, Lam):
        return Lam(e.binder, e.ann,
                   _resolve_expr(e.body, globals_, env + [e.binder]))
    if isinstance(e, Quant):
        return Quant(e.kind, e.binder, e.ann,
                     _resolve_expr(e.body, globals_, env + [e.binder]))
    if isinstance(e, Foreach):
        return Foreach(e.binder, e.dim,
                       _resolve_expr(e.body, globals_, env + [e.binder]))
    if isinstance(e, Let):
        return Let(e.binder, _resolve_expr(e.bound, globals_, env),
                   _resolve_expr(e.body, globals_, env + [e.binder]))
    if isinstance(e, App):
        return App(_resolve_expr(e.fn, globals_, env),
                   _resolve_expr(e.arg, globals_, env))
    if isinstance(e, Unary):
        return Unary(e.op, _resolve_expr(e.arg, globals_, env))
    if isinstance(e, Binary):
        return Binary(e.op, _resolve_expr(e.lhs, globals_, env),
                      _resolve_expr(e.rhs, globals_, env))
    if isinstance(e, If):
        return If(_resolve_expr(e.cond, globals_, env),
                  _resolve_expr(e.then, globals_, env),
                  _resolve_expr(e.orelse, globals_, env))
    if isinstance(e, VecLit):
        return VecLit(tuple(_resolve_expr(x, globals_, env) for x in e.items))
    if isinstance(e, Index):
        return Index(_resolve_expr(e.vec, globals_, env),
                     _resolve_expr(e.idx, globals_, env))
    if isinstance(e, Fold):
        return Fold(_resolve_expr(e.fn, globals_, env),
                    _resolve_expr(e.init, globals_, env),
                    _resolve_expr(e.vec, globals_, env))
    raise TypeError(repr(e))


def load(source: str) -> Program:
    """Parse and name-resolve in one step."""
    return resolve(parse(source))
