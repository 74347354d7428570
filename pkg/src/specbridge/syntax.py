"""Abstract syntax of the specification language.

The surface language is a small dependently-typed lambda calculus with
built-in logic, rational arithmetic and fixed-size vectors.  Rank-k tensors
are sugar for nested vectors.  All numeric literals are exact rationals.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union


def parse_rational(text: str) -> Fraction:
    """Parse a decimal or p/q string into an exact rational."""
    return Fraction(text.replace(" ", ""))


def render_rational(q: Fraction) -> str:
    """Render exactly: terminating decimals as decimals (always with a
    decimal point, so Rat literals stay distinct from Nat literals),
    otherwise p/q."""
    if q.denominator == 1:
        return f"{q.numerator}.0"
    den = q.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{q.numerator}/{q.denominator}"
    shift = max(twos, fives)
    scaled = q.numerator * 10**shift // q.denominator
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled)).rjust(shift + 1, "0")
    whole, frac = digits[:-shift], digits[-shift:]
    return f"{sign}{whole}.{frac}" if shift else f"{sign}{whole}"


def fraction_pair(q: Fraction) -> str:
    """Numerator/denominator form used in serialized artifacts."""
    return f"{q.numerator}/{q.denominator}"


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Type:
    pass


@dataclass(frozen=True)
class TBool(Type):
    def __str__(self):
        return "Bool"


@dataclass(frozen=True)
class TRat(Type):
    def __str__(self):
        return "Rat"


@dataclass(frozen=True)
class TNat(Type):
    def __str__(self):
        return "Nat"


@dataclass(frozen=True)
class TNatLit(Type):
    """Type-level natural number (a tensor dimension)."""
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class TVar(Type):
    """Reference to a type synonym or a Nat-kinded shape variable."""
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class TIndex(Type):
    """Bounded index type; `dim` has kind Nat."""
    dim: Type

    def __str__(self):
        return f"Index {self.dim}"


@dataclass(frozen=True)
class TVec(Type):
    """Fixed-length vector; the core form behind Tensor sugar."""
    elem: Type
    dim: Type

    def __str__(self):
        dims = []
        t: Type = self
        while isinstance(t, TVec):
            dims.append(str(t.dim))
            t = t.elem
        return f"Tensor {t} [{', '.join(dims)}]"


@dataclass(frozen=True)
class TFun(Type):
    dom: Type
    cod: Type

    def __str__(self):
        d = f"({self.dom})" if isinstance(self.dom, TFun) else str(self.dom)
        return f"{d} -> {self.cod}"


@dataclass(frozen=True)
class TPi(Type):
    """Nat-kinded shape quantifier in a declaration signature."""
    binder: str
    body: Type

    def __str__(self):
        return f"forall {self.binder} . {self.body}"


def tensor(elem: Type, dims: list) -> Type:
    """Tensor sugar: outermost dimension first."""
    t = elem
    for d in reversed(dims):
        t = TVec(t, d if isinstance(d, Type) else TNatLit(d))
    return t


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Var(Expr):
    name: str
    # filled by name resolution: "bound" with de Bruijn level, or "global"
    scope: Optional[str] = field(default=None, compare=False)
    level: Optional[int] = field(default=None, compare=False)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class RatLit(Expr):
    value: Fraction

    def __str__(self):
        return render_rational(self.value)


@dataclass(frozen=True)
class NatLit(Expr):
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool

    def __str__(self):
        return "true" if self.value else "false"


@dataclass(frozen=True)
class Lam(Expr):
    binder: str
    ann: Optional[Type]
    body: Expr


@dataclass(frozen=True)
class App(Expr):
    fn: Expr
    arg: Expr


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # neg | not
    arg: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str  # add sub mul div and or implies eq neq leq lt geq gt
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class If(Expr):
    cond: Expr
    then: Expr
    orelse: Expr


@dataclass(frozen=True)
class Quant(Expr):
    kind: str  # forall | exists
    binder: str
    ann: Optional[Type]
    body: Expr


@dataclass(frozen=True)
class Foreach(Expr):
    """Tensor builder; introduced by the type checker from forall."""
    binder: str
    dim: Type
    body: Expr


@dataclass(frozen=True)
class VecLit(Expr):
    items: tuple


@dataclass(frozen=True)
class Index(Expr):
    vec: Expr
    idx: Expr


@dataclass(frozen=True)
class Fold(Expr):
    fn: Expr
    init: Expr
    vec: Expr


@dataclass(frozen=True)
class Let(Expr):
    binder: str
    bound: Expr
    body: Expr


# ---------------------------------------------------------------------------
# Declarations
# ---------------------------------------------------------------------------

TYPE_SYNONYM = "type"
DEF = "def"
NETWORK = "network"
DATASET = "dataset"
PARAMETER = "parameter"
PROPERTY = "property"


@dataclass(frozen=True)
class Decl:
    kind: str
    name: str
    signature: Optional[Type] = None  # None only for literal-alias defs
    body: Optional[Expr] = None       # None for network/dataset/parameter
    synonym: Optional[Type] = None    # for kind == "type"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Program:
    decls: tuple

    def decl(self, name: str) -> Decl:
        for d in self.decls:
            if d.name == name:
                return d
        raise KeyError(name)

    def names(self):
        return [d.name for d in self.decls]


# ---------------------------------------------------------------------------
# Pretty printer (minimal parentheses, layout-stable)
# ---------------------------------------------------------------------------

_PREC = {
    "or": 2, "and": 3,
    "eq": 5, "neq": 5, "leq": 5, "lt": 5, "geq": 5, "gt": 5,
    "add": 6, "sub": 6, "mul": 7, "div": 7,
}
_SYM = {
    "add": "+", "sub": "-", "mul": "*", "div": "/",
    "and": "and", "or": "or", "implies": "=>",
    "eq": "==", "neq": "!=", "leq": "<=", "lt": "<", "geq": ">=", "gt": ">",
}


def print_expr(e: Expr, prec: int = 0) -> str:
    s, p = _print(e)
    return f"({s})" if p < prec else s


def _print(e: Expr):
    if isinstance(e, (Var, RatLit, NatLit, BoolLit)):
        return str(e), 11
    if isinstance(e, VecLit):
        return "[" + ", ".join(print_expr(x) for x in e.items) + "]", 11
    if isinstance(e, App):
        return f"{print_expr(e.fn, 10)} {print_expr(e.arg, 11)}", 10
    if isinstance(e, Index):
        return f"{print_expr(e.vec, 9)} ! {print_expr(e.idx, 10)}", 9
    if isinstance(e, Unary) and e.op == "neg":
        return f"-{print_expr(e.arg, 9)}", 8
    if isinstance(e, Unary) and e.op == "not":
        return f"not {print_expr(e.arg, 5)}", 4
    if isinstance(e, Binary) and e.op == "implies":
        # right associative, lowest binary precedence
        return f"{print_expr(e.lhs, 2)} => {print_expr(e.rhs, 1)}", 1
    if isinstance(e, Binary):
        p = _PREC[e.op]
        left = print_expr(e.lhs, p)
        right = print_expr(e.rhs, p + 1)
        return f"{left} {_SYM[e.op]} {right}", p
    if isinstance(e, If):
        return (f"if {print_expr(e.cond)} then {print_expr(e.then)} "
                f"else {print_expr(e.orelse)}"), 0
    if isinstance(e, Quant):
        b = f"({e.binder} : {e.ann})" if e.ann is not None else e.binder
        return f"{e.kind} {b} . {print_expr(e.body)}", 0
    if isinstance(e, Foreach):
        return f"foreach ({e.binder} : Index {e.dim}) . {print_expr(e.body)}", 0
    if isinstance(e, Lam):
        b = f"({e.binder} : {e.ann})" if e.ann is not None else e.binder
        return f"\\{b} -> {print_expr(e.body)}", 0
    if isinstance(e, Fold):
        return (f"fold {print_expr(e.fn, 11)} {print_expr(e.init, 11)} "
                f"{print_expr(e.vec, 11)}"), 10
    if isinstance(e, Let):
        return (f"let {e.binder} = {print_expr(e.bound)} in "
                f"{print_expr(e.body)}"), 0
    raise TypeError(f"unprintable node {e!r}")


def print_decl(d: Decl) -> str:
    if d.kind == TYPE_SYNONYM:
        return f"type {d.name} = {d.synonym}"
    lines = []
    if d.kind in (NETWORK, DATASET, PARAMETER, PROPERTY):
        lines.append(f"@{d.kind}")
    if d.signature is not None:
        lines.append(f"{d.name} : {d.signature}")
    if d.body is not None:
        lines.append(f"{d.name} = {print_expr(d.body)}")
    return "\n".join(lines)


def print_program(p: Program) -> str:
    return "\n\n".join(print_decl(d) for d in p.decls) + "\n"


# ---------------------------------------------------------------------------
# Canonical JSON rendering of the AST (for `parse --dump-ast`)
# ---------------------------------------------------------------------------

def type_to_json(t: Type):
    if isinstance(t, TBool):
        return {"type": "Bool"}
    if isinstance(t, TRat):
        return {"type": "Rat"}
    if isinstance(t, TNat):
        return {"type": "Nat"}
    if isinstance(t, TNatLit):
        return {"type": "NatLit", "value": t.value}
    if isinstance(t, TVar):
        return {"type": "TypeVar", "name": t.name}
    if isinstance(t, TIndex):
        return {"type": "Index", "dim": type_to_json(t.dim)}
    if isinstance(t, TVec):
        return {"type": "Vector", "elem": type_to_json(t.elem),
                "dim": type_to_json(t.dim)}
    if isinstance(t, TFun):
        return {"type": "Fun", "dom": type_to_json(t.dom),
                "cod": type_to_json(t.cod)}
    if isinstance(t, TPi):
        return {"type": "Pi", "binder": t.binder, "body": type_to_json(t.body)}
    raise TypeError(repr(t))


def expr_to_json(e: Expr):
    if isinstance(e, Var):
        out = {"expr": "Var", "name": e.name}
        if e.scope is not None:
            out["scope"] = e.scope
        if e.level is not None:
            out["level"] = e.level
        return out
    if isinstance(e, RatLit):
        return {"expr": "Rat", "value": fraction_pair(e.value)}
    if isinstance(e, NatLit):
        return {"expr": "Nat", "value": e.value}
    if isinstance(e, BoolLit):
        return {"expr": "Bool", "value": e.value}
    if isinstance(e, Lam):
        return {"expr": "Lambda", "binder": e.binder,
                "ann": type_to_json(e.ann) if e.ann else None,
                "body": expr_to_json(e.body)}
    if isinstance(e, App):
        return {"expr": "App", "fn": expr_to_json(e.fn),
                "arg": expr_to_json(e.arg)}
    if isinstance(e, Unary):
        return {"expr": e.op.capitalize(), "arg": expr_to_json(e.arg)}
    if isinstance(e, Binary):
        return {"expr": e.op.capitalize(), "lhs": expr_to_json(e.lhs),
                "rhs": expr_to_json(e.rhs)}
    if isinstance(e, If):
        return {"expr": "If", "cond": expr_to_json(e.cond),
                "then": expr_to_json(e.then), "else": expr_to_json(e.orelse)}
    if isinstance(e, Quant):
        return {"expr": e.kind.capitalize(), "binder": e.binder,
                "ann": type_to_json(e.ann) if e.ann else None,
                "body": expr_to_json(e.body)}
    if isinstance(e, Foreach):
        return {"expr": "Foreach", "binder": e.binder,
                "dim": type_to_json(e.dim), "body": expr_to_json(e.body)}
    if isinstance(e, VecLit):
        return {"expr": "VecLiteral", "items": [expr_to_json(x) for x in e.items]}
    if isinstance(e, Index):
        return {"expr": "Index", "vec": expr_to_json(e.vec),
                "idx": expr_to_json(e.idx)}
    if isinstance(e, Fold):
        return {"expr": "Fold", "fn": expr_to_json(e.fn),
                "init": expr_to_json(e.init), "vec": expr_to_json(e.vec)}
    if isinstance(e, Let):
        return {"expr": "Let", "binder": e.binder,
                "bound": expr_to_json(e.bound), "body": expr_to_json(e.body)}
    raise TypeError(repr(e))


def program_to_json(p: Program):
    out = []
    for d in p.decls:
        entry = {"decl": d.kind, "name": d.name}
        if d.synonym is not None:
            entry["synonym"] = type_to_json(d.synonym)
        if d.signature is not None:
            entry["signature"] = type_to_json(d.signature)
        if d.body is not None:
            entry["body"] = expr_to_json(d.body)
        out.append(entry)
    return {"declarations": out}
