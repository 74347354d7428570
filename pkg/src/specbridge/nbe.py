"""Normalization by evaluation.

Terms are interpreted into a semantic domain where definitions unfold,
foreach/fold unroll over their static dimensions, arithmetic on constants
folds exactly, and network applications stay stuck as neutral terms.
Reading the result back gives a quantifier-and-atom normal form in
negation normal form: negation is eliminated by flipping comparison
operators, so both compiler backends only ever see positive atoms.

Stuck rational values are represented by `Term` trees; stuck booleans by
`NF` trees.  Quantified tensor variables are eta-expanded into vectors of
scalar unknowns (`TermElem`), which is what lets the verifier backend
treat every atom as a scalar linear form later on.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from . import syntax as S
from .errors import DivisionByZero, NormalizationError
from .network import Network, eval_network
from .syntax import (
    App, Binary, BoolLit, Expr, Fold, Foreach, If, Index, Lam, Let, NatLit,
    Quant, RatLit, TBool, TIndex, TNatLit, TRat, TVec, Type, Unary, Var,
    VecLit,
)
from .typecheck import TypedProgram, tensor_shape

# ---------------------------------------------------------------------------
# Stuck rational terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Term:
    pass


@dataclass(frozen=True)
class TermConst(Term):
    value: Fraction


@dataclass(frozen=True)
class TermElem(Term):
    """Component of a quantified variable; path () means a scalar."""
    var: str
    path: tuple


@dataclass(frozen=True)
class TermParam(Term):
    name: str


@dataclass(frozen=True)
class TermData(Term):
    name: str
    path: tuple


@dataclass(frozen=True)
class TermNet(Term):
    """Output component `out` of a network applied to scalar argument terms."""
    name: str
    args: tuple
    out: int


@dataclass(frozen=True)
class TermNeg(Term):
    arg: Term


@dataclass(frozen=True)
class TermBin(Term):
    op: str  # add sub mul div
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class TermIte(Term):
    cond: "NF"
    then: Term
    orelse: Term


# ---------------------------------------------------------------------------
# Boolean normal forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NF:
    pass


@dataclass(frozen=True)
class NFTrue(NF):
    pass


@dataclass(frozen=True)
class NFFalse(NF):
    pass


@dataclass(frozen=True)
class NFAtom(NF):
    op: str  # le lt eq ne
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class NFAnd(NF):
    children: tuple


@dataclass(frozen=True)
class NFOr(NF):
    children: tuple


@dataclass(frozen=True)
class NFQuant(NF):
    kind: str    # forall | exists
    var: str
    dims: tuple  # () for a scalar Rat variable
    body: NF


# ---------------------------------------------------------------------------
# Values
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VRat:
    value: Fraction


@dataclass(frozen=True)
class VNat:
    value: int


@dataclass(frozen=True)
class VBool:
    value: bool


@dataclass(frozen=True)
class VVec:
    items: tuple


@dataclass(frozen=True)
class VClosure:
    env: tuple
    binder: str
    ann: Optional[Type]
    body: Expr
    evaluator: "Evaluator"


@dataclass(frozen=True)
class VNetFun:
    name: str
    shape: tuple                 # (m, n)
    net: Optional[Network]       # concrete network, if bound


@dataclass(frozen=True)
class VTerm:
    term: Term


@dataclass(frozen=True)
class VProp:
    nf: NF


# -- term smart constructors -------------------------------------------------

def _as_term(v) -> Term:
    if isinstance(v, VRat):
        return TermConst(v.value)
    if isinstance(v, VTerm):
        return v.term
    raise NormalizationError(f"expected a rational value, got {v!r}")


def _wrap(t: Term):
    return VRat(t.value) if isinstance(t, TermConst) else VTerm(t)


def v_add(a, b):
    if isinstance(a, VRat) and isinstance(b, VRat):
        return VRat(a.value + b.value)
    ta, tb = _as_term(a), _as_term(b)
    if isinstance(ta, TermConst) and ta.value == 0:
        return _wrap(tb)
    if isinstance(tb, TermConst) and tb.value == 0:
        return _wrap(ta)
    return VTerm(TermBin("add", ta, tb))


def v_sub(a, b):
    if isinstance(a, VRat) and isinstance(b, VRat):
        return VRat(a.value - b.value)
    ta, tb = _as_term(a), _as_term(b)
    if isinstance(tb, TermConst) and tb.value == 0:
        return _wrap(ta)
    return VTerm(TermBin("sub", ta, tb))


def v_mul(a, b):
    if isinstance(a, VRat) and isinstance(b, VRat):
        return VRat(a.value * b.value)
    ta, tb = _as_term(a), _as_term(b)
    for x, y in ((ta, tb), (tb, ta)):
        if isinstance(x, TermConst):
            if x.value == 0:
                return VRat(Fraction(0))
            if x.value == 1:
                return _wrap(y)
    return VTerm(TermBin("mul", ta, tb))


def v_div(a, b):
    if isinstance(b, VRat) and b.value == 0:
        raise DivisionByZero("division by zero during normalization")
    if isinstance(a, VRat) and isinstance(b, VRat):
        return VRat(a.value / b.value)
    ta, tb = _as_term(a), _as_term(b)
    if isinstance(tb, TermConst) and tb.value == 1:
        return _wrap(ta)
    return VTerm(TermBin("div", ta, tb))


def v_neg(a):
    if isinstance(a, VRat):
        return VRat(-a.value)
    t = _as_term(a)
    if isinstance(t, TermNeg):
        return _wrap(t.arg)
    return VTerm(TermNeg(t))


# -- boolean smart constructors ----------------------------------------------

def nf_and(children) -> NF:
    out = []
    for c in children:
        if isinstance(c, NFFalse):
            return NFFalse()
        if isinstance(c, NFTrue):
            continue
        if isinstance(c, NFAnd):
            out.extend(c.children)
        else:
            out.append(c)
    if not out:
        return NFTrue()
    if len(out) == 1:
        return out[0]
    return NFAnd(tuple(out))


def nf_or(children) -> NF:
    out = []
    for c in children:
        if isinstance(c, NFTrue):
            return NFTrue()
        if isinstance(c, NFFalse):
            continue
        if isinstance(c, NFOr):
            out.extend(c.children)
        else:
            out.append(c)
    if not out:
        return NFFalse()
    if len(out) == 1:
        return out[0]
    return NFOr(tuple(out))


_FLIP = {"le": "lt", "lt": "le", "eq": "ne", "ne": "eq"}


def nf_not(nf: NF) -> NF:
    """Negation normal form: push negation to the atoms and flip them."""
    if isinstance(nf, NFTrue):
        return NFFalse()
    if isinstance(nf, NFFalse):
        return NFTrue()
    if isinstance(nf, NFAtom):
        if nf.op in ("eq", "ne"):
            return NFAtom(_FLIP[nf.op], nf.lhs, nf.rhs)
        # not (a <= b)  =>  b < a ;  not (a < b)  =>  b <= a
        return NFAtom(_FLIP[nf.op], nf.rhs, nf.lhs)
    if isinstance(nf, NFAnd):
        return nf_or([nf_not(c) for c in nf.children])
    if isinstance(nf, NFOr):
        return nf_and([nf_not(c) for c in nf.children])
    if isinstance(nf, NFQuant):
        kind = "exists" if nf.kind == "forall" else "forall"
        return NFQuant(kind, nf.var, nf.dims, nf_not(nf.body))
    raise NormalizationError(f"cannot negate {nf!r}")


def _as_nf(v) -> NF:
    if isinstance(v, VBool):
        return NFTrue() if v.value else NFFalse()
    if isinstance(v, VProp):
        return v.nf
    raise NormalizationError(f"expected a boolean value, got {v!r}")


def _wrap_nf(nf: NF):
    if isinstance(nf, NFTrue):
        return VBool(True)
    if isinstance(nf, NFFalse):
        return VBool(False)
    return VProp(nf)


def v_and(a, b):
    return _wrap_nf(nf_and([_as_nf(a), _as_nf(b)]))


def v_or(a, b):
    return _wrap_nf(nf_or([_as_nf(a), _as_nf(b)]))


def v_not(a):
    return _wrap_nf(nf_not(_as_nf(a)))


def _v_cmp(op, a, b):
    if isinstance(a, VRat) and isinstance(b, VRat):
        x, y = a.value, b.value
        return VBool({"le": x <= y, "lt": x < y,
                      "eq": x == y, "ne": x != y}[op])
    return VProp(NFAtom(op, _as_term(a), _as_term(b)))


# ---------------------------------------------------------------------------
# The evaluator
# ---------------------------------------------------------------------------

class Evaluator:
    """Evaluate elaborated expressions to values.

    `resources` may bind networks (making applications to ground arguments
    compute), parameters and datasets (inlining their values).  Unbound
    networks stay neutral; unbound Rat parameters and dataset elements stay
    symbolic.  `quant_assignment` short-circuits quantifiers for ground
    evaluation at chosen points (used by oracles and witness re-checking).
    """

    def __init__(self, tp: TypedProgram, resources=None,
                 quant_assignment=None):
        self.tp = tp
        self.resources = resources
        self.quant_assignment = quant_assignment
        self.used_names: set = set()
        self._globals_cache: dict = {}

    # -- fresh problem-space variable names ---------------------------------
    def fresh(self, base: str) -> str:
        if base not in self.used_names:
            self.used_names.add(base)
            return base
        k = 1
        while f"{base}_{k}" in self.used_names:
            k += 1
        name = f"{base}_{k}"
        self.used_names.add(name)
        return name

    # -- globals -------------------------------------------------------------
    def global_value(self, name: str):
        if name in self._globals_cache:
            return self._globals_cache[name]
        decl = self.tp.decl(name)
        if decl.kind == S.NETWORK:
            net = None
            if self.resources is not None:
                net = self.resources.networks.get(name)
            value = VNetFun(name, self.tp.networks[name], net)
        elif decl.kind == S.PARAMETER:
            bound = (self.resources.parameters.get(name)
                     if self.resources is not None else None)
            if bound is not None:
                value = _param_value(bound, self.tp.parameters[name])
            elif isinstance(self.tp.parameters[name], TRat):
                value = VTerm(TermParam(name))
            else:
                raise NormalizationError(
                    f"parameter {name!r} of type "
                    f"{self.tp.parameters[name]} must be bound")
        elif decl.kind == S.DATASET:
            bound = (self.resources.datasets.get(name)
                     if self.resources is not None else None)
            shape = self.tp.datasets[name]
            if bound is not None:
                value = _dataset_value(bound)
            else:
                value = _symbolic_tensor(shape, lambda p: TermData(name, p))
        elif decl.body is not None:
            value = self.eval((), decl.body)
        else:
            raise NormalizationError(f"declaration {name!r} has no value")
        self._globals_cache[name] = value
        return value

    # -- core evaluation ------------------------------------------------------
    def eval(self, env: tuple, e: Expr):
        if isinstance(e, Var):
            if e.scope == "bound":
                return env[e.level]
            return self.global_value(e.name)
        if isinstance(e, RatLit):
            return VRat(e.value)
        if isinstance(e, NatLit):
            return VNat(e.value)
        if isinstance(e, BoolLit):
            return VBool(e.value)
        if isinstance(e, Lam):
            return VClosure(env, e.binder, e.ann, e.body, self)
        if isinstance(e, App):
            return self.apply(self.eval(env, e.fn), self.eval(env, e.arg))
        if isinstance(e, Unary):
            v = self.eval(env, e.arg)
            return v_neg(v) if e.op == "neg" else v_not(v)
        if isinstance(e, Binary):
            return self._binary(env, e)
        if isinstance(e, If):
            cond = self.eval(env, e.cond)
            if isinstance(cond, VBool):
                return self.eval(env, e.then if cond.value else e.orelse)
            then = self.eval(env, e.then)
            orelse = self.eval(env, e.orelse)
            return _stuck_if(_as_nf(cond), then, orelse)
        if isinstance(e, Quant):
            return self._quant(env, e)
        if isinstance(e, Foreach):
            n = e.dim.value
            return VVec(tuple(self.eval(env + (VNat(i),), e.body)
                              for i in range(n)))
        if isinstance(e, VecLit):
            return VVec(tuple(self.eval(env, x) for x in e.items))
        if isinstance(e, Index):
            vec = self.eval(env, e.vec)
            idx = self.eval(env, e.idx)
            if not isinstance(vec, VVec) or not isinstance(idx, VNat):
                raise NormalizationError(f"bad index {e}")
            return vec.items[idx.value]
        if isinstance(e, Fold):
            fn = self.eval(env, e.fn)
            acc = self.eval(env, e.init)
            vec = self.eval(env, e.vec)
            if not isinstance(vec, VVec):
                raise NormalizationError("fold over a non-vector")
            for item in reversed(vec.items):
                acc = self.apply(self.apply(fn, item), acc)
            return acc
        if isinstance(e, Let):
            return self.eval(env + (self.eval(env, e.bound),), e.body)
        raise NormalizationError(f"cannot evaluate {e!r}")

    def apply(self, fn, arg):
        if isinstance(fn, VClosure):
            return fn.evaluator.eval(fn.env + (arg,), fn.body)
        if isinstance(fn, VNetFun):
            return self._apply_network(fn, arg)
        raise NormalizationError(f"applying a non-function {fn!r}")

    def _apply_network(self, fn: VNetFun, arg):
        m, n = fn.shape
        if not isinstance(arg, VVec) or len(arg.items) != m:
            raise NormalizationError(
                f"network {fn.name!r} expects a {m}-vector argument")
        if fn.net is not None and all(isinstance(x, VRat) for x in arg.items):
            outputs = eval_network(fn.net, [x.value for x in arg.items],
                                   exact=True)
            return VVec(tuple(VRat(Fraction(o)) for o in outputs))
        args = tuple(_as_term(x) for x in arg.items)
        return VVec(tuple(VTerm(TermNet(fn.name, args, j)) for j in range(n)))

    _BIN = {"add": v_add, "sub": v_sub, "mul": v_mul, "div": v_div,
            "and": v_and, "or": v_or}

    def _binary(self, env, e: Binary):
        if e.op == "implies":
            lhs = self.eval(env, e.lhs)
            rhs = self.eval(env, e.rhs)
            return v_or(v_not(lhs), rhs)
        lhs = self.eval(env, e.lhs)
        rhs = self.eval(env, e.rhs)
        if e.op in self._BIN:
            return self._BIN[e.op](lhs, rhs)
        if e.op in ("leq", "lt", "eq", "neq"):
            op = {"leq": "le", "lt": "lt", "eq": "eq", "neq": "ne"}[e.op]
            return _v_cmp(op, lhs, rhs)
        if e.op == "geq":
            return _v_cmp("le", rhs, lhs)
        if e.op == "gt":
            return _v_cmp("lt", rhs, lhs)
        raise NormalizationError(f"unknown operator {e.op}")

    def _quant(self, env, e: Quant):
        t = e.ann
        if isinstance(t, TIndex):
            n = t.dim.value
            parts = [self.eval(env + (VNat(i),), e.body) for i in range(n)]
            combine = v_and if e.kind == "forall" else v_or
            out = VBool(e.kind == "forall")
            for p in parts:
                out = combine(out, p)
            return out
        if isinstance(t, TBool):
            parts = [self.eval(env + (VBool(b),), e.body)
                     for b in (False, True)]
            return (v_and if e.kind == "forall" else v_or)(*parts)
        dims = _quant_dims(t)
        if dims is None:
            raise NormalizationError(
                f"cannot quantify over {t} (only Rat, Bool, Index and "
                "rational tensors)")
        name = self.fresh(e.binder)
        if self.quant_assignment is not None:
            if name not in self.quant_assignment:
                raise NormalizationError(
                    f"ground evaluation is missing a value for {name!r}")
            value = self.quant_assignment[name]
            result = self.eval(env + (value,), e.body)
            if not isinstance(result, VBool):
                raise NormalizationError(
                    "ground evaluation did not produce a boolean")
            return result
        symbolic = _symbolic_tensor(dims, lambda p: TermElem(name, p))
        body = self.eval(env + (symbolic,), e.body)
        if isinstance(body, VBool):
            return body  # nonempty domain: constant body decides it
        return VProp(NFQuant(e.kind, name, dims, _as_nf(body)))


def _quant_dims(t: Type) -> Optional[tuple]:
    if isinstance(t, TRat):
        return ()
    return tensor_shape(t)


def _symbolic_tensor(dims: tuple, make, path: tuple = ()):
    if not dims:
        return VTerm(make(path))
    return VVec(tuple(_symbolic_tensor(dims[1:], make, path + (i,))
                      for i in range(dims[0])))


def _stuck_if(cond: NF, then, orelse):
    if isinstance(then, VVec) and isinstance(orelse, VVec):
        if len(then.items) != len(orelse.items):
            raise NormalizationError("if branches of mismatched shape")
        return VVec(tuple(_stuck_if(cond, a, b)
                          for a, b in zip(then.items, orelse.items)))
    if isinstance(then, (VBool, VProp)) or isinstance(orelse, (VBool, VProp)):
        # boolean selection: (c and t) or (not c and e)
        c = _wrap_nf(cond)
        return v_or(v_and(c, then), v_and(v_not(c), orelse))
    return VTerm(TermIte(cond, _as_term(then), _as_term(orelse)))


def _param_value(raw, t: Type):
    if isinstance(t, TRat):
        return VRat(Fraction(raw))
    if isinstance(t, TBool):
        return VBool(bool(raw))
    return VNat(int(raw))


def _dataset_value(data):
    if isinstance(data, (list, tuple)):
        return VVec(tuple(_dataset_value(x) for x in data))
    return VRat(Fraction(data))


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def normalise_property(tp: TypedProgram, name: str, resources=None) -> NF:
    decl = tp.decl(name)
    if decl.kind != S.PROPERTY:
        raise NormalizationError(f"{name!r} is not an @property declaration")
    ev = Evaluator(tp, resources)
    return _as_nf(ev.eval((), decl.body))


def normalise_expr(tp: TypedProgram, e: Expr, resources=None):
    return Evaluator(tp, resources).eval((), e)


# ---------------------------------------------------------------------------
# Readback (quote)
# ---------------------------------------------------------------------------

_OPQ = {"le": "leq", "lt": "lt", "eq": "eq", "ne": "neq"}


def quote_term(t: Term) -> Expr:
    if isinstance(t, TermConst):
        if t.value < 0:
            return Unary("neg", RatLit(-t.value))
        return RatLit(t.value)
    if isinstance(t, TermElem):
        e: Expr = Var(t.var, scope="quant")
        for i in t.path:
            e = Index(e, NatLit(i))
        return e
    if isinstance(t, TermParam):
        return Var(t.name, scope="global")
    if isinstance(t, TermData):
        e = Var(t.name, scope="global")
        for i in t.path:
            e = Index(e, NatLit(i))
        return e
    if isinstance(t, TermNet):
        app = App(Var(t.name, scope="global"),
                  VecLit(tuple(quote_term(a) for a in t.args)))
        return Index(app, NatLit(t.out))
    if isinstance(t, TermNeg):
        return Unary("neg", quote_term(t.arg))
    if isinstance(t, TermBin):
        return Binary(t.op, quote_term(t.lhs), quote_term(t.rhs))
    if isinstance(t, TermIte):
        return If(quote_nf(t.cond), quote_term(t.then), quote_term(t.orelse))
    raise NormalizationError(f"cannot quote {t!r}")


def quote_nf(nf: NF) -> Expr:
    if isinstance(nf, NFTrue):
        return BoolLit(True)
    if isinstance(nf, NFFalse):
        return BoolLit(False)
    if isinstance(nf, NFAtom):
        return Binary(_OPQ[nf.op], quote_term(nf.lhs), quote_term(nf.rhs))
    if isinstance(nf, NFAnd):
        out = quote_nf(nf.children[0])
        for c in nf.children[1:]:
            out = Binary("and", out, quote_nf(c))
        return out
    if isinstance(nf, NFOr):
        out = quote_nf(nf.children[0])
        for c in nf.children[1:]:
            out = Binary("or", out, quote_nf(c))
        return out
    if isinstance(nf, NFQuant):
        ann = S.tensor(TRat(), list(nf.dims)) if nf.dims else TRat()
        return Quant(nf.kind, nf.var, ann, quote_nf(nf.body))
    raise NormalizationError(f"cannot quote {nf!r}")


def quote_value(v) -> Expr:
    """Eta-long readback of a value (used for definitions, not properties)."""
    if isinstance(v, VRat):
        return quote_term(TermConst(v.value))
    if isinstance(v, VNat):
        return NatLit(v.value)
    if isinstance(v, VBool):
        return BoolLit(v.value)
    if isinstance(v, VVec):
        return VecLit(tuple(quote_value(x) for x in v.items))
    if isinstance(v, VTerm):
        return quote_term(v.term)
    if isinstance(v, VProp):
        return quote_nf(v.nf)
    if isinstance(v, VClosure):
        if v.ann is None:
            raise NormalizationError("cannot quote an unannotated closure")
        ev = v.evaluator
        name = ev.fresh(v.binder)
        dims = _quant_dims(v.ann)
        if dims is None and isinstance(v.ann, TIndex):
            raise NormalizationError("cannot quote an index-level function")
        arg = (_symbolic_tensor(dims, lambda p: TermElem(name, p))
               if dims is not None else VTerm(TermElem(name, ())))
        body = quote_value(ev.eval(v.env + (arg,), v.body))
        return Lam(name, v.ann, body)
    if isinstance(v, VNetFun):
        return Var(v.name, scope="global")
    raise NormalizationError(f"cannot quote {v!r}")


# ---------------------------------------------------------------------------
# Ground (exact rational) evaluation of normal forms
# ---------------------------------------------------------------------------

def term_eval(t: Term, assign: dict, networks: dict) -> Fraction:
    """Exact value of a term; `assign` maps (var, path) -> Fraction,
    parameters by ("param:name", ()) and data by ("data:name", path)."""
    if isinstance(t, TermConst):
        return t.value
    if isinstance(t, TermElem):
        return assign[(t.var, t.path)]
    if isinstance(t, TermParam):
        return assign[("param:" + t.name, ())]
    if isinstance(t, TermData):
        return assign[("data:" + t.name, t.path)]
    if isinstance(t, TermNet):
        xs = [term_eval(a, assign, networks) for a in t.args]
        return Fraction(eval_network(networks[t.name], xs, exact=True)[t.out])
    if isinstance(t, TermNeg):
        return -term_eval(t.arg, assign, networks)
    if isinstance(t, TermBin):
        a = term_eval(t.lhs, assign, networks)
        b = term_eval(t.rhs, assign, networks)
        if t.op == "add":
            return a + b
        if t.op == "sub":
            return a - b
        if t.op == "mul":
            return a * b
        if b == 0:
            raise DivisionByZero("division by zero in ground evaluation")
        return a / b
    if isinstance(t, TermIte):
        branch = nf_eval(t.cond, assign, networks)
        return term_eval(t.then if branch else t.orelse, assign, networks)
    raise NormalizationError(f"cannot evaluate {t!r}")


def nf_eval(nf: NF, assign: dict, networks: dict) -> bool:
    """Exact truth of a normal form; quantified variables must be assigned
    (quantifiers are evaluated at the given point, not searched)."""
    if isinstance(nf, NFTrue):
        return True
    if isinstance(nf, NFFalse):
        return False
    if isinstance(nf, NFAtom):
        a = term_eval(nf.lhs, assign, networks)
        b = term_eval(nf.rhs, assign, networks)
        return {"le": a <= b, "lt": a < b, "eq": a == b, "ne": a != b}[nf.op]
    if isinstance(nf, NFAnd):
        return all(nf_eval(c, assign, networks) for c in nf.children)
    if isinstance(nf, NFOr):
        return any(nf_eval(c, assign, networks) for c in nf.children)
    if isinstance(nf, NFQuant):
        return nf_eval(nf.body, assign, networks)
    raise NormalizationError(f"cannot evaluate {nf!r}")


def nf_variables(nf: NF) -> dict:
    """Quantified variables of a normal form: name -> dims."""
    out: dict = {}

    def walk(n):
        if isinstance(n, NFQuant):
            out[n.var] = n.dims
            walk(n.body)
        elif isinstance(n, (NFAnd, NFOr)):
            for c in n.children:
                walk(c)
    walk(nf)
    return out
