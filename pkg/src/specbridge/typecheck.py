"""Bidirectional kind- and type-checking with tensor shapes in types.

Checking elaborates the program: type synonyms are expanded, numeric
literals adopt Rat/Index types from context, chained comparisons arrive
pre-split from the parser, `forall` at tensor type becomes `foreach`, and
uses of shape-polymorphic definitions are inlined at concrete dimensions
(monomorphization).  Downstream stages only ever see concrete shapes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import syntax as S
from .errors import TypeCheckError
from .syntax import (
    App, Binary, BoolLit, Decl, Expr, Fold, Foreach, If, Index, Lam, Let,
    NatLit, Program, Quant, RatLit, TBool, TFun, TIndex, TNat, TNatLit, TPi,
    TRat, TVar, TVec, Type, Unary, Var, VecLit,
)

KIND_TYPE = "Type"
KIND_NAT = "Nat"


@dataclass
class TypedProgram:
    program: Program                      # elaborated declarations
    types: dict                           # name -> expanded signature Type
    networks: dict                        # name -> (input_dim, output_dim)
    datasets: dict                        # name -> shape tuple
    parameters: dict                      # name -> Type
    node_types: dict = field(default_factory=dict)  # id(expr) -> Type

    def decl(self, name: str) -> Decl:
        return self.program.decl(name)

    def properties(self):
        return [d.name for d in self.program.decls if d.kind == S.PROPERTY]


# ---------------------------------------------------------------------------
# Synonym expansion and kind checking
# ---------------------------------------------------------------------------

def expand_type(t: Type, synonyms: dict, shape_vars: set,
                _stack: tuple = ()) -> Type:
    if isinstance(t, TVar):
        if t.name in shape_vars:
            return t
        if t.name in synonyms:
            if t.name in _stack:
                raise TypeCheckError(f"recursive type synonym {t.name!r}")
            return expand_type(synonyms[t.name], synonyms, shape_vars,
                               _stack + (t.name,))
        raise TypeCheckError(f"unknown type {t.name!r}")
    if isinstance(t, TVec):
        return TVec(expand_type(t.elem, synonyms, shape_vars, _stack),
                    expand_type(t.dim, synonyms, shape_vars, _stack))
    if isinstance(t, TIndex):
        return TIndex(expand_type(t.dim, synonyms, shape_vars, _stack))
    if isinstance(t, TFun):
        return TFun(expand_type(t.dom, synonyms, shape_vars, _stack),
                    expand_type(t.cod, synonyms, shape_vars, _stack))
    if isinstance(t, TPi):
        return TPi(t.binder,
                   expand_type(t.body, synonyms, shape_vars | {t.binder},
                               _stack))
    return t


def infer_kind(t: Type, shape_vars: set = frozenset()) -> str:
    """Kind of an expanded type; shape positions must have kind Nat."""
    if isinstance(t, TNatLit):
        return KIND_NAT
    if isinstance(t, TVar):
        if t.name in shape_vars:
            return KIND_NAT
        raise TypeCheckError(f"unknown type {t.name!r}")
    if isinstance(t, (TBool, TRat, TNat)):
        return KIND_TYPE
    if isinstance(t, TVec):
        _expect_kind(t.dim, KIND_NAT, shape_vars)
        _expect_kind(t.elem, KIND_TYPE, shape_vars)
        return KIND_TYPE
    if isinstance(t, TIndex):
        _expect_kind(t.dim, KIND_NAT, shape_vars)
        return KIND_TYPE
    if isinstance(t, TFun):
        _expect_kind(t.dom, KIND_TYPE, shape_vars)
        _expect_kind(t.cod, KIND_TYPE, shape_vars)
        return KIND_TYPE
    if isinstance(t, TPi):
        _expect_kind(t.body, KIND_TYPE, shape_vars | {t.binder})
        return KIND_TYPE
    raise TypeCheckError(f"unkindable type {t}")


def _expect_kind(t: Type, kind: str, shape_vars: set):
    got = infer_kind(t, shape_vars)
    if got != kind:
        raise TypeCheckError(f"{t} has kind {got} where {kind} expected",
                             expected=kind, actual=got)


def subst_dims(t: Type, mapping: dict) -> Type:
    if isinstance(t, TVar) and t.name in mapping:
        return mapping[t.name]
    if isinstance(t, TVec):
        return TVec(subst_dims(t.elem, mapping), subst_dims(t.dim, mapping))
    if isinstance(t, TIndex):
        return TIndex(subst_dims(t.dim, mapping))
    if isinstance(t, TFun):
        return TFun(subst_dims(t.dom, mapping), subst_dims(t.cod, mapping))
    if isinstance(t, TPi):
        inner = {k: v for k, v in mapping.items() if k != t.binder}
        return TPi(t.binder, subst_dims(t.body, inner))
    return t


def subst_dims_expr(e: Expr, mapping: dict) -> Expr:
    """Substitute shape variables in the type annotations of an expression."""
    if isinstance(e, Lam):
        ann = subst_dims(e.ann, mapping) if e.ann else None
        return Lam(e.binder, ann, subst_dims_expr(e.body, mapping))
    if isinstance(e, Quant):
        ann = subst_dims(e.ann, mapping) if e.ann else None
        return Quant(e.kind, e.binder, ann, subst_dims_expr(e.body, mapping))
    if isinstance(e, Foreach):
        return Foreach(e.binder, subst_dims(e.dim, mapping),
                       subst_dims_expr(e.body, mapping))
    if isinstance(e, App):
        return App(subst_dims_expr(e.fn, mapping),
                   subst_dims_expr(e.arg, mapping))
    if isinstance(e, Unary):
        return Unary(e.op, subst_dims_expr(e.arg, mapping))
    if isinstance(e, Binary):
        return Binary(e.op, subst_dims_expr(e.lhs, mapping),
                      subst_dims_expr(e.rhs, mapping))
    if isinstance(e, If):
        return If(subst_dims_expr(e.cond, mapping),
                  subst_dims_expr(e.then, mapping),
                  subst_dims_expr(e.orelse, mapping))
    if isinstance(e, VecLit):
        return VecLit(tuple(subst_dims_expr(x, mapping) for x in e.items))
    if isinstance(e, Index):
        return Index(subst_dims_expr(e.vec, mapping),
                     subst_dims_expr(e.idx, mapping))
    if isinstance(e, Fold):
        return Fold(subst_dims_expr(e.fn, mapping),
                    subst_dims_expr(e.init, mapping),
                    subst_dims_expr(e.vec, mapping))
    if isinstance(e, Let):
        return Let(e.binder, subst_dims_expr(e.bound, mapping),
                   subst_dims_expr(e.body, mapping))
    return e


def shift_levels(e: Expr, by: int) -> Expr:
    """Shift bound-variable de Bruijn levels of a closed expression.

    Needed when a checked top-level body (levels rooted at 0) is inlined
    under `by` enclosing binders at a use site.
    """
    if by == 0:
        return e
    if isinstance(e, Var):
        if e.scope == "bound":
            return Var(e.name, scope="bound", level=e.level + by)
        return e
    if isinstance(e, Lam):
        return Lam(e.binder, e.ann, shift_levels(e.body, by))
    if isinstance(e, Quant):
        return Quant(e.kind, e.binder, e.ann, shift_levels(e.body, by))
    if isinstance(e, Foreach):
        return Foreach(e.binder, e.dim, shift_levels(e.body, by))
    if isinstance(e, App):
        return App(shift_levels(e.fn, by), shift_levels(e.arg, by))
    if isinstance(e, Unary):
        return Unary(e.op, shift_levels(e.arg, by))
    if isinstance(e, Binary):
        return Binary(e.op, shift_levels(e.lhs, by), shift_levels(e.rhs, by))
    if isinstance(e, If):
        return If(shift_levels(e.cond, by), shift_levels(e.then, by),
                  shift_levels(e.orelse, by))
    if isinstance(e, VecLit):
        return VecLit(tuple(shift_levels(x, by) for x in e.items))
    if isinstance(e, Index):
        return Index(shift_levels(e.vec, by), shift_levels(e.idx, by))
    if isinstance(e, Fold):
        return Fold(shift_levels(e.fn, by), shift_levels(e.init, by),
                    shift_levels(e.vec, by))
    if isinstance(e, Let):
        return Let(e.binder, shift_levels(e.bound, by),
                   shift_levels(e.body, by))
    return e


def match_type(pattern: Type, concrete: Type, solution: dict) -> bool:
    """First-order matching of shape variables against literal dims."""
    if isinstance(pattern, TVar):
        if pattern.name in solution:
            return solution[pattern.name] == concrete
        if isinstance(concrete, TNatLit):
            solution[pattern.name] = concrete
            return True
        return False
    if type(pattern) is not type(concrete):
        return False
    if isinstance(pattern, TNatLit):
        return pattern.value == concrete.value
    if isinstance(pattern, TVec):
        return (match_type(pattern.elem, concrete.elem, solution)
                and match_type(pattern.dim, concrete.dim, solution))
    if isinstance(pattern, TIndex):
        return match_type(pattern.dim, concrete.dim, solution)
    if isinstance(pattern, TFun):
        return (match_type(pattern.dom, concrete.dom, solution)
                and match_type(pattern.cod, concrete.cod, solution))
    return pattern == concrete


def tensor_shape(t: Type) -> Optional[tuple]:
    """Dims of a (possibly nested) rational vector type, else None."""
    dims = []
    while isinstance(t, TVec):
        if not isinstance(t.dim, TNatLit):
            return None
        dims.append(t.dim.value)
        t = t.elem
    return tuple(dims) if isinstance(t, TRat) else None


# ---------------------------------------------------------------------------
# The checker
# ---------------------------------------------------------------------------

class _Checker:
    def __init__(self):
        self.synonyms: dict[str, Type] = {}
        self.globals: dict[str, tuple] = {}   # name -> (declkind, Type|None, Decl)
        self.node_types: dict[int, Type] = {}
        self.current: str = "?"
        self.line: int = 0

    def err(self, msg, expected=None, actual=None):
        return TypeCheckError(f"in {self.current!r}: {msg}",
                              expected=expected, actual=actual,
                              line=self.line)

    def expand(self, t: Type) -> Type:
        return expand_type(t, self.synonyms, set())

    # -- program ------------------------------------------------------------

    def check_program(self, program: Program) -> TypedProgram:
        decls = []
        networks, datasets, parameters, types = {}, {}, {}, {}
        for d in program.decls:
            self.current, self.line = d.name, d.line
            if d.kind == S.TYPE_SYNONYM:
                expanded = self.expand(d.synonym)
                _expect_kind(expanded, KIND_TYPE, set())
                self.synonyms[d.name] = expanded
                decls.append(d)
                continue
            if d.kind == S.DEF and d.signature is None:
                # literal alias (e.g. `currentPosition = 0`)
                decls.append(d)
                self.globals[d.name] = ("alias", None, d)
                continue
            sig = self.expand(d.signature)
            infer_kind(sig, set())
            if d.kind == S.NETWORK:
                networks[d.name] = network_shape(sig, self.err)
            elif d.kind == S.DATASET:
                shape = tensor_shape(sig)
                if shape is None or not shape:
                    raise self.err(
                        f"dataset must have a Tensor Rat [...] type, got {sig}")
                datasets[d.name] = shape
            elif d.kind == S.PARAMETER:
                if not isinstance(sig, (TRat, TNat, TBool)):
                    raise self.err(
                        f"parameter must have type Rat, Nat or Bool, got {sig}")
                parameters[d.name] = sig
            elif d.kind == S.PROPERTY:
                if not isinstance(sig, TBool):
                    raise self.err(
                        "property must be Bool-valued", expected=TBool(),
                        actual=sig)
            if d.body is not None and isinstance(sig, TPi):
                # polymorphic definition: checked at each instantiation
                decls.append(d)
            elif d.body is not None:
                body = self.check(d.body, sig, [])
                decls.append(Decl(d.kind, d.name, signature=sig, body=body,
                                  synonym=None, line=d.line))
            else:
                decls.append(Decl(d.kind, d.name, signature=sig,
                                  synonym=None, line=d.line))
            types[d.name] = sig
            self.globals[d.name] = (d.kind, sig, decls[-1])
        return TypedProgram(Program(tuple(decls)), types, networks,
                            datasets, parameters, self.node_types)

    # -- expressions ----------------------------------------------------------

    def note(self, e: Expr, t: Type) -> Expr:
        self.node_types[id(e)] = t
        return e

    def check(self, e: Expr, want: Type, ctx: list) -> Expr:
        if isinstance(e, NatLit):
            if isinstance(want, TRat):
                return self.note(RatLit(Fraction(e.value)), want)
            if isinstance(want, TIndex):
                if not isinstance(want.dim, TNatLit):
                    raise self.err(
                        f"index literal {e.value} against abstract dimension "
                        f"{want.dim}")
                if e.value >= want.dim.value:
                    raise self.err(
                        f"index {e.value} out of bounds for {want}",
                        expected=want, actual=TNatLit(e.value))
                return self.note(e, want)
            if isinstance(want, TNat):
                return self.note(e, want)
            raise self.err(f"numeric literal where {want} expected",
                           expected=want, actual=TNat())
        if isinstance(e, Var) and e.scope == "global" \
                and self.globals[e.name][0] == "alias":
            return self.check(self.globals[e.name][2].body, want, ctx)
        if isinstance(e, Lam):
            if not isinstance(want, TFun):
                raise self.err(f"lambda where {want} expected",
                               expected=want, actual=None)
            if e.ann is not None and self.expand(e.ann) != want.dom:
                raise self.err(
                    f"binder annotation {e.ann} does not match {want.dom}",
                    expected=want.dom, actual=self.expand(e.ann))
            body = self.check(e.body, want.cod, ctx + [want.dom])
            return self.note(Lam(e.binder, want.dom, body), want)
        if isinstance(e, Quant):
            return self._check_quant(e, want, ctx)
        if isinstance(e, If):
            cond = self.check(e.cond, TBool(), ctx)
            return self.note(If(cond, self.check(e.then, want, ctx),
                                self.check(e.orelse, want, ctx)), want)
        if isinstance(e, Let):
            bound, t1 = self.synth(e.bound, ctx)
            body = self.check(e.body, want, ctx + [t1])
            return self.note(Let(e.binder, bound, body), want)
        if isinstance(e, VecLit):
            if not isinstance(want, TVec) or not isinstance(want.dim, TNatLit):
                raise self.err(f"vector literal where {want} expected",
                               expected=want, actual=None)
            if len(e.items) != want.dim.value:
                raise self.err(
                    f"vector literal has {len(e.items)} elements, "
                    f"type {want} needs {want.dim.value}",
                    expected=want, actual=None)
            items = tuple(self.check(x, want.elem, ctx) for x in e.items)
            return self.note(VecLit(items), want)
        got, t = self.synth(e, ctx)
        if t != want:
            raise self.err(f"type mismatch: expected {want}, got {t}",
                           expected=want, actual=t)
        return got

    def _check_quant(self, e: Quant, want: Type, ctx: list) -> Expr:
        if isinstance(want, TVec):
            # tensor-building forall / foreach
            if e.kind == "exists":
                raise self.err("exists cannot build a tensor",
                               expected=want, actual=None)
            if not isinstance(want.dim, TNatLit):
                raise self.err("foreach needs a concrete dimension")
            binder_t = TIndex(want.dim)
            if e.ann is not None and self.expand(e.ann) != binder_t:
                raise self.err(
                    f"binder {e.binder} : {e.ann} incompatible with {want}",
                    expected=binder_t, actual=self.expand(e.ann))
            body = self.check(e.body, want.elem, ctx + [binder_t])
            return self.note(Foreach(e.binder, want.dim, body), want)
        if not isinstance(want, TBool):
            raise self.err(f"quantifier where {want} expected",
                           expected=want, actual=TBool())
        if e.kind == "foreach":
            raise self.err("foreach builds tensors, not Bool")
        if e.ann is not None:
            binder_t = self.expand(e.ann)
        else:
            binder_t = self._guess_binder(e, ctx)
        infer_kind(binder_t, set())
        body = self.check(e.body, TBool(), ctx + [binder_t])
        return self.note(Quant(e.kind, e.binder, binder_t, body), want)

    def _guess_binder(self, e: Quant, ctx: list) -> Type:
        """Infer an unannotated quantifier binder from its first use as a
        function argument of a declared function."""
        level = len(ctx)

        def walk(x) -> Optional[Type]:
            if isinstance(x, App) and isinstance(x.arg, Var) \
                    and x.arg.scope == "bound" and x.arg.level == level \
                    and isinstance(x.fn, Var) and x.fn.scope == "global":
                sig = self.globals[x.fn.name][1]
                if isinstance(sig, TFun):
                    return sig.dom
            for child in x.__dict__.values():
                if isinstance(child, Expr):
                    found = walk(child)
                    if found is not None:
                        return found
                if isinstance(child, tuple):
                    for c in child:
                        if isinstance(c, Expr):
                            found = walk(c)
                            if found is not None:
                                return found
            return None

        found = walk(e.body)
        if found is None:
            raise self.err(
                f"cannot infer type of quantified variable {e.binder!r}; "
                "add an annotation")
        return found

    def synth(self, e: Expr, ctx: list):
        if isinstance(e, Var):
            if e.scope == "bound":
                return self.note(e, ctx[e.level]), ctx[e.level]
            kind, sig, decl = self.globals[e.name]
            if kind == "alias":
                return self.synth(decl.body, ctx)
            if isinstance(sig, TPi):
                raise self.err(
                    f"shape-polymorphic {e.name!r} must be applied directly "
                    "to an argument of concrete shape")
            return self.note(e, sig), sig
        if isinstance(e, NatLit):
            return self.note(e, TNat()), TNat()
        if isinstance(e, RatLit):
            return self.note(e, TRat()), TRat()
        if isinstance(e, BoolLit):
            return self.note(e, TBool()), TBool()
        if isinstance(e, App):
            return self._synth_app(e, ctx)
        if isinstance(e, Unary):
            if e.op == "neg":
                arg = self.check(e.arg, TRat(), ctx)
                return self.note(Unary("neg", arg), TRat()), TRat()
            arg = self.check(e.arg, TBool(), ctx)
            return self.note(Unary("not", arg), TBool()), TBool()
        if isinstance(e, Binary):
            return self._synth_binary(e, ctx)
        if isinstance(e, Index):
            vec, tv = self.synth(e.vec, ctx)
            if not isinstance(tv, TVec):
                raise self.err(f"indexing into non-tensor of type {tv}",
                               actual=tv)
            idx = self.check(e.idx, TIndex(tv.dim), ctx)
            out = Index(vec, idx)
            return self.note(out, tv.elem), tv.elem
        if isinstance(e, Fold):
            vec, tv = self.synth(e.vec, ctx)
            if not isinstance(tv, TVec):
                raise self.err(f"fold over non-tensor of type {tv}", actual=tv)
            init, tb = self.synth(e.init, ctx)
            fn = self.check(e.fn, TFun(tv.elem, TFun(tb, tb)), ctx)
            out = Fold(fn, init, vec)
            return self.note(out, tb), tb
        if isinstance(e, Let):
            bound, t1 = self.synth(e.bound, ctx)
            body, t2 = self.synth(e.body, ctx + [t1])
            out = Let(e.binder, bound, body)
            return self.note(out, t2), t2
        if isinstance(e, If):
            cond = self.check(e.cond, TBool(), ctx)
            then, t = self.synth(e.then, ctx)
            orelse = self.check(e.orelse, t, ctx)
            return self.note(If(cond, then, orelse), t), t
        if isinstance(e, Quant):
            if e.kind == "foreach":
                if e.ann is None:
                    raise self.err("foreach outside a tensor context needs "
                                   "an Index annotation")
                binder_t = self.expand(e.ann)
                if not (isinstance(binder_t, TIndex)
                        and isinstance(binder_t.dim, TNatLit)):
                    raise self.err(
                        f"foreach binder must have an Index type, got {binder_t}")
                body, tb = self.synth(e.body, ctx + [binder_t])
                t = TVec(tb, binder_t.dim)
                return self.note(Foreach(e.binder, binder_t.dim, body), t), t
            got = self.check(e, TBool(), ctx)
            return got, TBool()
        if isinstance(e, VecLit):
            if not e.items:
                raise self.err("cannot infer the type of an empty vector")
            items = []
            first, t0 = self.synth(e.items[0], ctx)
            items.append(first)
            for x in e.items[1:]:
                items.append(self.check(x, t0, ctx))
            t = TVec(t0, TNatLit(len(items)))
            return self.note(VecLit(tuple(items)), t), t
        if isinstance(e, Lam):
            if e.ann is None:
                raise self.err("cannot infer the type of an unannotated "
                               "lambda; add a binder annotation")
            dom = self.expand(e.ann)
            body, cod = self.synth(e.body, ctx + [dom])
            t = TFun(dom, cod)
            return self.note(Lam(e.binder, dom, body), t), t
        raise self.err(f"cannot type {e!r}")

    def _synth_app(self, e: App, ctx: list):
        # collect the application spine for Pi instantiation
        if isinstance(e.fn, Var) and e.fn.scope == "global":
            kind, sig, decl = self.globals[e.fn.name]
            if isinstance(sig, TPi):
                return self._instantiate(e, decl, sig, ctx)
        fn, tf = self.synth(e.fn, ctx)
        if not isinstance(tf, TFun):
            raise self.err(f"applying a non-function of type {tf}", actual=tf)
        arg = self.check(e.arg, tf.dom, ctx)
        out = App(fn, arg)
        return self.note(out, tf.cod), tf.cod

    def _instantiate(self, e: App, decl: Decl, sig: TPi, ctx: list):
        """Monomorphize a shape-polymorphic definition at a use site by
        matching the argument's type, then inline the specialized body."""
        binders = []
        t: Type = sig
        while isinstance(t, TPi):
            binders.append(t.binder)
            t = t.body
        if not isinstance(t, TFun):
            raise self.err(f"polymorphic {decl.name!r} is not a function")
        arg, ta = self.synth(e.arg, ctx)
        solution: dict[str, Type] = {}
        if not match_type(t.dom, ta, solution) \
                or any(b not in solution for b in binders):
            raise self.err(
                f"cannot instantiate shape variables of {decl.name!r} "
                f"from argument type {ta}",
                expected=t.dom, actual=ta)
        mono_sig = subst_dims(t, solution)
        if decl.body is None:
            raise self.err(f"{decl.name!r} has no body to specialize")
        mono_body = subst_dims_expr(decl.body, solution)
        saved = (self.current, self.line)
        self.current = f"{decl.name}[{','.join(str(solution[b]) for b in binders)}]"
        checked = self.check(mono_body, mono_sig, [])
        self.current, self.line = saved
        # the body was checked closed; re-root its levels at the use site
        out = App(shift_levels(checked, len(ctx)), arg)
        return self.note(out, mono_sig.cod), mono_sig.cod

    _REL = {"leq", "lt", "geq", "gt", "eq", "neq"}

    def _synth_binary(self, e: Binary, ctx: list):
        if e.op in ("add", "sub", "mul", "div"):
            lhs = self.check(e.lhs, TRat(), ctx)
            rhs = self.check(e.rhs, TRat(), ctx)
            return self.note(Binary(e.op, lhs, rhs), TRat()), TRat()
        if e.op in self._REL:
            lhs = self.check(e.lhs, TRat(), ctx)
            rhs = self.check(e.rhs, TRat(), ctx)
            return self.note(Binary(e.op, lhs, rhs), TBool()), TBool()
        lhs = self.check(e.lhs, TBool(), ctx)
        rhs = self.check(e.rhs, TBool(), ctx)
        return self.note(Binary(e.op, lhs, rhs), TBool()), TBool()


def network_shape(sig: Type, err=None) -> tuple:
    """(input_dim, output_dim) of a network signature
    `Tensor Rat [m] -> Tensor Rat [n]`."""
    def bad(msg):
        return err(msg) if err else TypeCheckError(msg)

    if not isinstance(sig, TFun):
        raise bad(f"network must be a function, got {sig}")
    dom, cod = sig.dom, sig.cod
    for side, t in (("input", dom), ("output", cod)):
        if not (isinstance(t, TVec) and isinstance(t.elem, TRat)
                and isinstance(t.dim, TNatLit)):
            raise bad(f"network {side} must be a rank-1 rational tensor, "
                      f"got {t}")
    return (dom.dim.value, cod.dim.value)


def check_program(program: Program) -> TypedProgram:
    return _Checker().check_program(program)


def shape_of(tp: TypedProgram, network_name: str) -> tuple:
    if network_name not in tp.networks:
        raise TypeCheckError(f"{network_name!r} is not a declared network")
    return tp.networks[network_name]
