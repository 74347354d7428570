"""Differentiable-logic loss compilation and interpretation.

A normalized property becomes a JSON-serializable term tree measuring
"how false" the property is.  DL2 maps formulas straight to losses
(0 = satisfied); the fuzzy logics (Godel, Lukasiewicz, Product, Yager)
map to truth values in [0,1] which the root flips via 1 - t.  Quantifiers
become sampling nodes over extracted hyperrectangle domains.

Sampling uses a splittable counter-based generator (a SplitMix64 finalizer
chain keyed by seed, sampling-node id, enclosing sample indices, sample
index and component index), so any interpreter of the tree - including the
separate training harness - reproduces identical sample points.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import LossCompileError, UnboundedDomain
from .nbe import (
    NF, NFAnd, NFAtom, NFFalse, NFOr, NFQuant, NFTrue,
    Term, TermBin, TermConst, TermData, TermElem, TermIte, TermNeg, TermNet,
    TermParam, normalise_property,
)
from .typecheck import TypedProgram

LOGICS = ("dl2", "godel", "lukasiewicz", "product", "yager")


@dataclass(frozen=True)
class Logic:
    name: str
    p: Optional[Fraction] = None    # Yager exponent

    def __post_init__(self):
        if self.name not in LOGICS:
            raise LossCompileError(f"unknown logic {self.name!r}")
        if self.name == "yager":
            if self.p is None or self.p <= 0:
                raise LossCompileError("yager logic needs a parameter p > 0")


@dataclass(frozen=True)
class Domain:
    """Per-component bounds of a quantifier's sampling box, plus the part
    of the predicate that was absorbed (kept as a penalty factor in
    implication-shaped bodies)."""
    lo: tuple
    hi: tuple
    residual: Optional[NF] = None


# -- node builders (plain dicts so the tree serializes as-is) ---------------

def _const(q) -> dict:
    return {"node": "const", "value": str(Fraction(q))}


def _bin(op, a, b) -> dict:
    return {"node": op, "lhs": a, "rhs": b}


def _maxz(a) -> dict:
    return _bin("max", a, _const(0))


ZERO = _const(0)
ONE = _const(1)


# ---------------------------------------------------------------------------
# Domain extraction
# ---------------------------------------------------------------------------

def _component_paths(dims: tuple) -> list:
    if not dims:
        return [()]
    return list(itertools.product(*(range(d) for d in dims)))


def _bound_atom(atom: NFAtom, var: str):
    """Classify an atom as a one-sided bound on a component of `var`.

    Returns (path, side, constant) with side "lo"/"hi" meaning the atom
    asserts elem >= c / elem <= c, or None if it is not a plain bound.
    """
    if atom.op not in ("le", "lt"):
        return None
    lhs, rhs = atom.lhs, atom.rhs
    if isinstance(lhs, TermElem) and lhs.var == var \
            and isinstance(rhs, TermConst):
        return (lhs.path, "hi", rhs.value)
    if isinstance(rhs, TermElem) and rhs.var == var \
            and isinstance(lhs, TermConst):
        return (rhs.path, "lo", lhs.value)
    return None


def extract_domain(body: NF, var: str, dims: tuple, kind: str,
                   fallback=None):
    """Split a quantifier body into a sampling Domain and a residual body.

    Top-level conjunct bounds are absorbed into the box and dropped from
    the body.  For `forall` bodies of implication shape (a disjunction in
    NNF), disjuncts that negate a bound describe the domain: the box is
    their complement and they are retained as the penalty factor.
    Components without bounds fall back to the global sampling interval.
    """
    paths = _component_paths(dims)
    lo = {p: None for p in paths}
    hi = {p: None for p in paths}
    residual = body
    penalty = None

    def absorb(path, side, c, flip: bool):
        if flip:
            side = "lo" if side == "hi" else "hi"
        if side == "lo":
            lo[path] = c if lo[path] is None else max(lo[path], c)
        else:
            hi[path] = c if hi[path] is None else min(hi[path], c)

    children = None
    if isinstance(body, NFAnd):
        children = body.children
    elif isinstance(body, NFAtom):
        children = (body,)
    if children is not None:
        kept = []
        for child in children:
            b = _bound_atom(child, var) if isinstance(child, NFAtom) else None
            if b is not None:
                absorb(*b, flip=False)
            else:
                kept.append(child)
        residual = NFTrue() if not kept else (
            kept[0] if len(kept) == 1 else NFAnd(tuple(kept)))
    elif isinstance(body, NFOr) and kind == "forall":
        # implication shape: `not (lo <= v)` arrives as `v < lo`
        absorbed = []
        kept = []
        for child in body.children:
            b = _bound_atom(child, var) if isinstance(child, NFAtom) else None
            if b is not None:
                absorb(*b, flip=True)
                absorbed.append(child)
            else:
                kept.append(child)
        if absorbed:
            penalty = (absorbed[0] if len(absorbed) == 1
                       else NFOr(tuple(absorbed)))
            residual = NFTrue() if not kept else (
                kept[0] if len(kept) == 1 else NFOr(tuple(kept)))
    los, his = [], []
    for p in paths:
        l, h = lo[p], hi[p]
        if (l is None or h is None) and fallback is None:
            where = f"{var}" + "".join(f"[{i}]" for i in p)
            raise UnboundedDomain(
                f"component {where} of quantified variable {var!r} has no "
                "extractable bounds and no fallback sampling domain was "
                "configured")
        l = l if l is not None else Fraction(fallback[0])
        h = h if h is not None else Fraction(fallback[1])
        if l > h:
            raise LossCompileError(
                f"empty sampling domain for {var!r}: [{l}, {h}]")
        los.append(l)
        his.append(h)
    return Domain(tuple(los), tuple(his), penalty), residual


# ---------------------------------------------------------------------------
# Translation
# ---------------------------------------------------------------------------

class _Compiler:
    def __init__(self, logic: Logic, sigma: Fraction, xi: Fraction,
                 fallback):
        self.logic = logic
        self.sigma = sigma
        self.xi = xi
        self.fallback = fallback
        self.next_id = 0

    def sample_id(self) -> int:
        self.next_id += 1
        return self.next_id

    # -- terms ---------------------------------------------------------------
    def term(self, t: Term) -> dict:
        if isinstance(t, TermConst):
            return _const(t.value)
        if isinstance(t, TermElem):
            return {"node": "var", "name": t.var, "index": list(t.path)}
        if isinstance(t, TermParam):
            return {"node": "param", "name": t.name}
        if isinstance(t, TermData):
            return {"node": "data", "name": t.name, "index": list(t.path)}
        if isinstance(t, TermNet):
            return {"node": "net", "name": t.name,
                    "args": [self.term(a) for a in t.args], "out": t.out}
        if isinstance(t, TermNeg):
            return {"node": "neg", "arg": self.term(t.arg)}
        if isinstance(t, TermBin):
            return _bin(t.op, self.term(t.lhs), self.term(t.rhs))
        if isinstance(t, TermIte):
            if not isinstance(t.cond, NFAtom):
                raise LossCompileError(
                    "if-expressions are only trainable when the condition "
                    "is a single comparison")
            ind = {"node": "indicator", "rel": t.cond.op,
                   "arg": _bin("sub", self.term(t.cond.lhs),
                               self.term(t.cond.rhs))}
            return _bin("add",
                        _bin("mul", ind, self.term(t.then)),
                        _bin("mul", _bin("sub", ONE, ind),
                             self.term(t.orelse)))
        raise LossCompileError(f"cannot compile term {t!r}")

    # -- DL2: formulas become losses ------------------------------------------
    def dl2(self, nf: NF) -> dict:
        if isinstance(nf, NFTrue):
            return ZERO
        if isinstance(nf, NFFalse):
            return ONE
        if isinstance(nf, NFAtom):
            diff = _bin("sub", self.term(nf.lhs), self.term(nf.rhs))
            if nf.op == "le":
                return _maxz(diff)
            if nf.op == "lt":
                return _bin("add", _maxz(diff), self._eq_penalty(diff))
            if nf.op == "eq":
                return _bin("max", diff,
                            _bin("sub", self.term(nf.rhs),
                                 self.term(nf.lhs)))
            return self._eq_penalty(diff)     # ne
        if isinstance(nf, NFAnd):
            return self._fold("add", [self.dl2(c) for c in nf.children])
        if isinstance(nf, NFOr):
            return self._fold("mul", [self.dl2(c) for c in nf.children])
        if isinstance(nf, NFQuant):
            agg = "mean" if nf.kind == "forall" else "min"
            return self._sample(nf, agg, self.dl2)
        raise LossCompileError(f"cannot compile {nf!r}")

    def _eq_penalty(self, diff) -> dict:
        return _bin("mul", _const(self.xi),
                    {"node": "indicator", "rel": "eq", "arg": diff})

    # -- fuzzy logics: formulas become truth values ----------------------------
    def fuzzy(self, nf: NF) -> dict:
        if isinstance(nf, NFTrue):
            return ONE
        if isinstance(nf, NFFalse):
            return ZERO
        if isinstance(nf, NFAtom):
            return self._fuzzy_atom(nf)
        if isinstance(nf, NFAnd):
            return self._connect(True, [self.fuzzy(c) for c in nf.children])
        if isinstance(nf, NFOr):
            return self._connect(False, [self.fuzzy(c) for c in nf.children])
        if isinstance(nf, NFQuant):
            name = self.logic.name
            if name == "godel":
                agg = "min" if nf.kind == "forall" else "max"
            elif name == "lukasiewicz":
                agg = "luk-and" if nf.kind == "forall" else "luk-or"
            elif name == "product":
                agg = "prod-and" if nf.kind == "forall" else "prod-or"
            else:
                agg = "yager-and" if nf.kind == "forall" else "yager-or"
            return self._sample(nf, agg, self.fuzzy)
        raise LossCompileError(f"cannot compile {nf!r}")

    def _fuzzy_atom(self, nf: NFAtom) -> dict:
        a, b = self.term(nf.lhs), self.term(nf.rhs)
        dist_ab = _maxz(_bin("sub", a, b))
        if nf.op in ("le", "lt"):
            violation = dist_ab
        else:
            violation = _bin("max", _bin("sub", a, b), _bin("sub", b, a))
        scaled = _bin("div", violation, _const(self.sigma))
        if nf.op == "ne":
            return _bin("min", scaled, ONE)
        return _maxz(_bin("sub", ONE, scaled))

    def _connect(self, conj: bool, parts: list) -> dict:
        name = self.logic.name
        out = parts[0]
        for t in parts[1:]:
            if name == "godel":
                out = _bin("min" if conj else "max", out, t)
            elif name == "lukasiewicz":
                s = _bin("add", out, t)
                out = (_maxz(_bin("sub", s, ONE)) if conj
                       else _bin("min", s, ONE))
            elif name == "product":
                out = (_bin("mul", out, t) if conj
                       else _bin("sub", _bin("add", out, t),
                                 _bin("mul", out, t)))
            else:   # yager
                if conj:
                    s = _bin("add",
                             {"node": "pow", "base": _bin("sub", ONE, out),
                              "exponent": str(self.logic.p)},
                             {"node": "pow", "base": _bin("sub", ONE, t),
                              "exponent": str(self.logic.p)})
                    root = {"node": "pow", "base": s,
                            "exponent": str(1 / self.logic.p)}
                    out = _maxz(_bin("sub", ONE, root))
                else:
                    s = _bin("add",
                             {"node": "pow", "base": out,
                              "exponent": str(self.logic.p)},
                             {"node": "pow", "base": t,
                              "exponent": str(self.logic.p)})
                    root = {"node": "pow", "base": s,
                            "exponent": str(1 / self.logic.p)}
                    out = _bin("min", root, ONE)
        return out

    def _fold(self, op: str, parts: list) -> dict:
        out = parts[0]
        for t in parts[1:]:
            out = _bin(op, out, t)
        return out

    # -- quantifiers -----------------------------------------------------------
    def _sample(self, nf: NFQuant, agg: str, translate) -> dict:
        domain, residual = extract_domain(
            nf.body, nf.var, nf.dims, nf.kind, self.fallback)
        if domain.residual is not None:
            body = _bin("mul", translate(domain.residual),
                        translate(residual))
        else:
            body = translate(residual)
        node = {"node": "forall" if nf.kind == "forall" else "exists",
                "id": self.sample_id(), "var": nf.var,
                "dims": list(nf.dims),
                "lo": [str(x) for x in domain.lo],
                "hi": [str(x) for x in domain.hi],
                "agg": agg, "body": body}
        if agg.startswith("yager"):
            node["p"] = str(self.logic.p)
        return node


def compile_loss(tp: TypedProgram, prop: str, logic: Logic, *,
                 sigma=Fraction(1), xi=Fraction(1), fallback=None,
                 resources=None) -> dict:
    """Compile a property to a loss program (a JSON-ready dict)."""
    nf = normalise_property(tp, prop, resources)
    comp = _Compiler(logic, Fraction(sigma), Fraction(xi), fallback)
    if logic.name == "dl2":
        root = comp.dl2(nf)
    else:
        root = _bin("sub", ONE, comp.fuzzy(nf))
    return {
        "format": "specbridge-loss/1",
        "property": prop,
        "logic": logic.name,
        **({"p": str(logic.p)} if logic.p is not None else {}),
        "sigma": str(Fraction(sigma)),
        "xi": str(Fraction(xi)),
        "networks": {k: list(v) for k, v in sorted(tp.networks.items())},
        "sampling": "splitmix64",
        "root": root,
    }


# ---------------------------------------------------------------------------
# Sampling generator (documented bit-exactly in docs/formats.md)
# ---------------------------------------------------------------------------

_MASK = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def sample_uniform(keys) -> float:
    """Uniform in [0, 1) from a chain of integer keys."""
    h = 0
    for k in keys:
        h = _splitmix64((h ^ (int(k) & _MASK)) & _MASK)
    return (h >> 11) * (2.0 ** -53)


# ---------------------------------------------------------------------------
# Interpretation (floats, or dual numbers for gradients)
# ---------------------------------------------------------------------------

class Dual:
    """Forward-mode scalar: value plus a tangent vector over all weights."""

    __slots__ = ("val", "tan")

    def __init__(self, val, tan):
        self.val = float(val)
        self.tan = tan

    def __add__(self, o):
        if isinstance(o, Dual):
            return Dual(self.val + o.val, self.tan + o.tan)
        return Dual(self.val + o, self.tan)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Dual):
            return Dual(self.val - o.val, self.tan - o.tan)
        return Dual(self.val - o, self.tan)

    def __rsub__(self, o):
        return Dual(o - self.val, -self.tan)

    def __mul__(self, o):
        if isinstance(o, Dual):
            return Dual(self.val * o.val,
                        self.tan * o.val + o.tan * self.val)
        return Dual(self.val * o, self.tan * o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Dual):
            return Dual(self.val / o.val,
                        (self.tan * o.val - o.tan * self.val)
                        / (o.val * o.val))
        return Dual(self.val / o, self.tan / o)

    def __rtruediv__(self, o):
        return Dual(o / self.val, -o * self.tan / (self.val * self.val))

    def __neg__(self):
        return Dual(-self.val, -self.tan)


def _value_of(x) -> float:
    return x.val if isinstance(x, Dual) else x


def fmax(a, b):
    # ties take the left branch's subgradient
    return a if _value_of(a) >= _value_of(b) else b


def fmin(a, b):
    return a if _value_of(a) <= _value_of(b) else b


def fpow(base, exponent: float):
    # bases are non-negative by construction; clamp defensively
    bv = _value_of(base)
    if isinstance(base, Dual):
        if bv <= 0.0:
            return Dual(0.0, np.zeros_like(base.tan))
        return Dual(bv ** exponent,
                    exponent * bv ** (exponent - 1.0) * base.tan)
    if bv <= 0.0:
        return 0.0
    return bv ** exponent


def _indicator(rel: str, x) -> float:
    v = _value_of(x)
    return 1.0 if {"eq": v == 0.0, "le": v <= 0.0, "lt": v < 0.0}[rel] else 0.0


class Interpreter:
    """Evaluate a loss program at bound resources.

    `weights` maps network name -> list of (W, b, activation) where the
    entries are floats or Duals; sample variables live in `env` keyed by
    (name, path).
    """

    def __init__(self, program: dict, weights: dict, resources,
                 seed: int, samples: int):
        if program.get("format") != "specbridge-loss/1":
            raise LossCompileError("not a loss program (bad format tag)")
        self.program = program
        self.weights = weights
        self.resources = resources
        self.seed = int(seed)
        self.samples = int(samples)
        for name, (m, n) in (program.get("networks") or {}).items():
            if name not in weights:
                continue
            layers = weights[name]
            got_m = len(layers[0][0][0]) if layers else 0
            got_n = len(layers[-1][1]) if layers else 0
            if (got_m, got_n) != (m, n):
                raise LossCompileError(
                    f"network {name!r} has shape {got_m}->{got_n} but the "
                    f"loss program needs {m}->{n}")

    def run(self):
        return self._eval(self.program["root"], {}, ())

    def _eval(self, node: dict, env: dict, outer: tuple):
        kind = node["node"]
        if kind == "const":
            return float(Fraction(node["value"]))
        if kind == "var":
            return env[(node["name"], tuple(node["index"]))]
        if kind == "param":
            return float(self.resources.parameters[node["name"]])
        if kind == "data":
            val = self.resources.datasets[node["name"]]
            for i in node["index"]:
                val = val[i]
            return float(val)
        if kind == "net":
            xs = [self._eval(a, env, outer) for a in node["args"]]
            return self._forward(node["name"], xs)[node["out"]]
        if kind in ("add", "sub", "mul", "div", "max", "min"):
            a = self._eval(node["lhs"], env, outer)
            b = self._eval(node["rhs"], env, outer)
            if kind == "add":
                return a + b
            if kind == "sub":
                return a - b
            if kind == "mul":
                return a * b
            if kind == "div":
                return a / b
            return fmax(a, b) if kind == "max" else fmin(a, b)
        if kind == "neg":
            return -self._eval(node["arg"], env, outer)
        if kind == "pow":
            return fpow(self._eval(node["base"], env, outer),
                        float(Fraction(node["exponent"])))
        if kind == "indicator":
            return _indicator(node["rel"], self._eval(node["arg"], env, outer))
        if kind in ("forall", "exists"):
            return self._sample_node(node, env, outer)
        raise LossCompileError(f"unknown node {kind!r}")

    def _forward(self, name: str, xs):
        layers = self.weights[name]
        vec = list(xs)
        for w, b, act in layers:
            out = []
            for row, bias in zip(w, b):
                acc = bias
                for wi, v in zip(row, vec):
                    acc = acc + wi * v
                out.append(acc)
            vec = [fmax(o, 0.0) for o in out] if act == "relu" else out
        return vec

    def _sample_node(self, node: dict, env: dict, outer: tuple):
        paths = _component_paths(tuple(node["dims"]))
        lo = [float(Fraction(x)) for x in node["lo"]]
        hi = [float(Fraction(x)) for x in node["hi"]]
        name, nid = node["var"], node["id"]
        values = []
        for i in range(self.samples):
            inner = dict(env)
            for d, path in enumerate(paths):
                u = sample_uniform((self.seed, nid) + outer + (i, d))
                inner[(name, path)] = lo[d] + u * (hi[d] - lo[d])
            values.append(self._eval(node["body"], inner, outer + (i,)))
        return _aggregate(node["agg"], values,
                          float(Fraction(node["p"])) if "p" in node else None)


def _aggregate(agg: str, values: list, p):
    n = len(values)
    if agg == "mean":
        total = values[0]
        for v in values[1:]:
            total = total + v
        return total * (1.0 / n) if isinstance(total, Dual) else total / n
    if agg in ("min", "max"):
        out = values[0]
        pick = fmin if agg == "min" else fmax
        for v in values[1:]:
            out = pick(out, v)
        return out
    if agg in ("luk-and", "luk-or"):
        total = values[0]
        for v in values[1:]:
            total = total + v
        if agg == "luk-and":
            return fmax(total - (n - 1), 0.0)
        return fmin(total, 1.0)
    if agg in ("prod-and", "prod-or"):
        out = 1.0
        for v in values:
            out = out * (v if agg == "prod-and" else (1.0 - v) * 1.0)
        return out if agg == "prod-and" else 1.0 - out
    if agg in ("yager-and", "yager-or"):
        total = 0.0
        for v in values:
            base = (1.0 - v) if agg == "yager-and" else v
            total = total + fpow(base, p)
        root = fpow(total, 1.0 / p)
        if agg == "yager-and":
            return fmax(1.0 - root, 0.0)
        return fmin(root, 1.0)
    raise LossCompileError(f"unknown aggregator {agg!r}")


def _float_weights(resources) -> dict:
    return {name: net.float_layers()
            for name, net in resources.networks.items()}


def eval_loss(program: dict, resources, seed: int, samples: int) -> float:
    """Deterministic sampled loss (float path)."""
    if samples < 1:
        raise LossCompileError("sample count must be >= 1")
    interp = Interpreter(program, _float_weights(resources), resources,
                         seed, samples)
    return float(interp.run())


def _dual_weights(resources):
    """Weights as Duals carrying unit tangents; returns (weights, total)."""
    counts = {}
    total = 0
    for name, net in sorted(resources.networks.items()):
        size = sum(l.out_dim * l.in_dim + l.out_dim for l in net.layers)
        counts[name] = (total, size)
        total += size
    weights = {}
    for name, net in sorted(resources.networks.items()):
        offset = counts[name][0]
        layers = []
        k = offset
        for w, b, act in net.float_layers():
            wd = []
            for row in w:
                rd = []
                for x in row:
                    tan = np.zeros(total)
                    tan[k] = 1.0
                    rd.append(Dual(x, tan))
                    k += 1
                wd.append(rd)
            bd = []
            for x in b:
                tan = np.zeros(total)
                tan[k] = 1.0
                bd.append(Dual(x, tan))
                k += 1
            layers.append((wd, bd, act))
        weights[name] = layers
    return weights, counts, total


def grad_loss(program: dict, resources, seed: int, samples: int):
    """(loss, {network: [(dW, db) per layer]}) by forward-mode dual numbers."""
    if samples < 1:
        raise LossCompileError("sample count must be >= 1")
    weights, counts, total = _dual_weights(resources)
    interp = Interpreter(program, weights, resources, seed, samples)
    out = interp.run()
    if isinstance(out, Dual):
        value, tangent = out.val, out.tan
    else:
        value, tangent = float(out), np.zeros(total)
    grads = {}
    for name, net in sorted(resources.networks.items()):
        k = counts[name][0]
        layers = []
        for layer in net.layers:
            rows, cols = layer.out_dim, layer.in_dim
            dw = tangent[k:k + rows * cols].reshape(rows, cols).copy()
            k += rows * cols
            db = tangent[k:k + rows].copy()
            k += rows
            layers.append((dw, db))
        grads[name] = layers
    return value, grads


def flat_gradient(grads: dict) -> np.ndarray:
    parts = []
    for name in sorted(grads):
        for dw, db in grads[name]:
            parts.append(dw.reshape(-1))
            parts.append(db)
    return np.concatenate(parts) if parts else np.zeros(0)
