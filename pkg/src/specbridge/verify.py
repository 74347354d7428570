"""Verifier backend: compile properties to and/or trees of linear queries
over network input/output variables, solve them exactly, and lift
counterexamples back to the problem space.

Pipeline per property: normalize, negate (counterexample search), prenex
(must come out purely existential), rewrite disequalities, distribute to
DNF, then per disjunct introduce x/y variable blocks for each distinct
network application, add the affine input-definition equalities, and
eliminate the problem-space variables by Gaussian/Fourier-Motzkin
elimination.  "Verified" means every leaf of the negated property is
unsatisfiable.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from .errors import (
    AlternatingQuantifiers, InternalError, NonlinearEmbedding,
    PatternBudgetExceeded, QueryCompileError, UnsupportedAtom,
)
from .nbe import (
    Evaluator, NF, NFAnd, NFAtom, NFFalse, NFOr, NFQuant, NFTrue,
    Term, TermBin, TermConst, TermData, TermElem, TermIte, TermNeg, TermNet,
    TermParam, VRat, VVec, nf_not, normalise_property,
)
from .network import Network, eval_network
from .qelim import (
    EQ, LE, LT, Infeasible, LinearConstraint, LinearExpr, ReconstructionMap,
    eliminate_variables, feasible,
)
from .typecheck import TypedProgram

FALSE_CONSTRAINT = LinearConstraint(LinearExpr({}, 0), LT)  # 0 < 0


@dataclass
class Block:
    """One network application inside a query."""
    network: str
    inputs: list        # x-variable names
    outputs: list       # y-variable names
    arg_exprs: list     # LinearExpr per input (the embedding definition)


@dataclass
class Query:
    qid: str
    constraints: list               # over x/y variables only
    blocks: list
    recon: ReconstructionMap        # embedding assignment -> problem vars
    problem_vars: dict              # var name -> dims of quantified tensors
    defs: list = field(default_factory=list)   # pre-elimination constraints

    def variables(self):
        out = []
        for b in self.blocks:
            out.extend(b.inputs)
        for b in self.blocks:
            out.extend(b.outputs)
        return out


@dataclass
class QLeaf:
    query: Query


@dataclass
class QAnd:
    children: list


@dataclass
class QOr:
    children: list


QueryTree = object  # QLeaf | QAnd | QOr


def tree_leaves(tree) -> list:
    if isinstance(tree, QLeaf):
        return [tree.query]
    out = []
    for c in tree.children:
        out.extend(tree_leaves(c))
    return out


# ---------------------------------------------------------------------------
# Compilation
# ---------------------------------------------------------------------------

def compile_queries(tp: TypedProgram, prop: str, resources=None,
                    dump=None):
    """Compile a property to a QueryTree for counterexample search.

    `dump`, when given, receives one line per elimination stage (the
    --dump-elimination debug surface).
    """
    nf = normalise_property(tp, prop, resources)
    negated = nf_not(nf)
    counter = itertools.count(1)
    tree = _build_tree(negated, counter, tp.networks)
    if dump is not None:
        for q in tree_leaves(tree):
            dump(f"[{q.qid}] before elimination:")
            for c in q.defs:
                dump(f"  {c!r}")
            dump(f"[{q.qid}] after elimination over "
                 f"{sorted(q.problem_vars)}:")
            for c in q.constraints:
                dump(f"  {c!r}")
            for e in q.recon.entries:
                dump(f"  reconstruct {e!r}")
    return tree


def _build_tree(nf: NF, counter, shapes):
    if isinstance(nf, NFAnd) and _has_quantified_parts(nf):
        return QAnd([_build_tree(c, counter, shapes) for c in nf.children])
    if isinstance(nf, NFOr) and _has_quantified_parts(nf):
        return QOr([_build_tree(c, counter, shapes) for c in nf.children])
    return _leaf_group(nf, counter, shapes)


def _has_quantified_parts(nf) -> bool:
    return isinstance(nf, (NFAnd, NFOr)) and any(
        isinstance(c, NFQuant) or _has_quantified_parts(c)
        for c in nf.children)


def _leaf_group(nf: NF, counter, shapes):
    if isinstance(nf, NFTrue):
        q = Query(f"query{next(counter)}", [], [], ReconstructionMap(), {})
        return QLeaf(q)
    if isinstance(nf, NFFalse):
        q = Query(f"query{next(counter)}", [FALSE_CONSTRAINT], [],
                  ReconstructionMap(), {})
        return QLeaf(q)
    variables, matrix = _prenex(nf)
    disjuncts = _dnf(_split_ne(matrix))
    leaves = []
    for atoms in disjuncts:
        qid = f"query{next(counter)}"
        leaves.append(
            QLeaf(_compile_disjunct(atoms, dict(variables), qid, shapes)))
    if not leaves:
        # the matrix folded to False: nothing to falsify in this group
        q = Query(f"query{next(counter)}", [FALSE_CONSTRAINT], [],
                  ReconstructionMap(), dict(variables))
        return QLeaf(q)
    if len(leaves) == 1:
        return leaves[0]
    return QOr(leaves)


def _prenex(nf: NF):
    """Float existential quantifiers out; universals mean the negated
    property alternates, which the query format cannot express."""
    if isinstance(nf, NFQuant):
        if nf.kind == "forall":
            raise AlternatingQuantifiers(
                "alternating quantifiers: after negation the query prefix "
                f"must be purely existential, but {nf.var!r} is universally "
                "quantified; compilation will error")
        inner_vars, matrix = _prenex(nf.body)
        return [(nf.var, nf.dims)] + inner_vars, matrix
    if isinstance(nf, (NFAnd, NFOr)):
        all_vars = []
        parts = []
        for c in nf.children:
            vs, m = _prenex(c)
            all_vars.extend(vs)
            parts.append(m)
        rebuilt = (NFAnd(tuple(parts)) if isinstance(nf, NFAnd)
                   else NFOr(tuple(parts)))
        return all_vars, rebuilt
    return [], nf


def _split_ne(nf: NF) -> NF:
    """a != b becomes (a < b) or (b < a); queries carry only le/lt/eq."""
    if isinstance(nf, NFAtom):
        if nf.op == "ne":
            return NFOr((NFAtom("lt", nf.lhs, nf.rhs),
                         NFAtom("lt", nf.rhs, nf.lhs)))
        return nf
    if isinstance(nf, NFAnd):
        return NFAnd(tuple(_split_ne(c) for c in nf.children))
    if isinstance(nf, NFOr):
        return NFOr(tuple(_split_ne(c) for c in nf.children))
    return nf


def _dnf(nf: NF) -> list:
    """List of disjuncts, each a list of atoms (left-to-right stable)."""
    if isinstance(nf, NFAtom):
        return [[nf]]
    if isinstance(nf, NFTrue):
        return [[]]
    if isinstance(nf, NFFalse):
        return []
    if isinstance(nf, NFOr):
        out = []
        for c in nf.children:
            out.extend(_dnf(c))
        return out
    if isinstance(nf, NFAnd):
        acc = [[]]
        for c in nf.children:
            child = _dnf(c)
            acc = [a + b for a in acc for b in child]
        return acc
    if isinstance(nf, NFQuant):
        raise AlternatingQuantifiers(
            "alternating quantifiers: a quantifier is nested below the "
            "existential prefix; compilation will error")
    raise QueryCompileError(f"cannot compile {nf!r}")


def _elem_key(var: str, path: tuple) -> str:
    return var + "".join(f"[{i}]" for i in path)


class _Linearizer:
    """Turn normal-form terms into linear expressions over problem-space
    element variables and network output variables."""

    def __init__(self):
        self.instances: dict = {}    # (name, args) -> Block
        self.order: list = []        # instance keys, dependency order
        self.x_count = 0
        self.y_count = 0

    def block_for(self, term: TermNet, networks_shape) -> Block:
        key = (term.name, term.args)
        if key in self.instances:
            return self.instances[key]
        # arguments may reference other network outputs: register those first
        arg_exprs = [self.linearize(a) for a in term.args]
        m = len(term.args)
        n = networks_shape[term.name][1]
        inputs = [f"x{self.x_count + i}" for i in range(m)]
        outputs = [f"y{self.y_count + j}" for j in range(n)]
        self.x_count += m
        self.y_count += n
        block = Block(term.name, inputs, outputs, arg_exprs)
        self.instances[key] = block
        self.order.append(key)
        return block

    def set_shapes(self, shapes):
        self.shapes = shapes

    def linearize(self, t: Term) -> LinearExpr:
        if isinstance(t, TermConst):
            return LinearExpr.constant(t.value)
        if isinstance(t, TermElem):
            return LinearExpr.var(_elem_key(t.var, t.path))
        if isinstance(t, TermNet):
            block = self.block_for(t, self.shapes)
            return LinearExpr.var(block.outputs[t.out])
        if isinstance(t, TermParam):
            raise QueryCompileError(
                f"parameter {t.name!r} must be bound before compiling "
                "verifier queries")
        if isinstance(t, TermData):
            raise QueryCompileError(
                f"dataset {t.name!r} must be bound before compiling "
                "verifier queries")
        if isinstance(t, TermNeg):
            return self.linearize(t.arg).scale(-1)
        if isinstance(t, TermIte):
            raise QueryCompileError(
                "if-expressions over network values are non-linear control "
                "flow and are not supported by the verifier backend")
        if isinstance(t, TermBin):
            a = self.linearize(t.lhs)
            b = self.linearize(t.rhs)
            if t.op == "add":
                return a.add(b)
            if t.op == "sub":
                return a.sub(b)
            if t.op == "mul":
                if a.is_constant():
                    return b.scale(a.const)
                if b.is_constant():
                    return a.scale(b.const)
                raise NonlinearEmbedding(
                    "non-linear embedding: product of terms over "
                    f"variables {sorted(a.variables() | b.variables())}")
            if t.op == "div":
                if not b.is_constant():
                    raise NonlinearEmbedding(
                        "non-linear embedding: division by a term over "
                        f"variables {sorted(b.variables())}")
                if b.const == 0:
                    raise QueryCompileError("division by zero in a query")
                return a.scale(Fraction(1) / b.const)
        raise QueryCompileError(f"cannot linearize {t!r}")


_REL = {"le": LE, "lt": LT, "eq": EQ}


def _compile_disjunct(atoms: list, variables: dict, qid: str,
                      shapes: dict) -> Query:
    lin = _Linearizer()
    lin.set_shapes(shapes)
    constraints = []
    for atom in atoms:
        lhs = lin.linearize(atom.lhs)
        rhs = lin.linearize(atom.rhs)
        constraints.append(LinearConstraint(lhs.sub(rhs), _REL[atom.op]))
    defs = []
    for key in lin.order:
        block = lin.instances[key]
        for xvar, expr in zip(block.inputs, block.arg_exprs):
            defs.append(LinearConstraint(
                LinearExpr.var(xvar).sub(expr), EQ))
    blocks = [lin.instances[k] for k in lin.order]
    keep = set()
    for b in blocks:
        keep.update(b.inputs)
        keep.update(b.outputs)
    try:
        reduced, recon = eliminate_variables(defs + constraints, keep)
    except Infeasible:
        return Query(qid, [FALSE_CONSTRAINT], blocks, ReconstructionMap(),
                     variables, defs + constraints)
    return Query(qid, reduced, blocks, recon, variables, defs + constraints)


# ---------------------------------------------------------------------------
# Solving
# ---------------------------------------------------------------------------

def solve_query(query: Query, networks: dict, budget: int = 24):
    """Complete decision over the 2^k activation patterns.

    Patterns are explored depth-first, one ReLU unit at a time: a prefix
    whose accumulated sign guards are already infeasible together with the
    network-output-free part of the query prunes its whole subtree, which
    leaves exactly the patterns realizable on the query region.  Returns
    ("sat", assignment over x/y vars) or ("unsat", None).
    """
    if any(c.constant_truth() is False for c in query.constraints):
        return ("unsat", None)
    nets = []
    total_relus = 0
    for block in query.blocks:
        if block.network not in networks:
            raise QueryCompileError(
                f"network {block.network!r} is not bound")
        net = networks[block.network]
        if len(block.inputs) != net.input_dim \
                or len(block.outputs) != net.output_dim:
            raise QueryCompileError(
                f"network {block.network!r} has shape "
                f"{net.input_dim}->{net.output_dim} but the query expects "
                f"{len(block.inputs)}->{len(block.outputs)}")
        nets.append(net)
        total_relus += net.relu_count
    if total_relus > budget:
        raise PatternBudgetExceeded(
            f"{total_relus} ReLU units exceed the pattern budget {budget}")
    y_vars = {v for b in query.blocks for v in b.outputs}
    x_only = [c for c in query.constraints
              if not (c.expr.variables() & y_vars)]
    with_y = [c for c in query.constraints if c.expr.variables() & y_vars]

    def solve_block(i, guards):
        if i == len(nets):
            witness = feasible(x_only + guards + with_y)
            if witness is None:
                return None
            assignment = {v: witness.get(v, Fraction(0))
                          for v in query.variables()}
            return assignment
        return descend_layers(i, 0, _identity_rows(nets[i], query.blocks[i]),
                              guards)

    def descend_layers(i, layer_idx, rows, guards):
        net, block = nets[i], query.blocks[i]
        if layer_idx == len(net.layers):
            out_eqs = []
            for j, yvar in enumerate(block.outputs):
                expr = LinearExpr.var(yvar).sub(rows[j])
                out_eqs.append(LinearConstraint(expr, EQ))
            return solve_block(i + 1, guards + out_eqs)
        layer = net.layers[layer_idx]
        pre = []
        for wrow, bias in zip(layer.weights, layer.bias):
            expr = LinearExpr.constant(bias)
            for w, r in zip(wrow, rows):
                expr = expr.add(r.scale(w))
            pre.append(expr)
        if layer.activation != "relu":
            return descend_layers(i, layer_idx + 1, pre, guards)
        return descend_units(i, layer_idx, pre, 0, [], guards)

    def descend_units(i, layer_idx, pre, unit, post, guards):
        if unit == len(pre):
            return descend_layers(i, layer_idx + 1, post, guards)
        for active in (True, False):
            if active:
                guard = LinearConstraint(pre[unit].scale(-1), LE)
                unit_out = pre[unit]
            else:
                guard = LinearConstraint(pre[unit], LE)
                unit_out = LinearExpr.constant(0)
            extended = guards + [guard]
            if feasible(x_only + extended) is None:
                continue
            found = descend_units(i, layer_idx, pre, unit + 1,
                                  post + [unit_out], extended)
            if found is not None:
                return found
        return None

    assignment = solve_block(0, [])
    if assignment is not None:
        return ("sat", assignment)
    return ("unsat", None)


def _identity_rows(net: Network, block: Block):
    rows = []
    for name in block.inputs:
        rows.append(LinearExpr.var(name))
    return rows


def evaluate_tree(tree, solve: Callable):
    """Short-circuit evaluation; returns ("sat", {leaf_id: assignment}) or
    ("unsat", None)."""
    if isinstance(tree, QLeaf):
        verdict, assignment = solve(tree.query)
        if verdict == "sat":
            return ("sat", {tree.query.qid: assignment})
        return ("unsat", None)
    if isinstance(tree, QOr):
        for child in tree.children:
            verdict, witnesses = evaluate_tree(child, solve)
            if verdict == "sat":
                return ("sat", witnesses)
        return ("unsat", None)
    if isinstance(tree, QAnd):
        merged = {}
        for child in tree.children:
            verdict, witnesses = evaluate_tree(child, solve)
            if verdict == "unsat":
                return ("unsat", None)
            merged.update(witnesses)
        return ("sat", merged)
    raise InternalError(f"bad tree node {tree!r}")


# ---------------------------------------------------------------------------
# Counterexample lifting
# ---------------------------------------------------------------------------

@dataclass
class PropertyStatus:
    verdict: str                    # verified | falsified | error
    witness: Optional[dict] = None  # problem-space assignment
    embedding: Optional[dict] = None
    leaf: Optional[str] = None
    reason: Optional[str] = None

    def to_json(self):
        out = {"status": self.verdict}
        if self.witness is not None:
            out["witness"] = {
                v: _tensor_to_json(val) for v, val in self.witness.items()}
            out["witness_approx"] = {
                v: _tensor_to_float(val) for v, val in self.witness.items()}
        if self.embedding is not None:
            out["embedding"] = {k: str(v) for k, v in self.embedding.items()}
        if self.leaf is not None:
            out["leaf"] = self.leaf
        if self.reason is not None:
            out["reason"] = self.reason
        return out


def _tensor_to_json(val):
    if isinstance(val, list):
        return [_tensor_to_json(x) for x in val]
    return str(val)


def _tensor_to_float(val):
    if isinstance(val, list):
        return [_tensor_to_float(x) for x in val]
    if isinstance(val, str):
        return float(Fraction(val))
    return float(val)


def lift_counterexample(query: Query, assignment: dict) -> dict:
    """Replay the reconstruction map to obtain problem-space values.

    Returns {var: nested list of Fraction per its dims}.  Missing
    variables (absent from every constraint) default to zero.
    """
    full = query.recon.replay(dict(assignment))
    out = {}
    for var, dims in query.problem_vars.items():
        out[var] = _gather(var, dims, full)
    return out


def _gather(var: str, dims: tuple, full: dict, path: tuple = ()):
    if not dims:
        return full.get(_elem_key(var, path), Fraction(0))
    return [_gather(var, dims[1:], full, path + (i,))
            for i in range(dims[0])]


def check_lifted_witness(tp: TypedProgram, prop: str, query: Query,
                         assignment: dict, lifted: dict, resources):
    """Postcondition of lifting; failures are compiler bugs and abort."""
    full = query.recon.replay(dict(assignment))
    for c in query.defs:
        if not c.satisfied(full):
            raise InternalError(
                f"lifted witness violates compiled constraint {c!r}")
    for block in query.blocks:
        net = resources.networks[block.network]
        xs = [full[v] for v in block.inputs]
        ys = eval_network(net, xs, exact=True)
        for yvar, y in zip(block.outputs, ys):
            if full[yvar] != y:
                raise InternalError(
                    f"lifted witness disagrees with network output {yvar}")
    quant_assignment = {
        var: _to_value(lifted[var]) for var in query.problem_vars}
    ev = Evaluator(tp, resources=resources,
                   quant_assignment=quant_assignment)
    result = ev.eval((), tp.decl(prop).body)
    if getattr(result, "value", None) is not False:
        raise InternalError(
            "lifted witness does not falsify the property under exact "
            "rational evaluation")


def _to_value(val):
    if isinstance(val, list):
        return VVec(tuple(_to_value(x) for x in val))
    return VRat(Fraction(val))


# ---------------------------------------------------------------------------
# Query file emission and tree (de)serialization
# ---------------------------------------------------------------------------

def _var_sort_key(v: str):
    # outputs before inputs so the leading coefficient lands on y0
    return (0 if v[0] == "y" else 1, int(v[1:]))


def render_query_lines(query: Query, slack: Fraction = Fraction(0)) -> list:
    """One constraint per line: `<c>y<j> + <c>x<i> ... <op> <const>`.

    The line is scaled so the leading coefficient is exactly 1; strict
    inequalities are tightened by `slack` because the text format only
    carries <=, >= and = (the built-in solver works from the exact tree
    instead).  Constant constraints render with a literal 0 left side.
    """
    lines = []
    for c in query.constraints:
        expr, rel = c.expr, c.rel
        if expr.is_constant():
            op = {EQ: "=", LE: "<=", LT: "<="}[rel]
            rhs = -expr.const - (slack if rel == LT else 0)
            lines.append(f"0 {op} {rhs}")
            continue
        variables = sorted(expr.coeffs, key=_var_sort_key)
        lead = expr.coeffs[variables[0]]
        scaled = expr.scale(Fraction(1) / lead)
        if rel == EQ:
            op = "="
        elif lead > 0:
            op = "<="
        else:
            op = ">="
        rhs = -scaled.const
        if rel == LT:
            rhs = rhs - slack if op == "<=" else rhs + slack
        terms = " + ".join(f"{scaled.coeffs[v]}{v}" for v in variables)
        lines.append(f"{terms} {op} {rhs}")
    return lines


def emit_query_files(tree, directory, slack: Fraction = Fraction(0)) -> dict:
    """Write one text file per leaf plus `tree.json`; returns the manifest
    dict that was serialized."""
    import json
    import os

    os.makedirs(directory, exist_ok=True)
    for query in tree_leaves(tree):
        content = "\n".join(render_query_lines(query, slack)) + "\n"
        _atomic_write(os.path.join(directory, f"{query.qid}.txt"), content)
    manifest = {"root": tree_to_json(tree)}
    _atomic_write(os.path.join(directory, "tree.json"),
                  json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest


def _atomic_write(path, content: str):
    import os
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(content)
    os.replace(tmp, path)


def _frac(s) -> Fraction:
    return Fraction(s)


def _expr_to_json(e: LinearExpr):
    return {"coeffs": {v: str(c) for v, c in sorted(e.coeffs.items())},
            "const": str(e.const)}


def _expr_from_json(d) -> LinearExpr:
    return LinearExpr({v: _frac(c) for v, c in d["coeffs"].items()},
                      _frac(d["const"]))


def _constraint_to_json(c: LinearConstraint):
    return {"expr": _expr_to_json(c.expr), "rel": c.rel}


def _constraint_from_json(d) -> LinearConstraint:
    return LinearConstraint(_expr_from_json(d["expr"]), d["rel"])


def _recon_to_json(r: ReconstructionMap):
    out = []
    for e in r.entries:
        if hasattr(e, "expr"):
            out.append({"kind": "gauss", "var": e.var,
                        "expr": _expr_to_json(e.expr)})
        else:
            out.append({
                "kind": "fm", "var": e.var,
                "lowers": [[_expr_to_json(b), s] for b, s in e.lowers],
                "uppers": [[_expr_to_json(b), s] for b, s in e.uppers]})
    return out


def _recon_from_json(items) -> ReconstructionMap:
    from .qelim import FMEntry, GaussEntry
    entries = []
    for d in items:
        if d["kind"] == "gauss":
            entries.append(GaussEntry(d["var"], _expr_from_json(d["expr"])))
        else:
            entries.append(FMEntry(
                d["var"],
                tuple((_expr_from_json(b), s) for b, s in d["lowers"]),
                tuple((_expr_from_json(b), s) for b, s in d["uppers"])))
    return ReconstructionMap(entries)


def tree_to_json(tree):
    if isinstance(tree, QLeaf):
        q = tree.query
        return {"leaf": {
            "id": q.qid,
            "file": f"{q.qid}.txt",
            "blocks": [{"network": b.network, "inputs": b.inputs,
                        "outputs": b.outputs,
                        "args": [_expr_to_json(e) for e in b.arg_exprs]}
                       for b in q.blocks],
            "problem_vars": {v: list(d) for v, d in q.problem_vars.items()},
            "constraints": [_constraint_to_json(c) for c in q.constraints],
            "defs": [_constraint_to_json(c) for c in q.defs],
            "recon": _recon_to_json(q.recon),
        }}
    op = "and" if isinstance(tree, QAnd) else "or"
    return {"op": op, "children": [tree_to_json(c) for c in tree.children]}


def tree_from_json(doc):
    if "leaf" in doc:
        d = doc["leaf"]
        query = Query(
            d["id"],
            [_constraint_from_json(c) for c in d["constraints"]],
            [Block(b["network"], list(b["inputs"]), list(b["outputs"]),
                   [_expr_from_json(e) for e in b.get("args", [])])
             for b in d["blocks"]],
            _recon_from_json(d["recon"]),
            {v: tuple(dims) for v, dims in d["problem_vars"].items()},
            [_constraint_from_json(c) for c in d["defs"]],
        )
        return QLeaf(query)
    children = [tree_from_json(c) for c in doc["children"]]
    return QAnd(children) if doc["op"] == "and" else QOr(children)


def verify_property(tp: TypedProgram, prop: str, resources,
                    budget: int = 24, solver=None) -> PropertyStatus:
    """Compile, solve and lift in one step (cache-free path)."""
    tree = compile_queries(tp, prop, resources)
    return decide_tree(tp, prop, tree, resources, budget, solver)


def decide_tree(tp: TypedProgram, prop: str, tree, resources,
                budget: int = 24, solver=None) -> PropertyStatus:
    solve = solver or (lambda q: solve_query(q, resources.networks, budget))
    verdict, witnesses = evaluate_tree(tree, solve)
    if verdict == "unsat":
        return PropertyStatus("verified")
    leaf_id, assignment = next(iter(witnesses.items()))
    leaf = next(q for q in tree_leaves(tree) if q.qid == leaf_id)
    lifted = lift_counterexample(leaf, assignment)
    check_lifted_witness(tp, prop, leaf, assignment, lifted, resources)
    return PropertyStatus(
        "falsified", witness=lifted,
        embedding={k: v for k, v in assignment.items()}, leaf=leaf_id)
