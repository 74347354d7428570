"""Query compilation, the built-in solver, tree evaluation and lifting."""
import itertools
import random
from fractions import Fraction as Q

import pytest

from specbridge import verify as V
from specbridge.errors import (
    AlternatingQuantifiers, InternalError, NonlinearEmbedding,
    PatternBudgetExceeded, QueryCompileError,
)
from specbridge.frontend import load
from specbridge.nbe import nf_eval, normalise_property
from specbridge.network import eval_network
from specbridge.qelim import (
    EQ, LE, LT, LinearConstraint, LinearExpr, ReconstructionMap,
)
from specbridge.resources import ResourceEnv
from specbridge.typecheck import check_program
from specbridge.verify import (
    Block, QAnd, QLeaf, QOr, Query, compile_queries, decide_tree,
    emit_query_files, evaluate_tree, lift_counterexample,
    render_query_lines, solve_query, tree_from_json, tree_leaves,
    tree_to_json, verify_property,
)

from conftest import FIXTURES, random_relu_network


def tp_of(src: str):
    return check_program(load(src))


def canon(c: LinearConstraint):
    """Scale-invariant halfspace key for set comparison."""
    if c.expr.is_constant():
        return (c.rel, (), c.expr.const)
    lead_var = sorted(c.expr.coeffs)[0]
    k = Q(1) / abs(c.expr.coeffs[lead_var])
    sign = 1 if c.expr.coeffs[lead_var] > 0 else -1
    if c.rel == EQ:
        scaled = c.expr.scale(k * sign)
        return (EQ, tuple(sorted(scaled.coeffs.items())), scaled.const)
    scaled = c.expr.scale(k)
    return (c.rel, tuple(sorted(scaled.coeffs.items())), scaled.const)


# -- the symbolic-substitution oracle for the flagship fixture -----------------

def derived_fixture_constraints():
    """Independently derive the two queries by substituting the embedding
    v_i = 8*x_i - 4 into the problem-space atoms with exact rationals."""
    x0, x1, y0 = "x0", "x1", "y0"

    def sub(var):   # v_i as a linear expression over the embedding input
        return LinearExpr({var: 8}, -4)

    v0, v1 = sub(x0), sub(x1)
    box = []
    for v in (v0, v1):
        box.append(LinearConstraint(v.scale(-1).add(
            LinearExpr.constant(Q(-13, 4))), LE))          # -v - 13/4 <= 0
        box.append(LinearConstraint(v.add(
            LinearExpr.constant(Q(-13, 4))), LE))           # v - 13/4 <= 0
    t = LinearExpr({y0: 1}).add(v0.scale(2)).sub(v1)
    q_low = box + [LinearConstraint(t.add(LinearExpr.constant(Q(5, 4))), LE)]
    q_high = box + [LinearConstraint(
        t.scale(-1).add(LinearExpr.constant(Q(5, 4))), LE)]
    return [frozenset(canon(c) for c in q_low),
            frozenset(canon(c) for c in q_high)]


def test_fixture_compiles_to_or_of_two_leaves(tp):
    tree = compile_queries(tp, "safe")
    assert isinstance(tree, QOr)
    leaves = tree_leaves(tree)
    assert len(leaves) == 2
    assert [q.qid for q in leaves] == ["query1", "query2"]
    actual = [frozenset(canon(c) for c in q.constraints) for q in leaves]
    assert set(actual) == set(derived_fixture_constraints())


def test_fixture_blocks_and_recon(tp):
    leaf = tree_leaves(compile_queries(tp, "safe"))[0]
    assert [(b.network, b.inputs, b.outputs) for b in leaf.blocks] == \
        [("controller", ["x0", "x1"], ["y0"])]
    # the reconstruction map is exactly v = 8a - 4 per component
    full = leaf.recon.replay({"x0": Q(29, 32), "x1": Q(3, 32), "y0": Q(0)})
    assert full["x[0]"] == Q(13, 4)
    assert full["x[1]"] == Q(-13, 4)


def test_alternating_quantifiers_error():
    tp2 = tp_of((FIXTURES / "alternating.vcl").read_text())
    with pytest.raises(AlternatingQuantifiers, match="alternating"):
        compile_queries(tp2, "mixed")


def test_nonlinear_embedding_error():
    tp2 = tp_of((FIXTURES / "nonlinear.vcl").read_text())
    with pytest.raises(NonlinearEmbedding, match="non-linear"):
        compile_queries(tp2, "curved")


def test_if_over_network_rejected_in_queries():
    tp2 = tp_of("@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n"
                "@property\np : Bool\n"
                "p = forall (x : Rat) . -1.0 <= x and x <= 1.0 => "
                "(if f [x] ! 0 >= 0.0 then f [x] ! 0 else 0.0) <= 2.0")
    with pytest.raises(QueryCompileError, match="control flow"):
        compile_queries(tp2, "p")


def test_boolean_structure_above_quantifiers_gives_and_tree():
    tp2 = tp_of("@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n"
                "@property\np : Bool\n"
                "p = (forall (x : Rat) . -1.0 <= x and x <= 1.0 => "
                "f [x] ! 0 <= 9.0) or "
                "(forall (z : Rat) . 0.0 <= z and z <= 1.0 => "
                "f [z] ! 0 >= -9.0)")
    tree = compile_queries(tp2, "p")
    assert isinstance(tree, QAnd)
    assert len(tree.children) == 2


def test_coincident_applications_share_one_block(tp):
    tp2 = tp_of("@network\nf : Tensor Rat [2] -> Tensor Rat [1]\n"
                "@property\np : Bool\n"
                "p = forall (x : Tensor Rat [2]) . "
                "(-1.0 <= x ! 0 and x ! 0 <= 1.0 and -1.0 <= x ! 1 "
                "and x ! 1 <= 1.0) => "
                "(f x ! 0 <= 5.0 and f x ! 0 >= -5.0)")
    for leaf in tree_leaves(compile_queries(tp2, "p")):
        assert len(leaf.blocks) == 1


def test_distinct_applications_get_distinct_blocks():
    tp2 = tp_of("@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n"
                "@property\np : Bool\n"
                "p = forall (x : Rat) . (0.0 <= x and x <= 1.0) => "
                "f [x] ! 0 + f [x / 2.0] ! 0 <= 9.0")
    leaf = tree_leaves(compile_queries(tp2, "p"))[0]
    assert len(leaf.blocks) == 2
    names = [v for b in leaf.blocks for v in b.inputs + b.outputs]
    assert sorted(names) == ["x0", "x1", "y0", "y1"]


# -- solving ---------------------------------------------------------------------

def test_good_controller_unsat_both_queries(tp, good_network):
    tree = compile_queries(tp, "safe")
    for leaf in tree_leaves(tree):
        verdict, _ = solve_query(leaf, {"controller": good_network})
        assert verdict == "unsat"


def test_zero_controller_sat_with_valid_witness(tp, zero_network):
    tree = compile_queries(tp, "safe")
    sat = []
    for leaf in tree_leaves(tree):
        verdict, assignment = solve_query(leaf, {"controller": zero_network})
        if verdict == "sat":
            sat.append((leaf, assignment))
            for c in leaf.constraints:
                assert c.satisfied(assignment)
    assert sat
    # grid brute force confirms satisfiability of the found leaf
    leaf, _ = sat[0]
    hit = False
    for i in range(50):
        for j in range(50):
            pt = {"x0": Q(3, 32) + Q(i, 50) * Q(13, 16),
                  "x1": Q(3, 32) + Q(j, 50) * Q(13, 16),
                  "y0": Q(0)}
            if all(c.satisfied(pt) for c in leaf.constraints):
                hit = True
                break
        if hit:
            break
    assert hit


def test_infeasible_box_unsat_regardless_of_network(good_network):
    q = Query("q", [LinearConstraint(LinearExpr({"x0": 1}), LE),
                    LinearConstraint(LinearExpr({"x0": -1}, 1), LE)],
              [Block("controller", ["x0", "x1"], ["y0"], [])],
              ReconstructionMap(), {})
    assert solve_query(q, {"controller": good_network})[0] == "unsat"


def test_pattern_budget_enforced(tp):
    rng = random.Random(0)
    big = random_relu_network(rng, [2, 30, 1])
    tree = compile_queries(tp, "safe")
    with pytest.raises(PatternBudgetExceeded):
        solve_query(tree_leaves(tree)[0], {"controller": big}, budget=24)


def box_halfspace_query(rng, m=2):
    lo = [Q(rng.randint(-20, 0), 10) for _ in range(m)]
    hi = [Q(rng.randint(1, 20), 10) for _ in range(m)]
    cons = []
    for i in range(m):
        cons.append(LinearConstraint(
            LinearExpr({f"x{i}": -1}, lo[i]), LE))
        cons.append(LinearConstraint(
            LinearExpr({f"x{i}": 1}, -hi[i]), LE))
    half = {f"x{i}": Q(rng.randint(-3, 3)) for i in range(m)}
    half["y0"] = Q(rng.choice([-2, -1, 1, 2]))
    cons.append(LinearConstraint(
        LinearExpr(half, Q(rng.randint(-30, 30), 10)), LE))
    return Query("q", cons,
                 [Block("net", [f"x{i}" for i in range(m)], ["y0"], [])],
                 ReconstructionMap(), {}), lo, hi


def test_solver_agrees_with_grid_search():
    rng = random.Random(1234)
    for trial in range(10):
        net = random_relu_network(rng, [2, 4, 1])
        query, lo, hi = box_halfspace_query(rng)
        verdict, assignment = solve_query(query, {"net": net})
        if verdict == "sat":
            assert all(c.satisfied(assignment) for c in query.constraints)
            xs = [assignment["x0"], assignment["x1"]]
            assert eval_network(net, xs)[0] == assignment["y0"]
            continue
        # UNSAT: a 40x40 grid over the box must find no violation
        steps = 40
        for i in range(steps):
            for j in range(steps):
                x = [lo[0] + (hi[0] - lo[0]) * Q(i, steps - 1),
                     lo[1] + (hi[1] - lo[1]) * Q(j, steps - 1)]
                y = eval_network(net, x)[0]
                point = {"x0": x[0], "x1": x[1], "y0": y}
                assert not all(c.satisfied(point)
                               for c in query.constraints), \
                    f"trial {trial}: grid found witness the solver missed"


# -- tree evaluation -----------------------------------------------------------------

def leaf(qid, sat):
    cons = [] if sat else [V.FALSE_CONSTRAINT]
    return QLeaf(Query(qid, cons, [], ReconstructionMap(), {}))


def counting_solver():
    calls = []

    def solve(query):
        calls.append(query.qid)
        sat = not any(c.constant_truth() is False for c in query.constraints)
        return ("sat", {}) if sat else ("unsat", None)
    return solve, calls


def test_or_short_circuits_on_first_sat():
    solve, calls = counting_solver()
    verdict, witnesses = evaluate_tree(
        QOr([leaf("a", sat=True), leaf("b", sat=True)]), solve)
    assert verdict == "sat" and calls == ["a"]


def test_and_short_circuits_on_first_unsat():
    solve, calls = counting_solver()
    verdict, _ = evaluate_tree(
        QAnd([leaf("a", sat=False), leaf("b", sat=True)]), solve)
    assert verdict == "unsat" and calls == ["a"]


def test_and_collects_all_witnesses():
    solve, calls = counting_solver()
    verdict, witnesses = evaluate_tree(
        QAnd([leaf("a", sat=True), leaf("b", sat=True)]), solve)
    assert verdict == "sat" and sorted(witnesses) == ["a", "b"]


def test_verdict_insensitive_to_leaf_order(tp, zero_network):
    tree = compile_queries(tp, "safe")
    res = ResourceEnv(networks={"controller": zero_network})
    verdicts = set()
    for perm in itertools.permutations(tree.children):
        shuffled = QOr(list(perm))
        status = decide_tree(tp, "safe", shuffled, res)
        verdicts.add(status.verdict)
    assert verdicts == {"falsified"}


# -- lifting ------------------------------------------------------------------------

def test_lift_applies_reconstruction(tp):
    leaf = tree_leaves(compile_queries(tp, "safe"))[0]
    lifted = lift_counterexample(
        leaf, {"x0": Q(29, 32), "x1": Q(3, 32), "y0": Q(0)})
    assert lifted == {"x": [Q(13, 4), Q(-13, 4)]}


def test_lift_identity_embedding():
    tp2 = tp_of("@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n"
                "@property\np : Bool\n"
                "p = forall (x : Rat) . -1.0 <= x and x <= 1.0 => "
                "f [x] ! 0 <= 0.5")
    leaf = tree_leaves(compile_queries(tp2, "p"))[0]
    lifted = lift_counterexample(leaf, {"x0": Q(1, 3), "y0": Q(1)})
    assert lifted == {"x": Q(1, 3)}


def test_zero_controller_witness_refutes_property(tp, zero_network,
                                                  zero_resources):
    status = verify_property(tp, "safe", zero_resources)
    assert status.verdict == "falsified"
    point = status.witness["x"]
    assert all(abs(v) <= Q(13, 4) for v in point)
    assert abs(2 * point[0] - point[1]) >= Q(5, 4)
    # exact re-evaluation of the normal form at the witness is false
    nf = normalise_property(tp, "safe")
    assert nf_eval(nf, {("x", (0,)): point[0], ("x", (1,)): point[1]},
                   {"controller": zero_network}) is False


def test_lift_postcondition_catches_corrupt_witness(tp, zero_resources):
    tree = compile_queries(tp, "safe")
    leaf = tree_leaves(tree)[0]
    verdict, assignment = V.solve_query(
        leaf, zero_resources.networks, 24)
    assert verdict == "sat"
    bad = dict(assignment)
    bad["y0"] = bad["y0"] + 1    # inconsistent with the network
    lifted = lift_counterexample(leaf, bad)
    with pytest.raises(InternalError):
        V.check_lifted_witness(tp, "safe", leaf, bad, lifted,
                               zero_resources)


# -- emission and serialization ---------------------------------------------------

EXPECTED_QUERY1 = """\
1x0 >= 3/32
1x0 <= 29/32
1x1 >= 3/32
1x1 <= 29/32
1y0 + 16x0 + -8x1 <= 11/4
"""

EXPECTED_QUERY2 = """\
1x0 >= 3/32
1x0 <= 29/32
1x1 >= 3/32
1x1 <= 29/32
1y0 + 16x0 + -8x1 >= 21/4
"""


def test_emitted_files_match_derived_golden(tp, tmp_path):
    tree = compile_queries(tp, "safe")
    emit_query_files(tree, str(tmp_path))
    assert (tmp_path / "query1.txt").read_text() == EXPECTED_QUERY1
    assert (tmp_path / "query2.txt").read_text() == EXPECTED_QUERY2
    assert (tmp_path / "tree.json").exists()


def test_reemission_is_byte_identical(tp, tmp_path):
    tree = compile_queries(tp, "safe")
    emit_query_files(tree, str(tmp_path / "a"))
    emit_query_files(tree, str(tmp_path / "b"))
    for name in ["query1.txt", "query2.txt", "tree.json"]:
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes()


def test_single_atom_property_single_leaf():
    # negating `y <= 2` gives the strict counterexample search `y > 2`,
    # which the text format renders non-strict at the default zero slack
    tp2 = tp_of("@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n"
                "@property\np : Bool\n"
                "p = forall (x : Rat) . 0.0 <= x and x <= 1.0 => "
                "f [x] ! 0 <= 2.0")
    tree = compile_queries(tp2, "p")
    assert isinstance(tree, QLeaf)
    lines = render_query_lines(tree.query)
    assert lines == ["1x0 >= 0", "1x0 <= 1", "1y0 >= 2"]


def test_strict_inequality_slack_tightening():
    tp2 = tp_of("@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n"
                "@property\np : Bool\n"
                "p = forall (x : Rat) . 0.0 <= x and x <= 1.0 => "
                "f [x] ! 0 <= 2.0")
    leaf = tree_leaves(compile_queries(tp2, "p"))[0]
    assert render_query_lines(leaf, slack=Q(0))[-1] == "1y0 >= 2"
    assert render_query_lines(leaf, slack=Q(1, 100))[-1] == "1y0 >= 201/100"
    # the exact query object keeps strictness regardless of slack
    assert leaf.constraints[-1].rel == "lt"


def test_tree_json_roundtrip(tp):
    tree = compile_queries(tp, "safe")
    doc = tree_to_json(tree)
    again = tree_from_json(doc)
    for a, b in zip(tree_leaves(tree), tree_leaves(again)):
        assert a.qid == b.qid
        assert [c.key() for c in a.constraints] == \
            [c.key() for c in b.constraints]
        assert a.problem_vars == b.problem_vars
        assert len(a.recon.entries) == len(b.recon.entries)


def test_bound_parameters_inline_into_queries():
    tp2 = tp_of("@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n"
                "@parameter\neps : Rat\n"
                "@property\np : Bool\n"
                "p = forall (x : Rat) . (0.0 - eps <= x and x <= eps) => "
                "f [x] ! 0 <= 2.0")
    res = ResourceEnv(parameters={"eps": Q(1, 2)})
    leaf = tree_leaves(compile_queries(tp2, "p", res))[0]
    lines = render_query_lines(leaf)
    assert lines == ["1x0 >= -1/2", "1x0 <= 1/2", "1y0 >= 2"]


def test_unbound_parameter_rejected_for_queries():
    tp2 = tp_of("@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n"
                "@parameter\neps : Rat\n"
                "@property\np : Bool\n"
                "p = forall (x : Rat) . (0.0 - eps <= x and x <= eps) => "
                "f [x] ! 0 <= 2.0")
    with pytest.raises(QueryCompileError, match="eps"):
        compile_queries(tp2, "p", None)


def test_bound_dataset_elements_become_constants():
    tp2 = tp_of("@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n"
                "@dataset\nanchors : Tensor Rat [2]\n"
                "@property\np : Bool\n"
                "p = forall (i : Index 2) . forall (x : Rat) . "
                "(anchors ! i <= x and x <= anchors ! i + 1.0) => "
                "f [x] ! 0 <= 2.0")
    res = ResourceEnv(datasets={"anchors": [Q(0), Q(3)]})
    tree = compile_queries(tp2, "p", res)
    # the Index quantifier expanded: negation is an Or over two leaf groups
    leaves = tree_leaves(tree)
    assert len(leaves) == 2
    first = render_query_lines(leaves[0])
    assert first == ["1x0 >= 0", "1x0 <= 1", "1y0 >= 2"]
    second = render_query_lines(leaves[1])
    assert second == ["1x0 >= 3", "1x0 <= 4", "1y0 >= 2"]


def test_top_level_exists_property_unsupported():
    # negating `exists` leaves a universal prefix, which the query format
    # cannot express: same documented error as other alternation
    tp2 = tp_of("@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n"
                "@property\np : Bool\n"
                "p = exists (x : Rat) . 0.0 <= x and x <= 1.0 and "
                "f [x] ! 0 >= 0.5")
    with pytest.raises(AlternatingQuantifiers):
        compile_queries(tp2, "p")


def test_quantifier_free_network_property(good_network):
    tp2 = tp_of("@network\nf : Tensor Rat [2] -> Tensor Rat [1]\n"
                "@property\np : Bool\np = f [0.5, 0.5] ! 0 <= 1.0")
    res = ResourceEnv(networks={"f": good_network})
    status = verify_property(tp2, "p", res)
    assert status.verdict == "verified"        # f(0.5, 0.5) = 0
    tp3 = tp_of("@network\nf : Tensor Rat [2] -> Tensor Rat [1]\n"
                "@property\np : Bool\np = f [0.5, 0.5] ! 0 >= 1.0")
    status = verify_property(tp3, "p", res)
    assert status.verdict == "falsified"
    assert status.witness == {}                # no problem-space variables
