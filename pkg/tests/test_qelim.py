"""Exact linear algebra: Gaussian and Fourier-Motzkin elimination.

The planted-system oracles: feasible systems are built around a known
satisfying point; infeasible ones add a pair of directly contradictory
halfspaces, which certifies infeasibility independently of the code under
test.
"""
import random
from fractions import Fraction as Q

import pytest
from hypothesis import given, settings, strategies as st

from specbridge.qelim import (
    EQ, LE, LT, FMEntry, GaussEntry, Infeasible, LinearConstraint,
    LinearExpr, eliminate_variables, feasible, fourier_motzkin,
    gaussian_eliminate,
)


def le(coeffs, const=0):
    return LinearConstraint(LinearExpr(coeffs, const), LE)


def lt(coeffs, const=0):
    return LinearConstraint(LinearExpr(coeffs, const), LT)


def eq(coeffs, const=0):
    return LinearConstraint(LinearExpr(coeffs, const), EQ)


# -- Gaussian -------------------------------------------------------------------

def test_gaussian_solves_embedding_equation():
    # a = (x + 4) / 8  solved for x gives x = 8a - 4
    c = eq({"a": 1, "x": Q(-1, 8)}, Q(-1, 2))
    entries, residual, _, pending = gaussian_eliminate([c], ["x"])
    assert not residual and not pending
    assert entries == [GaussEntry("x", LinearExpr({"a": 8}, -4))]
    # substituting back yields the zero expression symbolically
    back = c.expr.subst("x", entries[0].expr)
    assert back.is_constant() and back.const == 0


def test_gaussian_symmetric_system():
    system = [eq({"x": 1, "y": 1}, -2), eq({"x": 1, "y": -1}, 0)]
    reduced, recon = eliminate_variables(system, keep=set())
    assert reduced == []
    assert recon.replay({}) == {"x": Q(1), "y": Q(1)}


def test_gaussian_inconsistent_constant():
    with pytest.raises(Infeasible):
        gaussian_eliminate([eq({}, 1)], ["x"])


def test_gaussian_underdetermined_target_passes_through():
    entries, residual, _, pending = gaussian_eliminate(
        [eq({"x": 1}, -1)], ["x", "z"])
    assert pending == ["z"]
    assert entries[0].var == "x"


def test_gaussian_substitutes_into_inequalities():
    # v = 8x - 4 substituted into v <= 13/4 gives 8x - 29/4 <= 0
    entries, residual, others, _ = gaussian_eliminate(
        [eq({"v": 1, "x": -8}, 4)], ["v"], others=[le({"v": 1}, Q(-13, 4))])
    assert others[0].expr == LinearExpr({"x": 8}, Q(-29, 4))


# -- Fourier-Motzkin --------------------------------------------------------------

def test_fm_single_pair():
    # y <= x and 0 <= y  project to  0 <= x
    out = fourier_motzkin([le({"y": 1, "x": -1}), le({"y": -1})], "y")
    assert out == [le({"x": -1})]


def test_fm_keeps_untouched_constraints():
    out = fourier_motzkin(
        [le({"x": 1, "y": 1}, -3), le({"y": -1}), le({"x": -1}, 1)], "y")
    assert le({"x": -1}, 1) in out and le({"x": 1}, -3) in out
    # oracle: rational grid over y confirms the projection pointwise
    for xv in [Q(n, 4) for n in range(-8, 20)]:
        reduced_ok = all(c.satisfied({"x": xv}) for c in out)
        grid_ok = any(
            all(c.satisfied({"x": xv, "y": yv})
                for c in [le({"x": 1, "y": 1}, -3), le({"y": -1}),
                          le({"x": -1}, 1)])
            for yv in [Q(n, 8) for n in range(-40, 80)])
        assert reduced_ok == grid_ok


def test_fm_strictness_propagates():
    out = fourier_motzkin([lt({"y": 1, "x": -1}), le({"y": -1})], "y")
    assert out == [lt({"x": -1})]


def test_fm_zero_coefficient_constant_survives():
    degenerate = lt({}, 0)     # "y < y" folded: 0 < 0
    out = fourier_motzkin([degenerate], "y")
    assert out == [degenerate]
    assert degenerate.constant_truth() is False


def test_fm_drops_tautologies():
    out = fourier_motzkin([le({}, -5), le({"y": 1})], "y")
    assert out == []


# -- full elimination ---------------------------------------------------------------

def test_eliminate_empty_system():
    reduced, recon = eliminate_variables([], keep=set())
    assert reduced == [] and recon.entries == []


def test_eliminate_fixture_embedding():
    # box on problem vars + definitions x_i = (v_i + 4) / 8
    system = [
        eq({"x0": 1, "v0": Q(-1, 8)}, Q(-1, 2)),
        eq({"x1": 1, "v1": Q(-1, 8)}, Q(-1, 2)),
        le({"v0": -1}, Q(-13, 4) * -1 * -1),   # -v0 <= -(-13/4) i.e. v0>=-13/4
        le({"v0": 1}, Q(-13, 4)),
        le({"v1": -1}, Q(-13, 4) * -1 * -1),
        le({"v1": 1}, Q(-13, 4)),
    ]
    reduced, recon = eliminate_variables(system, keep={"x0", "x1"})
    assert all(set(c.expr.coeffs) <= {"x0", "x1"} for c in reduced)
    # witness extension is exact
    point = {"x0": Q(1, 2), "x1": Q(3, 8)}
    full = recon.replay(point)
    assert full["v0"] == 8 * point["x0"] - 4
    for c in system:
        assert c.satisfied(full)


def test_fm_entry_midpoint_reconstruction():
    reduced, recon = eliminate_variables(
        [le({"u": -1}, Q(1, 2)), le({"u": 1}, -1)], keep=set())
    assert reduced == []
    entry = recon.entries[0]
    assert isinstance(entry, FMEntry)
    val = recon.replay({})["u"]
    assert val == Q(3, 4)       # midpoint of [1/2, 1]


def test_unbounded_side_reconstruction():
    # -u + 2 <= 0 means u >= 2; with no upper bound the witness is 2 + 1
    _, recon = eliminate_variables([le({"u": -1}, 2)], keep=set())
    assert recon.replay({})["u"] == Q(3)


# -- planted random systems (oracle-backed) -------------------------------------

def plant_feasible(rng, n_vars, n_cons):
    names = [f"v{i}" for i in range(n_vars)]
    point = {v: Q(rng.randint(-8, 8), rng.randint(1, 4)) for v in names}
    cons = []
    for _ in range(n_cons):
        coeffs = {v: rng.randint(-5, 5) for v in names}
        rel = rng.choice([LE, LE, LT, EQ])
        value = sum(c * point[v] for v, c in coeffs.items())
        if rel == EQ:
            cons.append(eq(coeffs, -value))
        elif rel == LT:
            cons.append(lt(coeffs, -value - Q(rng.randint(1, 5))))
        else:
            cons.append(le(coeffs, -value - Q(rng.randint(0, 5))))
    return cons, point


def plant_infeasible(rng, n_vars, n_cons):
    cons, _ = plant_feasible(rng, n_vars, max(0, n_cons - 2))
    names = [f"v{i}" for i in range(n_vars)]
    coeffs = {v: rng.randint(-5, 5) for v in names}
    if all(c == 0 for c in coeffs.values()):
        coeffs[names[0]] = 1
    b = Q(rng.randint(-5, 5))
    # c.x <= b together with c.x >= b + 1: adding them proves 0 <= -1
    cons.append(le(coeffs, -b))
    cons.append(le({v: -c for v, c in coeffs.items()}, b + 1))
    return cons


def test_planted_feasibility_verdicts():
    rng = random.Random(42)
    for i in range(50):
        cons, point = plant_feasible(rng, rng.randint(1, 4),
                                     rng.randint(1, 8))
        witness = feasible(cons)
        assert witness is not None, f"feasible system {i} judged infeasible"
        assert all(c.satisfied(witness) for c in cons)
    for i in range(50):
        cons = plant_infeasible(rng, rng.randint(1, 4), rng.randint(2, 8))
        assert feasible(cons) is None, f"infeasible system {i} judged feasible"


def test_projection_extension_invariant():
    rng = random.Random(7)
    for _ in range(20):
        n_vars = rng.randint(2, 4)
        cons, point = plant_feasible(rng, n_vars, rng.randint(2, 8))
        names = [f"v{i}" for i in range(n_vars)]
        keep = set(rng.sample(names, rng.randint(1, n_vars - 1)))
        try:
            reduced, recon = eliminate_variables(cons, keep)
        except Infeasible:
            pytest.fail("planted-feasible system rejected")
        hits = 0
        for _ in range(100):
            candidate = {v: Q(rng.randint(-40, 40), 4) for v in keep}
            if all(c.satisfied(candidate) for c in reduced):
                hits += 1
                full = recon.replay(candidate)
                assert all(c.satisfied(full) for c in cons)
        # the planted point's projection always satisfies the reduction
        projected = {v: point[v] for v in keep}
        assert all(c.satisfied(projected) for c in reduced)
        full = recon.replay(projected)
        assert all(c.satisfied(full) for c in cons)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_fm_projection_equivalence_property(data):
    """Hypothesis: eliminating one variable preserves satisfiability of the
    remaining-variable assignments exactly (checked against a grid)."""
    rng = random.Random(data.draw(st.integers(0, 10**6)))
    n_cons = data.draw(st.integers(1, 5))
    cons = []
    for _ in range(n_cons):
        coeffs = {"a": rng.randint(-3, 3), "b": rng.randint(-3, 3)}
        cons.append(LinearConstraint(
            LinearExpr(coeffs, Q(rng.randint(-6, 6))),
            rng.choice([LE, LT])))
    out = fourier_motzkin(cons, "b")
    for av in [Q(n, 2) for n in range(-8, 9)]:
        reduced_ok = all(c.satisfied({"a": av}) for c in out)
        grid_ok = any(
            all(c.satisfied({"a": av, "b": bv}) for c in cons)
            for bv in [Q(n, 6) for n in range(-80, 81)])
        if reduced_ok != grid_ok:
            # a fine grid can miss open intervals; verify exactly instead
            exact = feasible(
                [LinearConstraint(LinearExpr({"a": 1}, -av), EQ)] + cons)
            assert reduced_ok == (exact is not None)
