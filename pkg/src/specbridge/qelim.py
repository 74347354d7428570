"""Exact-rational linear constraint algebra.

Gaussian elimination removes equality-definable variables; Fourier-Motzkin
projection removes the rest.  Everything is a `LinearExpr` compared against
zero, so feasibility of a system falls out by eliminating every variable
and reading the surviving constant constraints.  A `ReconstructionMap`
replays eliminations backwards to turn satisfying assignments of the
reduced system into satisfying assignments of the original: this is what
lifts embedding-space counterexamples back to the problem space.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

EQ, LE, LT = "eq", "le", "lt"


class Infeasible(Exception):
    """Signal: an equality system reduced to 0 = c with c != 0."""


class LinearExpr:
    """sum(coeffs[v] * v) + const; zero coefficients are never stored."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs=None, const=Fraction(0)):
        self.coeffs = {v: Fraction(c) for v, c in (coeffs or {}).items()
                       if c != 0}
        self.const = Fraction(const)

    @staticmethod
    def constant(c) -> "LinearExpr":
        return LinearExpr({}, c)

    @staticmethod
    def var(name, coeff=Fraction(1)) -> "LinearExpr":
        return LinearExpr({name: coeff})

    def add(self, other: "LinearExpr") -> "LinearExpr":
        coeffs = dict(self.coeffs)
        for v, c in other.coeffs.items():
            coeffs[v] = coeffs.get(v, Fraction(0)) + c
        return LinearExpr(coeffs, self.const + other.const)

    def sub(self, other: "LinearExpr") -> "LinearExpr":
        return self.add(other.scale(-1))

    def scale(self, k) -> "LinearExpr":
        k = Fraction(k)
        return LinearExpr({v: c * k for v, c in self.coeffs.items()},
                          self.const * k)

    def subst(self, var: str, repl: "LinearExpr") -> "LinearExpr":
        if var not in self.coeffs:
            return self
        k = self.coeffs[var]
        rest = LinearExpr({v: c for v, c in self.coeffs.items() if v != var},
                          self.const)
        return rest.add(repl.scale(k))

    def eval(self, assignment: dict) -> Fraction:
        return sum((c * assignment[v] for v, c in self.coeffs.items()),
                   self.const)

    def variables(self):
        return set(self.coeffs)

    def is_constant(self):
        return not self.coeffs

    def key(self):
        return (tuple(sorted(self.coeffs.items())), self.const)

    def __eq__(self, other):
        return isinstance(other, LinearExpr) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        terms = [f"{c}*{v}" for v, c in sorted(self.coeffs.items())]
        terms.append(str(self.const))
        return " + ".join(terms)


@dataclass(frozen=True)
class LinearConstraint:
    """expr rel 0 with rel in {eq, le, lt}."""
    expr: LinearExpr
    rel: str

    def satisfied(self, assignment: dict) -> bool:
        v = self.expr.eval(assignment)
        if self.rel == EQ:
            return v == 0
        return v < 0 if self.rel == LT else v <= 0

    def constant_truth(self) -> Optional[bool]:
        if not self.expr.is_constant():
            return None
        c = self.expr.const
        if self.rel == EQ:
            return c == 0
        return c < 0 if self.rel == LT else c <= 0

    def subst(self, var: str, repl: LinearExpr) -> "LinearConstraint":
        return LinearConstraint(self.expr.subst(var, repl), self.rel)

    def key(self):
        return (self.rel, self.expr.key())

    def __repr__(self):
        op = {EQ: "=", LE: "<=", LT: "<"}[self.rel]
        return f"{self.expr!r} {op} 0"


@dataclass(frozen=True)
class GaussEntry:
    var: str
    expr: LinearExpr            # var = expr over remaining variables


@dataclass(frozen=True)
class FMEntry:
    var: str
    lowers: tuple               # (LinearExpr bound, strict) with var >= bound
    uppers: tuple               # (LinearExpr bound, strict) with var <= bound


@dataclass
class ReconstructionMap:
    entries: list = field(default_factory=list)

    def replay(self, assignment: dict) -> dict:
        """Extend an assignment of the reduced system's variables to all
        eliminated variables, exactly."""
        out = dict(assignment)
        for entry in reversed(self.entries):
            if isinstance(entry, GaussEntry):
                out[entry.var] = entry.expr.eval(out)
                continue
            lowers = [e.eval(out) for e, _ in entry.lowers]
            uppers = [e.eval(out) for e, _ in entry.uppers]
            if lowers and uppers:
                out[entry.var] = (max(lowers) + min(uppers)) / 2
            elif lowers:
                out[entry.var] = max(lowers) + 1
            elif uppers:
                out[entry.var] = min(uppers) - 1
            else:
                out[entry.var] = Fraction(0)
        return out


def gaussian_eliminate(equalities: list, targets: Iterable,
                       others: Optional[list] = None):
    """Solve targets out of the equalities and substitute everywhere.

    Returns (entries, residual_eqs, rewritten_others, unsolved_targets).
    Raises Infeasible when an equality folds to 0 = c, c != 0.
    """
    eqs = list(equalities)
    others = list(others or [])
    entries = []
    pending = sorted(set(targets))
    progress = True
    while progress:
        progress = False
        for var in list(pending):
            pivot_idx = next(
                (i for i, c in enumerate(eqs) if var in c.expr.coeffs), None)
            if pivot_idx is None:
                continue
            pivot = eqs.pop(pivot_idx)
            k = pivot.expr.coeffs[var]
            # var = -(rest)/k
            rest = LinearExpr(
                {v: c for v, c in pivot.expr.coeffs.items() if v != var},
                pivot.expr.const)
            solved = rest.scale(Fraction(-1, 1) / k)
            entries.append(GaussEntry(var, solved))
            eqs = [c.subst(var, solved) for c in eqs]
            others = [c.subst(var, solved) for c in others]
            pending.remove(var)
            progress = True
    residual = []
    for c in eqs:
        truth = c.constant_truth()
        if truth is False:
            raise Infeasible(repr(c))
        if truth is None:
            residual.append(c)
    return entries, residual, others, pending


def fourier_motzkin(ineqs: list, var: str) -> list:
    """Project `var` out of a system of le/lt constraints."""
    lowers, uppers, rest = [], [], []
    for c in ineqs:
        coeff = c.expr.coeffs.get(var)
        if coeff is None:
            rest.append(c)
        elif coeff > 0:
            # c_v*var + r <= 0  =>  var <= -r/c_v
            bound = LinearExpr(
                {v: x for v, x in c.expr.coeffs.items() if v != var},
                c.expr.const).scale(Fraction(-1) / coeff)
            uppers.append((bound, c.rel == LT))
        else:
            bound = LinearExpr(
                {v: x for v, x in c.expr.coeffs.items() if v != var},
                c.expr.const).scale(Fraction(-1) / coeff)
            lowers.append((bound, c.rel == LT))
    out = list(rest)
    for lo, lo_strict in lowers:
        for hi, hi_strict in uppers:
            rel = LT if (lo_strict or hi_strict) else LE
            out.append(LinearConstraint(lo.sub(hi), rel))
    return prune(out)


def prune(constraints: list) -> list:
    """Drop constant tautologies and syntactic duplicates (order kept)."""
    seen = set()
    out = []
    for c in constraints:
        if c.constant_truth() is True:
            continue
        k = c.key()
        if k in seen:
            continue
        seen.add(k)
        out.append(c)
    return out


def _occurrence_order(ineqs: list, variables: set) -> list:
    counts = {v: 0 for v in variables}
    for c in ineqs:
        for v in c.expr.coeffs:
            if v in counts:
                counts[v] += 1
    return sorted(counts, key=lambda v: (counts[v], v))


def eliminate_variables(constraints: list, keep: set):
    """Reduce the system onto `keep`: Gaussian on equality-definable
    variables first, then Fourier-Motzkin in ascending occurrence order.

    Returns (reduced_constraints, ReconstructionMap).  Raises Infeasible if
    the equality part is contradictory.
    """
    eqs = [c for c in constraints if c.rel == EQ]
    ineqs = [c for c in constraints if c.rel != EQ]
    all_vars = set()
    for c in constraints:
        all_vars |= c.expr.variables()
    targets = all_vars - set(keep)
    entries, residual_eqs, ineqs, unsolved = gaussian_eliminate(
        eqs, targets, ineqs)
    ineqs = prune(ineqs)
    remaining = set(unsolved)
    while remaining:
        var = _occurrence_order(ineqs, remaining)[0]
        remaining.remove(var)
        lowers, uppers = [], []
        for c in ineqs:
            coeff = c.expr.coeffs.get(var)
            if not coeff:
                continue
            bound = LinearExpr(
                {v: x for v, x in c.expr.coeffs.items() if v != var},
                c.expr.const).scale(Fraction(-1) / coeff)
            (uppers if coeff > 0 else lowers).append((bound, c.rel == LT))
        entries.append(FMEntry(var, tuple(lowers), tuple(uppers)))
        ineqs = fourier_motzkin(ineqs, var)
    reduced = prune(residual_eqs + ineqs)
    return reduced, ReconstructionMap(entries)


def feasible(constraints: list) -> Optional[dict]:
    """Decide a system exactly; returns a witness assignment or None."""
    try:
        reduced, recon = eliminate_variables(constraints, keep=set())
    except Infeasible:
        return None
    for c in reduced:
        if c.constant_truth() is False:
            return None
    return recon.replay({})
