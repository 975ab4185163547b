"""Lowering of grounded constraints to 0-1 linear inequalities.

Each connective gets an auxiliary binary variable whose value is forced
to equal the connective's truth value in every feasible assignment:

    and(a1..an):  v <= ai for all i,  sum(ai) <= v + n - 1
    or(a1..an):   v >= ai for all i,  v <= sum(ai)
    not(a):       v + a = 1
    if(a, b):     v >= 1 - a,  v >= b,  v <= 1 - a + b

A top-level implication whose antecedent is a plain decision variable
skips its auxiliary and becomes the single inequality a <= b; a top-level
cardinality bound becomes sum(ai) <= k. Every other top-level expression
is asserted by pinning its root variable to 1.

The objective maximizes the sum of per-decision log-odds, so an
unconstrained model thresholds each probability at 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingScore
from .ground import (
    GAnd,
    GAtMost,
    GConst,
    GExpr,
    GIf,
    GNot,
    GOr,
    GVar,
    GroundedConstraint,
    ScoreVector,
    VarIndex,
)

LE = "<="
GE = ">="
EQ = "="


@dataclass(frozen=True)
class LinearConstraint:
    name: str
    coeffs: tuple[tuple[int, float], ...]  # (var index, coefficient), index-sorted
    rel: str
    rhs: float
    source: str = ""  # grounded constraint id this row came from

    def eval_lhs(self, values) -> float:
        return sum(c * values[i] for i, c in self.coeffs)

    def holds(self, values, tol: float = 1e-9) -> bool:
        lhs = self.eval_lhs(values)
        if self.rel == LE:
            return lhs <= self.rhs + tol
        if self.rel == GE:
            return lhs >= self.rhs - tol
        return abs(lhs - self.rhs) <= tol


@dataclass
class IlpModel:
    """Binary program: maximize objective . y subject to linear rows."""

    var_names: list[str]
    objective: np.ndarray
    constraints: list[LinearConstraint]
    num_decision: int

    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    def feasible(self, values, tol: float = 1e-9) -> bool:
        return all(c.holds(values, tol) for c in self.constraints)

    def objective_value(self, values) -> float:
        return float(np.dot(self.objective, np.asarray(values, dtype=float)))


class _Lowerer:
    def __init__(self, num_decision: int, var_names: list[str]):
        self.rows: list[LinearConstraint] = []
        self.names = list(var_names)
        self.num_decision = num_decision
        self._aux_counter: dict[str, int] = {}
        self._source = ""
        self._row_counter = 0

    def fresh_aux(self) -> int:
        k = self._aux_counter.get(self._source, 0)
        self._aux_counter[self._source] = k + 1
        self.names.append(f"aux_{self._source}_{k}")
        return len(self.names) - 1

    def add(self, coeffs: dict[int, float], rel: str, rhs: float) -> None:
        row = LinearConstraint(
            name=f"c{self._row_counter}",
            coeffs=tuple(sorted(coeffs.items())),
            rel=rel,
            rhs=float(rhs),
            source=self._source,
        )
        self._row_counter += 1
        self.rows.append(row)

    # -- recursive encoding ---------------------------------------------

    def lower_sub(self, expr: GExpr) -> int:
        """Encode a subexpression, returning the variable holding its truth."""
        if isinstance(expr, GVar):
            return expr.index
        if isinstance(expr, GConst):
            v = self.fresh_aux()
            self.add({v: 1.0}, EQ, 1.0 if expr.value else 0.0)
            return v
        if isinstance(expr, GNot):
            a = self.lower_sub(expr.child)
            v = self.fresh_aux()
            self.add({v: 1.0, a: 1.0}, EQ, 1.0)
            return v
        if isinstance(expr, GAnd):
            kids = [self.lower_sub(c) for c in expr.children]
            v = self.fresh_aux()
            for a in kids:
                self.add({v: 1.0, a: -1.0}, LE, 0.0)
            coeffs: dict[int, float] = {}
            for a in kids:
                coeffs[a] = coeffs.get(a, 0.0) + 1.0
            coeffs[v] = coeffs.get(v, 0.0) - 1.0
            self.add(coeffs, LE, len(kids) - 1)
            return v
        if isinstance(expr, GOr):
            kids = [self.lower_sub(c) for c in expr.children]
            v = self.fresh_aux()
            for a in kids:
                self.add({a: 1.0, v: -1.0}, LE, 0.0)
            coeffs = {v: 1.0}
            for a in kids:
                coeffs[a] = coeffs.get(a, 0.0) - 1.0
            self.add(coeffs, LE, 0.0)
            return v
        if isinstance(expr, GIf):
            a = self.lower_sub(expr.antecedent)
            b = self.lower_sub(expr.consequent)
            v = self.fresh_aux()
            self.add({v: 1.0, a: 1.0}, GE, 1.0)  # v >= 1 - a
            self.add({v: 1.0, b: -1.0}, GE, 0.0)  # v >= b
            coeffs = {v: 1.0}
            coeffs[a] = coeffs.get(a, 0.0) + 1.0
            coeffs[b] = coeffs.get(b, 0.0) - 1.0
            self.add(coeffs, LE, 1.0)  # v <= 1 - a + b
            return v
        if isinstance(expr, GAtMost):
            # only reachable nested; exact encoding not defined for this
            # dialect, wellformedness keeps cardinality at top level
            raise ValueError("cardinality constraints may only appear at top level")
        raise TypeError(f"not a grounded expression: {expr!r}")

    def assert_top(self, grounded: GroundedConstraint) -> None:
        """Encode one grounded constraint as a requirement of the model."""
        self._source = grounded.cid + "".join(f"_{nid}" for _, nid in grounded.binding)
        expr = grounded.expr
        if isinstance(expr, GConst):
            if not expr.value:
                # no assignment can satisfy this constraint
                self.add({}, LE, -1.0)
            return
        if isinstance(expr, GIf) and isinstance(expr.antecedent, GVar):
            a = expr.antecedent.index
            b = self.lower_sub(expr.consequent)
            self.add({a: 1.0, b: -1.0}, LE, 0.0)
            return
        if isinstance(expr, GAtMost):
            kids = [self.lower_sub(c) for c in expr.children]
            coeffs: dict[int, float] = {}
            for a in kids:
                coeffs[a] = coeffs.get(a, 0.0) + 1.0
            self.add(coeffs, LE, float(expr.k))
            return
        root = self.lower_sub(expr)
        self.add({root: 1.0}, EQ, 1.0)


def lower(grounded: GroundedConstraint, index: VarIndex) -> tuple[int | None, list[LinearConstraint]]:
    """Lower one grounded constraint; returns (root var or None, rows).

    Root is None when the expression is asserted directly (top-level
    implication shortcut, cardinality row, or a constant).
    """
    lw = _Lowerer(len(index), index.names)
    lw.assert_top(grounded)
    expr = grounded.expr
    direct = (
        isinstance(expr, GConst)
        or isinstance(expr, GAtMost)
        or (isinstance(expr, GIf) and isinstance(expr.antecedent, GVar))
    )
    if direct:
        return None, lw.rows
    # assert_top pinned the root with its final equality row
    root_row = lw.rows[-1]
    root = root_row.coeffs[0][0]
    return root, lw.rows


def compile_model(
    grounded: list[GroundedConstraint],
    scores: ScoreVector,
    index: VarIndex,
) -> IlpModel:
    """Build the full binary program for one sample.

    Decision variables get log-odds objective coefficients; auxiliaries
    get zero. Raises MissingScore when scores do not cover the index.
    """
    if len(scores.probs) != len(index):
        raise MissingScore("scores do not cover every decision variable")
    lw = _Lowerer(len(index), index.names)
    for g in grounded:
        lw.assert_top(g)
    objective = np.zeros(len(lw.names))
    objective[: len(index)] = scores.log_odds()
    return IlpModel(
        var_names=lw.names,
        objective=objective,
        constraints=lw.rows,
        num_decision=len(index),
    )


# ---------------------------------------------------------------------------
# LP text format


def _fmt(x: float) -> str:
    if x == int(x):
        return str(int(x))  # int() also normalizes -0.0
    return "%.12g" % x


def _term(coef: float, name: str, first: bool) -> str:
    mag = abs(coef)
    mag_s = "" if mag == 1 else _fmt(mag) + " "
    if first:
        sign = "-" if coef < 0 else ""
        return f"{sign}{mag_s}{name}"
    sign = "-" if coef < 0 else "+"
    return f" {sign} {mag_s}{name}"


def emit_lp(model: IlpModel) -> str:
    """Serialize to CPLEX LP text, deterministically.

    All decision variables appear in the objective (zero coefficients
    included) so the file alone documents the full variable set.
    """
    out = ["Maximize"]
    obj_terms = []
    for i in range(model.num_decision):
        obj_terms.append(_term(float(model.objective[i]), model.var_names[i], not obj_terms))
    if not obj_terms:
        obj_terms = ["0"]
    out.append(" obj: " + "".join(obj_terms))
    out.append("Subject To")
    for row in model.constraints:
        terms = []
        for i, c in row.coeffs:
            if c == 0:
                continue
            terms.append(_term(c, model.var_names[i], not terms))
        lhs = "".join(terms) if terms else "0"
        out.append(f" {row.name}: {lhs} {row.rel} {_fmt(row.rhs)}")
    out.append("Binary")
    for name in model.var_names:
        out.append(f" {name}")
    out.append("End")
    return "\n".join(out) + "\n"


def model_to_json(model: IlpModel) -> dict:
    """Debug dump of the whole model."""
    return {
        "variables": list(model.var_names),
        "num_decision": model.num_decision,
        "objective": [float(x) for x in model.objective],
        "constraints": [
            {
                "name": row.name,
                "terms": {model.var_names[i]: c for i, c in row.coeffs},
                "rel": row.rel,
                "rhs": row.rhs,
                "source": row.source,
            }
            for row in model.constraints
        ],
    }
