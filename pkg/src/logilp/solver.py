"""Exact 0-1 solver: depth-first branch and bound plus a brute-force oracle.

Branching picks the unfixed variable with the largest |objective
coefficient| and tries its sign-preferred value first. The bound is the
fixed part of the objective plus the sum of positive coefficients over
unfixed variables. Bounds propagation fixes variables forced by the
linear rows before every branch.

Among equally good optima the returned assignment is the
lexicographically smallest 0/1 vector in variable-index order; a second
pass pins each variable to 0 whenever the optimum stays attainable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import Infeasible, TooLarge
from .ground import GroundedConstraint, boolean_eval
from .ilp import EQ, GE, LE, IlpModel

OPTIMAL = "optimal"
LIMIT = "limit"  # search cut short, best feasible point found so far
UNVERIFIED = "unverified"  # no feasible point found before the cut, raw argmax

_EPS = 1e-9


@dataclass
class SolveConfig:
    max_nodes: int = 2_000_000
    time_limit: float = 60.0


@dataclass
class Assignment:
    values: np.ndarray
    objective: float
    status: str = OPTIMAL

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def decisions(self, num_decision: int) -> np.ndarray:
        return self.values[:num_decision]


class _Budget:
    def __init__(self, config: SolveConfig):
        self.max_nodes = config.max_nodes
        self.deadline = time.monotonic() + config.time_limit
        self.nodes = 0
        self.exhausted = False

    def tick(self) -> bool:
        self.nodes += 1
        if self.nodes > self.max_nodes or (self.nodes % 512 == 0 and time.monotonic() > self.deadline):
            self.exhausted = True
        return not self.exhausted


class _Search:
    """One branch-and-bound run over a model with some variables pre-fixed."""

    def __init__(self, model: IlpModel, budget: _Budget):
        self.model = model
        self.budget = budget
        self.n = model.num_vars
        self.coeffs = model.objective
        # static branch order: largest |coefficient| first, then index
        self.order = sorted(range(self.n), key=lambda i: (-abs(self.coeffs[i]), i))
        self.rows = model.constraints
        self.touching: list[list[int]] = [[] for _ in range(self.n)]
        for r, row in enumerate(self.rows):
            for i, _ in row.coeffs:
                self.touching[i].append(r)
        self.first_failure: str | None = None

    # -- propagation ------------------------------------------------------

    def propagate(self, fixed: np.ndarray, dirty: list[int] | None = None) -> bool:
        """Fix variables forced by the rows; False on contradiction.

        ``dirty`` lists the rows to revisit; None means all of them.
        """
        queue = list(range(len(self.rows))) if dirty is None else list(dirty)
        in_queue = set(queue)
        while queue:
            r = queue.pop()
            in_queue.discard(r)
            row = self.rows[r]
            lo = hi = 0.0
            for i, c in row.coeffs:
                v = fixed[i]
                if v >= 0:
                    lo += c * v
                    hi += c * v
                elif c > 0:
                    hi += c
                else:
                    lo += c
            rels = []
            if row.rel in (LE, EQ):
                rels.append((LE, row.rhs))
            if row.rel in (GE, EQ):
                rels.append((GE, row.rhs))
            for rel, rhs in rels:
                if rel == LE:
                    if lo > rhs + _EPS:
                        if self.first_failure is None:
                            self.first_failure = row.source or row.name
                        return False
                    for i, c in row.coeffs:
                        if fixed[i] >= 0 or c == 0:
                            continue
                        # forcing i to its costly side would break the row
                        if c > 0 and lo + c > rhs + _EPS:
                            forced = 0
                        elif c < 0 and lo - c > rhs + _EPS:
                            forced = 1
                        else:
                            continue
                        self._fix(fixed, i, forced, queue, in_queue)
                else:
                    if hi < rhs - _EPS:
                        if self.first_failure is None:
                            self.first_failure = row.source or row.name
                        return False
                    for i, c in row.coeffs:
                        if fixed[i] >= 0 or c == 0:
                            continue
                        if c > 0 and hi - c < rhs - _EPS:
                            forced = 1
                        elif c < 0 and hi + c < rhs - _EPS:
                            forced = 0
                        else:
                            continue
                        self._fix(fixed, i, forced, queue, in_queue)
        return True

    def _fix(self, fixed: np.ndarray, i: int, value: int, queue: list, in_queue: set) -> None:
        fixed[i] = value
        for r in self.touching[i]:
            if r not in in_queue:
                queue.append(r)
                in_queue.add(r)

    # -- search ------------------------------------------------------------

    def bound(self, fixed: np.ndarray) -> float:
        total = 0.0
        for i in range(self.n):
            v = fixed[i]
            if v >= 0:
                total += self.coeffs[i] * v
            elif self.coeffs[i] > 0:
                total += self.coeffs[i]
        return total

    def maximize(self, fixed0: np.ndarray) -> tuple[float, np.ndarray] | None:
        """Best objective reachable from a partial fixing, or None."""
        best_val = -np.inf
        best_vec: np.ndarray | None = None
        fixed0 = fixed0.copy()
        if not self.propagate(fixed0):
            return None
        stack = [fixed0]
        while stack:
            if not self.budget.tick():
                break
            fixed = stack.pop()
            if self.bound(fixed) <= best_val + _EPS:
                continue
            branch_var = -1
            for i in self.order:
                if fixed[i] < 0:
                    branch_var = i
                    break
            if branch_var < 0:
                val = float(np.dot(self.coeffs, fixed))
                if val > best_val + _EPS:
                    best_val = val
                    best_vec = fixed.copy()
                continue
            preferred = 1 if self.coeffs[branch_var] > 0 else 0
            for value in (1 - preferred, preferred):  # preferred explored first (LIFO)
                child = fixed.copy()
                child[branch_var] = value
                if self.propagate(child, self.touching[branch_var]):
                    stack.append(child)
        if best_vec is None:
            return None
        return best_val, best_vec

    def attainable(self, fixed0: np.ndarray, target: float) -> np.ndarray | None:
        """Some completion with objective >= target - eps, or None."""
        fixed0 = fixed0.copy()
        if not self.propagate(fixed0):
            return None
        stack = [fixed0]
        while stack:
            if not self.budget.tick():
                return None
            fixed = stack.pop()
            if self.bound(fixed) < target - _EPS:
                continue
            branch_var = -1
            for i in self.order:
                if fixed[i] < 0:
                    branch_var = i
                    break
            if branch_var < 0:
                if float(np.dot(self.coeffs, fixed)) >= target - _EPS:
                    return fixed
                continue
            preferred = 1 if self.coeffs[branch_var] > 0 else 0
            for value in (1 - preferred, preferred):
                child = fixed.copy()
                child[branch_var] = value
                if self.propagate(child, self.touching[branch_var]):
                    stack.append(child)
        return None


def _argmax_fallback(model: IlpModel) -> Assignment:
    values = (model.objective > 0).astype(np.int8)
    return Assignment(values, model.objective_value(values), UNVERIFIED)


def solve(model: IlpModel, config: SolveConfig | None = None) -> Assignment:
    """Optimal assignment of a binary model.

    Raises Infeasible when no assignment satisfies the rows. When the
    node or time budget runs out the best feasible point found so far is
    returned with status "limit", or the unconstrained argmax with
    status "unverified" if none was found; callers treat both as
    best-effort rather than crashing mid-run.
    """
    config = config or SolveConfig()
    budget = _Budget(config)
    search = _Search(model, budget)
    free = np.full(model.num_vars, -1, dtype=np.int8)
    found = search.maximize(free)
    if found is None:
        if budget.exhausted:
            return _argmax_fallback(model)
        raise Infeasible(hint=search.first_failure)
    best_val, best_vec = found
    if budget.exhausted:
        return Assignment(best_vec.astype(np.int8), model.objective_value(best_vec), LIMIT)

    # lexicographic pass: pin each variable to 0 when optimality survives;
    # the current witness (a full optimum matching the prefix) certifies
    # zeros for free
    witness = best_vec.astype(np.int8)
    fixed = np.full(model.num_vars, -1, dtype=np.int8)
    for i in range(model.num_vars):
        if witness[i] == 0:
            fixed[i] = 0
            continue
        fixed[i] = 0
        w = search.attainable(fixed, best_val)
        if budget.exhausted:
            return Assignment(witness, model.objective_value(witness), LIMIT)
        if w is None:
            fixed[i] = 1
        else:
            witness = w.astype(np.int8)
    return Assignment(witness, model.objective_value(witness), OPTIMAL)


def brute_force(model: IlpModel, max_vars: int = 24) -> Assignment:
    """Exhaustive optimum with the same tie-breaking as solve().

    Enumerates assignments in lexicographic order (variable 0 is the
    most significant bit) and keeps the first maximum, so ties resolve
    to the lexicographically smallest vector.
    """
    n = model.num_vars
    if n > max_vars:
        raise TooLarge(f"{n} variables is past the brute-force limit of {max_vars}")
    if n == 0:
        if not model.feasible(np.zeros(0)):
            raise Infeasible(hint=model.constraints[0].source if model.constraints else None)
        return Assignment(np.zeros(0, dtype=np.int8), 0.0, OPTIMAL)
    best_val = -np.inf
    best_vec: np.ndarray | None = None
    chunk = 1 << min(n, 16)
    total = 1 << n
    shifts = np.arange(n - 1, -1, -1, dtype=np.uint32)
    for start in range(0, total, chunk):
        rows = np.arange(start, min(start + chunk, total), dtype=np.uint32)
        bits = ((rows[:, None] >> shifts[None, :]) & 1).astype(np.int8)
        ok = np.ones(len(rows), dtype=bool)
        for row in model.constraints:
            lhs = np.zeros(len(rows))
            for i, c in row.coeffs:
                lhs += c * bits[:, i]
            if row.rel == LE:
                ok &= lhs <= row.rhs + _EPS
            elif row.rel == GE:
                ok &= lhs >= row.rhs - _EPS
            else:
                ok &= np.abs(lhs - row.rhs) <= _EPS
        if not ok.any():
            continue
        vals = bits @ model.objective
        vals[~ok] = -np.inf
        m = float(vals.max())
        if m > best_val + _EPS:
            # first row within tie tolerance of the max = lex-smallest optimum
            j = int(np.nonzero(vals >= m - _EPS)[0][0])
            best_val = m
            best_vec = bits[j].copy()
    if best_vec is None:
        raise Infeasible(hint=model.constraints[0].source if model.constraints else None)
    return Assignment(best_vec, best_val, OPTIMAL)


def violations(
    grounded: list[GroundedConstraint],
    assignment: Assignment | np.ndarray,
) -> list[tuple[str, dict[str, str]]]:
    """Grounded constraints falsified by an assignment of decision values."""
    values = assignment.values if isinstance(assignment, Assignment) else np.asarray(assignment)
    out = []
    for g in grounded:
        if not boolean_eval(g.expr, values):
            out.append((g.cid, g.binding_dict()))
    return out
