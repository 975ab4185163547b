"""Shared fixtures and independent oracles for the test suite.

The oracles here intentionally reimplement semantics from scratch
(recursive boolean evaluation, exhaustive feasibility enumeration) so
they never share code with the paths they check.
"""

from __future__ import annotations

import numpy as np

from logilp.ground import (
    DataNode,
    DataNodeGraph,
    GAnd,
    GAtMost,
    GConst,
    GIf,
    GNot,
    GOr,
    GVar,
    VarIndex,
)
from logilp.ilp import EQ, GE, LE, IlpModel
from logilp.softlogic import soft_eval
from logilp.schema import GraphBuilder

# ---------------------------------------------------------------------------
# flat index: n interchangeable items with one decision concept


def flat_index(n: int) -> VarIndex:
    builder = GraphBuilder()
    builder.add_concept("item")
    builder.add_concept("flag", parent="item")
    graph = builder.build()
    nodes = [
        DataNode(id=f"n{i:02d}", concept="item", features=np.zeros(1)) for i in range(n)
    ]
    dng = DataNodeGraph(nodes)
    return VarIndex(graph, dng)


# ---------------------------------------------------------------------------
# independent boolean oracle over grounded expressions


def bool_oracle(expr, assignment) -> bool:
    if isinstance(expr, GVar):
        return assignment[expr.index] == 1
    if isinstance(expr, GConst):
        return bool(expr.value)
    if isinstance(expr, GNot):
        return not bool_oracle(expr.child, assignment)
    if isinstance(expr, GAnd):
        result = True
        for child in expr.children:
            result = result and bool_oracle(child, assignment)
        return result
    if isinstance(expr, GOr):
        result = False
        for child in expr.children:
            result = result or bool_oracle(child, assignment)
        return result
    if isinstance(expr, GIf):
        if bool_oracle(expr.antecedent, assignment):
            return bool_oracle(expr.consequent, assignment)
        return True
    if isinstance(expr, GAtMost):
        count = 0
        for child in expr.children:
            if bool_oracle(child, assignment):
                count += 1
        return count <= expr.k
    raise AssertionError(f"unexpected node {expr!r}")


# ---------------------------------------------------------------------------
# exhaustive feasibility oracle over a lowered model


def enumerate_feasible(model: IlpModel) -> np.ndarray:
    """Boolean mask over all 2^n assignments, in lex order of the vector."""
    n = model.num_vars
    assert n <= 20, "oracle enumeration limit"
    shifts = np.arange(n - 1, -1, -1, dtype=np.uint32)
    rows = np.arange(1 << n, dtype=np.uint32)
    bits = ((rows[:, None] >> shifts[None, :]) & 1).astype(np.int8)
    ok = np.ones(len(rows), dtype=bool)
    for row in model.constraints:
        lhs = np.zeros(len(rows))
        for i, c in row.coeffs:
            lhs += c * bits[:, i]
        if row.rel == LE:
            ok &= lhs <= row.rhs + 1e-9
        elif row.rel == GE:
            ok &= lhs >= row.rhs - 1e-9
        elif row.rel == EQ:
            ok &= np.abs(lhs - row.rhs) <= 1e-9
        else:
            raise AssertionError(row.rel)
    return ok


# ---------------------------------------------------------------------------
# kink distance for finite-difference sampling


def kink_distance(expr, p) -> float:
    """Distance of every clip argument from its active boundary."""
    if isinstance(expr, (GVar, GConst)):
        return np.inf
    if isinstance(expr, GNot):
        return kink_distance(expr.child, p)
    if isinstance(expr, GAnd):
        s = sum(soft_eval(c, p) for c in expr.children)
        inner = s - (len(expr.children) - 1)
        return min(abs(inner - 0.0), *(kink_distance(c, p) for c in expr.children))
    if isinstance(expr, GOr):
        inner = sum(soft_eval(c, p) for c in expr.children)
        return min(abs(inner - 1.0), *(kink_distance(c, p) for c in expr.children))
    if isinstance(expr, GIf):
        inner = 1.0 - soft_eval(expr.antecedent, p) + soft_eval(expr.consequent, p)
        return min(
            abs(inner - 1.0),
            kink_distance(expr.antecedent, p),
            kink_distance(expr.consequent, p),
        )
    if isinstance(expr, GAtMost):
        inner = 1.0 + expr.k - sum(soft_eval(c, p) for c in expr.children)
        return min(
            abs(inner - 0.0),
            abs(inner - 1.0),
            *(kink_distance(c, p) for c in expr.children),
        )
    raise AssertionError(expr)



# ---------------------------------------------------------------------------
# random grounded expressions


def random_gexpr(rng: np.random.Generator, n_atoms: int, max_depth: int = 3,
                 allow_cardinality: bool = True, const_prob: float = 0.08):
    """Random expression whose atoms index a flat set of n_atoms variables."""
    if allow_cardinality and rng.random() < 0.15:
        width = int(rng.integers(2, max(3, n_atoms) + 1))
        children = tuple(_random_node(rng, n_atoms, max_depth - 1, const_prob) for _ in range(width))
        return GAtMost(int(rng.integers(1, width + 1)), children)
    return _random_node(rng, n_atoms, max_depth, const_prob)


def _random_node(rng, n_atoms, depth, const_prob):
    if depth <= 0 or rng.random() < 0.35:
        if rng.random() < const_prob:
            return GConst(bool(rng.integers(0, 2)))
        return GVar(int(rng.integers(0, n_atoms)))
    kind = rng.choice(["not", "and", "or", "if"])
    if kind == "not":
        return GNot(_random_node(rng, n_atoms, depth - 1, const_prob))
    if kind == "if":
        return GIf(
            _random_node(rng, n_atoms, depth - 1, const_prob),
            _random_node(rng, n_atoms, depth - 1, const_prob),
        )
    width = int(rng.integers(2, 4))
    children = tuple(_random_node(rng, n_atoms, depth - 1, const_prob) for _ in range(width))
    return GAnd(children) if kind == "and" else GOr(children)
