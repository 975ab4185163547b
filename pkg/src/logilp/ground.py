"""Instance graphs and constraint grounding.

A DataNodeGraph mirrors the concept graph at the instance level: one
DataNode per data item, contains links between parents and children, and
named has_a links from composites to their members. Grounding a
constraint enumerates every binding of its universally quantified
variables to candidate nodes and produces a propositional expression
over binary decision variables.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from .errors import (
    BadPath,
    DanglingLink,
    MissingArg,
    MissingScore,
    SchemaError,
    UnknownConcept,
)
from .lclang import (
    And,
    ArgStep,
    AtMost,
    Atom,
    Constraint,
    ConstraintSet,
    ContainsStep,
    Disjoint,
    Exists,
    If,
    LcExpr,
    Not,
    Or,
    Path,
    RelArgStep,
)
from .schema import COMPOSITIONAL, DECISION, ConceptGraph

PROB_CLAMP = 1e-7  # keeps log scores finite


@dataclass(frozen=True, eq=False)
class DataNode:
    id: str
    concept: str
    features: np.ndarray
    attrs: dict[str, str] = field(default_factory=dict)
    labels: dict[str, int] = field(default_factory=dict)


class DataNodeGraph:
    """One sample's instance graph, immutable after load."""

    def __init__(
        self,
        nodes: Iterable[DataNode],
        contains: Iterable[tuple[str, str]] = (),
        has_a: Iterable[tuple[str, str, str]] = (),
    ):
        self.nodes: dict[str, DataNode] = {}
        for n in nodes:
            if n.id in self.nodes:
                raise SchemaError(f"node id '{n.id}' repeated")
            self.nodes[n.id] = n
        self.contains = [tuple(link) for link in contains]
        self.has_a = [tuple(link) for link in has_a]
        self._children: dict[str, list[str]] = {}
        self._parents: dict[str, list[str]] = {}
        for parent, child in self.contains:
            self._children.setdefault(parent, []).append(child)
            self._parents.setdefault(child, []).append(parent)
        self._members: dict[str, dict[str, str]] = {}
        self._memberships: dict[str, list[tuple[str, str]]] = {}
        for comp, arg, member in self.has_a:
            slots = self._members.setdefault(comp, {})
            if arg in slots:
                raise SchemaError(f"composite '{comp}' fills argument '{arg}' twice")
            slots[arg] = member
            self._memberships.setdefault(member, []).append((comp, arg))
        self._by_concept: dict[str, list[str]] = {}
        for n in self.nodes.values():
            self._by_concept.setdefault(n.concept, []).append(n.id)
        for ids in self._by_concept.values():
            ids.sort()

    def node(self, node_id: str) -> DataNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise DanglingLink(f"no node with id '{node_id}'") from None

    def children_of(self, node_id: str) -> list[str]:
        return self._children.get(node_id, [])

    def parents_of(self, node_id: str) -> list[str]:
        return self._parents.get(node_id, [])

    def members_of(self, node_id: str) -> dict[str, str]:
        return self._members.get(node_id, {})

    def memberships_of(self, node_id: str) -> list[tuple[str, str]]:
        return self._memberships.get(node_id, [])

    def ids_of_concept(self, concept: str) -> list[str]:
        return list(self._by_concept.get(concept, []))


def load_data(json_text: str | dict, graph: ConceptGraph) -> DataNodeGraph:
    """Build and validate a DataNodeGraph from one sample's JSON object."""
    raw = json.loads(json_text) if isinstance(json_text, str) else json_text
    if not isinstance(raw, dict) or "nodes" not in raw:
        raise SchemaError("sample must be an object with a 'nodes' array")
    nodes = []
    for entry in raw["nodes"]:
        if not isinstance(entry, dict) or "id" not in entry or "concept" not in entry:
            raise SchemaError("each node needs 'id' and 'concept'")
        concept_name = entry["concept"]
        concept = graph.concept(concept_name)
        if concept.kind == DECISION:
            raise SchemaError(
                f"node '{entry['id']}' uses decision concept '{concept_name}'; "
                "instances carry basic or compositional concepts only"
            )
        features = np.asarray(entry.get("features", []), dtype=float)
        if features.ndim > 1:
            raise SchemaError(f"features of '{entry['id']}' must be a flat vector")
        labels = {}
        for label_concept, value in (entry.get("labels") or {}).items():
            if label_concept not in graph:
                raise UnknownConcept(f"label concept '{label_concept}' is not declared")
            if graph.concept(label_concept).kind != DECISION:
                raise SchemaError(f"label '{label_concept}' is not a decision concept")
            if graph.root(label_concept) != concept_name:
                raise SchemaError(
                    f"label '{label_concept}' does not apply to '{concept_name}' nodes"
                )
            if value not in (0, 1):
                raise SchemaError(f"label '{label_concept}' must be 0 or 1")
            labels[label_concept] = int(value)
        nodes.append(
            DataNode(
                id=str(entry["id"]),
                concept=concept_name,
                features=features,
                attrs=dict(entry.get("attrs") or {}),
                labels=labels,
            )
        )
    dng = DataNodeGraph(nodes, raw.get("contains", []), raw.get("has_a", []))
    _check_links(dng, graph)
    return dng


def _check_links(dng: DataNodeGraph, graph: ConceptGraph) -> None:
    by_id = dng.nodes
    for parent, child in dng.contains:
        for endpoint in (parent, child):
            if endpoint not in by_id:
                raise DanglingLink(f"contains link references missing node '{endpoint}'")
    for comp, arg, member in dng.has_a:
        for endpoint in (comp, member):
            if endpoint not in by_id:
                raise DanglingLink(f"has_a link references missing node '{endpoint}'")
        declared = graph.has_a_args(by_id[comp].concept)
        if arg not in declared:
            raise SchemaError(
                f"'{by_id[comp].concept}' declares no argument '{arg}' (node '{comp}')"
            )
    # every composite instance must fill each declared argument exactly once
    for node in by_id.values():
        if graph.concept(node.concept).kind != COMPOSITIONAL:
            continue
        declared = graph.has_a_args(node.concept)
        filled = dng.members_of(node.id)
        for arg in declared:
            if arg not in filled:
                raise MissingArg(f"composite '{node.id}' is missing argument '{arg}'")
    # feature dimensions must agree per concept
    dims: dict[str, int] = {}
    for node in sorted(by_id.values(), key=lambda n: n.id):
        d = int(node.features.shape[0])
        if node.concept in dims and dims[node.concept] != d:
            raise SchemaError(
                f"feature dimension of '{node.concept}' nodes is inconsistent "
                f"({dims[node.concept]} vs {d} at '{node.id}')"
            )
        dims.setdefault(node.concept, d)


def candidates(dng: DataNodeGraph, graph: ConceptGraph, concept: str) -> list[DataNode]:
    """Instance nodes a concept ranges over, in id order.

    Decision concepts borrow the candidates of the basic or compositional
    concept their is_a chain bottoms out at.
    """
    root = graph.root(concept)
    return [dng.node(i) for i in dng.ids_of_concept(root)]


def resolve_path(dng: DataNodeGraph, graph: ConceptGraph, node: DataNode, path_steps) -> list[DataNode]:
    """Follow path steps from one node; result is id-sorted and deduplicated."""
    steps = path_steps.steps if isinstance(path_steps, Path) else tuple(path_steps)
    frontier = [node]
    for step in steps:
        nxt: dict[str, DataNode] = {}
        for cur in frontier:
            for target in _step_targets(dng, graph, cur, step):
                nxt[target.id] = target
        frontier = [nxt[i] for i in sorted(nxt)]
        if not frontier:
            return []
    return frontier


def _step_targets(dng: DataNodeGraph, graph: ConceptGraph, cur: DataNode, step) -> list[DataNode]:
    if isinstance(step, ArgStep):
        declared = graph.has_a_args(cur.concept)
        if step.arg not in declared:
            raise BadPath(f"'{cur.concept}' has no has_a argument '{step.arg}'")
        member = dng.members_of(cur.id).get(step.arg)
        return [dng.node(member)] if member is not None else []
    if isinstance(step, RelArgStep):
        declared = graph.has_a_args(step.rel)
        if step.arg not in declared:
            raise BadPath(f"'{step.rel}' has no has_a argument '{step.arg}'")
        out = []
        for comp_id, via_arg in dng.memberships_of(cur.id):
            if dng.node(comp_id).concept != step.rel or via_arg == step.arg:
                continue
            member = dng.members_of(comp_id).get(step.arg)
            if member is not None:
                out.append(dng.node(member))
        return out
    if isinstance(step, ContainsStep):
        target_root = graph.root(step.concept)
        ids = dng.parents_of(cur.id) if step.reverse else dng.children_of(cur.id)
        return [dng.node(i) for i in ids if dng.node(i).concept == target_root]
    raise BadPath(f"unknown path step {step!r}")


# ---------------------------------------------------------------------------
# Decision variables and scores


class VarIndex:
    """Dense index over (node, decision concept) pairs for one sample.

    Order is sorted by (node id, concept name), which fixes variable
    indices, LP variable order, and therefore every downstream artifact.
    """

    def __init__(self, graph: ConceptGraph, dng: DataNodeGraph):
        self.graph = graph
        self.dng = dng
        pairs = []
        for concept in graph.decision_concepts():
            for node in candidates(dng, graph, concept.name):
                pairs.append((node.id, concept.name))
        pairs.sort()
        self.pairs: list[tuple[str, str]] = pairs
        self.index: dict[tuple[str, str], int] = {p: i for i, p in enumerate(pairs)}
        self.names: list[str] = [f"var_{n}_{c}" for n, c in pairs]

    def __len__(self) -> int:
        return len(self.pairs)

    def of(self, node_id: str, concept: str) -> int:
        try:
            return self.index[(node_id, concept)]
        except KeyError:
            raise UnknownConcept(
                f"no decision variable for ('{node_id}', '{concept}')"
            ) from None


class ScoreVector:
    """Positive-class probability per decision variable, clamped open (0,1)."""

    def __init__(self, index: VarIndex, probs: np.ndarray):
        if probs.shape != (len(index),):
            raise MissingScore(
                f"expected {len(index)} scores, got {probs.shape[0]}"
            )
        self.index = index
        self.probs = np.clip(np.asarray(probs, dtype=float), PROB_CLAMP, 1.0 - PROB_CLAMP)

    def __getitem__(self, i: int) -> float:
        return float(self.probs[i])

    def log_odds(self) -> np.ndarray:
        return np.log(self.probs) - np.log1p(-self.probs)

    @classmethod
    def uniform(cls, index: VarIndex) -> "ScoreVector":
        return cls(index, np.full(len(index), 0.5))

    @classmethod
    def from_mapping(cls, index: VarIndex, mapping: dict) -> "ScoreVector":
        probs = np.empty(len(index))
        for i, (node_id, concept) in enumerate(index.pairs):
            try:
                probs[i] = float(mapping[node_id][concept])
            except (KeyError, TypeError):
                raise MissingScore(f"no score for node '{node_id}', concept '{concept}'") from None
            if not math.isfinite(probs[i]) or not (0.0 <= probs[i] <= 1.0):
                raise MissingScore(
                    f"score for ('{node_id}', '{concept}') must be a probability"
                )
        return cls(index, probs)

    def to_mapping(self) -> dict:
        out: dict[str, dict[str, float]] = {}
        for (node_id, concept), p in zip(self.index.pairs, self.probs):
            out.setdefault(node_id, {})[concept] = float(p)
        return out


# ---------------------------------------------------------------------------
# Grounded expressions


@dataclass(frozen=True)
class GVar:
    index: int


@dataclass(frozen=True)
class GConst:
    value: bool


@dataclass(frozen=True)
class GNot:
    child: "GExpr"


@dataclass(frozen=True)
class GAnd:
    children: tuple["GExpr", ...]


@dataclass(frozen=True)
class GOr:
    children: tuple["GExpr", ...]


@dataclass(frozen=True)
class GIf:
    antecedent: "GExpr"
    consequent: "GExpr"


@dataclass(frozen=True)
class GAtMost:
    k: int
    children: tuple["GExpr", ...]


GExpr = Union[GVar, GConst, GNot, GAnd, GOr, GIf, GAtMost]


@dataclass(frozen=True)
class GroundedConstraint:
    cid: str
    binding: tuple[tuple[str, str], ...]  # (var name, node id), deterministic order
    expr: GExpr

    def binding_dict(self) -> dict[str, str]:
        return dict(self.binding)


def g_and(children: list[GExpr]) -> GExpr:
    flat: list[GExpr] = []
    for c in children:
        if isinstance(c, GConst):
            if not c.value:
                return GConst(False)
            continue
        if isinstance(c, GAnd):
            flat.extend(c.children)
        else:
            flat.append(c)
    if not flat:
        return GConst(True)
    if len(flat) == 1:
        return flat[0]
    return GAnd(tuple(flat))


def g_or(children: list[GExpr]) -> GExpr:
    flat: list[GExpr] = []
    for c in children:
        if isinstance(c, GConst):
            if c.value:
                return GConst(True)
            continue
        if isinstance(c, GOr):
            flat.extend(c.children)
        else:
            flat.append(c)
    if not flat:
        return GConst(False)
    if len(flat) == 1:
        return flat[0]
    return GOr(tuple(flat))


def g_not(child: GExpr) -> GExpr:
    if isinstance(child, GConst):
        return GConst(not child.value)
    return GNot(child)


def g_if(a: GExpr, b: GExpr) -> GExpr:
    if isinstance(a, GConst):
        return b if a.value else GConst(True)
    if isinstance(b, GConst) and b.value:
        return GConst(True)
    return GIf(a, b)


def g_atmost(k: int, children: list[GExpr]) -> GExpr:
    kept: list[GExpr] = []
    for c in children:
        if isinstance(c, GConst):
            if c.value:
                k -= 1
            continue
        kept.append(c)
    if k < 0:
        return GConst(False)
    if not kept or k >= len(kept):
        return GConst(True)
    return GAtMost(k, tuple(kept))


def boolean_eval(expr: GExpr, values) -> bool:
    """Truth of a grounded expression under 0/1 decision values."""
    if isinstance(expr, GVar):
        return bool(values[expr.index])
    if isinstance(expr, GConst):
        return expr.value
    if isinstance(expr, GNot):
        return not boolean_eval(expr.child, values)
    if isinstance(expr, GAnd):
        return all(boolean_eval(c, values) for c in expr.children)
    if isinstance(expr, GOr):
        return any(boolean_eval(c, values) for c in expr.children)
    if isinstance(expr, GIf):
        return (not boolean_eval(expr.antecedent, values)) or boolean_eval(expr.consequent, values)
    if isinstance(expr, GAtMost):
        return sum(boolean_eval(c, values) for c in expr.children) <= expr.k
    raise TypeError(f"not a grounded expression: {expr!r}")


def atoms_of(expr: GExpr) -> set[int]:
    if isinstance(expr, GVar):
        return {expr.index}
    if isinstance(expr, GConst):
        return set()
    if isinstance(expr, (GNot,)):
        return atoms_of(expr.child)
    if isinstance(expr, (GAnd, GOr, GAtMost)):
        out: set[int] = set()
        for c in expr.children:
            out |= atoms_of(c)
        return out
    if isinstance(expr, GIf):
        return atoms_of(expr.antecedent) | atoms_of(expr.consequent)
    raise TypeError(f"not a grounded expression: {expr!r}")


# ---------------------------------------------------------------------------
# Grounding


def _universal_vars(expr: LcExpr) -> list[tuple[str, str]]:
    """Variables quantified over whole candidate sets, in appearance order.

    A variable is universal when its binding atom sits outside every
    existsL and carries no path (path-bound variables derive from the
    binding of their root instead).
    """
    out: list[tuple[str, str]] = []
    seen: set[str] = set()

    def visit(node: LcExpr) -> None:
        if isinstance(node, Atom):
            if node.var is not None and node.path is None and node.var not in seen:
                seen.add(node.var)
                out.append((node.var, node.concept))
        elif isinstance(node, Not):
            visit(node.child)
        elif isinstance(node, (And, Or)):
            for c in node.children:
                visit(c)
        elif isinstance(node, If):
            visit(node.antecedent)
            visit(node.consequent)
        elif isinstance(node, AtMost):
            for c in node.children:
                visit(c)
        elif isinstance(node, Exists):
            pass  # existential scope
        elif isinstance(node, Disjoint):
            pass

    visit(expr)
    return out


def ground(
    graph: ConceptGraph,
    constraints: ConstraintSet | Iterable[Constraint],
    dng: DataNodeGraph,
    index: VarIndex,
) -> list[GroundedConstraint]:
    """Instantiate every constraint over the sample's candidate sets.

    One GroundedConstraint per combination of universal-variable
    candidates; existsL expands to an Or over the nodes its child's path
    reaches. Atoms of non-decision concepts contribute no variable: bound
    to a candidate they are simply true, under existsL they assert the
    reachable set is non-empty.
    """
    out: list[GroundedConstraint] = []
    for constraint in constraints:
        out.extend(_ground_one(graph, constraint, dng, index))
    return out


def _ground_one(
    graph: ConceptGraph, constraint: Constraint, dng: DataNodeGraph, index: VarIndex
) -> list[GroundedConstraint]:
    expr = constraint.expr
    if isinstance(expr, Disjoint):
        shared_root = graph.root(expr.concepts[0])
        out = []
        for node in candidates(dng, graph, shared_root):
            atoms = [GVar(index.of(node.id, c)) for c in expr.concepts]
            out.append(
                GroundedConstraint(
                    constraint.cid,
                    ((shared_root, node.id),),
                    g_atmost(1, atoms),
                )
            )
        return out

    unis = _universal_vars(expr)
    domains = [candidates(dng, graph, concept) for _, concept in unis]
    out = []
    for combo in itertools.product(*domains):
        env: dict[str, list[DataNode]] = {
            var: [node] for (var, _), node in zip(unis, combo)
        }
        gexpr = _ground_expr(expr, graph, dng, index, env, under_exists=False)
        binding = tuple((var, node.id) for (var, _), node in zip(unis, combo))
        out.append(GroundedConstraint(constraint.cid, binding, gexpr))
    return out


def _resolve_atom_nodes(
    atom: Atom,
    graph: ConceptGraph,
    dng: DataNodeGraph,
    env: dict[str, list[DataNode]],
) -> list[DataNode]:
    if atom.path is None:
        if atom.var is not None and atom.var in env:
            return env[atom.var]
        return candidates(dng, graph, atom.concept)
    if atom.path.root not in env:
        raise BadPath(f"path root '{atom.path.root}' is not bound")
    found: dict[str, DataNode] = {}
    for start in env[atom.path.root]:
        for node in resolve_path(dng, graph, start, atom.path):
            found[node.id] = node
    return [found[i] for i in sorted(found)]


def _atom_to_vars(atom: Atom, graph: ConceptGraph, index: VarIndex, nodes: list[DataNode]) -> list[GExpr]:
    if graph.concept(atom.concept).kind != DECISION:
        # structural atom: truth is node existence, no decision variable
        return [GConst(True) for _ in nodes]
    return [GVar(index.of(node.id, atom.concept)) for node in nodes]


def _ground_expr(
    node: LcExpr,
    graph: ConceptGraph,
    dng: DataNodeGraph,
    index: VarIndex,
    env: dict[str, list[DataNode]],
    under_exists: bool,
) -> GExpr:
    if isinstance(node, Atom):
        resolved = _resolve_atom_nodes(node, graph, dng, env)
        if node.var is not None and node.path is not None:
            env[node.var] = resolved
        literals = _atom_to_vars(node, graph, index, resolved)
        if under_exists:
            return g_or(literals)
        if not literals:
            return GConst(False)
        return g_and(literals)
    if isinstance(node, Not):
        return g_not(_ground_expr(node.child, graph, dng, index, env, under_exists))
    if isinstance(node, And):
        return g_and([_ground_expr(c, graph, dng, index, env, False) for c in node.children])
    if isinstance(node, Or):
        return g_or([_ground_expr(c, graph, dng, index, env, False) for c in node.children])
    if isinstance(node, If):
        a = _ground_expr(node.antecedent, graph, dng, index, env, False)
        b = _ground_expr(node.consequent, graph, dng, index, env, False)
        return g_if(a, b)
    if isinstance(node, Exists):
        child = node.child
        if isinstance(child, Atom):
            resolved = _resolve_atom_nodes(child, graph, dng, env)
            if child.var is not None:
                env[child.var] = resolved
            return g_or(_atom_to_vars(child, graph, index, resolved))
        if isinstance(child, Not) and isinstance(child.child, Atom):
            atom = child.child
            resolved = _resolve_atom_nodes(atom, graph, dng, env)
            return g_or([g_not(v) for v in _atom_to_vars(atom, graph, index, resolved)])
        raise BadPath("existsL takes an atom or notL(atom)")
    if isinstance(node, AtMost):
        return g_atmost(
            node.k, [_ground_expr(c, graph, dng, index, env, False) for c in node.children]
        )
    if isinstance(node, Disjoint):
        raise BadPath("disjoint is only supported at top level")
    raise TypeError(f"not an expression: {node!r}")
