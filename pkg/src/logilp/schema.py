"""Concept graph declaration: concepts plus is_a / has_a / contains edges.

A graph declares the structure of a problem domain. Basic concepts describe
input units, compositional concepts bundle other concepts through named
has_a arguments, and decision concepts are the predicted outputs, each
derived from a parent through an implicit is_a edge.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import (
    DuplicateArgName,
    DuplicateName,
    UnknownConcept,
    UnknownParent,
    ValidationReport,
    WARNING,
)

BASIC = "basic"
COMPOSITIONAL = "compositional"
DECISION = "decision"
KINDS = (BASIC, COMPOSITIONAL, DECISION)

IS_A = "is_a"
HAS_A = "has_a"
CONTAINS = "contains"

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

# Names the DSL grammar claims for itself; a concept with one of these
# names could never round-trip through the printer.
RESERVED_NAMES = frozenset(
    {
        "concept",
        "has_a",
        "contains",
        "within",
        "path",
        "ifL",
        "andL",
        "orL",
        "notL",
        "existsL",
        "atMostL",
        "disjoint",
    }
)


@dataclass(frozen=True)
class Concept:
    name: str
    kind: str = BASIC
    parent: str | None = None


@dataclass(frozen=True)
class Edge:
    kind: str
    src: str
    dst: str
    arg_name: str | None = None


class ConceptGraph:
    """Immutable set of concepts and typed edges with lookup helpers.

    Construct through :class:`GraphBuilder` or the DSL parser; instances
    are safe to share across threads once built.
    """

    def __init__(self, concepts: tuple[Concept, ...], edges: tuple[Edge, ...]):
        self.concepts = tuple(concepts)
        self.edges = tuple(edges)
        self._by_name = {c.name: c for c in self.concepts}
        self._has_a: dict[str, dict[str, str]] = {}
        self._contains: dict[str, list[str]] = {}
        self._contained_in: dict[str, list[str]] = {}
        for e in self.edges:
            if e.kind == HAS_A:
                self._has_a.setdefault(e.src, {})[e.arg_name] = e.dst
            elif e.kind == CONTAINS:
                self._contains.setdefault(e.src, []).append(e.dst)
                self._contained_in.setdefault(e.dst, []).append(e.src)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def concept(self, name: str) -> Concept:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownConcept(f"concept '{name}' is not declared") from None

    def has_a_args(self, name: str) -> dict[str, str]:
        """Named has_a arguments of a concept, as {arg_name: target concept}."""
        return dict(self._has_a.get(name, {}))

    def contains_children(self, name: str) -> list[str]:
        return list(self._contains.get(name, []))

    def contains_parents(self, name: str) -> list[str]:
        return list(self._contained_in.get(name, []))

    def decision_concepts(self) -> list[Concept]:
        return [c for c in self.concepts if c.kind == DECISION]

    def ancestors(self, name: str) -> list[str]:
        """Reflexive is_a chain from a concept up to its root, cycle-safe."""
        self.concept(name)
        chain = [name]
        seen = {name}
        cur = self._by_name[name]
        while cur.parent is not None and cur.parent in self._by_name:
            if cur.parent in seen:
                break
            chain.append(cur.parent)
            seen.add(cur.parent)
            cur = self._by_name[cur.parent]
        return chain

    def is_subtype(self, a: str, b: str) -> bool:
        """True when ``a`` reaches ``b`` through zero or more is_a edges."""
        self.concept(b)
        return b in self.ancestors(a)

    def root(self, name: str) -> str:
        """The basic or compositional concept a decision chain bottoms out at."""
        return self.ancestors(name)[-1]

    def validate(self) -> ValidationReport:
        return validate(self)


class GraphBuilder:
    """Single-threaded accumulator for a ConceptGraph.

    The add_* methods enforce local rules eagerly (unknown names,
    duplicates); global invariants are checked by :func:`validate`.
    """

    def __init__(self):
        self._concepts: dict[str, Concept] = {}
        self._edges: list[Edge] = []

    def add_concept(self, name: str, kind: str | None = None, parent: str | None = None) -> "GraphBuilder":
        if not NAME_RE.match(name) or name in RESERVED_NAMES:
            raise ValueError(f"'{name}' is not a legal concept name")
        if name in self._concepts:
            raise DuplicateName(f"concept '{name}' declared twice")
        if parent is not None and parent not in self._concepts:
            raise UnknownParent(f"parent '{parent}' of '{name}' is not declared")
        if kind is None:
            kind = DECISION if parent is not None else BASIC
        if kind not in KINDS:
            raise ValueError(f"unknown concept kind '{kind}'")
        self._concepts[name] = Concept(name, kind, parent)
        if parent is not None:
            self._edges.append(Edge(IS_A, name, parent))
        return self

    def add_has_a(self, compositional: str, named_args: list[tuple[str, str]]) -> "GraphBuilder":
        if compositional not in self._concepts:
            raise UnknownConcept(f"concept '{compositional}' is not declared")
        if len(named_args) < 2:
            raise DuplicateArgName(
                f"has_a on '{compositional}' needs at least two named arguments"
            )
        seen = set()
        for arg, target in named_args:
            if arg in seen:
                raise DuplicateArgName(f"argument '{arg}' repeated on '{compositional}'")
            seen.add(arg)
            if target not in self._concepts:
                raise UnknownConcept(f"has_a target '{target}' is not declared")
        existing = {e.arg_name for e in self._edges if e.kind == HAS_A and e.src == compositional}
        for arg, target in named_args:
            if arg in existing:
                raise DuplicateArgName(f"argument '{arg}' repeated on '{compositional}'")
            self._edges.append(Edge(HAS_A, compositional, target, arg))
        # declaring arguments is what makes a concept compositional
        cur = self._concepts[compositional]
        if cur.kind == BASIC:
            self._concepts[compositional] = Concept(cur.name, COMPOSITIONAL, cur.parent)
        return self

    def add_contains(self, parent: str, child: str) -> "GraphBuilder":
        for name in (parent, child):
            if name not in self._concepts:
                raise UnknownConcept(f"concept '{name}' is not declared")
        self._edges.append(Edge(CONTAINS, parent, child))
        return self

    def build(self) -> ConceptGraph:
        return ConceptGraph(tuple(self._concepts.values()), tuple(self._edges))


def validate(graph: ConceptGraph) -> ValidationReport:
    """Check every graph invariant and report violations instead of raising.

    An empty error list means the graph is usable by the grounding and
    compilation layers. Degenerate but harmless shapes (contains
    self-loops or cycles) come back as warnings.
    """
    report = ValidationReport()
    names = set()
    for c in graph.concepts:
        if c.name in names:
            report.add("DuplicateName", f"concept '{c.name}' declared twice", where=c.name)
        names.add(c.name)
        if not NAME_RE.match(c.name):
            report.add("BadName", f"'{c.name}' is not a legal identifier", where=c.name)
        if c.kind == DECISION and c.parent is None:
            report.add("MissingParent", f"decision concept '{c.name}' has no parent", where=c.name)
        if c.kind != DECISION and c.parent is not None:
            report.add(
                "UnexpectedParent",
                f"{c.kind} concept '{c.name}' must not declare a parent",
                where=c.name,
            )
        if c.parent is not None and c.parent not in graph:
            report.add("UnknownParent", f"parent '{c.parent}' of '{c.name}' is not declared", where=c.name)

    for e in graph.edges:
        if e.kind not in (IS_A, HAS_A, CONTAINS):
            report.add("BadEdgeKind", f"edge kind '{e.kind}' is not supported", where=e.src)
            continue
        for endpoint in (e.src, e.dst):
            if endpoint not in graph:
                report.add("UnknownConcept", f"edge endpoint '{endpoint}' is not declared", where=e.src)

    # is_a must form a forest rooted at basic/compositional concepts
    for c in graph.concepts:
        if c.parent is None:
            continue
        seen = {c.name}
        cur = c
        while cur.parent is not None:
            if cur.parent in seen:
                report.add("IsACycle", f"is_a cycle through '{c.name}'", where=c.name)
                break
            if cur.parent not in graph:
                break
            seen.add(cur.parent)
            cur = graph.concept(cur.parent)
        else:
            if cur.kind == DECISION:
                report.add(
                    "BadRoot",
                    f"is_a chain of '{c.name}' ends at decision concept '{cur.name}'",
                    where=c.name,
                )

    # has_a arguments: pairwise distinct per source, at least two of them
    per_src: dict[str, list[str]] = {}
    for e in graph.edges:
        if e.kind == HAS_A:
            per_src.setdefault(e.src, []).append(e.arg_name or "")
    for src, args in per_src.items():
        if len(args) != len(set(args)):
            report.add("DuplicateArgName", f"repeated has_a argument on '{src}'", where=src)
        if len(args) < 2:
            report.add("Arity", f"'{src}' declares fewer than two has_a arguments", where=src)
        if src in graph and graph.concept(src).kind != COMPOSITIONAL:
            report.add(
                "NotCompositional",
                f"'{src}' has has_a arguments but is not compositional",
                where=src,
            )
    for c in graph.concepts:
        if c.kind == COMPOSITIONAL and c.name not in per_src:
            report.add("Arity", f"compositional concept '{c.name}' declares no has_a arguments", where=c.name)

    # contains loops are legal for grounding but usually a mistake
    for e in graph.edges:
        if e.kind == CONTAINS and e.src == e.dst:
            report.add(
                "ContainsSelfLoop",
                f"'{e.src}' contains itself",
                severity=WARNING,
                where=e.src,
            )
    _warn_contains_cycles(graph, report)
    return report


def _warn_contains_cycles(graph: ConceptGraph, report: ValidationReport) -> None:
    color: dict[str, int] = {}

    def visit(name: str, trail: tuple[str, ...]) -> None:
        color[name] = 1
        for child in graph.contains_children(name):
            if child == name:
                continue  # self-loop already reported
            if color.get(child) == 1:
                report.add(
                    "ContainsCycle",
                    "contains cycle: " + " -> ".join(trail + (child,)),
                    severity=WARNING,
                    where=child,
                )
            elif color.get(child, 0) == 0 and child in graph:
                visit(child, trail + (child,))
        color[name] = 2

    for c in graph.concepts:
        if color.get(c.name, 0) == 0:
            visit(c.name, (c.name,))


def ancestors(graph: ConceptGraph, name: str) -> list[str]:
    return graph.ancestors(name)


def is_subtype(graph: ConceptGraph, a: str, b: str) -> bool:
    return graph.is_subtype(a, b)


def graph_to_dsl(graph: ConceptGraph) -> str:
    """Serialize a graph back to the declaration section of a .dk file."""
    lines = []
    for c in graph.concepts:
        if c.parent is not None:
            lines.append(f"concept {c.name} : {c.parent};")
        else:
            lines.append(f"concept {c.name};")
    by_src: dict[str, list[Edge]] = {}
    for e in graph.edges:
        if e.kind == HAS_A:
            by_src.setdefault(e.src, []).append(e)
    for src, edges in by_src.items():
        args = ", ".join(f"{e.arg_name}={e.dst}" for e in edges)
        lines.append(f"{src} has_a ({args});")
    for e in graph.edges:
        if e.kind == CONTAINS:
            lines.append(f"{e.src} contains {e.dst};")
    return "\n".join(lines) + "\n"
