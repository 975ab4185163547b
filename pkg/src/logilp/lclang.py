"""Logical constraint language: AST, .dk text parser, and printer.

A .dk file declares the concept graph first, then any number of
constraint expressions written as nested calls:

    concept phrase;
    concept pair;
    pair has_a (arg1=phrase, arg2=phrase);
    concept people : phrase;
    concept organization : phrase;
    concept work_for : pair;

    ifL(work_for('x'), andL(people(path=('x', arg1)), organization(path=('x', arg2))))

Connectives: ifL, andL, orL, notL, existsL, atMostL(k, ...), disjoint.
Atoms name a concept and may bind a variable ('x') and/or carry a
path=(...) that navigates the instance graph from a bound variable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

from .errors import (
    BadPath,
    DslSyntaxError,
    SchemaError,
    UnboundVariable,
    UnknownConcept,
    ValidationReport,
)
from .schema import DECISION, ConceptGraph, GraphBuilder, graph_to_dsl

# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class ArgStep:
    """Forward has_a hop: composite node to the member filling ``arg``."""

    arg: str

    def __str__(self) -> str:
        return self.arg


@dataclass(frozen=True)
class RelArgStep:
    """Composite hop: from a member node, through composites of concept
    ``rel`` in which it fills some other argument, to their ``arg`` member."""

    rel: str
    arg: str

    def __str__(self) -> str:
        return f"{self.rel}.{self.arg}"


@dataclass(frozen=True)
class ContainsStep:
    """Containment hop; ``reverse`` walks child-to-parent."""

    concept: str
    reverse: bool = False

    def __str__(self) -> str:
        return f"{'within' if self.reverse else 'contains'}({self.concept})"


Step = Union[ArgStep, RelArgStep, ContainsStep]


@dataclass(frozen=True)
class Path:
    root: str
    steps: tuple[Step, ...]

    def __str__(self) -> str:
        parts = ", ".join(str(s) for s in self.steps)
        return f"path=('{self.root}', {parts})"


@dataclass(frozen=True)
class Atom:
    concept: str
    var: str | None = None
    path: Path | None = None


@dataclass(frozen=True)
class Not:
    child: "LcExpr"


@dataclass(frozen=True)
class And:
    children: tuple["LcExpr", ...]


@dataclass(frozen=True)
class Or:
    children: tuple["LcExpr", ...]


@dataclass(frozen=True)
class If:
    antecedent: "LcExpr"
    consequent: "LcExpr"


@dataclass(frozen=True)
class Exists:
    child: "LcExpr"


@dataclass(frozen=True)
class AtMost:
    k: int
    children: tuple["LcExpr", ...]


@dataclass(frozen=True)
class Disjoint:
    concepts: tuple[str, ...]


LcExpr = Union[Atom, Not, And, Or, If, Exists, AtMost, Disjoint]

CONNECTIVES = {"ifL", "andL", "orL", "notL", "existsL", "atMostL", "disjoint"}


@dataclass(frozen=True)
class Constraint:
    cid: str
    expr: LcExpr
    line: int = 0


@dataclass
class ConstraintSet:
    constraints: list[Constraint] = field(default_factory=list)

    def __iter__(self):
        return iter(self.constraints)

    def __len__(self) -> int:
        return len(self.constraints)

    def ids(self) -> list[str]:
        return [c.cid for c in self.constraints]


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<int>\d+)
  | (?P<string>'[^'\n]*'|"[^"\n]*")
  | (?P<punct>[(),=:;.])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Tok]:
    toks = []
    line, col = 1, 1
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise DslSyntaxError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, source: str):
        self.toks = _tokenize(source)
        self.i = 0

    def peek(self, ahead: int = 0) -> _Tok:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            raise DslSyntaxError(f"expected {text!r}, found {t.text!r}", t.line, t.col)
        return t

    def expect_name(self) -> _Tok:
        t = self.next()
        if t.kind != "name":
            raise DslSyntaxError(f"expected a name, found {t.text!r}", t.line, t.col)
        return t

    def fail(self, msg: str) -> None:
        t = self.peek()
        raise DslSyntaxError(msg, t.line, t.col)

    # -- statements ---------------------------------------------------------

    def parse_file(self) -> tuple[ConceptGraph, ConstraintSet]:
        builder = GraphBuilder()
        constraints = ConstraintSet()
        in_constraints = False
        while self.peek().kind != "eof":
            t = self.peek()
            if t.text == "concept" or (t.kind == "name" and self.peek(1).text in ("has_a", "contains")):
                if in_constraints:
                    self.fail("graph declarations must precede constraints")
                self.graph_stmt(builder)
            elif t.kind == "name":
                in_constraints = True
                start = self.peek()
                expr = self.call()
                cid = f"c{len(constraints)}"
                constraints.constraints.append(Constraint(cid, expr, start.line))
            else:
                self.fail(f"unexpected {t.text!r}")
        return builder.build(), constraints

    def graph_stmt(self, builder: GraphBuilder) -> None:
        t = self.peek()
        try:
            if t.text == "concept":
                self.next()
                name = self.expect_name().text
                parent = None
                if self.peek().text == ":":
                    self.next()
                    parent = self.expect_name().text
                self.expect(";")
                builder.add_concept(name, parent=parent)
            else:
                src = self.expect_name().text
                kw = self.next()
                if kw.text == "has_a":
                    self.expect("(")
                    args = []
                    while True:
                        arg = self.expect_name().text
                        self.expect("=")
                        target = self.expect_name().text
                        args.append((arg, target))
                        if self.peek().text == ",":
                            self.next()
                            continue
                        break
                    self.expect(")")
                    self.expect(";")
                    builder.add_has_a(src, args)
                elif kw.text == "contains":
                    child = self.expect_name().text
                    self.expect(";")
                    builder.add_contains(src, child)
                else:
                    raise DslSyntaxError(
                        f"expected 'has_a' or 'contains', found {kw.text!r}", kw.line, kw.col
                    )
        except (ValueError,) as exc:
            raise DslSyntaxError(str(exc), t.line, t.col) from exc

    # -- constraint expressions ---------------------------------------------

    def call(self) -> LcExpr:
        t = self.expect_name()
        name = t.text
        if name == "ifL":
            self.expect("(")
            a = self.expr_arg()
            self.expect(",")
            b = self.expr_arg()
            self.expect(")")
            return If(a, b)
        if name in ("andL", "orL"):
            children = self.expr_args(minimum=2, where=name, tok=t)
            return And(tuple(children)) if name == "andL" else Or(tuple(children))
        if name == "notL":
            self.expect("(")
            child = self.expr_arg()
            self.expect(")")
            return Not(child)
        if name == "existsL":
            self.expect("(")
            child = self.expr_arg()
            self.expect(")")
            return Exists(child)
        if name == "atMostL":
            self.expect("(")
            k_tok = self.next()
            if k_tok.kind != "int" or int(k_tok.text) < 1:
                raise DslSyntaxError("atMostL needs a positive integer bound first", k_tok.line, k_tok.col)
            children = []
            while self.peek().text == ",":
                self.next()
                children.append(self.expr_arg())
            self.expect(")")
            if not children:
                raise DslSyntaxError("atMostL needs at least one argument", t.line, t.col)
            return AtMost(int(k_tok.text), tuple(children))
        if name == "disjoint":
            self.expect("(")
            names = [self.expect_name().text]
            while self.peek().text == ",":
                self.next()
                names.append(self.expect_name().text)
            self.expect(")")
            if len(names) < 2:
                raise DslSyntaxError("disjoint needs at least two concepts", t.line, t.col)
            return Disjoint(tuple(names))
        return self.atom(name, t)

    def expr_args(self, minimum: int, where: str, tok: _Tok) -> list[LcExpr]:
        self.expect("(")
        children = [self.expr_arg()]
        while self.peek().text == ",":
            self.next()
            children.append(self.expr_arg())
        self.expect(")")
        if len(children) < minimum:
            raise DslSyntaxError(f"{where} needs at least {minimum} arguments", tok.line, tok.col)
        return children

    def expr_arg(self) -> LcExpr:
        t = self.peek()
        if t.kind != "name":
            self.fail(f"expected an expression, found {t.text!r}")
        if t.text in CONNECTIVES or self.peek(1).text == "(":
            return self.call()
        # bare concept atom (legal under existsL)
        self.next()
        return Atom(t.text)

    def atom(self, concept: str, tok: _Tok) -> Atom:
        self.expect("(")
        var = None
        path = None
        if self.peek().kind == "string":
            var = self.next().text[1:-1]
            if self.peek().text == ",":
                self.next()
        if self.peek().text == "path":
            self.next()
            self.expect("=")
            path = self.path()
        elif self.peek().text != ")":
            t = self.peek()
            raise DslSyntaxError(f"unexpected {t.text!r} in atom arguments", t.line, t.col)
        self.expect(")")
        if var is not None and not re.match(r"[A-Za-z_][A-Za-z0-9_]*\Z", var):
            raise DslSyntaxError(f"bad variable name {var!r}", tok.line, tok.col)
        return Atom(concept, var, path)

    def path(self) -> Path:
        self.expect("(")
        root_tok = self.next()
        if root_tok.kind != "string":
            raise DslSyntaxError("path must start with a quoted variable", root_tok.line, root_tok.col)
        steps: list[Step] = []
        while self.peek().text == ",":
            self.next()
            steps.append(self.step())
        self.expect(")")
        if not steps:
            t = self.peek()
            raise DslSyntaxError("path needs at least one step", t.line, t.col)
        return Path(root_tok.text[1:-1], tuple(steps))

    def step(self) -> Step:
        t = self.expect_name()
        if t.text in ("contains", "within"):
            self.expect("(")
            concept = self.expect_name().text
            self.expect(")")
            return ContainsStep(concept, reverse=(t.text == "within"))
        if self.peek().text == ".":
            self.next()
            arg = self.expect_name().text
            return RelArgStep(t.text, arg)
        return ArgStep(t.text)


def parse(source_text: str) -> tuple[ConceptGraph, ConstraintSet]:
    """Parse a .dk document into a validated graph and constraint set.

    Raises DslSyntaxError for malformed text, and the first semantic
    problem (UnknownConcept / UnboundVariable / BadPath) found by the
    wellformedness pass, annotated with the constraint's line.
    """
    graph, constraints = _Parser(source_text).parse_file()
    graph_report = graph.validate()
    if not graph_report.ok:
        raise SchemaError(str(graph_report.errors[0]))
    for c in constraints:
        report = check_wellformed(c.expr, graph)
        if not report.ok:
            first = report.errors[0]
            exc_type = {
                "UnknownConcept": UnknownConcept,
                "UnboundVariable": UnboundVariable,
                "BadPath": BadPath,
            }.get(first.code, BadPath)
            raise exc_type(f"{first.message} (constraint {c.cid}, line {c.line})")
    return graph, constraints


# ---------------------------------------------------------------------------
# Wellformedness


def check_wellformed(expr: LcExpr, graph: ConceptGraph) -> ValidationReport:
    """Validate one expression against a graph, report-style.

    Checks variable scoping (pre-order: a variable must be bound before
    any path uses it), path step typing against the schema, connective
    arities, the sibling rule for disjoint, and the structural limits of
    this dialect (existsL over an atom or notL(atom) only; atMostL and
    disjoint at top level only).
    """
    report = ValidationReport()
    env: dict[str, str] = {}  # var -> concept whose candidates it ranges over

    def concept_root(name: str) -> str | None:
        if name not in graph:
            report.add("UnknownConcept", f"concept '{name}' is not declared")
            return None
        return graph.root(name)

    def check_path(path: Path) -> str | None:
        """Return the instance concept the path lands on, or None."""
        if path.root not in env:
            report.add("UnboundVariable", f"path root '{path.root}' is not bound")
            return None
        cur = graph.root(env[path.root])
        for step in path.steps:
            if isinstance(step, ArgStep):
                args = graph.has_a_args(cur)
                if step.arg not in args:
                    report.add(
                        "BadPath",
                        f"'{cur}' has no has_a argument '{step.arg}'",
                    )
                    return None
                cur = args[step.arg]
            elif isinstance(step, RelArgStep):
                if step.rel not in graph:
                    report.add("UnknownConcept", f"concept '{step.rel}' is not declared")
                    return None
                args = graph.has_a_args(step.rel)
                if step.arg not in args:
                    report.add("BadPath", f"'{step.rel}' has no has_a argument '{step.arg}'")
                    return None
                compatible = any(
                    name != step.arg and (graph.root(target) == cur or target == cur)
                    for name, target in args.items()
                )
                if not compatible:
                    report.add(
                        "BadPath",
                        f"'{cur}' cannot reach '{step.rel}.{step.arg}': no other argument of "
                        f"'{step.rel}' accepts '{cur}'",
                    )
                    return None
                cur = args[step.arg]
            else:
                if step.concept not in graph:
                    report.add("UnknownConcept", f"concept '{step.concept}' is not declared")
                    return None
                target = graph.root(step.concept)
                if step.reverse:
                    ok = target in graph.contains_parents(cur)
                else:
                    ok = target in graph.contains_children(cur)
                if not ok:
                    direction = "within" if step.reverse else "contains"
                    report.add(
                        "BadPath",
                        f"no {direction} edge between '{cur}' and '{target}'",
                    )
                    return None
                cur = target
            cur = graph.root(cur)
        return cur

    def visit_atom(atom: Atom, under_exists: bool) -> None:
        root = concept_root(atom.concept)
        if root is None:
            return
        if atom.path is None and atom.var is None and not under_exists:
            report.add(
                "UnboundAtom",
                f"atom '{atom.concept}' needs a variable or a path outside existsL",
            )
        if atom.var is not None and atom.path is None:
            if atom.var in env:
                # later mention of a bound variable references the same node,
                # e.g. hierarchy rules like ifL(truck('x'), vehicle('x'))
                bound_root = graph.root(env[atom.var]) if env[atom.var] in graph else None
                if bound_root is not None and bound_root != root:
                    report.add(
                        "BadPath",
                        f"variable '{atom.var}' ranges over '{bound_root}' "
                        f"but '{atom.concept}' expects '{root}'",
                    )
            else:
                env[atom.var] = atom.concept
        landing = None
        if atom.path is not None:
            landing = check_path(atom.path)
            if landing is not None and landing != root:
                report.add(
                    "BadPath",
                    f"path lands on '{landing}' but atom '{atom.concept}' expects '{root}'",
                )
            if atom.var is not None:
                if atom.var in env:
                    report.add("DuplicateBinding", f"variable '{atom.var}' bound more than once")
                elif landing is not None:
                    env[atom.var] = landing

    def visit(node: LcExpr, top: bool, under_exists: bool) -> None:
        if isinstance(node, Atom):
            visit_atom(node, under_exists)
        elif isinstance(node, Not):
            visit(node.child, False, under_exists)
        elif isinstance(node, (And, Or)):
            kind = "andL" if isinstance(node, And) else "orL"
            if len(node.children) < 2:
                report.add("Arity", f"{kind} needs at least two children")
            for child in node.children:
                visit(child, False, under_exists)
        elif isinstance(node, If):
            visit(node.antecedent, False, under_exists)
            visit(node.consequent, False, under_exists)
        elif isinstance(node, Exists):
            if under_exists:
                report.add("NestedExists", "existsL may not nest inside existsL")
            child = node.child
            if not (isinstance(child, Atom) or (isinstance(child, Not) and isinstance(child.child, Atom))):
                report.add(
                    "ExistsForm",
                    "existsL takes a single atom or notL(atom)",
                )
            visit(child, False, True)
        elif isinstance(node, AtMost):
            if not top:
                report.add("NestedCardinality", "atMostL is only supported at top level")
            if node.k < 1:
                report.add("Arity", "atMostL bound must be a positive integer")
            for child in node.children:
                visit(child, False, under_exists)
        elif isinstance(node, Disjoint):
            if not top:
                report.add("NestedCardinality", "disjoint is only supported at top level")
            if len(node.concepts) < 2:
                report.add("Arity", "disjoint needs at least two concepts")
            decision_ok = True
            for name in node.concepts:
                if name not in graph:
                    report.add("UnknownConcept", f"concept '{name}' is not declared")
                    decision_ok = False
                    continue
                if graph.concept(name).kind != DECISION:
                    report.add("NotDecision", f"disjoint member '{name}' is not a decision concept")
                    decision_ok = False
            if decision_ok:
                ancestor_sets = [set(graph.ancestors(n)) - {n} for n in node.concepts]
                shared = set.intersection(*ancestor_sets) if ancestor_sets else set()
                if not shared:
                    report.add(
                        "DisjointSiblings",
                        "disjoint concepts must share an is_a ancestor",
                    )
        else:  # pragma: no cover
            report.add("BadNode", f"unknown node type {type(node).__name__}")

    visit(expr, True, False)
    return report


# ---------------------------------------------------------------------------
# Printer


def pretty(expr: LcExpr) -> str:
    """Canonical text form; parse(pretty(e)) reproduces e structurally."""
    if isinstance(expr, Atom):
        inner = []
        if expr.var is not None:
            inner.append(f"'{expr.var}'")
        if expr.path is not None:
            inner.append(str(expr.path))
        if not inner:
            return expr.concept
        return f"{expr.concept}({', '.join(inner)})"
    if isinstance(expr, Not):
        return f"notL({pretty(expr.child)})"
    if isinstance(expr, And):
        return f"andL({', '.join(pretty(c) for c in expr.children)})"
    if isinstance(expr, Or):
        return f"orL({', '.join(pretty(c) for c in expr.children)})"
    if isinstance(expr, If):
        return f"ifL({pretty(expr.antecedent)}, {pretty(expr.consequent)})"
    if isinstance(expr, Exists):
        return f"existsL({pretty(expr.child)})"
    if isinstance(expr, AtMost):
        return f"atMostL({expr.k}, {', '.join(pretty(c) for c in expr.children)})"
    if isinstance(expr, Disjoint):
        return f"disjoint({', '.join(expr.concepts)})"
    raise TypeError(f"not an expression: {expr!r}")


def document(graph: ConceptGraph, constraints: ConstraintSet) -> str:
    """Full .dk document for a graph plus constraints."""
    parts = [graph_to_dsl(graph), "\n"]
    for c in constraints:
        parts.append(pretty(c.expr))
        parts.append("\n")
    return "".join(parts)
