"""Declarative concept graphs, logical constraints, exact 0-1 inference,
and constraint-aware training of a built-in linear model."""

from .errors import (
    BadPath,
    ConfigError,
    DanglingLink,
    DimMismatch,
    DslSyntaxError,
    DuplicateArgName,
    DuplicateName,
    GraphMismatch,
    Infeasible,
    LogilpError,
    MissingArg,
    MissingAssignment,
    MissingLabels,
    MissingScore,
    SchemaError,
    TooLarge,
    UnboundVariable,
    UnknownConcept,
    UnknownParent,
    ValidationReport,
    Violation,
)
from .ground import (
    DataNode,
    DataNodeGraph,
    GroundedConstraint,
    ScoreVector,
    VarIndex,
    boolean_eval,
    candidates,
    ground,
    load_data,
    resolve_path,
)
from .ilp import IlpModel, LinearConstraint, compile_model, emit_lp, lower, model_to_json
from .lclang import (
    And,
    AtMost,
    Atom,
    Constraint,
    ConstraintSet,
    Disjoint,
    Exists,
    If,
    Not,
    Or,
    Path,
    check_wellformed,
    document,
    parse,
    pretty,
)
from .program import ConstraintProgram, EvalResult, compose
from .schema import Concept, ConceptGraph, Edge, GraphBuilder, graph_to_dsl, validate
from .softlogic import soft_eval, violation
from .solver import Assignment, SolveConfig, brute_force, solve, violations
from .train import (
    Metrics,
    ParameterStore,
    iml_loss,
    nll_loss,
    pd_loss,
    pd_step,
    predict,
    prepare_sample,
    prf1,
)

__version__ = "0.1.0"
