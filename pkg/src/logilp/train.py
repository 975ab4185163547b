"""Built-in linear model, losses, and metrics.

Each decision concept owns one logistic scorer over the features of its
candidate nodes; composite nodes without explicit features score the
concatenation of their members' features in argument-name order. Three
losses are available: plain negative log likelihood, inference-masked
loss (log-likelihood terms switched off where global inference already
recovers the positive label), and the penalized loss whose constraint
term weighs soft violations by nonnegative multipliers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, MissingAssignment, MissingLabels
from .ground import (
    DataNode,
    DataNodeGraph,
    GroundedConstraint,
    ScoreVector,
    VarIndex,
    ground,
)
from .lclang import ConstraintSet
from .schema import COMPOSITIONAL, ConceptGraph
from .softlogic import violation


def effective_features(graph: ConceptGraph, dng: DataNodeGraph, node: DataNode) -> np.ndarray:
    """Feature vector a scorer sees for a node.

    Explicit features win; composite nodes fall back to concatenating
    their members' features, sorted by argument name.
    """
    if node.features.size > 0:
        return node.features
    if graph.concept(node.concept).kind == COMPOSITIONAL:
        members = dng.members_of(node.id)
        parts = [
            effective_features(graph, dng, dng.node(members[arg]))
            for arg in sorted(members)
        ]
        if parts:
            return np.concatenate(parts)
    return node.features


class ParameterStore:
    """Weights and bias per decision concept plus one multiplier per constraint.

    Scorers are created lazily, zero-initialized, the first time a
    concept is seen with a known feature dimension; multipliers are
    clamped nonnegative by every update path.
    """

    def __init__(self):
        self.weights: dict[str, np.ndarray] = {}
        self.bias: dict[str, float] = {}
        self.multipliers: dict[str, float] = {}

    def ensure(self, concept: str, dim: int) -> None:
        if concept in self.weights:
            if self.weights[concept].shape[0] != dim:
                raise DimMismatch(
                    f"'{concept}' scorer expects {self.weights[concept].shape[0]} features, got {dim}"
                )
            return
        self.weights[concept] = np.zeros(dim)
        self.bias[concept] = 0.0

    def ensure_multiplier(self, cid: str) -> None:
        self.multipliers.setdefault(cid, 0.0)

    def copy(self) -> "ParameterStore":
        out = ParameterStore()
        out.weights = {k: v.copy() for k, v in self.weights.items()}
        out.bias = dict(self.bias)
        out.multipliers = dict(self.multipliers)
        return out

    def to_json(self) -> dict:
        return {
            "weights": {k: [float(x) for x in v] for k, v in sorted(self.weights.items())},
            "bias": {k: float(v) for k, v in sorted(self.bias.items())},
            "multipliers": {k: float(v) for k, v in sorted(self.multipliers.items())},
        }

    @classmethod
    def from_json(cls, data: dict) -> "ParameterStore":
        out = cls()
        for k, v in data.get("weights", {}).items():
            out.weights[k] = np.asarray(v, dtype=float)
        for k, v in data.get("bias", {}).items():
            out.bias[k] = float(v)
        for k, v in data.get("multipliers", {}).items():
            out.multipliers[k] = max(0.0, float(v))
        return out


@dataclass
class PreparedSample:
    """Everything the training loop needs about one sample, precomputed."""

    dng: DataNodeGraph
    index: VarIndex
    grounded: list[GroundedConstraint]
    features: list[np.ndarray]  # per decision variable
    concepts: list[str]  # per decision variable
    labels: np.ndarray  # float, NaN where unlabeled
    by_concept: dict[str, np.ndarray] = field(default_factory=dict)  # var rows per concept

    @property
    def labeled(self) -> np.ndarray:
        return ~np.isnan(self.labels)


def prepare_sample(
    graph: ConceptGraph, constraints: ConstraintSet, dng: DataNodeGraph
) -> PreparedSample:
    index = VarIndex(graph, dng)
    grounded = ground(graph, constraints, dng, index)
    features = []
    concepts = []
    labels = np.full(len(index), np.nan)
    for i, (node_id, concept) in enumerate(index.pairs):
        node = dng.node(node_id)
        features.append(effective_features(graph, dng, node))
        concepts.append(concept)
        if concept in node.labels:
            labels[i] = float(node.labels[concept])
    by_concept: dict[str, list[int]] = {}
    for i, c in enumerate(concepts):
        by_concept.setdefault(c, []).append(i)
    return PreparedSample(
        dng=dng,
        index=index,
        grounded=grounded,
        features=features,
        concepts=concepts,
        labels=labels,
        by_concept={c: np.asarray(rows) for c, rows in by_concept.items()},
    )


def predict(params: ParameterStore, sample: PreparedSample) -> ScoreVector:
    """Sigmoid linear score per decision variable."""
    p = np.empty(len(sample.index))
    for concept, rows in sample.by_concept.items():
        dims = {sample.features[i].shape[0] for i in rows}
        if len(dims) != 1:
            raise DimMismatch(f"inconsistent feature dimensions for '{concept}'")
        (dim,) = dims
        params.ensure(concept, dim)
        w = params.weights[concept]
        b = params.bias[concept]
        if dim == 0:
            z = np.full(len(rows), b)
        else:
            X = np.stack([sample.features[i] for i in rows])
            z = X @ w + b
        p[rows] = 1.0 / (1.0 + np.exp(-z))
    return ScoreVector(sample.index, p)


def nll_loss(scores: ScoreVector, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Binary cross-entropy over labeled variables; gradient is wrt scores."""
    p = scores.probs
    mask = ~np.isnan(labels)
    y = np.where(mask, labels, 0.0)
    per_var = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    loss = float(per_var[mask].sum())
    grad = np.where(mask, -y / p + (1.0 - y) / (1.0 - p), 0.0)
    return loss, grad


def iml_loss(
    scores: ScoreVector,
    labels: np.ndarray,
    fstar: np.ndarray | None,
    lam: float = 1.0,
) -> tuple[float, np.ndarray]:
    """Inference-masked loss, blended with plain NLL by ``lam``.

    The masked part only keeps -y*log(p) terms where global inference
    produced 0: positions the solver already gets right contribute no
    gradient. lam=1 is the fully masked loss, lam=0 is plain NLL.
    """
    if fstar is None:
        raise MissingAssignment("inference-masked loss needs the solver's assignment")
    p = scores.probs
    mask = ~np.isnan(labels)
    y = np.where(mask, labels, 0.0)
    f = np.asarray(fstar, dtype=float)[: len(p)]
    keep = (1.0 - f) * y * mask
    masked_loss = float(-(keep * np.log(p)).sum())
    masked_grad = -keep / p
    if lam >= 1.0:
        return masked_loss, masked_grad
    base_loss, base_grad = nll_loss(scores, labels)
    loss = (1.0 - lam) * base_loss + lam * masked_loss
    grad = (1.0 - lam) * base_grad + lam * masked_grad
    return loss, grad


def constraint_penalty(
    grounded: list[GroundedConstraint],
    scores: ScoreVector,
    multipliers: dict[str, float],
) -> tuple[float, np.ndarray, dict[str, float]]:
    """Sum of multiplier-weighted soft violations.

    Returns (penalty, gradient wrt scores, per-constraint-id violation
    totals); the totals drive the multiplier ascent step.
    """
    p = scores.probs
    total = 0.0
    grad = np.zeros_like(p)
    per_cid: dict[str, float] = {}
    for g in grounded:
        v, g_grad = violation(g.expr, p)
        lam = multipliers.get(g.cid, 0.0)
        total += lam * v
        if lam != 0.0:
            grad += lam * g_grad
        per_cid[g.cid] = per_cid.get(g.cid, 0.0) + v
    return total, grad, per_cid


def pd_loss(
    params: ParameterStore,
    sample: PreparedSample,
    scores: ScoreVector | None = None,
) -> tuple[float, dict[str, tuple[np.ndarray, float]], dict[str, float]]:
    """Penalized loss and its gradients for one sample.

    Returns (loss, per-concept (dw, db) gradients, per-constraint
    violation totals). The violation totals are the multiplier
    gradients: ascent on them enforces the constraints.
    """
    if scores is None:
        scores = predict(params, sample)
    base_loss, dp = nll_loss(scores, sample.labels)
    pen, pen_grad, per_cid = constraint_penalty(sample.grounded, scores, params.multipliers)
    grad_theta = score_grad_to_params(sample, scores, dp + pen_grad)
    return base_loss + pen, grad_theta, per_cid


def score_grad_to_params(
    sample: PreparedSample, scores: ScoreVector, dp: np.ndarray
) -> dict[str, tuple[np.ndarray, float]]:
    """Chain dL/dp through the sigmoid to per-concept (dw, db)."""
    p = scores.probs
    slope = dp * p * (1.0 - p)
    out: dict[str, tuple[np.ndarray, float]] = {}
    for concept, rows in sample.by_concept.items():
        s = slope[rows]
        dim = sample.features[rows[0]].shape[0]
        if dim == 0:
            dw = np.zeros(0)
        else:
            X = np.stack([sample.features[i] for i in rows])
            dw = X.T @ s
        out[concept] = (dw, float(s.sum()))
    return out


def pd_step(
    params: ParameterStore,
    grad_theta: dict[str, tuple[np.ndarray, float]],
    grad_lambda: dict[str, float],
    lr_theta: float,
    lr_lambda: float,
    trainable: set[str] | None = None,
) -> None:
    """One descent step on weights and one projected ascent step on multipliers."""
    for concept, (dw, db) in grad_theta.items():
        if trainable is not None and concept not in trainable:
            continue
        params.weights[concept] = params.weights[concept] - lr_theta * dw
        params.bias[concept] = params.bias[concept] - lr_theta * db
    for cid, g in grad_lambda.items():
        params.ensure_multiplier(cid)
        params.multipliers[cid] = max(0.0, params.multipliers[cid] + lr_lambda * g)


def require_labels(sample: PreparedSample, concepts: set[str]) -> None:
    for i, c in enumerate(sample.concepts):
        if c in concepts and np.isnan(sample.labels[i]):
            node_id = sample.index.pairs[i][0]
            raise MissingLabels(f"node '{node_id}' has no label for '{c}'")


# ---------------------------------------------------------------------------
# Metrics


@dataclass
class ConceptCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass
class Metrics:
    per_concept: dict[str, ConceptCounts] = field(default_factory=dict)

    @property
    def micro(self) -> ConceptCounts:
        total = ConceptCounts()
        for c in self.per_concept.values():
            total.tp += c.tp
            total.fp += c.fp
            total.fn += c.fn
        return total

    def merge(self, other: "Metrics") -> None:
        for name, c in other.per_concept.items():
            mine = self.per_concept.setdefault(name, ConceptCounts())
            mine.tp += c.tp
            mine.fp += c.fp
            mine.fn += c.fn

    def to_json(self) -> dict:
        def row(c: ConceptCounts) -> dict:
            return {
                "precision": c.precision,
                "recall": c.recall,
                "f1": c.f1,
                "tp": c.tp,
                "fp": c.fp,
                "fn": c.fn,
            }

        out = {name: row(c) for name, c in sorted(self.per_concept.items())}
        out["micro"] = row(self.micro)
        return out


def threshold(scores: ScoreVector) -> np.ndarray:
    """Independent per-variable decision: positive iff p > 0.5."""
    return (scores.probs > 0.5).astype(np.int8)


def prf1(predictions: np.ndarray, labels: np.ndarray, concepts: list[str]) -> Metrics:
    """Per-concept and micro counts over labeled variables."""
    metrics = Metrics()
    for i, concept in enumerate(concepts):
        if np.isnan(labels[i]):
            continue
        counts = metrics.per_concept.setdefault(concept, ConceptCounts())
        pred = int(predictions[i])
        gold = int(labels[i])
        if pred == 1 and gold == 1:
            counts.tp += 1
        elif pred == 1 and gold == 0:
            counts.fp += 1
        elif pred == 0 and gold == 1:
            counts.fn += 1
    return metrics
