"""Estimator-style surface tying the pieces together.

A ConstraintProgram binds a concept graph and constraint set to the
built-in linear model and one integration strategy:

    baseline   plain NLL training, thresholded predictions
    ilp        NLL training, exact global inference at prediction time
    iml        inference-masked training, thresholded predictions
    pd         penalized training with multiplier ascent, thresholded
    pd+ilp     penalized training plus global inference at prediction

It follows the scikit-learn protocol (get_params/set_params, fit,
predict, score); samples are instance-graph JSON objects or loaded
DataNodeGraphs rather than feature matrices.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .errors import ConfigError, GraphMismatch
from .ground import DataNodeGraph, ScoreVector, load_data
from .ilp import compile_model
from .lclang import ConstraintSet, parse
from .schema import ConceptGraph
from .softlogic import violation as soft_violation
from .solver import Assignment, SolveConfig, solve, violations
from .train import (
    Metrics,
    ParameterStore,
    PreparedSample,
    constraint_penalty,
    iml_loss,
    nll_loss,
    pd_step,
    predict as compute_scores,
    prepare_sample,
    prf1,
    require_labels,
    score_grad_to_params,
    threshold,
)

STRATEGIES = ("baseline", "ilp", "iml", "pd", "pd+ilp")


@dataclass
class EvalResult:
    metrics: Metrics
    violations: list[list[tuple[str, dict]]]  # hard violations per sample
    mean_soft_violation: float
    predictions: list[dict] = field(default_factory=list)

    def total_violations(self) -> int:
        return sum(len(v) for v in self.violations)

    def to_json(self) -> dict:
        return {
            "metrics": self.metrics.to_json(),
            "mean_soft_violation": self.mean_soft_violation,
            "violations": [
                [{"constraint": cid, "binding": binding} for cid, binding in per_sample]
                for per_sample in self.violations
            ],
        }


class ConstraintProgram(BaseEstimator):
    """Train and evaluate the built-in model under declared constraints.

    Parameters mirror scikit-learn conventions: everything is set in
    __init__ and stored verbatim; fit() produces ``params_`` and
    ``history_``. Labels live inside the samples, so ``y`` is unused.
    """

    def __init__(
        self,
        graph: ConceptGraph = None,
        constraints: ConstraintSet = None,
        poi: tuple = (),
        strategy: str = "baseline",
        epochs: int = 10,
        lr: float = 0.001,
        lam: float = 0.5,
        lr_lambda: float = 0.1,
        seed: int = 0,
        node_limit: int = 2_000_000,
        time_limit: float = 60.0,
    ):
        self.graph = graph
        self.constraints = constraints
        self.poi = poi
        self.strategy = strategy
        self.epochs = epochs
        self.lr = lr
        self.lam = lam
        self.lr_lambda = lr_lambda
        self.seed = seed
        self.node_limit = node_limit
        self.time_limit = time_limit

    @classmethod
    def from_dsl(cls, source_text: str, **kwargs) -> "ConstraintProgram":
        graph, constraints = parse(source_text)
        return cls(graph=graph, constraints=constraints, **kwargs)

    # -- configuration -----------------------------------------------------

    def _check_config(self) -> None:
        if self.graph is None or self.constraints is None:
            raise ConfigError("program needs a graph and a constraint set")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy '{self.strategy}', pick one of {STRATEGIES}")
        if not isinstance(self.epochs, int) or self.epochs < 0:
            raise ConfigError("epochs must be a nonnegative integer")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.strategy == "iml" and not (0.0 <= self.lam <= 1.0):
            raise ConfigError("lambda must lie in [0, 1]")
        if self.strategy in ("pd", "pd+ilp") and self.lr_lambda <= 0:
            raise ConfigError("lr_lambda must be positive")
        for name in self.poi:
            self.graph.concept(name)

    def _solve_config(self) -> SolveConfig:
        return SolveConfig(max_nodes=self.node_limit, time_limit=self.time_limit)

    def trainable_concepts(self) -> set[str]:
        """Decision concepts whose is_a chain meets the points of interest.

        An empty poi trains everything.
        """
        decisions = [c.name for c in self.graph.decision_concepts()]
        if not self.poi:
            return set(decisions)
        poi = set(self.poi)
        return {d for d in decisions if poi & set(self.graph.ancestors(d))}

    def _prepare(self, samples) -> list[PreparedSample]:
        prepared = []
        for sample in samples:
            dng = sample if isinstance(sample, DataNodeGraph) else load_data(sample, self.graph)
            prepared.append(prepare_sample(self.graph, self.constraints, dng))
        return prepared

    # -- training ------------------------------------------------------------

    def fit(self, X, y=None, init_params: ParameterStore | None = None, dev=None) -> "ConstraintProgram":
        self._check_config()
        prepared = self._prepare(X)
        dev_prepared = self._prepare(dev) if dev else None
        trainable = self.trainable_concepts()
        params = init_params.copy() if init_params is not None else ParameterStore()
        for cid in [c.cid for c in self.constraints]:
            params.ensure_multiplier(cid)
        for sample in prepared:
            compute_scores(params, sample)  # instantiate scorers, check dims
            require_labels(sample, trainable)

        self.history_ = [self._epoch_record(0, params, prepared, dev_prepared, None)]
        for epoch in range(1, self.epochs + 1):
            loss_sum = 0.0
            lambda_grads: dict[str, float] = {}
            for sample in prepared:
                loss_sum += self._fit_one(params, sample, trainable, lambda_grads)
            if self.strategy in ("pd", "pd+ilp") and prepared:
                mean_grads = {cid: g / len(prepared) for cid, g in lambda_grads.items()}
                pd_step(params, {}, mean_grads, self.lr, self.lr_lambda)
            self.history_.append(
                self._epoch_record(epoch, params, prepared, dev_prepared, loss_sum)
            )
        self.params_ = params
        return self

    def _fit_one(
        self,
        params: ParameterStore,
        sample: PreparedSample,
        trainable: set[str],
        lambda_grads: dict[str, float],
    ) -> float:
        scores = compute_scores(params, sample)
        if self.strategy in ("baseline", "ilp"):
            loss, dp = nll_loss(scores, sample.labels)
        elif self.strategy == "iml":
            fstar = self._solve_sample(sample, scores).decisions(len(sample.index))
            loss, dp = iml_loss(scores, sample.labels, fstar, self.lam)
        else:  # pd, pd+ilp
            base_loss, dp = nll_loss(scores, sample.labels)
            pen, pen_grad, per_cid = constraint_penalty(
                sample.grounded, scores, params.multipliers
            )
            loss = base_loss + pen
            dp = dp + pen_grad
            for cid, g in per_cid.items():
                lambda_grads[cid] = lambda_grads.get(cid, 0.0) + g
        grad_theta = score_grad_to_params(sample, scores, dp)
        pd_step(params, grad_theta, {}, self.lr, 0.0, trainable)
        return loss

    def _solve_sample(self, sample: PreparedSample, scores: ScoreVector) -> Assignment:
        model = compile_model(sample.grounded, scores, sample.index)
        return solve(model, self._solve_config())

    def _epoch_record(self, epoch, params, prepared, dev_prepared, loss) -> dict:
        record = {
            "epoch": epoch,
            "loss": None if loss is None else float(loss),
            "train_metrics": self._quick_metrics(params, prepared).to_json(),
            "mean_soft_violation": self._mean_soft_violation(params, prepared),
        }
        if dev_prepared is not None:
            record["dev_metrics"] = self._quick_metrics(params, dev_prepared).to_json()
        return record

    def _quick_metrics(self, params: ParameterStore, prepared: list[PreparedSample]) -> Metrics:
        total = Metrics()
        for sample in prepared:
            scores = compute_scores(params, sample)
            total.merge(prf1(threshold(scores), sample.labels, sample.concepts))
        return total

    def _mean_soft_violation(self, params: ParameterStore, prepared: list[PreparedSample]) -> float:
        per_sample = []
        for sample in prepared:
            if not sample.grounded:
                continue
            scores = compute_scores(params, sample)
            degrees = [soft_violation(g.expr, scores.probs)[0] for g in sample.grounded]
            per_sample.append(float(np.mean(degrees)))
        return float(np.mean(per_sample)) if per_sample else 0.0

    # -- inference ------------------------------------------------------------

    def _predictions_for(
        self, params: ParameterStore, sample: PreparedSample
    ) -> tuple[np.ndarray, ScoreVector]:
        scores = compute_scores(params, sample)
        if self.strategy in ("ilp", "pd+ilp"):
            assignment = self._solve_sample(sample, scores)
            return np.asarray(assignment.decisions(len(sample.index))), scores
        return threshold(scores), scores

    def predict(self, X) -> list[dict]:
        """Per-sample {node id: {decision concept: 0/1}}."""
        self._require_fitted()
        out = []
        for sample in self._prepare(X):
            decisions, _ = self._predictions_for(self.params_, sample)
            per_node: dict[str, dict[str, int]] = {}
            for i, (node_id, concept) in enumerate(sample.index.pairs):
                per_node.setdefault(node_id, {})[concept] = int(decisions[i])
            out.append(per_node)
        return out

    def predict_scores(self, X) -> list[dict]:
        self._require_fitted()
        return [compute_scores(self.params_, s).to_mapping() for s in self._prepare(X)]

    def evaluate(self, X, jobs: int = 1) -> EvalResult:
        """Metrics plus hard-violation report over labeled samples."""
        self._require_fitted()
        prepared = self._prepare(X)
        if jobs > 1 and len(prepared) > 1:
            rows = self._evaluate_parallel(prepared, jobs)
        else:
            rows = [
                _eval_one(self.graph, self.strategy, self._solve_config(), self.params_, s)
                for s in prepared
            ]
        metrics = Metrics()
        all_violations = []
        softs = []
        predictions = []
        for sample, (decisions, hard, soft, per_node) in zip(prepared, rows):
            metrics.merge(prf1(decisions, sample.labels, sample.concepts))
            all_violations.append(hard)
            if soft is not None:
                softs.append(soft)
            predictions.append(per_node)
        return EvalResult(
            metrics=metrics,
            violations=all_violations,
            mean_soft_violation=float(np.mean(softs)) if softs else 0.0,
            predictions=predictions,
        )

    def _evaluate_parallel(self, prepared: list[PreparedSample], jobs: int):
        args = [
            (self.graph, self.strategy, self._solve_config(), self.params_, s) for s in prepared
        ]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_eval_one_star, args))

    def score(self, X, y=None) -> float:
        """Micro F1, so the estimator plugs into model selection tools."""
        return self.evaluate(X).metrics.micro.f1

    def _require_fitted(self) -> None:
        if not hasattr(self, "params_"):
            raise ConfigError("program is not fitted; call fit() or set params_")


def _eval_one(
    graph: ConceptGraph,
    strategy: str,
    solve_config: SolveConfig,
    params: ParameterStore,
    sample: PreparedSample,
):
    scores = compute_scores(params, sample)
    if strategy in ("ilp", "pd+ilp"):
        model = compile_model(sample.grounded, scores, sample.index)
        decisions = np.asarray(solve(model, solve_config).decisions(len(sample.index)))
    else:
        decisions = threshold(scores)
    hard = violations(sample.grounded, decisions)
    if sample.grounded:
        soft = float(
            np.mean([soft_violation(g.expr, scores.probs)[0] for g in sample.grounded])
        )
    else:
        soft = None
    per_node: dict[str, dict[str, int]] = {}
    for i, (node_id, concept) in enumerate(sample.index.pairs):
        per_node.setdefault(node_id, {})[concept] = int(decisions[i])
    return decisions, hard, soft, per_node


def _eval_one_star(args):
    return _eval_one(*args)


def compose(programs: list[ConstraintProgram], X, init_params: ParameterStore | None = None,
            dev=None) -> ParameterStore:
    """Run programs in order over the same data, threading parameters through.

    Later programs start from the parameters the earlier ones produced,
    which is how pre-train/fine-tune pipelines are expressed. All
    programs must share one graph.
    """
    if not programs:
        raise ConfigError("compose needs at least one program")
    first = programs[0].graph
    for prog in programs[1:]:
        same = prog.graph is first or (
            prog.graph is not None
            and first is not None
            and prog.graph.concepts == first.concepts
            and prog.graph.edges == first.edges
        )
        if not same:
            raise GraphMismatch("composed programs must share a graph")
    params = init_params
    for prog in programs:
        prog.fit(X, init_params=params, dev=dev)
        params = prog.params_
    return params
