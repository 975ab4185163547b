"""Command-line interface.

Subcommands: validate, compile, infer, train, eval. Results go to stdout
as JSON (or to --out); diagnostics go to stderr. Exit codes: 0 success,
1 user error, 2 infeasible model or solver resource limit.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import Infeasible, LogilpError
from .ground import ScoreVector, VarIndex, load_data
from .ilp import compile_model, emit_lp
from .lclang import check_wellformed, parse
from .program import ConstraintProgram
from .solver import OPTIMAL, SolveConfig, solve, violations
from .train import ParameterStore, prepare_sample

EXIT_OK = 0
EXIT_USER = 1
EXIT_INFEASIBLE = 2


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _read_samples(path: str) -> list[dict]:
    raw = json.loads(Path(path).read_text())
    if isinstance(raw, dict):
        return [raw]
    if isinstance(raw, list):
        return raw
    raise LogilpError(f"'{path}' must hold a sample object or an array of them")


def _scores_for(index: VarIndex, args) -> ScoreVector:
    if args.uniform:
        return ScoreVector.uniform(index)
    if not args.scores:
        raise LogilpError("provide --scores FILE or --uniform")
    mapping = json.loads(Path(args.scores).read_text())
    return ScoreVector.from_mapping(index, mapping)


def cmd_validate(args) -> int:
    source = Path(args.dsl).read_text()
    graph, constraints = parse(source)
    if not graph.concepts:
        _emit({"ok": False, "problems": [{"message": "no concepts declared"}]}, args.out)
        return EXIT_USER
    problems = list(graph.validate())
    for c in constraints:
        problems.extend(check_wellformed(c.expr, graph))
    payload = {
        "ok": all(p.severity != "error" for p in problems),
        "concepts": len(graph.concepts),
        "constraints": len(constraints),
        "problems": [
            {"code": p.code, "message": p.message, "severity": p.severity, "where": p.where}
            for p in problems
        ],
    }
    _emit(payload, args.out)
    return EXIT_OK if payload["ok"] else EXIT_USER


def cmd_compile(args) -> int:
    graph, constraints = parse(Path(args.dsl).read_text())
    samples = _read_samples(args.data)
    if len(samples) != 1:
        raise LogilpError("compile expects exactly one sample in --data")
    sample = prepare_sample(graph, constraints, load_data(samples[0], graph))
    scores = _scores_for(sample.index, args)
    model = compile_model(sample.grounded, scores, sample.index)
    lp_text = emit_lp(model)
    if args.emit_lp:
        Path(args.emit_lp).write_text(lp_text)
        _log(f"wrote {args.emit_lp}")
    payload = {
        "variables": model.num_vars,
        "decision_variables": model.num_decision,
        "inequalities": len(model.constraints),
        "grounded_constraints": len(sample.grounded),
    }
    if not args.emit_lp:
        payload["lp"] = lp_text
    _emit(payload, args.out)
    return EXIT_OK


def _infer_one(task) -> dict:
    graph, constraints, raw, scores_arg, config = task
    sample = prepare_sample(graph, constraints, load_data(raw, graph))
    if scores_arg is None:
        scores = ScoreVector.uniform(sample.index)
    else:
        scores = ScoreVector.from_mapping(sample.index, scores_arg)
    model = compile_model(sample.grounded, scores, sample.index)
    assignment = solve(model, config)
    decisions = assignment.decisions(len(sample.index))
    per_node: dict[str, dict[str, int]] = {}
    for i, (node_id, concept) in enumerate(sample.index.pairs):
        per_node.setdefault(node_id, {})[concept] = int(decisions[i])
    broken = violations(sample.grounded, decisions)
    return {
        "assignment": per_node,
        "objective": assignment.objective,
        "status": assignment.status,
        "violations": [{"constraint": cid, "binding": binding} for cid, binding in broken],
    }


def cmd_infer(args) -> int:
    graph, constraints = parse(Path(args.dsl).read_text())
    samples = _read_samples(args.data)
    config = SolveConfig(max_nodes=args.node_limit, time_limit=args.time_limit)
    if args.uniform:
        scores_arg = None
    elif args.scores:
        scores_arg = json.loads(Path(args.scores).read_text())
    else:
        raise LogilpError("provide --scores FILE or --uniform")
    tasks = [(graph, constraints, raw, scores_arg, config) for raw in samples]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_infer_one, tasks))
    else:
        results = [_infer_one(t) for t in tasks]
    worst = EXIT_OK
    if any(r["status"] != OPTIMAL for r in results):
        worst = EXIT_INFEASIBLE
    _emit({"samples": results}, args.out)
    return worst


def _load_config(path: str) -> dict:
    config = json.loads(Path(path).read_text())
    base = Path(path).parent
    for key in ("dsl", "train_data", "dev_data", "test_data", "params_in", "params_out", "metrics_out"):
        if config.get(key):
            config[key] = str((base / config[key]).resolve()) if not Path(config[key]).is_absolute() else config[key]
    return config


def _program_from_config(config: dict, args) -> ConstraintProgram:
    graph, constraints = parse(Path(config["dsl"]).read_text())
    overrides = {
        "strategy": args.strategy,
        "epochs": args.epochs,
        "lr": args.lr,
        "lam": args.lam,
        "lr_lambda": args.lr_lambda,
        "seed": args.seed,
    }
    settings = {
        "poi": tuple(config.get("poi", ())),
        "strategy": config.get("strategy", "baseline"),
        "epochs": int(config.get("epochs", 10)),
        "lr": float(config.get("lr", 0.001)),
        "lam": float(config.get("lambda", 0.5)),
        "lr_lambda": float(config.get("lr_lambda", 0.1)),
        "seed": int(config.get("seed", 0)),
    }
    for key, value in overrides.items():
        if value is not None:
            settings[key] = value
    return ConstraintProgram(graph=graph, constraints=constraints, **settings)


def cmd_train(args) -> int:
    config = _load_config(args.config)
    program = _program_from_config(config, args)
    train_samples = _read_samples(config["train_data"])
    dev = _read_samples(config["dev_data"]) if config.get("dev_data") else None
    init = None
    if config.get("params_in"):
        init = ParameterStore.from_json(json.loads(Path(config["params_in"]).read_text()))
    program.fit(train_samples, init_params=init, dev=dev)
    payload = {
        "strategy": program.strategy,
        "epochs": program.epochs,
        "history": program.history_,
    }
    if config.get("test_data"):
        result = program.evaluate(_read_samples(config["test_data"]), jobs=args.jobs)
        payload["test"] = result.to_json()
    params_json = json.dumps(program.params_.to_json(), indent=2, sort_keys=True) + "\n"
    if config.get("params_out"):
        Path(config["params_out"]).write_text(params_json)
        _log(f"wrote {config['params_out']}")
    if config.get("metrics_out"):
        Path(config["metrics_out"]).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n"
        )
        _log(f"wrote {config['metrics_out']}")
    _emit(payload, args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _load_config(args.config)
    program = _program_from_config(config, args)
    params_path = config.get("params_in") or config.get("params_out")
    if not params_path:
        raise LogilpError("config needs params_in (or params_out) pointing at trained parameters")
    program.params_ = ParameterStore.from_json(json.loads(Path(params_path).read_text()))
    if not config.get("test_data"):
        raise LogilpError("config needs test_data")
    result = program.evaluate(_read_samples(config["test_data"]), jobs=args.jobs)
    _emit(result.to_json(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logilp",
        description="Declare a concept graph with logical constraints, compile them "
        "to exact 0-1 programs, and train or run globally consistent predictors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a .dk file")
    p_validate.add_argument("--dsl", required=True)
    p_validate.add_argument("--out")
    p_validate.set_defaults(func=cmd_validate)

    p_compile = sub.add_parser("compile", help="compile one sample to an LP file")
    p_compile.add_argument("--dsl", required=True)
    p_compile.add_argument("--data", required=True)
    p_compile.add_argument("--scores")
    p_compile.add_argument("--uniform", action="store_true", help="use 0.5 for every score")
    p_compile.add_argument("--emit-lp", dest="emit_lp")
    p_compile.add_argument("--out")
    p_compile.set_defaults(func=cmd_compile)

    p_infer = sub.add_parser("infer", help="solve samples to consistent assignments")
    p_infer.add_argument("--dsl", required=True)
    p_infer.add_argument("--data", required=True)
    p_infer.add_argument("--scores")
    p_infer.add_argument("--uniform", action="store_true")
    p_infer.add_argument("--jobs", type=int, default=1)
    p_infer.add_argument("--node-limit", dest="node_limit", type=int, default=2_000_000)
    p_infer.add_argument("--time-limit", dest="time_limit", type=float, default=60.0)
    p_infer.add_argument("--out")
    p_infer.set_defaults(func=cmd_infer)

    for name, fn in (("train", cmd_train), ("eval", cmd_eval)):
        p = sub.add_parser(name, help=f"{name} from a config file")
        p.add_argument("--config", required=True)
        p.add_argument("--strategy")
        p.add_argument("--epochs", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--lr-lambda", dest="lr_lambda", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Infeasible as exc:
        _log(str(exc))
        print(json.dumps({"error": str(exc), "kind": "infeasible"}))
        return EXIT_INFEASIBLE
    except LogilpError as exc:
        _log(str(exc))
        print(json.dumps({"error": str(exc), "kind": type(exc).__name__}))
        return EXIT_USER
    except FileNotFoundError as exc:
        _log(str(exc))
        print(json.dumps({"error": str(exc), "kind": "missing-file"}))
        return EXIT_USER


if __name__ == "__main__":
    sys.exit(main())
