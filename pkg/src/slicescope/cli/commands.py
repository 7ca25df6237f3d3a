"""Command implementations. Each returns a process exit code."""

import argparse
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from slicescope.cli.manifest import RunManifest
from slicescope.coherence import SliceMask
from slicescope.config import defaults, load_config_file
from slicescope.dataset_io import DatasetBundle
from slicescope.dataset_io.binary import load_binary, save_binary
from slicescope.dataset_io.parsers import CsvSchema, load_csv, load_csv_column
from slicescope.errors import ConfigError, InputError
from slicescope.evaluation import EvalConfig, SliceReport, evaluate_slice
from slicescope.evaluation.export import write_json, write_masks, write_projection, write_report
from slicescope.evaluation.projection import project_2d
from slicescope.knn_graph import GraphBuildConfig, KnnGraph, build_knn_graph
from slicescope.knn_graph.cache import build_or_load
from slicescope.monitoring import write_metrics
from slicescope.slicer import TrainConfig, predict_proba, save_model, select_test_slice, train_slicer
from slicescope.solver import METHOD_ALIASES, SolverConfig
from slicescope.solver.discovery import default_alpha, discover_per_category, discover_rounds
from slicescope.synth import KINDS, GeneratorParams, generate_nested_setting, generate_setting
from slicescope.synth.bench import BenchConfig, aggregate, make_settings, rows_frame, run_benchmark
from slicescope.synth.tuning import default_lambda_grid, sweep_hyperparameters, tune_lambda


def _out_dir(args: argparse.Namespace) -> Path:
    path = Path(args.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _csv_schema(args: argparse.Namespace) -> CsvSchema:
    layout: Dict[str, Any] = {}
    if args.embedding_columns:
        layout["embedding_columns"] = [c.strip() for c in args.embedding_columns.split(",") if c.strip()]
    if args.packed_embedding_column:
        layout["packed_embedding_column"] = args.packed_embedding_column
    if args.embedding_prefix or not layout:
        layout["embedding_prefix"] = args.embedding_prefix or "emb_"
    return CsvSchema(
        loss_column=args.loss_column,
        id_column=args.id_column,
        correct_column=args.correct_column,
        slice_label_column=args.slice_label_column,
        **layout,
    )


def load_dataset(path: str, args: argparse.Namespace) -> DatasetBundle:
    """SLB1 files by extension, everything else as CSV."""
    if not Path(path).exists():
        raise InputError(f"missing file: {path}")
    if path.endswith(".slb"):
        return load_binary(path)
    return load_csv(path, _csv_schema(args))


def _graph_config(args: argparse.Namespace) -> GraphBuildConfig:
    graph = defaults("graph")
    if args.k is not None:
        graph["k"] = args.k
    return GraphBuildConfig(**graph)


def _input_graph(bundle: DatasetBundle, config: GraphBuildConfig, args: argparse.Namespace) -> KnnGraph:
    if args.graph_cache:
        return build_or_load(bundle.embeddings, config, args.graph_cache)
    return build_knn_graph(bundle.embeddings, config)


def _solver_config(args: argparse.Namespace) -> SolverConfig:
    solver = defaults("solver")
    if args.method is not None:
        solver["method"] = METHOD_ALIASES.get(args.method, args.method)
    if args.restarts is not None:
        solver["restarts"] = args.restarts
    if args.seed is not None:
        solver["seed"] = args.seed
    return SolverConfig(**solver)


def _train_config(args: argparse.Namespace) -> TrainConfig:
    slicer = defaults("slicer")
    if args.seed is not None:
        slicer["seed"] = args.seed
    return TrainConfig(**slicer)


def _eval_config(args: argparse.Namespace, alpha: Optional[float] = None) -> EvalConfig:
    overrides: Dict[str, Any] = {}
    if getattr(args, "epsilon", None) is not None:
        overrides["epsilon"] = args.epsilon
    return EvalConfig(alpha_test=alpha, **overrides)


def _lambda(args: argparse.Namespace) -> float:
    if args.lam is not None:
        return float(args.lam)
    return float(defaults("mcsd").get("lambda", 1.0))


def _seed(args: argparse.Namespace) -> int:
    return 0 if args.seed is None else int(args.seed)


def _percent(value: Optional[float]) -> str:
    return "-" if value is None else f"{100.0 * value:.1f}%"


def print_reports(reports: Sequence[SliceReport], labels: Sequence[str]) -> None:
    """Slice table on standard output; accuracies as percentages."""
    rows = []
    for label, report in zip(labels, reports):
        row: Dict[str, Any] = {
            "slice": label,
            "size": report.slice_size,
            "mean_loss": round(report.mean_loss, 4),
            "accuracy": _percent(report.accuracy),
            "gap": _percent(report.performance_gap),
            "compactness": round(report.coherence.compactness, 3),
        }
        for k, value in report.precision_at.items():
            row[f"P@{k}"] = round(value, 3)
        if report.average_precision is not None:
            row["AP"] = round(report.average_precision, 3)
        rows.append(row)
    print(pd.DataFrame(rows).to_string(index=False))


def cmd_discover(args: argparse.Namespace) -> int:
    """Discover slices on ``--input``; optionally apply slicers to ``--test``."""
    out_dir = _out_dir(args)
    manifest = RunManifest(command="discover")
    if args.category_column and args.slices != 1:
        raise ConfigError("--category-column gives one slice per category; do not combine it with --slices")
    if args.category_column and args.input.endswith(".slb"):
        raise ConfigError("--category-column needs a CSV input; SLB1 files carry no category column")
    manifest.add_input(args.input)
    manifest.add_input(args.test)

    bundle = load_dataset(args.input, args)
    graph_config = _graph_config(args)
    solver_config = _solver_config(args)
    train_config = _train_config(args)
    alpha = args.alpha if args.alpha is not None else default_alpha(bundle.n)
    eval_config = _eval_config(args, alpha)

    lam = _lambda(args)
    tuning: Optional[Dict[str, Any]] = None
    if args.tune:
        result = tune_lambda(
            bundle,
            default_lambda_grid(),
            alpha,
            eval_config.epsilon,
            _seed(args),
            graph_config,
            solver_config,
            train_config,
        )
        lam = result.chosen_lambda
        tuning = result.model_dump()

    solver_payload: Dict[str, Any]
    if args.category_column:
        categories = load_csv_column(args.input, args.category_column)
        per_category = discover_per_category(bundle, categories, graph_config, args.alpha, lam, solver_config)
        labels = list(per_category)
        masks = [per_category[c] for c in labels]
        solver_payload = {"categories": {c: m.indices().tolist() for c, m in per_category.items()}}
    else:
        rounds = discover_rounds(bundle, graph_config, alpha, lam, solver_config, count=args.slices)
        masks = [r.mask for r in rounds]
        labels = [str(i) for i in range(len(masks))]
        solver_payload = {
            "rounds": [
                {**r.result.to_dict(r.problem), "rows": r.rows.tolist(), "slice": r.mask.indices().tolist()}
                for r in rounds
            ]
        }
    write_masks(str(out_dir / "slices.csv"), bundle, masks)
    write_json(str(out_dir / "solver.json"), solver_payload)

    reports: List[SliceReport]
    if args.test and not args.no_classifier:
        test = load_dataset(args.test, args)
        test_graph = build_knn_graph(test.embeddings, graph_config)
        reports = []
        for label, mask in zip(labels, masks):
            model = train_slicer(bundle.embeddings, mask, train_config)
            save_model(model, str(out_dir / f"slicer_{label}.json"))
            scores = predict_proba(model, test.embeddings)
            selected = select_test_slice(scores, alpha)
            reports.append(evaluate_slice(test, test_graph, selected, eval_config, scores=scores))
    else:
        graph = _input_graph(bundle, graph_config, args)
        reports = [evaluate_slice(bundle, graph, mask, eval_config) for mask in masks]
    write_report(str(out_dir / "report.json"), reports, {"labels": labels})
    print_reports(reports, labels)

    manifest.parameters = {
        "alpha": alpha,
        "lambda": lam,
        "epsilon": eval_config.epsilon,
        "slices": args.slices,
        "category_column": args.category_column,
        "no_classifier": args.no_classifier,
        "graph": graph_config.model_dump(),
        "solver": solver_config.model_dump(),
        "slicer": train_config.model_dump(),
        "tuning": tuning,
    }
    manifest.outputs = ["slices.csv", "solver.json", "report.json", "metrics.prom"]
    write_metrics(str(out_dir / "metrics.prom"))
    manifest.write(out_dir)
    return 0


def _read_masks(path: str, n: int) -> List[SliceMask]:
    if not Path(path).exists():
        raise InputError(f"missing file: {path}")
    frame = pd.read_csv(path)
    for column in ("slice", "index"):
        if column not in frame.columns:
            raise InputError("missing column", column=column)
    indices = frame["index"].to_numpy()
    if indices.size and (indices.min() < 0 or indices.max() >= n):
        raise InputError(f"slice index outside [0, {n})", column="index")
    return [
        SliceMask.from_indices(group["index"].to_numpy(), n)
        for _, group in frame.groupby("slice", sort=True)
    ]


def cmd_evaluate(args: argparse.Namespace) -> int:
    """Evaluate stored slice masks against a dataset."""
    out_dir = _out_dir(args)
    manifest = RunManifest(command="evaluate")
    manifest.add_input(args.input)
    manifest.add_input(args.masks)

    bundle = load_dataset(args.input, args)
    graph_config = _graph_config(args)
    eval_config = _eval_config(args)
    if args.masks:
        masks = _read_masks(args.masks, bundle.n)
    else:
        masks = [SliceMask(np.ones(bundle.n, dtype=bool))]
    if not masks:
        raise InputError(f"no slices in {args.masks}")

    graph = _input_graph(bundle, graph_config, args)
    reports = [evaluate_slice(bundle, graph, mask, eval_config) for mask in masks]
    labels = [str(i) for i in range(len(masks))]
    write_report(str(out_dir / "report.json"), reports, {"labels": labels})
    print_reports(reports, labels)

    outputs = ["report.json", "metrics.prom"]
    if args.project:
        if not 0 <= args.slice_index < len(masks):
            raise ConfigError(f"--slice-index {args.slice_index} outside [0, {len(masks)})")
        projection = project_2d(bundle.embeddings)
        write_projection(str(out_dir / "projection.csv"), bundle, projection, masks[args.slice_index])
        outputs.append("projection.csv")

    manifest.parameters = {
        "graph": graph_config.model_dump(),
        "evaluation": eval_config.model_dump(),
        "project": args.project,
        "slice_index": args.slice_index,
    }
    manifest.outputs = outputs
    write_metrics(str(out_dir / "metrics.prom"))
    manifest.write(out_dir)
    return 0


def _generator_params(
    args: argparse.Namespace, n: Optional[int] = None, overrides: Optional[Dict[str, Any]] = None
) -> GeneratorParams:
    synth = defaults("synth")
    if n is not None:
        synth["n"] = n
    synth.update(overrides or {})
    if getattr(args, "n", None) is not None:
        synth["n"] = args.n
    return GeneratorParams(**synth)


def cmd_synth(args: argparse.Namespace) -> int:
    """Write a synthetic setting as SLB1 files plus planted truth."""
    out_dir = _out_dir(args)
    manifest = RunManifest(command="synth")
    params = _generator_params(args, overrides={"strict_purity": True} if args.strict_purity else None)
    seed = _seed(args)
    diagnostics: Dict[str, Any]

    if args.kind == "nested":
        nested = generate_nested_setting(params, seed)
        save_binary(nested.bundle, str(out_dir / "nested.slb"))
        lattice = pd.DataFrame({name: mask.member for name, mask in nested.lattice.items() if name != "all"})
        lattice.insert(0, "index", np.arange(nested.bundle.n))
        lattice.to_csv(out_dir / "lattice.csv", index=False)
        manifest.outputs = ["nested.slb", "lattice.csv"]
        diagnostics = {"kind": "nested", "seed": seed, "n": nested.bundle.n, **nested.lattice_diagnostics()}
        print(pd.DataFrame([diagnostics]).to_string(index=False))
    else:
        setting = generate_setting(args.kind, params, seed)
        save_binary(setting.validation, str(out_dir / "validation.slb"))
        save_binary(setting.test, str(out_dir / "test.slb"))
        truth = pd.concat(
            [
                pd.DataFrame({"split": name, "index": np.arange(b.n), "planted": b.outcomes.slice_label})
                for name, b in (("validation", setting.validation), ("test", setting.test))
            ],
            ignore_index=True,
        )
        truth.to_csv(out_dir / "truth.csv", index=False)
        manifest.outputs = ["validation.slb", "test.slb", "truth.csv"]
        diagnostics = {
            "kind": setting.kind,
            "seed": seed,
            "attempts": setting.attempts,
            "neighbor_purity": round(setting.neighbor_purity, 4),
            "purity_floor": round(setting.purity_floor, 4),
            "purity_gate_passed": setting.purity_gate_passed,
            "planted_val": setting.planted_mask_val.size,
            "planted_test": setting.planted_mask_test.size,
        }
        print(pd.DataFrame([diagnostics]).to_string(index=False))

    manifest.parameters = {"kind": args.kind, "seed": seed, "generator": params.model_dump()}
    manifest.diagnostics = diagnostics
    manifest.write(out_dir)
    return 0


BENCH_SPEC_KEYS = {"kinds", "settings_per_kind", "seed", "generator"}


def _bench_spec(path: str) -> Dict[str, Any]:
    """Benchmark settings file; command-line flags take precedence over it."""
    spec = load_config_file(path)
    if not isinstance(spec, dict):
        raise InputError(f"settings file must hold a mapping: {path}")
    unknown = sorted(set(spec) - BENCH_SPEC_KEYS)
    if unknown:
        raise ConfigError(f"unknown keys in {path}: {', '.join(unknown)}")
    return spec


def cmd_bench(args: argparse.Namespace) -> int:
    """Run MCSD and the top-loss baseline over generated settings."""
    out_dir = _out_dir(args)
    manifest = RunManifest(command="bench")
    manifest.add_input(args.settings)
    spec = _bench_spec(args.settings) if args.settings else {}
    profile = defaults("bench").get("quick" if args.quick else "full") or {}
    per_kind = int(
        args.settings_per_kind or spec.get("settings_per_kind") or profile.get("settings_per_kind", 10)
    )
    params = _generator_params(args, n=profile.get("n"), overrides=spec.get("generator"))
    kinds = args.kind or list(spec.get("kinds") or KINDS)
    seed = int(args.seed if args.seed is not None else spec.get("seed", 0))
    alpha = args.alpha if args.alpha is not None else default_alpha(params.n)
    lam = _lambda(args)

    config = BenchConfig(
        graph=_graph_config(args),
        solver=_solver_config(args),
        slicer=_train_config(args),
        evaluation=_eval_config(args, alpha),
    )
    settings = make_settings(kinds, per_kind, params, seed)
    rows = run_benchmark(settings, alpha, lam, config)
    table = aggregate(rows)
    table.to_csv(out_dir / "bench.csv", index=False)
    rows_frame(rows).to_csv(out_dir / "bench_rows.csv", index=False)
    write_json(
        str(out_dir / "bench.json"),
        {
            "table": table.to_dict(orient="records"),
            "rows": [r.model_dump() for r in rows],
        },
    )
    print(table.to_string(index=False))

    manifest.parameters = {
        "kinds": kinds,
        "settings_per_kind": per_kind,
        "seed": seed,
        "alpha": alpha,
        "lambda": lam,
        "generator": params.model_dump(),
        "config": config.model_dump(),
    }
    manifest.outputs = ["bench.csv", "bench_rows.csv", "bench.json", "metrics.prom"]
    write_metrics(str(out_dir / "metrics.prom"))
    manifest.write(out_dir)
    return 0


def _floats(text: Optional[str]) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()] if text else []


def cmd_sweep(args: argparse.Namespace) -> int:
    """Sensitivity of the direct slice to λ, α and k."""
    out_dir = _out_dir(args)
    manifest = RunManifest(command="sweep")
    manifest.add_input(args.input)

    bundle = load_dataset(args.input, args)
    base_alpha = args.alpha if args.alpha is not None else default_alpha(bundle.n)
    base_lambda = _lambda(args)
    base_k = _graph_config(args).k
    lambdas = _floats(args.lambdas) or default_lambda_grid()
    alphas = _floats(args.alphas)
    ks = [int(v) for v in _floats(args.ks)]

    points = sweep_hyperparameters(
        bundle, lambdas, alphas, ks, base_lambda, base_alpha, base_k, _solver_config(args)
    )
    frame = pd.DataFrame([p.model_dump() for p in points])
    frame.to_csv(out_dir / "sweep.csv", index=False)
    print(frame.to_string(index=False))

    manifest.parameters = {
        "base": {"lambda": base_lambda, "alpha": base_alpha, "k": base_k},
        "lambdas": lambdas,
        "alphas": alphas,
        "ks": ks,
    }
    manifest.outputs = ["sweep.csv", "metrics.prom"]
    write_metrics(str(out_dir / "metrics.prom"))
    manifest.write(out_dir)
    return 0
