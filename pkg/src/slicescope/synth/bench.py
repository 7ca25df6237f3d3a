"""Benchmark runs over synthetic settings: MCSD against the top-loss baseline."""

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from slicescope.dataset_io import DatasetBundle
from slicescope.errors import ConfigError
from slicescope.evaluation import EvalConfig, SliceReport, evaluate_slice
from slicescope.knn_graph import GraphBuildConfig, build_knn_graph
from slicescope.slicer import TrainConfig, predict_proba, select_test_slice, train_slicer
from slicescope.solver import SolverConfig
from slicescope.solver.discovery import discover_slices
from slicescope.synth import GeneratorParams, SyntheticSetting, generate_setting
from slicescope.tasks import parallel_map

METRIC_COLUMNS = ["Precision@10", "Precision@25", "Average Precision", "Manifold Comp."]


class BenchConfig(BaseModel):
    graph: GraphBuildConfig = Field(default_factory=GraphBuildConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    slicer: TrainConfig = Field(default_factory=TrainConfig)
    evaluation: EvalConfig = Field(default_factory=EvalConfig)
    threads: Optional[int] = Field(None, ge=1)


class BenchRow(BaseModel):
    kind: str
    seed: int
    method: str
    report: SliceReport

    def metrics(self) -> Dict[str, float]:
        precision = self.report.precision_at
        return {
            "Precision@10": precision.get("10", float("nan")),
            "Precision@25": precision.get("25", float("nan")),
            "Average Precision": (
                float("nan") if self.report.average_precision is None else self.report.average_precision
            ),
            "Manifold Comp.": self.report.coherence.compactness,
        }


def make_settings(
    kinds: Sequence[str], per_kind: int, params: GeneratorParams, seed: int
) -> List[SyntheticSetting]:
    """``per_kind`` settings of each kind with seeds ``seed``, ``seed + 1``, ..."""
    return [generate_setting(kind, params, seed + i) for kind in kinds for i in range(per_kind)]


def _methods(lam: float) -> List[Tuple[str, float]]:
    return [("mcsd", lam), ("top_loss", 0.0)]


def run_setting(setting: SyntheticSetting, alpha: float, lam: float, config: BenchConfig) -> List[BenchRow]:
    """Discover on validation, train the slicer, select and evaluate on test."""
    test: DatasetBundle = setting.test
    test_graph = build_knn_graph(test.embeddings, config.graph)
    rows = []
    for method, method_lam in _methods(lam):
        (mask,) = discover_slices(setting.validation, config.graph, alpha, method_lam, config.solver)
        model = train_slicer(setting.validation.embeddings, mask, config.slicer)
        scores = predict_proba(model, test.embeddings)
        selected = select_test_slice(scores, alpha)
        report = evaluate_slice(test, test_graph, selected, config.evaluation, scores=scores)
        rows.append(BenchRow(kind=setting.kind, seed=setting.seed, method=method, report=report))
    return rows


def run_benchmark(
    settings: Sequence[SyntheticSetting], alpha: float, lam: float, config: BenchConfig
) -> List[BenchRow]:
    """Per-setting rows in setting order; settings run in parallel."""
    if not settings:
        raise ConfigError("benchmark needs at least one setting")
    per_setting = parallel_map(lambda s: run_setting(s, alpha, lam, config), list(settings), config.threads)
    return [row for rows in per_setting for row in rows]


def aggregate(rows: Sequence[BenchRow]) -> pd.DataFrame:
    """Mean of each metric per (kind, method): one row per kind and method."""
    frame = pd.DataFrame([{"kind": r.kind, "method": r.method, **r.metrics()} for r in rows])
    table = frame.groupby(["kind", "method"], sort=False)[METRIC_COLUMNS].mean().reset_index()
    return table


def rows_frame(rows: Sequence[BenchRow]) -> pd.DataFrame:
    return pd.DataFrame([{"kind": r.kind, "seed": r.seed, "method": r.method, **r.metrics()} for r in rows])


def compactness_wins(rows: Sequence[BenchRow], kind: str = "correlation") -> Tuple[int, int]:
    """(settings where MCSD compactness beats top-loss, settings compared)."""
    by_seed: Dict[int, Dict[str, float]] = {}
    for r in rows:
        if r.kind == kind:
            by_seed.setdefault(r.seed, {})[r.method] = r.report.coherence.compactness
    pairs = [v for v in by_seed.values() if {"mcsd", "top_loss"} <= v.keys()]
    wins = int(np.sum([v["mcsd"] > v["top_loss"] for v in pairs]))
    return wins, len(pairs)
