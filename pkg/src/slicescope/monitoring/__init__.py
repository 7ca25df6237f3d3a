"""Run metrics collected in a dedicated Prometheus registry."""

from prometheus_client import CollectorRegistry, Counter, Histogram, write_to_textfile

registry = CollectorRegistry()

knn_build_seconds = Histogram(
    "slicescope_knn_build_seconds",
    "kNN graph construction time in seconds",
    registry=registry,
)

solver_runs = Counter(
    "slicescope_solver_runs_total",
    "Total number of solver restarts executed",
    ["method"],
    registry=registry,
)

solver_iterations = Histogram(
    "slicescope_solver_iterations",
    "Iterations per solver restart",
    buckets=(1, 5, 10, 25, 50, 100, 250, 500, 1000),
    registry=registry,
)

slices_discovered = Counter(
    "slicescope_slices_discovered_total",
    "Total number of error slices extracted",
    registry=registry,
)

slicer_trainings = Counter(
    "slicescope_slicer_trainings_total",
    "Total number of slicing functions trained",
    ["architecture"],
    registry=registry,
)


def write_metrics(path: str) -> None:
    """Write the registry in text exposition format."""
    write_to_textfile(path, registry)
