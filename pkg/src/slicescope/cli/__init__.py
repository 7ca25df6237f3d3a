"""Command-line interface: ``slicescope <command> [options]``."""

import argparse
import sys
from typing import Callable, List, Optional

from pydantic import ValidationError

from slicescope import __version__
from slicescope.cli.commands import cmd_bench, cmd_discover, cmd_evaluate, cmd_sweep, cmd_synth
from slicescope.errors import ConfigError, SliceScopeError
from slicescope.logging_config import log_error
from slicescope.solver import METHOD_ALIASES
from slicescope.synth import KINDS

Command = Callable[[argparse.Namespace], int]


def _add_data_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("CSV columns")
    group.add_argument("--loss-column", default="loss")
    group.add_argument("--id-column")
    group.add_argument("--correct-column")
    group.add_argument("--slice-label-column")
    group.add_argument("--embedding-prefix", help="Wide layout: every column with this prefix (default emb_)")
    group.add_argument("--embedding-columns", help="Wide layout: comma-separated column names")
    group.add_argument("--packed-embedding-column", help="One column of ';'-separated values")


def _add_pipeline_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alpha", type=float, help="Slice proportion (default by dataset size)")
    parser.add_argument("--lambda", dest="lam", type=float, help="Coherence coefficient")
    parser.add_argument("--k", type=int, help="Neighbors per sample")
    parser.add_argument(
        "--method", choices=sorted(METHOD_ALIASES), help="fw: Frank-Wolfe, pg: projected gradient"
    )
    parser.add_argument("--restarts", type=int)
    parser.add_argument("--epsilon", type=float, help="Accuracy-gap threshold")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out-dir", default=".", help="Directory for outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slicescope", description="Discover coherent error slices.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    discover = sub.add_parser("discover", help="Discover slices from embeddings and losses")
    discover.add_argument("--input", required=True)
    discover.add_argument("--test", help="Held-out split scored by the trained slicing function")
    discover.add_argument("--tune", action="store_true", help="Select lambda on held-out halves of --input")
    discover.add_argument("--slices", type=int, default=1, help="Number of disjoint slices")
    discover.add_argument(
        "--no-classifier", action="store_true", help="Evaluate the discovered slice directly"
    )
    discover.add_argument("--category-column", help="Discover one slice per value of this CSV column")
    discover.add_argument("--graph-cache", help="KNG1 file for the input graph used in direct evaluation")
    _add_pipeline_options(discover)
    _add_data_options(discover)
    _add_common(discover)
    discover.set_defaults(handler=cmd_discover)

    evaluate = sub.add_parser("evaluate", help="Evaluate stored slices")
    evaluate.add_argument("--input", required=True)
    evaluate.add_argument("--masks", help="slices.csv from discover (default: whole dataset)")
    evaluate.add_argument("--project", action="store_true", help="Write a 2-D PCA projection CSV")
    evaluate.add_argument("--slice-index", type=int, default=0, help="Slice marked in the projection")
    evaluate.add_argument("--graph-cache", help="KNG1 file reused when it matches the input")
    _add_pipeline_options(evaluate)
    _add_data_options(evaluate)
    _add_common(evaluate)
    evaluate.set_defaults(handler=cmd_evaluate)

    synth = sub.add_parser("synth", help="Generate a synthetic setting")
    synth.add_argument("--kind", required=True, choices=[*KINDS, "nested"])
    synth.add_argument("--n", type=int, help="Samples per split")
    synth.add_argument(
        "--strict-purity", action="store_true", help="Fail when no draw passes the neighbor purity gate"
    )
    _add_common(synth)
    synth.set_defaults(handler=cmd_synth)

    bench = sub.add_parser("bench", help="Benchmark against the top-loss baseline")
    bench.add_argument("--quick", action="store_true", help="Small profile for a fast run")
    bench.add_argument(
        "--settings", help="YAML file with kinds, settings_per_kind, seed and generator parameters"
    )
    bench.add_argument("--kind", action="append", choices=list(KINDS), help="Restrict to a kind (repeatable)")
    bench.add_argument("--settings-per-kind", type=int)
    bench.add_argument("--n", type=int, help="Samples per split")
    _add_pipeline_options(bench)
    _add_common(bench)
    bench.set_defaults(handler=cmd_bench)

    sweep = sub.add_parser("sweep", help="Sensitivity to lambda, alpha and k")
    sweep.add_argument("--input", required=True)
    sweep.add_argument("--lambdas", help="Comma-separated lambda values")
    sweep.add_argument("--alphas", help="Comma-separated alpha values")
    sweep.add_argument("--ks", help="Comma-separated k values")
    _add_pipeline_options(sweep)
    _add_data_options(sweep)
    _add_common(sweep)
    sweep.set_defaults(handler=cmd_sweep)
    return parser


def run(args: argparse.Namespace) -> int:
    """Run a parsed command and map failures to exit codes."""
    handler: Command = args.handler
    try:
        return handler(args)
    except ValidationError as e:
        error = ConfigError(str(e))
        print(f"error: {error}", file=sys.stderr)
        return error.exit_code
    except SliceScopeError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        log_error(e, {"command": args.command})
        print(f"error: {e}", file=sys.stderr)
        return 3


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return run(args)

