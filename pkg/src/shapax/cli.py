"""
Command line interface
======================

Subcommands:

``explain KIND``
    Attributions of one observation or of every row of the dataset, exact
    or by Monte Carlo estimation.
``exact KIND``
    Same as ``explain --exact``.
``experiment ID``
    Convergence experiment, writes ``convergence.csv`` and ``summary.json``.
``validate``
    Checks structural properties of the game values for a model and dataset.

Exit status is 0 on success, 1 for invalid input or exceeded limits and 2
for failed invariants or internal errors.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import datetime
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .coalition import Partition
from .constants import EXACT_LIMIT, NORMALIZATION_TOL, VARIANCE_BOUND_LIMIT
from .data import Dataset
from .errors import ContractError, InvariantViolation, ShapaxError
from .experiments import (
    DEFAULT_GRID,
    EXPERIMENTS,
    ExperimentSpec,
    run_convergence,
    write_convergence_csv,
    write_summary_json,
)
from .game import (
    AttributionVector,
    MarginalGame,
    check_point,
    exact_coalitional_value,
    exact_linear_value,
    exact_quotient_value,
    exact_two_step,
    coalitional_value_of,
    linear_value_of,
    quotient_value_of,
    two_step_value_of,
)
from .mc import (
    mc_coalitional_value,
    mc_linear_value,
    mc_quotient_value,
    mc_two_step,
    mode_from_name,
    variance_bound_check,
)
from .model import ModelSpec, load_model
from .sampling import permutation_law
from .weights import CoalitionalWeightScheme, SchemeKind, WeightScheme

logger = logging.getLogger(__name__)

KINDS = ("shapley", "banzhaf", "quotient", "owen", "banzhaf-owen", "two-step")
GROUPED = ("quotient", "owen", "banzhaf-owen", "two-step")
CSV_COLUMNS = ("observation", "index", "name", "value", "stderr", "kind", "game")

PERMUTATION_CHECK_LIMIT = 8


@dataclass(frozen=True)
class RunConfig:
    """
    Resolved configuration of an ``explain``, ``exact`` or ``validate`` run.

    Rows and partition indices are 1-based as on the command line.
    """

    command: str
    kind: str
    model: str
    data: str
    row: Optional[int] = None
    point: Optional[Tuple[float, ...]] = None
    all_rows: bool = False
    partition: Optional[Tuple[Tuple[int, ...], ...]] = None
    scheme: str = "shapley"
    mode: str = "exact"
    iterations: Optional[int] = None
    seed: int = 0
    centered: bool = False
    output: Optional[str] = None
    format: str = "json"
    threads: int = 1
    limit: int = EXACT_LIMIT

    def __post_init__(self):
        sources = sum((self.row is not None, self.point is not None, self.all_rows))
        if sources != 1:
            raise ContractError("give exactly one of --row, --point and --all-rows")
        if self.row is not None and self.row < 1:
            raise ContractError(f"rows are numbered from 1, got {self.row}")
        if self.kind in GROUPED and self.partition is None:
            raise ContractError(f"{self.kind} values need a --partition")
        if self.mode == "empirical" and (self.iterations is None or self.iterations < 1):
            raise ContractError("--mode empirical needs a positive --iterations")
        if self.mode != "empirical" and self.iterations is not None:
            raise ContractError("--iterations applies to --mode empirical only")
        if self.threads < 1:
            raise ContractError(f"need at least one thread, got {self.threads}")
        if self.limit < 1:
            raise ContractError(f"limit must be positive, got {self.limit}")

    def check(self, n: int, rows: int):
        """Check the configuration against the model and dataset dimensions."""
        if self.row is not None and self.row > rows:
            raise ContractError(f"row {self.row} exceeds the {rows} dataset rows")
        if self.point is not None and len(self.point) != n:
            raise ContractError(f"--point has {len(self.point)} entries, model has {n} features")

    def to_dict(self) -> dict:
        config = asdict(self)
        if self.point is not None:
            config["point"] = list(self.point)
        if self.partition is not None:
            config["partition"] = [list(g) for g in self.partition]
        return config


def _point(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated list of reals: {text!r}")


def _partition_lists(text: str) -> Tuple[Tuple[int, ...], ...]:
    if not text.lstrip().startswith("["):
        try:
            with open(text, encoding="utf-8") as fd:
                text = fd.read()
        except OSError as err:
            raise argparse.ArgumentTypeError(f"cannot read partition: {err}") from None
    try:
        groups = json.loads(text)
    except json.JSONDecodeError as err:
        raise ContractError(f"partition is not valid JSON: {err}") from None
    if not isinstance(groups, list) or not all(
        isinstance(g, list) and all(isinstance(i, int) for i in g) for g in groups
    ):
        raise ContractError("partition must be a JSON list of integer lists")
    return tuple(tuple(g) for g in groups)


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ContractError(message)


def _common(parser: argparse.ArgumentParser):
    group = parser.add_mutually_exclusive_group()
    group.add_argument(
        "-v", "--verbose", action="count", default=0, help="More log output, repeatable"
    )
    group.add_argument("-q", "--quiet", action="store_true", help="Only log errors")
    parser.add_argument(
        "--threads", type=int, default=1, help="Worker threads, results do not depend on it"
    )
    parser.add_argument(
        "--limit",
        type=int,
        default=EXACT_LIMIT,
        help=f"Largest number of players for exact enumeration (default {EXACT_LIMIT})",
    )


def _inputs(parser: argparse.ArgumentParser):
    parser.add_argument("--model", required=True, help="Model configuration as JSON file")
    parser.add_argument("--data", required=True, help="Background dataset as CSV file")
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--row", type=int, help="Explain row ROW of the dataset (1-based)")
    source.add_argument("--point", type=_point, help="Explain a comma separated observation")
    parser.add_argument(
        "--partition", type=_partition_lists, help="JSON list of 1-based index lists, or a file"
    )
    parser.add_argument(
        "--scheme",
        choices=("shapley", "banzhaf"),
        default="shapley",
        help="Coalition weights of quotient values and of the validate checks",
    )
    return source


def _explain_flags(parser: argparse.ArgumentParser, exact: bool):
    parser.add_argument("kind", choices=KINDS, help="Game value to compute")
    source = _inputs(parser)
    source.add_argument("--all-rows", action="store_true", help="Explain every dataset row")
    if not exact:
        mode = parser.add_mutually_exclusive_group()
        mode.add_argument("--exact", action="store_true", help="Enumerate all coalitions")
        mode.add_argument(
            "--mode",
            choices=("true", "empirical"),
            help="Monte Carlo sampler, one pass over the data or free iterations",
        )
        parser.add_argument("--iterations", type=int, help="Monte Carlo iterations")
        parser.add_argument("--seed", type=int, default=0, help="Seed of the random streams")
    parser.add_argument(
        "--centered",
        action="store_true",
        help="Two-step values with the stand-alone group worth taken relative to v({})",
    )
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("-o", "--output", help="Output file, standard output by default")
    _common(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="shapax", description="Shapley-type attributions of the marginal game"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    _explain_flags(sub.add_parser("explain", help="Attributions, exact or Monte Carlo"), False)
    _explain_flags(sub.add_parser("exact", help="Attributions by exact enumeration"), True)

    experiment = sub.add_parser("experiment", help="Monte Carlo convergence experiment")
    experiment.add_argument("id", choices=EXPERIMENTS, help="Experiment identifier")
    experiment.add_argument("--p", type=int, help="Number of predictors")
    experiment.add_argument(
        "--any-p", action="store_true", help="Allow numbers of predictors beyond the defined ones"
    )
    experiment.add_argument("--runs", type=int, default=50, help="Runs per grid point")
    experiment.add_argument("--size", type=int, default=100, help="Background dataset size")
    experiment.add_argument("--kmin", type=int, default=9, help="Smallest K is 2^KMIN")
    experiment.add_argument("--kmax", type=int, default=14, help="Largest K is 2^KMAX")
    experiment.add_argument("--seed", type=int, default=0, help="Seed of data and streams")
    experiment.add_argument("--output-dir", default=".", help="Directory of the result files")
    experiment.add_argument("--progress", action="store_true", help="Show a progress bar")
    _common(experiment)

    validate = sub.add_parser("validate", help="Check invariants on a model and dataset")
    _inputs(validate)
    _common(validate)
    return parser


def _configure_logging(args: argparse.Namespace):
    if args.quiet:
        level = logging.ERROR
    else:
        level = max(logging.DEBUG, logging.WARNING - 10 * args.verbose)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def run_config(args: argparse.Namespace) -> RunConfig:
    command = args.command
    if command == "exact":
        mode, iterations, seed = "exact", None, 0
    else:
        mode = "exact" if args.exact or args.mode is None else args.mode
        iterations, seed = args.iterations, args.seed
    return RunConfig(
        command=command,
        kind=args.kind,
        model=args.model,
        data=args.data,
        row=args.row,
        point=args.point,
        all_rows=args.all_rows,
        partition=args.partition,
        scheme=args.scheme,
        mode=mode,
        iterations=iterations,
        seed=seed,
        centered=args.centered,
        output=args.output,
        format=args.format,
        threads=args.threads,
        limit=args.limit,
    )


def attribute(
    config: RunConfig,
    model: ModelSpec,
    data: Dataset,
    partition: Optional[Partition],
    x_star: np.ndarray,
    replicate: int = 0,
) -> AttributionVector:
    """Compute the attribution requested by a run configuration."""
    kind, threads = config.kind, config.threads
    scheme = WeightScheme.banzhaf() if config.scheme == "banzhaf" else WeightScheme.shapley()
    if kind in ("shapley", "banzhaf"):
        scheme = WeightScheme.banzhaf() if kind == "banzhaf" else WeightScheme.shapley()
    cw = (
        CoalitionalWeightScheme.banzhaf_owen()
        if kind == "banzhaf-owen"
        else CoalitionalWeightScheme.owen()
    )

    if config.mode == "exact":
        exact = {"limit": config.limit, "n_jobs": threads}
        if kind in ("shapley", "banzhaf"):
            return exact_linear_value(model, data, x_star, scheme, **exact)
        if kind == "quotient":
            return exact_quotient_value(model, data, x_star, partition, scheme, **exact)
        if kind == "two-step":
            return exact_two_step(model, data, x_star, partition, config.centered, **exact)
        return exact_coalitional_value(model, data, x_star, partition, cw, **exact)

    mode = mode_from_name(config.mode, config.iterations)
    mc = {"seed": config.seed, "replicate": replicate, "n_jobs": threads}
    if kind in ("shapley", "banzhaf"):
        return mc_linear_value(model, data, x_star, scheme, mode, **mc)
    if kind == "quotient":
        return mc_quotient_value(model, data, x_star, partition, scheme, mode, **mc)
    if kind == "two-step":
        return mc_two_step(model, data, x_star, partition, mode, centered=config.centered, **mc)
    return mc_coalitional_value(model, data, x_star, partition, cw, mode, **mc)


def _observations(config: RunConfig, data: Dataset) -> Iterator[Tuple[object, np.ndarray, int]]:
    """Observation label, point and replicate number of every requested observation."""
    if config.point is not None:
        yield "point", np.array(config.point), 0
    elif config.row is not None:
        yield config.row, data[config.row - 1], config.row - 1
    else:
        for r in range(len(data)):
            yield r + 1, data[r], r


def _load(config: RunConfig):
    model = load_model(config.model)
    data = Dataset.from_csv(config.data)
    if data.n != model.n:
        raise ContractError(f"dataset has {data.n} columns, model expects {model.n} features")
    config.check(model.n, len(data))
    partition = None
    if config.partition is not None:
        partition = Partition.from_lists(config.partition, model.n, one_based=True)
    return model, data, partition


def _cell(value):
    return repr(value) if isinstance(value, float) else value


class _Writer:
    """Streams attribution results as JSON or CSV."""

    def __init__(self, fd, config: RunConfig):
        self.fd = fd
        self.format = config.format
        self.count = 0
        if self.format == "csv":
            self.csv = csv.writer(fd, lineterminator="\n")
            self.csv.writerow(CSV_COLUMNS)
        else:
            created = datetime.datetime.now(datetime.timezone.utc).isoformat()
            head = json.dumps({"config": config.to_dict(), "created": created})
            fd.write(head[:-1] + ', "results": [\n')

    def write(self, observation, result: AttributionVector):
        records = result.to_records()
        if self.format == "csv":
            for record in records:
                values = [record[column] for column in CSV_COLUMNS[1:]]
                self.csv.writerow([observation] + [_cell(v) for v in values])
        else:
            entry = json.dumps({"observation": observation, "attributions": records})
            self.fd.write(("" if self.count == 0 else ",\n") + "  " + entry)
        self.count += 1
        self.fd.flush()

    def close(self):
        if self.format == "json":
            self.fd.write("\n]}\n")
        self.fd.flush()


def _open_output(path: Optional[str]):
    if path is None:
        return contextlib.nullcontext(sys.stdout)
    return open(path, "w", encoding="utf-8", newline="")


def cmd_explain(config: RunConfig) -> int:
    """Write the attributions of the configured observations."""
    model, data, partition = _load(config)
    logger.info("explaining with %s values, mode %s", config.kind, config.mode)
    with _open_output(config.output) as fd:
        writer = _Writer(fd, config)
        for observation, x_star, replicate in _observations(config, data):
            result = attribute(config, model, data, partition, x_star, replicate)
            writer.write(observation, result)
        writer.close()
    return 0


def cmd_exact(config: RunConfig) -> int:
    """Write brute-force attributions, the configuration must not ask for sampling."""
    if config.mode != "exact":
        raise ContractError(f"exact attributions cannot use --mode {config.mode}")
    return cmd_explain(config)


def cmd_experiment(args: argparse.Namespace) -> int:
    """Run a convergence experiment and write its run table and summary."""
    if args.kmin > args.kmax:
        raise ContractError(f"--kmin {args.kmin} exceeds --kmax {args.kmax}")
    grid = tuple(2**r for r in range(args.kmin, args.kmax + 1)) or DEFAULT_GRID
    spec = ExperimentSpec(
        args.id,
        p=args.p,
        size=args.size,
        grid=grid,
        runs=args.runs,
        seed=args.seed,
        any_p=args.any_p,
    )
    result = run_convergence(spec, n_jobs=args.threads, progress=args.progress, limit=args.limit)
    os.makedirs(args.output_dir, exist_ok=True)
    with open(os.path.join(args.output_dir, "convergence.csv"), "w", encoding="utf-8", newline="") as fd:
        write_convergence_csv(spec, result.rows, fd)
    with open(os.path.join(args.output_dir, "summary.json"), "w", encoding="utf-8") as fd:
        write_summary_json(result.summary, fd)
    slope = result.summary["mise_slope"]
    print(f"experiment {spec.id}: MISE slope {'n/a' if slope is None else format(slope, '.3f')}")
    return 0


class Check:
    """Outcome of a single invariant check."""

    def __init__(self, name: str, status: str, detail: str = ""):
        self.name = name
        self.status = status
        self.detail = detail

    def __str__(self) -> str:
        line = f"{self.status:7s} {self.name}"
        return f"{line}: {self.detail}" if self.detail else line


def _agree(name: str, actual: Sequence[float], expected: Sequence[float]):
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    bad = np.abs(actual - expected) > 1e-10 * np.maximum(1.0, np.abs(expected))
    if np.any(bad):
        k = int(np.argmax(bad))
        raise InvariantViolation(f"{name}: entry {k + 1} is {actual[k]!r}, expected {expected[k]!r}")


def _grouped_checks(
    game: MarginalGame, partition: Partition, scheme: WeightScheme, values: np.ndarray
) -> List[Check]:
    """Reductions of the grouped values to linear values and their group sums."""
    n = game.n
    shapley = WeightScheme.shapley()
    owen = CoalitionalWeightScheme.owen()
    singletons, trivial = Partition.singletons(n), Partition.trivial(n)
    phi = [linear_value_of(game, shapley, i) for i in range(n)]
    checks = []

    _agree(
        "quotient with singletons",
        [quotient_value_of(game, singletons, scheme, i) for i in range(n)],
        values,
    )
    checks.append(Check("quotient with singletons", "ok"))
    _agree(
        "owen with singletons",
        [coalitional_value_of(game, singletons, owen, i) for i in range(n)],
        phi,
    )
    checks.append(Check("owen with singletons", "ok"))
    _agree(
        "owen with one group",
        [coalitional_value_of(game, trivial, owen, i) for i in range(n)],
        phi,
    )
    checks.append(Check("owen with one group", "ok"))
    _agree(
        "two-step with singletons",
        [two_step_value_of(game, singletons, i) for i in range(n)],
        phi,
    )
    checks.append(Check("two-step with singletons", "ok"))

    quotient = [quotient_value_of(game, partition, shapley, j) for j in range(partition.m)]
    owen_values = [coalitional_value_of(game, partition, owen, i) for i in range(n)]
    _agree(
        "owen group sums",
        [math.fsum(owen_values[i] for i in group) for group in partition.groups],
        quotient,
    )
    checks.append(Check("owen group sums", "ok", f"{partition.m} groups"))

    # groups of two or more keep the stand-alone worth v(S_j), leaving -v({})
    empty = game.table()[0]
    two_step = [two_step_value_of(game, partition, i) for i in range(n)]
    _agree(
        "two-step group sums",
        [math.fsum(two_step[i] for i in group) for group in partition.groups],
        [q - empty if len(group) > 1 else q for q, group in zip(quotient, partition.groups)],
    )
    checks.append(Check("two-step group sums", "ok", f"{partition.m} groups"))
    return checks


def validate_invariants(
    model: ModelSpec,
    data: Dataset,
    x_star: np.ndarray,
    scheme: WeightScheme,
    limit: int = EXACT_LIMIT,
    n_jobs: int = 1,
    partition: Optional[Partition] = None,
) -> List[Check]:
    """
    Check weight normalization, efficiency, the null player property,
    exactness of the permutation sampler and the variance bound. With a
    partition the reductions and group sums of the grouped values are
    checked as well.

    Raises
    ------
    InvariantViolation
        On the first failed check.
    """
    n = model.n
    checks = []

    try:
        scheme.check_normalized(n)
    except ContractError as err:
        raise InvariantViolation(f"weight normalization: {err}") from None
    checks.append(Check("weight normalization", "ok"))

    if n > limit:
        detail = f"{n} features exceed the limit of {limit}"
        checks.append(Check("efficiency", "skipped", detail))
        checks.append(Check("null player", "skipped", detail))
        if partition is not None:
            checks.append(Check("grouped values", "skipped", detail))
    else:
        game = MarginalGame(model, data, x_star, n_jobs=n_jobs)
        table = game.table()
        values = np.array([linear_value_of(game, scheme, i) for i in range(n)])
        if scheme.kind is SchemeKind.SHAPLEY:
            total = math.fsum(values.tolist())
            gain = table[-1] - table[0]
            if abs(total - gain) > 1e-10 * max(1.0, abs(gain)):
                raise InvariantViolation(f"efficiency: values sum to {total!r}, v(N) - v({{}}) = {gain!r}")
            checks.append(Check("efficiency", "ok", f"sum {total:.12g}"))
        else:
            checks.append(Check("efficiency", "skipped", "not a Shapley scheme"))
        null = sorted(set(range(n)) - model.features())
        for i in null:
            if values[i] != 0.0:
                raise InvariantViolation(
                    f"null player: feature {i + 1} is unused but receives {values[i]!r}"
                )
        checks.append(Check("null player", "ok", f"{len(null)} unused features"))
        if partition is not None:
            checks.extend(_grouped_checks(game, partition, scheme, values))

    if n <= PERMUTATION_CHECK_LIMIT:
        shapley = WeightScheme.shapley()
        for i in range(n):
            for bits, p in permutation_law(i, n).items():
                s = bin(bits).count("1")
                if abs(p - shapley.weight(s, n)) > NORMALIZATION_TOL:
                    raise InvariantViolation(
                        f"permutation sampler: coalition {bits:#x} of player {i + 1} "
                        f"has probability {p!r}"
                    )
        checks.append(Check("permutation sampler", "ok"))
    else:
        checks.append(Check("permutation sampler", "skipped", f"more than {PERMUTATION_CHECK_LIMIT} features"))

    if n <= VARIANCE_BOUND_LIMIT:
        for i in range(n):
            bound = variance_bound_check(model, data, x_star, scheme, i)
            if not bound.holds:
                raise InvariantViolation(
                    f"variance bound: feature {i + 1} has variance {bound.variance!r} "
                    f"above {bound.bound!r}"
                )
        checks.append(Check("variance bound", "ok"))
    else:
        checks.append(Check("variance bound", "skipped", f"more than {VARIANCE_BOUND_LIMIT} features"))
    return checks


def cmd_validate(args: argparse.Namespace) -> int:
    """Run the invariant checks at one observation, the first row by default."""
    model = load_model(args.model)
    data = Dataset.from_csv(args.data)
    if data.n != model.n:
        raise ContractError(f"dataset has {data.n} columns, model expects {model.n} features")
    if args.point is not None:
        x_star = check_point(args.point, model.n)
    else:
        row = 1 if args.row is None else args.row
        if not 1 <= row <= len(data):
            raise ContractError(f"row {row} is not in 1..{len(data)}")
        x_star = data[row - 1]
    partition = None
    if args.partition is not None:
        partition = Partition.from_lists(args.partition, model.n, one_based=True)
    scheme = WeightScheme.banzhaf() if args.scheme == "banzhaf" else WeightScheme.shapley()
    checks = validate_invariants(model, data, x_star, scheme, args.limit, args.threads, partition)
    for check in checks:
        print(check)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point of the ``shapax`` command."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ContractError as err:
        print(f"shapax: error: {err}", file=sys.stderr)
        return 1
    _configure_logging(args)
    try:
        if args.command == "experiment":
            return cmd_experiment(args)
        if args.command == "validate":
            return cmd_validate(args)
        if args.command == "exact":
            return cmd_exact(run_config(args))
        return cmd_explain(run_config(args))
    except InvariantViolation as err:
        logger.error("invariant violated: %s", err)
        print(f"shapax: invariant violated: {err}", file=sys.stderr)
        return 2
    except (ShapaxError, OSError) as err:
        print(f"shapax: error: {err}", file=sys.stderr)
        return 1
    except Exception:
        logger.exception("unexpected failure")
        return 2
