"""
cli.py - Command-line front end for PhotOptix

Verbs:
    validate         run every invariant of a scenario file
    simulate         print the outcome probability table (CSV or JSON)
    hom-scan         sweep the overlap or the detector efficiency of a 2-port scenario
    oracle-compare   compare the engine with the brute-force Fock-space oracle
    bench-permanent  time the permanent kernels on random matrices
    multimode-p0     Monte-Carlo vacuum probability of a multimode scenario

Exit codes: 0 success, 1 usage or I/O error, 2 validation, 3 size guard,
4 numerical, 5 oracle mismatch.
"""

import argparse
import json
import logging
import statistics
import sys
import time

import numpy as np
import pandas as pd

from photoptix import scenario_file
from photoptix.distinguishability import model_uniform_overlap
from photoptix.engine import DetectorBank, distribution, probability, with_detectors, with_overlap
from photoptix.errors import (
    EXIT_OK,
    EXIT_ORACLE_MISMATCH,
    EXIT_USAGE,
    DomainError,
    NumericalError,
    PhotoptixError,
    SizeGuardError,
)
from photoptix.linalg import permanent_naive, permanent_ryser
from photoptix.models import MultimodeEstimate
from photoptix.multimode import estimate_vacuum_probability
from photoptix.oracle import oracle_distribution
from photoptix.settings import settings

logger = logging.getLogger(__name__)


class ArgumentParser(argparse.ArgumentParser):
    """argparse parser whose usage errors become PhotoptixError (exit code 1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise PhotoptixError(message)


def _float_format():
    return f"%.{settings.output_significant_digits}g"


def _write_csv(frame):
    frame.to_csv(sys.stdout, index=False, float_format=_float_format(), lineterminator="\n")


def cmd_validate(args):
    """Run all invariants of a scenario file and report the first violation."""
    data = scenario_file.load_document(args.path)
    if scenario_file.is_multimode_document(data):
        scenario, _, digest = scenario_file.load_multimode_scenario(args.path)
        print(f"ok: {args.path} (multimode, {scenario.network.shape[0]} ports, d = {scenario.d})")
    else:
        scenario, _, digest = scenario_file.load_scenario(args.path)
        print(f"ok: {args.path} ({scenario.input_ports} ports, p_max = {scenario.p_max})")
    print(f"digest: {digest}")
    return EXIT_OK


def table_document(table):
    """JSON-ready form of a ProbabilityTable."""
    return {
        "metadata": table.metadata,
        "entries": [
            {"pattern": list(pattern), "probability": value, "path": table.paths.get(pattern, "")}
            for pattern, value in table.entries.items()
        ],
    }


def cmd_simulate(args):
    """Print the probability table of a scenario."""
    scenario, _, digest = scenario_file.load_scenario(args.path)
    table = distribution(scenario, args.max_total, workers=args.workers)
    table.metadata["scenario_digest"] = digest
    for warning in table.metadata.get("warnings", []):
        logger.warning(warning)

    if args.format == "json":
        print(json.dumps(table_document(table), indent=2))
    else:
        _write_csv(table.to_dataframe())
    return EXIT_OK


def cmd_hom_scan(args):
    """Sweep the overlap or the efficiency of a 2-port scenario and print P(1,1), P(2,0), P(0,2)."""
    scenario, _, _ = scenario_file.load_scenario(args.path)
    if scenario.input_ports != 2 or scenario.output_ports != 2:
        raise DomainError(f"hom-scan needs a 2-port scenario, got {scenario.input_ports} ports")
    if args.steps < 1:
        raise DomainError(f"--steps must be at least 1, got {args.steps}")

    rows = []
    for value in np.linspace(args.start, args.stop, args.steps):
        if args.param == "overlap":
            point = with_overlap(scenario, model_uniform_overlap(2, float(value)))
        else:
            point = with_detectors(scenario, DetectorBank.uniform(2, float(value)))
        rows.append(
            {
                "parameter": float(value),
                "P11": probability(point, (1, 1)),
                "P20": probability(point, (2, 0)),
                "P02": probability(point, (0, 2)),
            }
        )
    logger.info(f"{args.param} sweep finished with {len(rows)} points")
    _write_csv(pd.DataFrame(rows, columns=["parameter", "P11", "P20", "P02"]))
    return EXIT_OK


def _default_dimension(scenario, model):
    d = scenario_file.internal_dimension(model)
    if d is not None:
        return d
    eigenvalues = np.linalg.eigvalsh(scenario.gram.v) if scenario.gram.size else np.zeros(0)
    return max(1, int(np.sum(eigenvalues > settings.psd_tolerance)))


def cmd_oracle_compare(args):
    """Print engine and oracle tables side by side; exit 5 when they disagree."""
    scenario, model, digest = scenario_file.load_scenario(args.path)
    d = args.d if args.d is not None else _default_dimension(scenario, model)

    engine_table = distribution(scenario, args.max_total, workers=args.workers)
    oracle_table = oracle_distribution(scenario, d, args.max_total, scenario_file.mode_vectors(model, d))

    frame = pd.DataFrame(
        {
            "pattern": [" ".join(str(c) for c in p) for p in engine_table.entries],
            "engine": list(engine_table.entries.values()),
            "oracle": [oracle_table.entries[p] for p in engine_table.entries],
        }
    )
    frame["abs_deviation"] = (frame["engine"] - frame["oracle"]).abs()
    _write_csv(frame)

    deviation = engine_table.max_deviation(oracle_table)
    print(f"max deviation: {deviation:.3e} (d = {d}, digest {digest})", file=sys.stderr)
    if deviation > settings.oracle_agreement_tolerance:
        logger.error(f"engine and oracle disagree by {deviation:.3e}")
        return EXIT_ORACLE_MISMATCH
    return EXIT_OK


def parse_sizes(text):
    """Parse '2-8' or '2,3,5' into a list of matrix sizes."""
    sizes = []
    try:
        for part in text.split(","):
            if "-" in part:
                low, high = part.split("-", 1)
                sizes.extend(range(int(low), int(high) + 1))
            elif part.strip():
                sizes.append(int(part))
    except ValueError as exc:
        raise PhotoptixError(f"cannot parse sizes '{text}'") from exc
    if not sizes or min(sizes) < 1:
        raise PhotoptixError(f"sizes must be positive integers, got '{text}'")
    return sizes


def _median_time(kernel, matrix, repeats):
    timings, value = [], None
    for _ in range(repeats):
        start = time.perf_counter()
        value = kernel(matrix)
        timings.append(time.perf_counter() - start)
    return statistics.median(timings), value


def cmd_bench_permanent(args):
    """Time the permanent kernels on random complex matrices."""
    sizes = parse_sizes(args.sizes)
    use_naive = args.algo in ("naive", "both")
    use_ryser = args.algo in ("ryser", "both")
    for n in sizes:
        if use_naive and n > settings.naive_permanent_max:
            raise SizeGuardError(f"naive permanent limited to n <= {settings.naive_permanent_max}, got n = {n}")
        if use_ryser and n > settings.ryser_permanent_max:
            raise SizeGuardError(f"Ryser permanent limited to n <= {settings.ryser_permanent_max}, got n = {n}")

    rng = np.random.default_rng(args.seed)
    rows = []
    for n in sizes:
        matrix = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        row = {"size": n, "naive_seconds": np.nan, "ryser_seconds": np.nan, "relative_difference": np.nan}
        if use_naive:
            row["naive_seconds"], naive_value = _median_time(permanent_naive, matrix, args.repeats)
        if use_ryser:
            row["ryser_seconds"], ryser_value = _median_time(
                lambda a: permanent_ryser(a, workers=args.workers), matrix, args.repeats
            )
        if use_naive and use_ryser:
            difference = abs(naive_value - ryser_value) / max(abs(naive_value), 1e-300)
            row["relative_difference"] = difference
            if difference > settings.bench_agreement_tolerance:
                raise NumericalError(f"permanent kernels disagree at n = {n}: relative difference {difference:.3e}")
        rows.append(row)
        logger.info(f"benchmarked n = {n}")

    columns = ["size"] + [c for c, used in (("naive_seconds", use_naive), ("ryser_seconds", use_ryser)) if used]
    if use_naive and use_ryser:
        columns.append("relative_difference")
    _write_csv(pd.DataFrame(rows)[columns])
    return EXIT_OK


def cmd_multimode_p0(args):
    """Print the Monte-Carlo vacuum probability of a multimode scenario as JSON."""
    scenario, _, digest = scenario_file.load_multimode_scenario(args.path)
    estimate, std_error = estimate_vacuum_probability(scenario, workers=args.workers)
    report = MultimodeEstimate(
        estimate=estimate,
        std_error=std_error,
        sample_count=scenario.sample_count,
        rng_seed=scenario.rng_seed,
        scenario_digest=digest,
    )
    print(report.model_dump_json(indent=2))
    return EXIT_OK


def build_parser():
    parser = ArgumentParser(prog="photoptix", description="Photon-counting simulator for lossy linear multiports")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="Logging level for diagnostics on stderr")
    parser.add_argument("--log-file", type=str, help="Also write the log to this file")
    subparsers = parser.add_subparsers(dest="command", required=True)

    validate = subparsers.add_parser("validate", help="Check every invariant of a scenario file")
    validate.add_argument("path", help="Scenario file")
    validate.set_defaults(func=cmd_validate)

    simulate = subparsers.add_parser("simulate", help="Print the outcome probability table")
    simulate.add_argument("path", help="Scenario file")
    simulate.add_argument("--max-total", type=int, help="Largest total count in the table (default p_max)")
    simulate.add_argument("--format", choices=["csv", "json"], default="csv", help="Output format")
    simulate.add_argument(
        "--workers", type=int, default=1,
        help="Threads for generating-function evaluations; "
        "work grows as (p_max + 1)^ports times 2^|n| per series term, capped by max_generating_work",
    )
    simulate.set_defaults(func=cmd_simulate)

    scan = subparsers.add_parser("hom-scan", help="Sweep overlap or efficiency of a 2-port scenario")
    scan.add_argument("path", help="Scenario file")
    scan.add_argument("--param", choices=["overlap", "eta"], default="overlap", help="Swept parameter")
    scan.add_argument("--from", dest="start", type=float, default=0.0, help="First value")
    scan.add_argument("--to", dest="stop", type=float, default=1.0, help="Last value")
    scan.add_argument("--steps", type=int, default=5, help="Number of points")
    scan.set_defaults(func=cmd_hom_scan)

    compare = subparsers.add_parser("oracle-compare", help="Compare the engine with the Fock-space oracle")
    compare.add_argument("path", help="Scenario file")
    compare.add_argument("--d", type=int, help="Internal dimension of the oracle lattice")
    compare.add_argument("--max-total", type=int, help="Largest total count compared (default p_max)")
    compare.add_argument(
        "--workers", type=int, default=1,
        help="Threads for generating-function evaluations; "
        "work grows as (p_max + 1)^ports times 2^|n| per series term, capped by max_generating_work",
    )
    compare.set_defaults(func=cmd_oracle_compare)

    bench = subparsers.add_parser("bench-permanent", help="Time the permanent kernels")
    bench.add_argument("--sizes", default="2-8", help="Sizes as '2-8' or '2,4,6'")
    bench.add_argument("--algo", choices=["naive", "ryser", "both"], default="both", help="Kernels to time")
    bench.add_argument("--repeats", type=int, default=5, help="Runs per size; the median is reported")
    bench.add_argument("--seed", type=int, default=0, help="Seed for the random matrices")
    bench.add_argument("--workers", type=int, default=1, help="Threads for the Ryser kernel")
    bench.set_defaults(func=cmd_bench_permanent)

    multimode = subparsers.add_parser("multimode-p0", help="Monte-Carlo vacuum probability of a multimode scenario")
    multimode.add_argument("path", help="Multimode scenario file")
    multimode.add_argument("--workers", type=int, default=1, help="Threads drawing sample blocks")
    multimode.set_defaults(func=cmd_multimode_p0)
    return parser


def _configure_logging(level, log_file):
    handlers = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=getattr(logging, level),
        format='%(asctime)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S',
        handlers=handlers,
    )


def main(argv=None):
    """Parse arguments, run one verb and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
    except PhotoptixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code

    _configure_logging(args.log_level, args.log_file)
    try:
        return args.func(args)
    except PhotoptixError as exc:
        logger.error(f"{args.command} failed: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        logger.error(f"{args.command} failed: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
