"""
Command-line entry point for the block independent likelihood ratio test.

    python src/main.py test --method bilt --block-size 2 --x g1.csv --y g2.csv
    python src/main.py simulate --design type1 --reps 300 --parallelism 8 --out results/type1.csv
    python src/main.py power --delta-sq-norm 20 --k 200 --tau 2
    python src/main.py matrix-test --data scans.csv --cols-per-block 2 --truncate-cols 98
    python src/main.py designs --write null_ar --out configs/null_ar.json

JSON goes to standard output (or --out), progress and warnings to standard error.
Exit codes: 0 success, 1 error, 2 rejection when --exit-on-reject is set.
"""

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

# Add src directory to path for imports
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from algorithms import __version__
from algorithms.bilt_test import KernelKind, KernelSpec, bilt, describe, dlrt, power_from_norm, theoretical_power
from algorithms.blockstats import TwoSampleData, fixed_partition, hotelling_t2
from algorithms.errors import InvalidConfig, ShapeMismatch
from algorithms.matvar import MatrixLayout, matrix_two_sample_test
from data.experiment_designs import design_names, get_design, summarize_designs
from simulation.config import configs_from_document, read_config_document, resolve_seed
from simulation.harness import SimulationReport, sweep

logger = logging.getLogger("bilt")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REJECT = 2

REPORT_VERSION = 1
REPORT_COLUMNS = [
    "experiment", "n1", "n2", "p", "b", "model", "rho", "delta", "prop",
    "kernel", "L", "reps", "seed", "rejection_rate", "se", "wall_time", "error",
]


def fmt_number(value: Any) -> Any:
    """17 significant digits for floats, so every value round-trips."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value) or math.isinf(value):
            return None
        return format(value, ".17g")
    return value


def _json_value(value: Any) -> str:
    if isinstance(value, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_value(v)}" for k, v in value.items()) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_json_value(v) for v in value) + "]"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        text = fmt_number(value)
        return "null" if text is None else text
    if value is None:
        return "null"
    return json.dumps(str(value))


def to_json(payload: Dict[str, Any]) -> str:
    return _json_value(payload)


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seed: Optional[int]
    version: str
    started: str
    finished: str = ""
    # seeds the configs actually ran with; records may carry their own unless --seed is given
    seeds: List[int] = field(default_factory=list)

    @classmethod
    def start(cls, argv: Sequence[str], config_payload: Any, seed: Optional[int] = None) -> "RunManifest":
        canonical = json.dumps(config_payload, sort_keys=True, default=str)
        return cls(
            command=" ".join(argv),
            config_hash=hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16],
            seed=seed,
            version=__version__,
            started=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )

    def finish(self) -> "RunManifest":
        self.finished = datetime.now(timezone.utc).isoformat(timespec="seconds")
        return self


def read_matrix_csv(path: str) -> Tuple[List[str], np.ndarray]:
    """Header row of variable names, one observation per row."""
    with open(path, "r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidConfig("file is empty", path) from None
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ShapeMismatch(f"{path}: row {line_no} has {len(row)} fields, header has {len(header)}")
            values = []
            for col, cell in enumerate(row):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise InvalidConfig(
                        f"row {line_no}, column {col + 1} ({header[col]!r}): not a number: {cell!r}", path
                    ) from None
            rows.append(values)
    if not rows:
        raise InvalidConfig("no observations after the header", path)
    return header, np.asarray(rows, dtype=float)


def read_grouped_csv(path: str, group_col: str) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    """One file with a group column; the two sorted labels become x and y."""
    with open(path, "r", newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or group_col not in reader.fieldnames:
            raise InvalidConfig(f"missing group column {group_col!r}", path)
        variables = [name for name in reader.fieldnames if name != group_col]
        labels: List[str] = []
        values: List[List[float]] = []
        for line_no, row in enumerate(reader, start=2):
            labels.append(row[group_col])
            obs = []
            for col, name in enumerate(variables):
                cell = row[name]
                try:
                    obs.append(float(cell))
                except (TypeError, ValueError):
                    raise InvalidConfig(f"row {line_no}, column {name!r}: not a number: {cell!r}", path) from None
            values.append(obs)
    groups = sorted(set(labels))
    if len(groups) != 2:
        raise InvalidConfig(f"group column must hold exactly two labels, found {groups}", path)
    matrix = np.asarray(values, dtype=float)
    mask = np.array([label == groups[0] for label in labels])
    return matrix[mask], matrix[~mask], groups


def read_long_matrix_csv(path: str) -> Dict[str, Dict[str, Any]]:
    """Long format {subject_id, group, row_index, col_index, value} -> per-subject cells."""
    required = ["subject_id", "group", "row_index", "col_index", "value"]
    subjects: Dict[str, Dict[str, Any]] = {}
    with open(path, "r", newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise InvalidConfig(f"missing column(s) {missing}", path)
        for line_no, row in enumerate(reader, start=2):
            try:
                r, c, v = int(row["row_index"]), int(row["col_index"]), float(row["value"])
            except ValueError:
                raise InvalidConfig(f"row {line_no}: bad row_index/col_index/value", path) from None
            entry = subjects.setdefault(row["subject_id"], {"group": row["group"], "cells": {}})
            if entry["group"] != row["group"]:
                raise InvalidConfig(f"row {line_no}: subject {row['subject_id']!r} appears in two groups", path)
            if (r, c) in entry["cells"]:
                raise InvalidConfig(f"row {line_no}: duplicate cell ({r}, {c}) for {row['subject_id']!r}", path)
            entry["cells"][(r, c)] = v
    return subjects


def assemble_matrices(subjects: Dict[str, Dict[str, Any]]) -> Tuple[List[np.ndarray], List[np.ndarray], List[str]]:
    """Per-subject l x m matrices ordered by row and column index, split by group label."""
    row_ids = sorted({r for s in subjects.values() for r, _ in s["cells"]})
    col_ids = sorted({c for s in subjects.values() for _, c in s["cells"]})
    groups = sorted({s["group"] for s in subjects.values()})
    if len(groups) != 2:
        raise InvalidConfig(f"group column must be binary, found {groups}", "group")
    split: Dict[str, List[np.ndarray]] = {g: [] for g in groups}
    for subject_id in sorted(subjects):
        entry = subjects[subject_id]
        if len(entry["cells"]) != len(row_ids) * len(col_ids):
            raise ShapeMismatch(
                f"subject {subject_id!r} has {len(entry['cells'])} cells, expected a full "
                f"{len(row_ids)}x{len(col_ids)} grid"
            )
        mat = np.empty((len(row_ids), len(col_ids)))
        for i, r in enumerate(row_ids):
            for j, c in enumerate(col_ids):
                if (r, c) not in entry["cells"]:
                    raise ShapeMismatch(f"subject {subject_id!r} is missing cell ({r}, {c})")
                mat[i, j] = entry["cells"][(r, c)]
        split[entry["group"]].append(mat)
    return split[groups[0]], split[groups[1]], groups


class BiltAnalysisSystem:
    """
    Runs tests, simulation campaigns and power evaluations and writes their
    machine-readable output with an embedded run manifest.
    """

    def __init__(self, argv: Sequence[str]):
        self.argv = list(argv)

    def emit_json(self, payload: Dict[str, Any], manifest: RunManifest, out: Optional[str]) -> None:
        document = {**payload, "manifest": asdict(manifest.finish())}
        text = to_json(document)
        if out:
            self.save_results_to_file(out, text + "\n")
        else:
            print(text)

    def save_results_to_file(self, filepath: str, content: str) -> None:
        directory = os.path.dirname(os.path.abspath(filepath))
        os.makedirs(directory, exist_ok=True)
        with open(filepath, "w", encoding="utf-8") as f:
            f.write(content)
        logger.info("OUTPUT SAVED: %s", filepath)

    def run_test(self, args: argparse.Namespace) -> int:
        if args.data:
            x, y, groups = read_grouped_csv(args.data, args.group_col)
            source = {"data": args.data, "groups": groups}
        else:
            if not (args.x and args.y):
                raise InvalidConfig("give --x and --y, or --data with a group column", "test")
            header_x, x = read_matrix_csv(args.x)
            header_y, y = read_matrix_csv(args.y)
            if len(header_x) != len(header_y):
                raise ShapeMismatch(f"groups disagree on p: {len(header_x)} vs {len(header_y)} variables")
            source = {"x": args.x, "y": args.y}
        data = TwoSampleData.from_arrays(x, y)
        kernel = KernelSpec(KernelKind.parse(args.kernel), args.bandwidth)
        manifest = RunManifest.start(
            self.argv, {**source, "method": args.method, "b": args.block_size, "kernel": args.kernel,
                        "L": args.bandwidth, "level": args.level}
        )

        if args.method == "hotelling":
            result = hotelling_t2(data)
            payload = {**result, "reject": result["p_value"] <= args.level, "level": args.level}
            rejected = payload["reject"]
        else:
            if args.method == "dlrt":
                outcome = dlrt(data, kernel, args.level)
                block_size = 1
            else:
                outcome = bilt(data, fixed_partition(data.p, args.block_size), kernel, args.level)
                block_size = args.block_size
            payload = {**describe(outcome), "block_size": block_size, "n1": data.n1, "n2": data.n2, "p": data.p}
            rejected = outcome.reject

        self.emit_json(payload, manifest, args.out)
        return EXIT_REJECT if (args.exit_on_reject and rejected) else EXIT_OK

    def run_simulation(self, args: argparse.Namespace) -> int:
        seed = resolve_seed(args.seed)
        if args.config:
            document = read_config_document(args.config)
        elif args.design:
            document = get_design(args.design)
        else:
            raise InvalidConfig("give --config or --design", "simulate")
        if args.reps is not None:
            document.setdefault("defaults", {})["reps"] = args.reps
        configs = configs_from_document(document, seed, force_seed=args.seed)
        if args.dump_z:
            configs = [replace(c, keep_z=True) for c in configs]
        manifest = RunManifest.start(self.argv, document, seed)
        manifest.seeds = sorted({c.seed for c in configs})

        logger.info("=" * 70)
        logger.info("BILT SIMULATION: %d configurations, seed %d, parallelism %d", len(configs), seed,
                    args.parallelism)
        logger.info("=" * 70)
        reports = sweep(configs, args.parallelism)
        failed = sum(1 for r in reports if r.error)
        logger.info("SIMULATION COMPLETE: %d rows, %d failed", len(reports), failed)

        if args.dump_z:
            self.dump_z_samples(reports, args.dump_z)
        text = self.render_report_csv(reports, manifest.finish())
        if args.out:
            self.save_results_to_file(args.out, text)
            self.save_results_to_file(args.out + ".manifest.json", to_json(asdict(manifest)) + "\n")
        else:
            sys.stdout.write(text)
            logger.info("manifest: %s", to_json(asdict(manifest)))
        return EXIT_OK

    def render_report_csv(self, reports: Sequence[SimulationReport], manifest: RunManifest) -> str:
        """Versioned header, then one row per config; the same config and seed give the same bytes
        apart from the wall_time column. Command echo and timestamps go to the manifest sidecar."""
        lines = [f"# report_version={REPORT_VERSION}"]
        lines += [f"# {key}={getattr(manifest, key)}" for key in ("version", "seed", "config_hash")]
        lines.append("# seeds=" + " ".join(str(s) for s in manifest.seeds))
        lines.append(",".join(REPORT_COLUMNS))
        for report in reports:
            row = report.to_row()
            cells = []
            for column in REPORT_COLUMNS:
                value = fmt_number(row[column])
                cells.append("" if value is None else str(value))
            lines.append(",".join(_csv_cell(c) for c in cells))
        return "\n".join(lines) + "\n"

    def dump_z_samples(self, reports: Sequence[SimulationReport], directory: str) -> None:
        os.makedirs(directory, exist_ok=True)
        for index, report in enumerate(reports):
            if report.z_samples is None:
                continue
            row = report.config.to_row()
            name = (
                f"{index:04d}_{row['experiment'] or 'run'}_{row['model']}_p{row['p']}_b{row['b']}"
                f"_d{row['delta']:g}_q{row['prop']:g}.txt"
            )
            path = os.path.join(directory, name.replace("+", "-"))
            with open(path, "w", encoding="utf-8") as f:
                f.write("\n".join(fmt_number(z) or "nan" for z in report.z_samples) + "\n")
            logger.info("z samples: %s (%d values)", path, len(report.z_samples))

    def run_power(self, args: argparse.Namespace) -> int:
        if args.tau is None or args.tau <= 0:
            raise InvalidConfig("--tau must be positive", "tau")
        if args.delta is not None:
            try:
                deltas = [float(v) for v in args.delta.split(",") if v.strip()]
            except ValueError:
                raise InvalidConfig(f"malformed Delta list {args.delta!r}", "delta") from None
            if not deltas or any(d < 0 for d in deltas):
                raise InvalidConfig("Delta entries must be nonnegative numbers", "delta")
            k = args.k if args.k is not None else len(deltas)
            delta_sq_norm = float(np.dot(deltas, deltas))
            power = theoretical_power(deltas, k, args.tau, args.level)
        elif args.delta_sq_norm is not None:
            if args.k is None:
                raise InvalidConfig("--k is required with --delta-sq-norm", "k")
            k = args.k
            delta_sq_norm = args.delta_sq_norm
            power = power_from_norm(delta_sq_norm, k, args.tau, args.level)
        else:
            raise InvalidConfig("give --delta or --delta-sq-norm", "delta")

        payload: Dict[str, Any] = {
            "delta_sq_norm": delta_sq_norm, "K": k, "tau": args.tau, "level": args.level, "power": power,
        }
        if args.sweep:
            try:
                start, stop, steps = args.sweep.split(":")
                grid = np.linspace(float(start), float(stop), int(steps))
            except ValueError:
                raise InvalidConfig(f"--sweep expects start:stop:steps, got {args.sweep!r}", "sweep") from None
            payload["sweep"] = [
                {"delta_sq_norm": float(v), "power": power_from_norm(float(v), k, args.tau, args.level)} for v in grid
            ]
        manifest = RunManifest.start(self.argv, payload)
        self.emit_json(payload, manifest, args.out)
        return EXIT_OK

    def run_matrix_test(self, args: argparse.Namespace) -> int:
        subjects = read_long_matrix_csv(args.data)
        group1, group2, groups = assemble_matrices(subjects)
        rows, cols = group1[0].shape
        if args.rows is not None and args.rows != rows:
            raise ShapeMismatch(f"--rows {args.rows} but the data has {rows} rows per subject")
        layout = MatrixLayout(rows, cols, args.cols_per_block)
        if args.truncate_cols is not None:
            layout = layout.truncated(args.truncate_cols)
            logger.info("keeping the first %d of %d columns", layout.cols, cols)
            group1 = [m[:, : layout.cols] for m in group1]
            group2 = [m[:, : layout.cols] for m in group2]
            cols = layout.cols
        kernel = KernelSpec(KernelKind.parse(args.kernel), args.bandwidth)
        manifest = RunManifest.start(
            self.argv, {"data": args.data, "rows": rows, "cols": cols, "c": args.cols_per_block,
                        "kernel": args.kernel, "L": args.bandwidth, "level": args.level}
        )
        outcome = matrix_two_sample_test(group1, group2, layout, kernel, args.level)
        payload = {
            **describe(outcome),
            "groups": groups,
            "rows": rows,
            "cols": cols,
            "cols_per_block": args.cols_per_block,
            "block_sizes": sorted(set(outcome.block_sizes)),
            "remainder_block": cols % args.cols_per_block != 0,
        }
        self.emit_json(payload, manifest, args.out)
        return EXIT_REJECT if (args.exit_on_reject and outcome.reject) else EXIT_OK

    def run_designs(self, args: argparse.Namespace) -> int:
        if args.write:
            document = get_design(args.write, reps=args.reps, seed=args.seed)
            text = json.dumps(document, indent=2) + "\n"
            if args.out:
                self.save_results_to_file(args.out, text)
            else:
                sys.stdout.write(text)
        else:
            print(summarize_designs())
        return EXIT_OK


def _csv_cell(text: str) -> str:
    if any(ch in text for ch in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def _add_kernel_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kernel", default="parzen", help="parzen, truncated, qs or bartlett (default parzen)")
    parser.add_argument("--bandwidth", type=int, default=5, help="kernel bandwidth L (default 5)")
    parser.add_argument("--level", type=float, default=0.05, help="significance level (default 0.05)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bilt", description="Block independent likelihood ratio test")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    test = sub.add_parser("test", help="two-sample mean test on CSV data")
    test.add_argument("--method", choices=["bilt", "dlrt", "hotelling"], default="bilt")
    test.add_argument("--block-size", type=int, default=2)
    test.add_argument("--x", help="group 1 CSV (header + one observation per row)")
    test.add_argument("--y", help="group 2 CSV")
    test.add_argument("--data", help="single CSV with a group column")
    test.add_argument("--group-col", default="group")
    test.add_argument("--exit-on-reject", action="store_true")
    test.add_argument("--out")
    _add_kernel_args(test)

    sim = sub.add_parser("simulate", help="run Monte Carlo campaigns")
    sim.add_argument("--config", help="JSON config document")
    sim.add_argument("--design", choices=design_names(), help="built-in design")
    sim.add_argument("--reps", type=int, help="override replications per row")
    sim.add_argument("--seed", type=int, help="root seed (default $BILT_SEED)")
    sim.add_argument("--parallelism", type=int, default=1)
    sim.add_argument("--dump-z", metavar="DIR", help="write standardized statistics per row")
    sim.add_argument("--out", help="CSV report path (default stdout)")

    power = sub.add_parser("power", help="asymptotic power under a local alternative")
    power.add_argument("--delta", help="comma-separated block noncentralities Delta_k")
    power.add_argument("--delta-sq-norm", type=float, help="Delta'Delta")
    power.add_argument("--k", type=int, help="number of blocks K")
    power.add_argument("--tau", type=float, help="long-run standard deviation tau")
    power.add_argument("--level", type=float, default=0.05)
    power.add_argument("--sweep", help="start:stop:steps grid over Delta'Delta")
    power.add_argument("--out")

    matrix = sub.add_parser("matrix-test", help="test on matrix-variate long-format CSV")
    matrix.add_argument("--data", required=True)
    matrix.add_argument("--rows", type=int, help="expected rows per subject")
    matrix.add_argument("--cols-per-block", type=int, default=1)
    matrix.add_argument("--truncate-cols", type=int, help="keep only the first M columns")
    matrix.add_argument("--exit-on-reject", action="store_true")
    matrix.add_argument("--out")
    _add_kernel_args(matrix)

    designs = sub.add_parser("designs", help="list or export built-in designs")
    designs.add_argument("--write", choices=design_names())
    designs.add_argument("--reps", type=int)
    designs.add_argument("--seed", type=int)
    designs.add_argument("--out")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Main application entry point.
    Parses arguments, dispatches the sub-command and maps errors to exit codes.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )

    system = BiltAnalysisSystem(["bilt"] + argv)
    handlers = {
        "test": system.run_test,
        "simulate": system.run_simulation,
        "power": system.run_power,
        "matrix-test": system.run_matrix_test,
        "designs": system.run_designs,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, KeyError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_ERROR
    except OSError as e:
        logger.error("I/O error: %s", e)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
