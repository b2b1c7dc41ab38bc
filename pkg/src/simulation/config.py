"""
Simulation configuration: one SimulationConfig per Monte Carlo experiment,
parsed from flat JSON records and expanded from experiment grids.

Config documents look like

    {
      "name": "type1",
      "defaults": {"n1": 50, "n2": 50, "reps": 3000, "level": 0.05},
      "experiments": [
        {"name": "level_check", "grid": {"model": ["IND", "AR_0.6"], "p": [200, 400]},
         "block_size": 2, "delta": 0.0}
      ]
    }

Grid keys expand as a Cartesian product in the order they are written;
fixed fields override the defaults, grid values override both.
"""

import itertools
import json
import numbers
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple

from algorithms.bilt_test import KernelKind, KernelSpec
from algorithms.blockstats import BlockPartition, fixed_partition
from algorithms.covgen import CovarianceModel, CovKind, SignalKind, SignalSpec
from algorithms.errors import InvalidConfig

SEED_ENV_VAR = "BILT_SEED"
DEFAULT_SEED = 20240601

# flat record fields and their defaults (study defaults: q = 0.05, r = 3000, Parzen L = 5, b = 2)
FIELD_DEFAULTS: Dict[str, Any] = {
    "experiment": "",
    "n1": 50,
    "n2": 50,
    "p": 1000,
    "model": "IND",
    "rho": 0.0,
    "width": 4,
    "hetero_diag": False,
    "signal": "sign_flip",
    "delta": 0.0,
    "prop": 1.0,
    "block_size": 2,
    "partition": None,
    "kernel": "parzen",
    "bandwidth": 5,
    "reps": 3000,
    "level": 0.05,
    "seed": None,
    "fix_mu2": False,
    "keep_z": False,
}


@dataclass(frozen=True)
class SimulationConfig:
    n1: int
    n2: int
    p: int
    model: CovarianceModel = field(default_factory=CovarianceModel.ind)
    signal: SignalSpec = field(default_factory=SignalSpec.null)
    block_size: int = 2
    partition: Optional[BlockPartition] = None
    kernel: KernelSpec = field(default_factory=KernelSpec)
    reps: int = 3000
    level: float = 0.05
    seed: int = DEFAULT_SEED
    fix_mu2: bool = False
    keep_z: bool = False
    experiment: str = ""

    def __post_init__(self):
        if self.n1 < 2 or self.n2 < 2:
            raise InvalidConfig(f"group sizes must be >= 2, got n1={self.n1}, n2={self.n2}", "n1")
        if self.p < 1:
            raise InvalidConfig(f"p must be positive, got {self.p}", "p")
        if self.block_size < 1:
            raise InvalidConfig(f"block size must be positive, got {self.block_size}", "block_size")
        if self.reps < 1:
            raise InvalidConfig(f"reps must be >= 1, got {self.reps}", "reps")
        if not 0.0 < self.level < 1.0:
            raise InvalidConfig(f"level must lie in (0, 1), got {self.level}", "level")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidConfig(f"seed must be a 64-bit unsigned integer, got {self.seed}", "seed")
        partition = self.block_partition()
        if partition.p != self.p:
            raise InvalidConfig(f"partition covers {partition.p} variables, p={self.p}", "partition")
        if self.n1 + self.n2 < partition.max_size + 3:
            raise InvalidConfig(
                f"n1 + n2 = {self.n1 + self.n2} is below largest block + 3 = {partition.max_size + 3}", "block_size"
            )

    @property
    def n_total(self) -> int:
        return self.n1 + self.n2

    def block_partition(self) -> BlockPartition:
        if self.partition is not None:
            return self.partition
        return fixed_partition(self.p, self.block_size)

    def to_row(self) -> Dict[str, Any]:
        """Flat echo used in report rows."""
        return {
            "experiment": self.experiment,
            "n1": self.n1,
            "n2": self.n2,
            "p": self.p,
            "b": self.block_size if self.partition is None else "custom",
            "model": self.model.label,
            "rho": self.model.rho,
            "delta": self.signal.delta,
            "prop": self.signal.prop,
            "kernel": self.kernel.kind.value,
            "L": self.kernel.bandwidth,
            "reps": self.reps,
            "seed": self.seed,
        }


def resolve_seed(seed: Optional[int] = None) -> int:
    """Explicit seed, else $BILT_SEED, else the package default."""
    if seed is not None:
        return int(seed)
    env = os.environ.get(SEED_ENV_VAR)
    if env:
        try:
            return int(env)
        except ValueError:
            raise InvalidConfig(f"${SEED_ENV_VAR} must be an integer, got {env!r}", SEED_ENV_VAR) from None
    return DEFAULT_SEED


def _integer(record: Mapping[str, Any], key: str, path: str) -> int:
    value = record[key]
    if isinstance(value, numbers.Integral) and not isinstance(value, bool):
        return int(value)
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        try:
            return int(value.strip())
        except ValueError:
            pass
    raise InvalidConfig(f"{key} must be an integer, got {value!r}", f"{path}.{key}")


def _parse_model(record: Mapping[str, Any], path: str) -> CovarianceModel:
    name = str(record["model"]).strip()
    rho = float(record["rho"])
    if "_" in name:
        # study notation, e.g. AR_0.6
        name, _, rho_text = name.partition("_")
        try:
            rho = float(rho_text)
        except ValueError:
            raise InvalidConfig(f"cannot read rho from model {record['model']!r}", f"{path}.model") from None
    try:
        kind = CovKind(name.lower())
    except ValueError:
        raise InvalidConfig(f"unknown covariance model {record['model']!r}", f"{path}.model") from None
    if kind is CovKind.CUSTOM:
        raise InvalidConfig("custom covariance matrices cannot be given in a config file", f"{path}.model")
    width = _integer(record, "width", path)
    try:
        return CovarianceModel(kind, rho=rho, width=width, hetero_diag=bool(record["hetero_diag"]))
    except ValueError as exc:
        raise InvalidConfig(str(exc), f"{path}.rho") from None


def _parse_signal(record: Mapping[str, Any], path: str) -> SignalSpec:
    try:
        kind = SignalKind(str(record["signal"]).lower())
    except ValueError:
        raise InvalidConfig(f"unknown signal {record['signal']!r}", f"{path}.signal") from None
    if kind is SignalKind.FIXED:
        raise InvalidConfig("fixed signals are library-only", f"{path}.signal")
    try:
        return SignalSpec(kind, delta=float(record["delta"]), prop=float(record["prop"]))
    except ValueError as exc:
        raise InvalidConfig(str(exc), f"{path}.delta") from None


def config_from_record(
    record: Mapping[str, Any],
    path: str = "config",
    seed: Optional[int] = None,
    force_seed: Optional[int] = None,
) -> SimulationConfig:
    """Build a SimulationConfig from a flat record; unknown keys are errors.

    The seed is force_seed when given, else the record's own seed, else `seed`.
    """
    unknown = set(record) - set(FIELD_DEFAULTS)
    if unknown:
        raise InvalidConfig(f"unknown field(s) {sorted(unknown)}", path)
    merged = {**FIELD_DEFAULTS, **record}
    bandwidth = _integer(merged, "bandwidth", path)
    try:
        kernel = KernelSpec(KernelKind.parse(merged["kernel"]), bandwidth)
    except ValueError as exc:
        raise InvalidConfig(str(exc), f"{path}.kernel") from None
    partition = None
    if merged["partition"] is not None:
        try:
            partition = BlockPartition.from_sizes(merged["partition"])
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(str(exc), f"{path}.partition") from None
    if force_seed is not None:
        record_seed = force_seed
    elif merged["seed"] is not None:
        record_seed = _integer(merged, "seed", path)
    else:
        record_seed = seed
    try:
        return SimulationConfig(
            n1=_integer(merged, "n1", path),
            n2=_integer(merged, "n2", path),
            p=_integer(merged, "p", path),
            model=_parse_model(merged, path),
            signal=_parse_signal(merged, path),
            block_size=_integer(merged, "block_size", path),
            partition=partition,
            kernel=kernel,
            reps=_integer(merged, "reps", path),
            level=float(merged["level"]),
            seed=resolve_seed(record_seed),
            fix_mu2=bool(merged["fix_mu2"]),
            keep_z=bool(merged["keep_z"]),
            experiment=str(merged["experiment"]),
        )
    except InvalidConfig as exc:
        if exc.field_path.startswith(path):
            raise
        raise InvalidConfig(str(exc), path) from None
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(str(exc), path) from None


def expand_grid(grid: Mapping[str, Iterable[Any]]) -> List[Dict[str, Any]]:
    """Cartesian product of grid values, first key varying slowest."""
    keys = list(grid)
    values = [list(grid[k]) for k in keys]
    return [dict(zip(keys, combo)) for combo in itertools.product(*values)]


def configs_from_document(
    document: Mapping[str, Any], seed: Optional[int] = None, force_seed: Optional[int] = None
) -> List[SimulationConfig]:
    """All SimulationConfigs described by a config document, in file order.

    `seed` fills in records without a seed; `force_seed` replaces every record seed.
    """
    if "experiments" not in document:
        raise InvalidConfig("missing 'experiments' list", "experiments")
    defaults = dict(document.get("defaults", {}))
    configs: List[SimulationConfig] = []
    for i, experiment in enumerate(document["experiments"]):
        path = f"experiments[{i}]"
        fixed = {k: v for k, v in experiment.items() if k not in ("grid", "name")}
        grid = experiment.get("grid", {})
        if not isinstance(grid, Mapping):
            raise InvalidConfig("grid must be an object of lists", f"{path}.grid")
        for key, vals in grid.items():
            if isinstance(vals, (str, bytes)) or not isinstance(vals, Iterable):
                raise InvalidConfig("grid values must be lists", f"{path}.grid.{key}")
        name = experiment.get("name", document.get("name", f"experiment{i}"))
        for point in expand_grid(grid) or [{}]:
            record = {**defaults, **fixed, **point, "experiment": name}
            configs.append(config_from_record(record, path, seed, force_seed))
    return configs


def read_config_document(path: str) -> Dict[str, Any]:
    """Parse a JSON config document, reporting syntax errors by line and column."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = json.load(handle)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", path) from None
    if not isinstance(document, dict):
        raise InvalidConfig("config document must be a JSON object", path)
    return document


def load_config_file(path: str, seed: Optional[int] = None) -> Tuple[Dict[str, Any], List[SimulationConfig]]:
    """Read a JSON config document; returns the raw document and its expanded configs."""
    document = read_config_document(path)
    return document, configs_from_document(document, seed)
