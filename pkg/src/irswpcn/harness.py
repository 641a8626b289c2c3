"""Batch experiment engine: Monte Carlo sweeps over transmit power or
geometry, with common random numbers across sweep points, deterministic
CSV outputs and a run manifest."""

import configparser
import hashlib
import io
import multiprocessing
import os
from dataclasses import dataclass

import numpy as np

from .channels import FadingConfig, realize
from .geometry import GeometryConfig
from .model import total_energy_consumption
from .params import SystemParams
from .solvers import SCHEMES, SolverConfig, solve_scheme
from .units import db_to_linear_amplitude, dbm_to_watts
from .convex import ConicConfig
from .channels import named_rng
from .derived import derive_channel

SCHEMA_VERSION = "1"
SWEEP_VARIABLES = ("p_a_dbm", "x_ue", "x_irs")

RECORD_COLUMNS = ("sweep_variable", "sweep_value", "scheme", "a_max_db",
                  "realization", "seed", "status", "feasible",
                  "objective_bits_per_hz", "total_energy_joules",
                  "tau0_seconds", "iterations")
AGGREGATE_COLUMNS = ("sweep_variable", "sweep_value", "scheme", "a_max_db",
                     "count", "objective_mean", "objective_stderr",
                     "energy_mean", "energy_stderr")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a sweep needs, in user units (powers in dBm)."""

    p_a_dbm: float = 20.0
    p_f_dbm: float = 5.0
    sigma_n1_dbm: float = -90.0
    sigma_n2_dbm: float = -90.0
    sigma_z1_dbm: float = -90.0
    sigma_z2_dbm: float = -90.0
    eta: float = 0.8
    t_max_s: float = 1.0
    num_elements: int = 10
    num_devices: int = 4
    weights: tuple = ()                      # empty = uniform

    x_irs_m: float = 10.0
    x_ue_m: float = 10.0
    cluster_radius_m: float = 1.0

    pathloss_exponent_irs: float = 2.2
    pathloss_exponent_direct: float = 3.5
    rician_factor: float = 10.0
    reference_gain_db: float = -30.0
    reference_distance_m: float = 1.0

    schemes: tuple = ("ue_active", "ul_active", "static_active",
                      "ue_passive", "static_passive")
    a_max_db: tuple = (10.0, 25.0)

    sweep_variable: str = "p_a_dbm"
    sweep_grid: tuple = (10.0, 15.0, 20.0, 25.0, 30.0)
    tie_x_irs_to_x_ue: bool = False
    num_realizations: int = 50

    master_seed: int = 1
    workers: int = 1
    output_dir: str = "results"

    ao_rel_tolerance: float = 1e-4
    ao_max_iterations: int = 50
    fp_rel_tolerance: float = 1e-5
    fp_max_iterations: int = 30
    randomization_count: int = 500

    def __post_init__(self):
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ConfigError(f"unknown sweep variable {self.sweep_variable!r}")
        if not self.sweep_grid:
            raise ConfigError("sweep grid must be nonempty")
        if tuple(sorted(self.sweep_grid)) != tuple(self.sweep_grid):
            raise ConfigError("sweep grid must be sorted ascending")
        if self.num_realizations < 1:
            raise ConfigError("num_realizations must be >= 1")
        if not self.schemes:
            raise ConfigError("scheme list must be nonempty")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}")

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            ao_rel_tolerance=self.ao_rel_tolerance,
            ao_max_iterations=self.ao_max_iterations,
            fp_rel_tolerance=self.fp_rel_tolerance,
            fp_max_iterations=self.fp_max_iterations,
            randomization_count=self.randomization_count,
            conic=ConicConfig())

    def system_params(self, p_a_dbm: float, a_max_db: float) -> SystemParams:
        weights = np.asarray(self.weights if self.weights else
                             np.ones(self.num_devices), float)
        return SystemParams(
            p_a=dbm_to_watts(p_a_dbm), p_f=dbm_to_watts(self.p_f_dbm),
            sigma_n1=dbm_to_watts(self.sigma_n1_dbm),
            sigma_n2=dbm_to_watts(self.sigma_n2_dbm),
            sigma_z1=dbm_to_watts(self.sigma_z1_dbm),
            sigma_z2=dbm_to_watts(self.sigma_z2_dbm),
            eta=self.eta, t_max=self.t_max_s,
            a_max=db_to_linear_amplitude(a_max_db),
            weights=weights, num_elements=self.num_elements,
            num_devices=self.num_devices)

    def geometry(self, x_ue: float, x_irs: float) -> GeometryConfig:
        return GeometryConfig(irs_x=x_irs, cluster_center_x=x_ue,
                              cluster_radius=self.cluster_radius_m,
                              num_devices=self.num_devices)

    def fading(self) -> FadingConfig:
        return FadingConfig(
            pathloss_exponent_irs=self.pathloss_exponent_irs,
            pathloss_exponent_direct=self.pathloss_exponent_direct,
            rician_factor=self.rician_factor,
            reference_gain_db=self.reference_gain_db,
            reference_distance=self.reference_distance_m)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config file round trip

_SECTIONS = {
    "system": ("p_a_dbm", "p_f_dbm", "sigma_n1_dbm", "sigma_n2_dbm",
               "sigma_z1_dbm", "sigma_z2_dbm", "eta", "t_max_s",
               "num_elements", "num_devices", "weights"),
    "geometry": ("x_irs_m", "x_ue_m", "cluster_radius_m"),
    "fading": ("pathloss_exponent_irs", "pathloss_exponent_direct",
               "rician_factor", "reference_gain_db", "reference_distance_m"),
    "schemes": ("schemes", "a_max_db"),
    "sweep": ("sweep_variable", "sweep_grid", "tie_x_irs_to_x_ue",
              "num_realizations"),
    "solver": ("ao_rel_tolerance", "ao_max_iterations", "fp_rel_tolerance",
               "fp_max_iterations", "randomization_count"),
    "run": ("master_seed", "workers", "output_dir"),
}
_INT_KEYS = {"num_elements", "num_devices", "num_realizations", "master_seed",
             "workers", "ao_max_iterations", "fp_max_iterations",
             "randomization_count"}
_TUPLE_FLOAT_KEYS = {"weights", "a_max_db", "sweep_grid"}
_BOOL_KEYS = {"tie_x_irs_to_x_ue"}
_STR_KEYS = {"sweep_variable", "output_dir"}


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


def config_to_text(config: ExperimentConfig) -> str:
    out = io.StringIO()
    for section, keys in _SECTIONS.items():
        out.write(f"[{section}]\n")
        for key in keys:
            value = getattr(config, key)
            if isinstance(value, tuple):
                text = ",".join(str(x) for x in value)
            else:
                text = str(value)
            out.write(f"{key} = {text}\n")
        out.write("\n")
    return out.getvalue()


def config_from_text(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    values = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            values[key] = _parse_value(key, raw)
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key == "schemes":
        return tuple(s.strip() for s in raw.split(",") if s.strip())
    if key in _TUPLE_FLOAT_KEYS:
        return tuple(float(x) for x in raw.split(",") if x.strip())
    if key in _BOOL_KEYS:
        if raw.lower() in ("true", "yes", "1"):
            return True
        if raw.lower() in ("false", "no", "0"):
            return False
        raise ConfigError(f"key {key!r}: expected a boolean, got {raw!r}")
    if key in _STR_KEYS:
        return raw
    try:
        return int(raw) if key in _INT_KEYS else float(raw)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: {exc}") from exc


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return config_from_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class RunRecord:
    sweep_variable: str
    sweep_value: float
    scheme: str
    a_max_db: float
    realization: int
    seed: int
    status: str
    feasible: bool
    objective: float
    total_energy: float
    tau0: float
    iterations: int
    wall_time: float        # kept in memory only; not serialized (varies run to run)

    def csv_row(self) -> tuple:
        return (self.sweep_variable, _fmt(self.sweep_value), self.scheme,
                _fmt(self.a_max_db), str(self.realization), str(self.seed),
                self.status, str(self.feasible).lower(),
                _fmt(self.objective) if np.isfinite(self.objective) else "",
                _fmt(self.total_energy) if np.isfinite(self.total_energy) else "",
                _fmt(self.tau0), str(self.iterations))


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def run_single(config: ExperimentConfig, scheme: str, sweep_value: float,
               a_max_db: float, realization: int) -> RunRecord:
    """Solve one (sweep point, scheme, realization) cell."""
    p_a_dbm = config.p_a_dbm
    x_ue, x_irs = config.x_ue_m, config.x_irs_m
    if config.sweep_variable == "p_a_dbm":
        p_a_dbm = sweep_value
    elif config.sweep_variable == "x_ue":
        x_ue = sweep_value
        if config.tie_x_irs_to_x_ue:
            x_irs = sweep_value
    elif config.sweep_variable == "x_irs":
        x_irs = sweep_value

    params = config.system_params(p_a_dbm, a_max_db)
    geometry = config.geometry(x_ue, x_irs)
    _, channels = realize(geometry, config.fading(), config.num_elements,
                          config.master_seed, realization)
    derived = derive_channel(channels)
    rng = named_rng(config.master_seed, realization, "solver")
    mode = SCHEMES[scheme][0]

    try:
        solution = solve_scheme(scheme, params, derived,
                                config.solver_config(), rng)
    except Exception as exc:   # solver failure becomes a status row
        return RunRecord(config.sweep_variable, sweep_value, scheme, a_max_db,
                         realization, config.master_seed,
                         f"error:{type(exc).__name__}", False,
                         np.nan, np.nan, np.nan, 0, 0.0)

    run_params = params.with_passive_irs() if mode == "passive" else params
    energy = total_energy_consumption(run_params, derived, solution.allocation,
                                      solution.plan, mode)
    feasible = solution.feasibility.feasible
    return RunRecord(config.sweep_variable, sweep_value, scheme, a_max_db,
                     realization, config.master_seed, solution.status, feasible,
                     solution.objective if feasible else np.nan,
                     energy, solution.allocation.tau0,
                     solution.iterations_used, solution.wall_time)


def _record_cells(config: ExperimentConfig):
    """Deterministic task list; passive schemes ignore the cap grid."""
    cells = []
    for value in config.sweep_grid:
        for scheme in config.schemes:
            caps = (0.0,) if SCHEMES[scheme][0] == "passive" else config.a_max_db
            for cap in caps:
                for real in range(config.num_realizations):
                    cells.append((scheme, value, cap, real))
    return cells


def _worker(args):
    config_text, scheme, value, cap, real = args
    config = config_from_text(config_text)
    return run_single(config, scheme, value, cap, real)


def run_sweep(config: ExperimentConfig, out_dir: str | None = None,
              workers: int | None = None) -> dict:
    """Execute the whole sweep and write records.csv, aggregate.csv,
    manifest.txt.  Output bytes depend only on (config, master seed)."""
    out_dir = out_dir if out_dir is not None else config.output_dir
    workers = workers if workers is not None else config.workers
    os.makedirs(out_dir, exist_ok=True)

    cells = _record_cells(config)
    text = config_to_text(config)
    if workers > 1:
        with multiprocessing.get_context("spawn").Pool(workers) as pool:
            records = pool.map(_worker, [(text, *cell) for cell in cells],
                               chunksize=max(1, len(cells) // (4 * workers)))
    else:
        records = [run_single(config, *cell) for cell in cells]

    records.sort(key=lambda r: (r.sweep_value, r.scheme, r.a_max_db, r.realization))

    # abort when any sweep point fails for most realizations
    by_point: dict = {}
    for rec in records:
        key = (rec.sweep_value, rec.scheme, rec.a_max_db)
        ok, n = by_point.get(key, (0, 0))
        by_point[key] = (ok + (not rec.status.startswith("error")), n + 1)
    failed_points = {k: (n - ok, n) for k, (ok, n) in by_point.items() if ok <= n / 2}
    if failed_points:
        summary = "; ".join(f"{k}: {bad}/{n} failed"
                            for k, (bad, n) in failed_points.items())
        raise SweepAborted(f"more than half the runs failed at: {summary}")

    records_path = os.path.join(out_dir, "records.csv")
    with open(records_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(RECORD_COLUMNS) + "\n")
        for rec in records:
            fh.write(",".join(rec.csv_row()) + "\n")

    rows = aggregate(records)
    aggregate_path = os.path.join(out_dir, "aggregate.csv")
    with open(aggregate_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(AGGREGATE_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")

    manifest_path = os.path.join(out_dir, "manifest.txt")
    digest = hashlib.sha256(text.encode()).hexdigest()
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"schema_version: {SCHEMA_VERSION}\n")
        fh.write(f"master_seed: {config.master_seed}\n")
        fh.write(f"config_sha256: {digest}\n")
        fh.write("config:\n")
        for line in text.splitlines():
            fh.write(f"  {line}\n")
    return {"records": records_path, "aggregate": aggregate_path,
            "manifest": manifest_path, "num_records": len(records)}


class SweepAborted(RuntimeError):
    pass


def aggregate(records) -> list:
    """Group by (sweep value, scheme, cap); mean and standard error of the
    objective and total energy over feasible realizations."""
    groups: dict = {}
    for rec in records:
        groups.setdefault((rec.sweep_value, rec.scheme, rec.a_max_db), []).append(rec)
    rows = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2])):
        recs = [r for r in groups[key] if np.isfinite(r.objective)]
        if not recs:
            continue
        obj = np.array([r.objective for r in recs])
        en = np.array([r.total_energy for r in recs])
        rows.append((recs[0].sweep_variable, _fmt(key[0]), key[1], _fmt(key[2]),
                     str(len(recs)), _fmt(float(np.mean(obj))), _fmt(_stderr(obj)),
                     _fmt(float(np.mean(en))), _fmt(_stderr(en))))
    return rows


def _stderr(x: np.ndarray) -> float:
    if x.size < 2:
        return 0.0
    return float(np.std(x, ddof=1) / np.sqrt(x.size))
