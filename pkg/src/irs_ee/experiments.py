"""Monte-Carlo sweeps of the energy efficiency against the power cap or an array size.

Trial ``t`` draws its channels from ``trial_rng(seed, t)`` for every mode and
every sweep value. N and M sweeps draw at the largest size and crop, so the
overlapping entries are shared across sweep values. Each mode restarts the
trial generator, which makes the initial state (phases, beamformers, powers)
identical across modes as well.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .bcd import BcdSettings, OptimizerMode, optimize
from .channel_gen import ChannelParams, generate_realization, save_channels, trial_rng
from .core_model import SystemConfig, dbm_to_watt

SWEEP_FIELDS = {"pmax": "pmax_dbm", "n": "num_irs_elements", "m": "num_bs_antennas"}
DEFAULT_SWEEPS = {
    "pmax": (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0),
    "n": (2, 4, 6, 8),
    "m": (2, 4, 6, 8),
}
CSV_COLUMNS = ("sweep_var", "sweep_value", "mode", "mean_ee", "std_ee",
               "n_feasible", "n_trials", "seed")


@dataclass(frozen=True)
class Scenario:
    """Scalar description of the uplink; expands to a :class:`SystemConfig`."""

    num_users: int = 3
    num_bs_antennas: int = 4
    num_irs_elements: int = 4
    pmax_dbm: float = 20.0
    min_rate: float = 0.01          # bit/s/Hz per user
    bandwidth: float = 1e6
    noise_psd_dbm_hz: float = -174.0
    circuit_power: float = 0.05
    amp_inefficiency: float = 0.35

    def config(self) -> SystemConfig:
        return SystemConfig.uniform(
            num_users=int(self.num_users),
            num_bs_antennas=int(self.num_bs_antennas),
            num_irs_elements=int(self.num_irs_elements),
            pmax_dbm=float(self.pmax_dbm),
            min_rate=float(self.min_rate),
            bandwidth=float(self.bandwidth),
            noise_psd=float(dbm_to_watt(self.noise_psd_dbm_hz)),
            circuit_power=float(self.circuit_power),
            amp_inefficiency=float(self.amp_inefficiency),
        )

    def at(self, sweep_var: str, value) -> "Scenario":
        name = SWEEP_FIELDS[sweep_var]
        return replace(self, **{name: float(value) if sweep_var == "pmax" else int(value)})


@dataclass
class ExperimentSpec:
    scenario: Scenario = field(default_factory=Scenario)
    channel: ChannelParams = field(default_factory=ChannelParams)
    sweep_var: str = "pmax"
    sweep_values: tuple = DEFAULT_SWEEPS["pmax"]
    trials: int = 200
    modes: tuple[OptimizerMode, ...] = tuple(OptimizerMode)
    seed: int = 0
    out: Path | None = None
    workers: int = 1
    bcd: BcdSettings = field(default_factory=BcdSettings)

    def __post_init__(self):
        if self.sweep_var not in SWEEP_FIELDS:
            raise ValueError(f"sweep_var must be one of {sorted(SWEEP_FIELDS)}")
        self.sweep_values = tuple(self.sweep_values)
        if not self.sweep_values:
            raise ValueError("sweep_values must not be empty")
        if self.sweep_var != "pmax" and any(int(v) != v or v < 1 for v in self.sweep_values):
            raise ValueError("array sizes must be positive integers")
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        if int(self.workers) < 1:
            raise ValueError("workers must be >= 1")
        self.modes = tuple(OptimizerMode(m) for m in self.modes)
        if not self.modes:
            raise ValueError("at least one mode is required")
        if self.out is not None:
            self.out = Path(self.out)
        # every point must describe a valid system
        for v in self.sweep_values:
            self.scenario.at(self.sweep_var, v).config()

    def max_dims(self) -> tuple[int, int]:
        M = self.scenario.num_bs_antennas
        N = self.scenario.num_irs_elements
        if self.sweep_var == "m":
            M = max(M, *(int(v) for v in self.sweep_values))
        if self.sweep_var == "n":
            N = max(N, *(int(v) for v in self.sweep_values))
        return int(M), int(N)


@dataclass
class ResultRow:
    sweep_var: str
    sweep_value: float
    mode: str
    mean_ee: float
    std_ee: float
    n_feasible: int
    n_trials: int
    seed: int


@dataclass
class ResultTable:
    """Aggregated rows plus the per-trial EE, indexed ``[value, mode, trial]``.

    Infeasible trials hold NaN in ``ee``.
    """

    rows: list[ResultRow] = field(default_factory=list)
    ee: np.ndarray | None = None
    sweep_values: tuple = ()
    modes: tuple[OptimizerMode, ...] = ()

    def column(self, mode) -> np.ndarray:
        """Mean EE across the sweep for one mode."""
        mode = OptimizerMode(mode).value
        return np.array([r.mean_ee for r in self.rows if r.mode == mode])


def _load_channels(spec: ExperimentSpec, value, trial: int):
    config = spec.scenario.at(spec.sweep_var, value).config()
    rng = trial_rng(spec.seed, trial)
    channels = generate_realization(config, spec.channel, rng, max_dims=spec.max_dims())
    return config, channels, rng


def run_trial(spec: ExperimentSpec, value, trial: int) -> list[tuple[float, bool]]:
    """``(ee, feasible)`` for each mode of ``spec`` on one paired realization."""
    out = []
    for mode in spec.modes:
        config, channels, rng = _load_channels(spec, value, trial)
        state = optimize(config, channels, mode, settings=spec.bcd, rng=rng)
        out.append((float(state.ee), bool(state.feasible)))
    return out


def _run_task(args):
    spec, value, trial = args
    return run_trial(spec, value, trial)


def _summarize(values: np.ndarray) -> tuple[float, float, int]:
    ok = values[np.isfinite(values)]
    if ok.size == 0:
        return math.nan, math.nan, 0
    std = float(np.std(ok, ddof=1)) if ok.size > 1 else 0.0
    return float(np.mean(ok)), std, int(ok.size)


def run_experiment(spec: ExperimentSpec) -> ResultTable:
    """Run every (sweep value, trial) task and reduce in a fixed order.

    With ``workers > 1`` tasks go to a process pool; results are collected in
    submission order, so the table does not depend on the worker count.
    """
    tasks = [(spec, v, t) for v in spec.sweep_values for t in range(int(spec.trials))]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=int(spec.workers)) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=4))
    else:
        results = [_run_task(task) for task in tasks]

    V, Mo, T = len(spec.sweep_values), len(spec.modes), int(spec.trials)
    ee = np.full((V, Mo, T), np.nan)
    for (_, v, t), res in zip(tasks, results):
        i = spec.sweep_values.index(v)
        for j, (value, feasible) in enumerate(res):
            if feasible:
                ee[i, j, t] = value

    rows = []
    for i, v in enumerate(spec.sweep_values):
        for j, mode in enumerate(spec.modes):
            mean, std, n_ok = _summarize(ee[i, j])
            rows.append(ResultRow(spec.sweep_var, float(v), mode.value, mean, std, n_ok, T,
                                  int(spec.seed)))
    return ResultTable(rows=rows, ee=ee, sweep_values=spec.sweep_values, modes=spec.modes)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and not math.isfinite(x):
        return "nan"
    return f"{x:.6g}"


def _write_rows(rows, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([r.sweep_var, _fmt(r.sweep_value), r.mode, _fmt(r.mean_ee),
                         _fmt(r.std_ee), r.n_feasible, r.n_trials, r.seed])


def emit_csv(table: ResultTable | list[ResultRow], path) -> None:
    """Write ``table`` to a path or an open text stream."""
    rows = table.rows if isinstance(table, ResultTable) else table
    if hasattr(path, "write"):
        _write_rows(rows, path)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(rows, fh)


def read_csv(path) -> list[ResultRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        return [ResultRow(r["sweep_var"], float(r["sweep_value"]), r["mode"],
                          float(r["mean_ee"]), float(r["std_ee"]), int(r["n_feasible"]),
                          int(r["n_trials"]), int(r["seed"])) for r in reader]


def export_channels(spec: ExperimentSpec, value, trial: int, path) -> None:
    """Write the realization used by ``trial`` at sweep point ``value`` as JSON."""
    _, channels, _ = _load_channels(spec, value, trial)
    save_channels(channels, path)


def _from_mapping(cls, data: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown keys in '{section}': {sorted(unknown)}")
    return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})


def spec_from_dict(data: dict) -> ExperimentSpec:
    data = dict(data or {})
    allowed = {"scenario", "channel", "sweep", "trials", "modes", "seed", "out", "workers", "bcd"}
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown top-level keys: {sorted(unknown)}")
    sweep = dict(data.get("sweep") or {})
    var = str(sweep.pop("var", "pmax")).lower()
    if var not in SWEEP_FIELDS:
        raise ValueError(f"sweep.var must be one of {sorted(SWEEP_FIELDS)}")
    values = sweep.pop("values", DEFAULT_SWEEPS[var])
    if sweep:
        raise ValueError(f"unknown keys in 'sweep': {sorted(sweep)}")
    bcd = dict(data.get("bcd") or {})
    bcd_fields = {"max_outer_iters", "ee_rel_tol", "randomizations"}
    if set(bcd) - bcd_fields:
        raise ValueError(f"unknown keys in 'bcd': {sorted(set(bcd) - bcd_fields)}")
    kwargs = dict(
        scenario=_from_mapping(Scenario, data.get("scenario") or {}, "scenario"),
        channel=_from_mapping(ChannelParams, data.get("channel") or {}, "channel"),
        sweep_var=var,
        sweep_values=tuple(values),
        bcd=BcdSettings(**bcd),
    )
    for key in ("trials", "modes", "seed", "out", "workers"):
        if key in data and data[key] is not None:
            kwargs[key] = data[key]
    return ExperimentSpec(**kwargs)


def load_spec(path) -> ExperimentSpec:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is not None and not isinstance(data, dict):
        raise ValueError("experiment file must hold a mapping")
    return spec_from_dict(data or {})


def spec_to_dict(spec: ExperimentSpec) -> dict:
    """Plain-data form of ``spec``, the inverse of :func:`spec_from_dict`."""
    return {
        "scenario": asdict(spec.scenario),
        "channel": {k: list(v) if isinstance(v, tuple) else v
                    for k, v in asdict(spec.channel).items()},
        "sweep": {"var": spec.sweep_var, "values": list(spec.sweep_values)},
        "trials": int(spec.trials),
        "modes": [m.value for m in spec.modes],
        "seed": int(spec.seed),
        "out": None if spec.out is None else str(spec.out),
        "workers": int(spec.workers),
        "bcd": {"max_outer_iters": spec.bcd.max_outer_iters,
                "ee_rel_tol": spec.bcd.ee_rel_tol,
                "randomizations": spec.bcd.randomizations},
    }
