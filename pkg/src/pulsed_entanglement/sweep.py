"""Parameter sweeps: configuration, parallel execution and CSV output.

Configuration grammar (TOML subset, UTF-8). Three flat sections; scalars are
numbers or strings, lists are one-line arrays of numbers::

    [sweep]
    seed = 2016            # required
    mode = "both"          # "mc" | "oracle" | "both"
    trajectories = 100000  # per grid point, >= 1000 unless mode = "oracle"
    steps = 3000
    blocks = 100           # trajectory blocks (error estimation and RNG streams)
    bootstrap = 200        # bootstrap resamples per criterion
    output = "results"     # output directory

    [grid]
    squeezing = [1.0]
    storage_times = [16.3, 40.8, 81.7]
    n_bath = [0, 0.5, 1, 2]      # or: temperature = [0.2, 0.4]  (kelvin)

    [model]
    tau1 = 8.17
    gamma_m = 9.99e-5            # dimensionless mechanical damping
    n_mech_init = 0.7            # omit to start thermalized at n_bath
    mech_frequency = 3.6998e9    # Hz, used only to convert temperatures

Every trajectory block draws from its own stream keyed by
``(seed, point index, block index)`` and results are merged in block order,
so output files are byte-identical for any worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import io
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .estimators import MomentAccumulator, delta_ent, epr_steering, fidelity_mc
from .integrator import build_step_maps, run_batch
from .model import (
    N_STEPS_DEFAULT,
    REFERENCE_PHYSICAL,
    SQUEEZING_DEFAULT,
    STORAGE_TIMES,
    TAU1_DEFAULT,
    ProtocolParams,
    PulseSchedule,
    bose_occupation,
)
from .oracle import analytic_delta_ent, analytic_epr, criterion_from_covariance, gaussian_fidelity, propagate_covariance
from .sampling import RngStream

log = logging.getLogger(__name__)

MODES = ("mc", "oracle", "both")
MIN_MC_TRAJECTORIES = 1000
FIDELITY_REL_ERR_WARN = 0.1

_SCHEMA = {
    "sweep": {"seed", "mode", "trajectories", "steps", "blocks", "bootstrap", "output"},
    "grid": {"squeezing", "storage_times", "n_bath", "temperature"},
    "model": {"tau1", "gamma_m", "n_mech_init", "mech_frequency"},
}


@dataclass(frozen=True)
class SweepConfig:
    seed: int
    squeezing: tuple = (SQUEEZING_DEFAULT,)
    n_bath: tuple = (0.0, 0.5, 1.0, 2.0)
    storage_times: tuple = STORAGE_TIMES
    trajectories: int = 100_000
    steps: int = N_STEPS_DEFAULT
    mode: str = "both"
    output: str = "results"
    blocks: int = 100
    bootstrap: int = 200
    tau1: float = TAU1_DEFAULT
    gamma_m: float = ProtocolParams().gamma_m
    n_mech_init: float | None = None
    temperature: tuple | None = None

    def validate(self) -> list[str]:
        errs = []
        for name in ("squeezing", "n_bath", "storage_times"):
            values = getattr(self, name)
            if len(values) == 0:
                errs.append(f"{name}: list must be non-empty")
            elif any(not (math.isfinite(v) and v >= 0) for v in values):
                errs.append(f"{name}: values must be finite and >= 0")
        if self.mode not in MODES:
            errs.append(f"mode: must be one of {MODES}, got {self.mode!r}")
        elif self.mode != "oracle" and self.trajectories < MIN_MC_TRAJECTORIES:
            errs.append(f"trajectories: need >= {MIN_MC_TRAJECTORIES} for Monte Carlo, got {self.trajectories}")
        if self.steps < 100:
            errs.append(f"steps: must be >= 100, got {self.steps}")
        if self.blocks < 2:
            errs.append(f"blocks: must be >= 2, got {self.blocks}")
        elif self.mode != "oracle" and self.trajectories < self.blocks:
            errs.append("trajectories: must be at least the number of blocks")
        if self.bootstrap < 2:
            errs.append(f"bootstrap: must be >= 2, got {self.bootstrap}")
        if not self.tau1 > 3:
            errs.append(f"tau1: must exceed 3, got {self.tau1}")
        if not self.gamma_m >= 0:
            errs.append(f"gamma_m: must be >= 0, got {self.gamma_m}")
        if self.n_mech_init is not None and not self.n_mech_init >= 0:
            errs.append(f"n_mech_init: must be >= 0, got {self.n_mech_init}")
        return errs


def _as_tuple(name, value, errs):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (float(value),)
    if isinstance(value, list) and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return tuple(float(v) for v in value)
    errs.append(f"{name}: expected a number or list of numbers")
    return ()


def _as_int(name, value, errs):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        errs.append(f"{name}: expected an integer, got {value!r}")
        return 0
    return int(value)


def _as_float(name, value, errs):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errs.append(f"{name}: expected a number, got {value!r}")
        return float("nan")
    return float(value)


def parse_config(text: str) -> SweepConfig:
    """Parse and validate sweep configuration text.

    Raises:
        ConfigError: listing every violation (syntax, unknown or missing keys,
            invalid values).
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"syntax: {exc}") from exc

    errs: list[str] = []
    flat = {}
    for section, body in raw.items():
        if not isinstance(body, dict):
            errs.append(f"unknown key {section} (keys belong to [sweep], [grid] or [model])")
            continue
        if section not in _SCHEMA:
            errs.append(f"unknown section [{section}]")
            continue
        for key, value in body.items():
            if key not in _SCHEMA[section]:
                errs.append(f"unknown key {section}.{key}")
            else:
                flat[key] = value

    if "seed" not in flat:
        errs.append("missing required key sweep.seed")
    if "n_bath" in flat and "temperature" in flat:
        errs.append("grid: give either n_bath or temperature, not both")

    kw = {}
    if "seed" in flat:
        kw["seed"] = _as_int("seed", flat["seed"], errs)
    for key in ("trajectories", "steps", "blocks", "bootstrap"):
        if key in flat:
            kw[key] = _as_int(key, flat[key], errs)
    for key in ("mode", "output"):
        if key in flat:
            if isinstance(flat[key], str):
                kw[key] = flat[key]
            else:
                errs.append(f"{key}: expected a string")
    for key in ("squeezing", "storage_times", "n_bath"):
        if key in flat:
            kw[key] = _as_tuple(key, flat[key], errs)
    for key in ("tau1", "gamma_m", "n_mech_init"):
        if key in flat:
            kw[key] = _as_float(key, flat[key], errs)

    if "temperature" in flat:
        temps = _as_tuple("temperature", flat["temperature"], errs)
        freq = _as_float("mech_frequency", flat.get("mech_frequency", REFERENCE_PHYSICAL.mech_frequency), errs)
        if any(not (math.isfinite(t) and t >= 0) for t in temps):
            errs.append("temperature: values must be finite and >= 0")
        elif not freq > 0:
            errs.append("mech_frequency: must be > 0")
        else:
            kw["temperature"] = temps
            kw["n_bath"] = tuple(bose_occupation(freq, t) for t in temps)

    if errs:
        raise ConfigError(errs)
    cfg = SweepConfig(**kw)
    errs = cfg.validate()
    if errs:
        raise ConfigError(errs)
    return cfg


def load_config(path) -> SweepConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


# --------------------------------------------------------------------------
# results


@dataclass
class ResultRow:
    n_bath: float
    tau_s: float
    r: float
    delta_ent_mc: float | None = None
    delta_ent_mc_err: float | None = None
    delta_ent_analytic: float | None = None
    delta_ent_oracle: float | None = None
    epr12: float | None = None
    epr12_err: float | None = None
    epr21: float | None = None
    epr21_err: float | None = None
    epr_analytic: float | None = None
    fidelity_mc: float | None = None
    fidelity_mc_err: float | None = None
    fidelity_oracle: float | None = None
    G_opt: float | None = None
    theta_opt: float | None = None
    n_traj: int = 0
    rejected_traj: int = 0
    seed: int = 0
    wall_time: float = field(default=0.0, compare=False)


# wall_time varies run to run; it goes to a separate timing file
CSV_COLUMNS = [f.name for f in dataclasses.fields(ResultRow) if f.name != "wall_time"]


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if math.isnan(x):
        return "nan"
    return f"{x:.9g}"


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_cell(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8", newline="")


PLOT_FILES = {
    "entanglement": ("delta_ent_mc", "delta_ent_mc_err", "delta_ent_analytic", "delta_ent_oracle"),
    "fidelity": ("fidelity_mc", "fidelity_mc_err", None, "fidelity_oracle"),
    "steering": ("epr12", "epr12_err", "epr_analytic", None),
}


def write_outputs(rows: Sequence[ResultRow], path) -> list[Path]:
    """Write ``results.csv``, one plot-series file per figure and ``timing.csv``.

    Plot files are long-form: each ``(r, tau_s)`` pair is one series of
    values against ``n_bath``.

    Returns:
        The paths written.
    """
    if not rows:
        raise ValueError("no rows to write")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    p = out / "results.csv"
    _write_csv(p, CSV_COLUMNS, [[getattr(r, c) for c in CSV_COLUMNS] for r in rows])
    written.append(p)

    ordered = sorted(rows, key=lambda r: (r.r, r.tau_s, r.n_bath))
    for name, (mc, err, analytic, oracle) in PLOT_FILES.items():
        header = ["r", "tau_s", "n_bath", "mc", "mc_err", "analytic", "oracle"]
        data = [
            [
                r.r,
                r.tau_s,
                r.n_bath,
                getattr(r, mc),
                getattr(r, err),
                getattr(r, analytic) if analytic else None,
                getattr(r, oracle) if oracle else None,
            ]
            for r in ordered
        ]
        p = out / f"plot_{name}.csv"
        _write_csv(p, header, data)
        written.append(p)

    p = out / "timing.csv"
    _write_csv(p, ["n_bath", "tau_s", "r", "wall_time"], [[r.n_bath, r.tau_s, r.r, r.wall_time] for r in rows])
    written.append(p)
    return written


# --------------------------------------------------------------------------
# execution


@functools.lru_cache(maxsize=4)
def _maps(p: ProtocolParams, s: PulseSchedule):
    return build_step_maps(p, s)


def _run_block(job):
    p, s, seed, key, size = job
    res = run_batch(p, s, RngStream(seed, key), size, _maps(p, s))
    return res.a_out, res.rejected


def block_sizes(n: int, blocks: int) -> list[int]:
    base, extra = divmod(n, blocks)
    return [base + (1 if i < extra else 0) for i in range(blocks)]


@dataclass(frozen=True)
class MonteCarloRun:
    acc: MomentAccumulator
    samples: np.ndarray
    rejected: int


def simulate(
    p: ProtocolParams,
    s: PulseSchedule,
    trajectories: int,
    blocks: int,
    seed: int,
    point_index: int = 0,
    pool=None,
) -> MonteCarloRun:
    """Run ``trajectories`` split into ``blocks`` independently seeded batches.

    Block ``b`` uses the stream ``(seed, (point_index, b))``; outputs are
    concatenated in block order whatever executes them.
    """
    jobs = [(p, s, seed, (point_index, b), n) for b, n in enumerate(block_sizes(trajectories, blocks))]
    results = list(pool.map(_run_block, jobs)) if pool is not None else [_run_block(j) for j in jobs]
    acc = MomentAccumulator()
    for b, (a_out, _) in enumerate(results):
        acc.add(a_out, block=b)
    samples = np.concatenate([a for a, _ in results])
    return MonteCarloRun(acc, samples, sum(rej for _, rej in results))


def grid_points(cfg: SweepConfig) -> list[tuple[float, float, float]]:
    """``(r, tau_s, n_bath)`` in output order."""
    return [(r, ts, nb) for r in cfg.squeezing for ts in cfg.storage_times for nb in cfg.n_bath]


def run_point(cfg: SweepConfig, index: int, r: float, tau_s: float, n_bath: float, pool=None) -> ResultRow:
    t_start = time.perf_counter()
    p = ProtocolParams(gamma_m=cfg.gamma_m, squeezing_r=r, n_bath=n_bath, n_mech_init=cfg.n_mech_init)
    s = PulseSchedule(tau1=cfg.tau1, tau_s=tau_s, n_steps=cfg.steps)
    row = ResultRow(
        n_bath=n_bath,
        tau_s=tau_s,
        r=r,
        delta_ent_analytic=analytic_delta_ent(r, p.gamma_m, tau_s, n_bath),
        epr_analytic=analytic_epr(r, p.gamma_m, tau_s, n_bath),
        seed=cfg.seed,
    )

    if cfg.mode in ("oracle", "both"):
        V = propagate_covariance(p, s)
        crit = criterion_from_covariance(V)
        row.delta_ent_oracle = crit.delta_ent.value
        row.fidelity_oracle = gaussian_fidelity(V, r)
        row.G_opt, row.theta_opt = crit.delta_ent.gain, crit.delta_ent.phase

    if cfg.mode in ("mc", "both"):
        mc = simulate(p, s, cfg.trajectories, cfg.blocks, cfg.seed, index, pool)
        acc, samples = mc.acc, mc.samples
        row.n_traj = cfg.trajectories
        row.rejected_traj = mc.rejected

        boot = lambda k: np.random.default_rng([cfg.seed & (2**63 - 1), index, k])  # noqa: E731
        ent = delta_ent(acc, rng=boot(0), n_rep=cfg.bootstrap)
        e12 = epr_steering(acc, "1|2", rng=boot(1), n_rep=cfg.bootstrap)
        e21 = epr_steering(acc, "2|1", rng=boot(2), n_rep=cfg.bootstrap)
        row.delta_ent_mc, row.delta_ent_mc_err = ent.value, ent.std_error
        row.epr12, row.epr12_err = e12.value, e12.std_error
        row.epr21, row.epr21_err = e21.value, e21.std_error
        row.G_opt, row.theta_opt = ent.gain, ent.phase
        if len(samples) >= 2:
            f, f_err = fidelity_mc(
                samples, r, n_blocks=cfg.blocks, rng=boot(3), n_rep=cfg.bootstrap, min_samples=min(len(samples), 10_000)
            )
        else:
            f, f_err = float("nan"), float("nan")
        row.fidelity_mc, row.fidelity_mc_err = f, f_err
        if f > 0 and f_err / f > FIDELITY_REL_ERR_WARN:
            log.warning(
                "fidelity at r=%g tau_s=%g n_bath=%g has relative error %.2f; increase trajectories",
                r, tau_s, n_bath, f_err / f,
            )

    row.wall_time = time.perf_counter() - t_start
    return row


def iter_sweep(cfg: SweepConfig, workers: int | None = None) -> Iterator[ResultRow]:
    """Yield one :class:`ResultRow` per grid point, in grid order."""
    workers = workers or os.cpu_count() or 1
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 and cfg.mode != "oracle" else None
    try:
        for index, (r, tau_s, n_bath) in enumerate(grid_points(cfg)):
            row = run_point(cfg, index, r, tau_s, n_bath, pool)
            log.info(
                "r=%g tau_s=%g n_bath=%g: ent mc=%s oracle=%s analytic=%.5f (%.1fs)",
                r, tau_s, n_bath, format_cell(row.delta_ent_mc), format_cell(row.delta_ent_oracle),
                row.delta_ent_analytic, row.wall_time,
            )
            yield row
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)


def run_sweep(cfg: SweepConfig, workers: int | None = None) -> list[ResultRow]:
    return list(iter_sweep(cfg, workers))
