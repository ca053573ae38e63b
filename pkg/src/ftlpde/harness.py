"""Experiment orchestration: single runs, convergence studies and property checks."""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .density import fmt, reconstruct
from .ftl import DEFAULT_ATOL, DEFAULT_RTOL, Trajectory, integrate, read_trajectory_csv
from .metrics import (
    BumpTestFunction,
    entropy_residual,
    l1_error,
    local_bv_bound,
    local_tv_velocity,
    max_principle_margin,
    oleinik,
    total_variation,
    w1_lipschitz_constant,
    wasserstein1,
)
from .model import VelocityModel, validate_assumptions
from .quantile import InitialDatum, ic_paper, partition
from .reference import DEFAULT_DELTA_RHO, front_track
from .state import IntegrityError, Mode

BUILTIN_DATUM = "ic-paper"
DEFAULT_SNAPSHOTS = 41
ERROR_WINDOW = (-2.0, 2.0)
CHECK_SEED = 20240607
W1_PAIRS = 20


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    model: str = "lwr"
    datum: str = BUILTIN_DATUM
    mode: str = Mode.ANCHORED.value
    n: int = 200
    n_list: list | None = None
    t_end: float = 0.5
    snapshots: list | None = None
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    delta_rho: float = DEFAULT_DELTA_RHO
    window: list = field(default_factory=lambda: list(ERROR_WINDOW))
    out: str = "out"
    jobs: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        extra = sorted(set(d) - known)
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> ExperimentConfig:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)

    def validate(self) -> ExperimentConfig:
        try:
            self.mode = Mode(self.mode).value
        except ValueError:
            raise ConfigError(f"mode must be 'anchored' or 'phantom', got {self.mode!r}") from None
        for n in [self.n] + list(self.n_list or []):
            if int(n) != n or n < 3:
                raise ConfigError(f"N must be an integer >= 3, got {n!r}")
        self.n = int(self.n)
        if self.n_list is not None:
            self.n_list = [int(n) for n in self.n_list]
        if not (isinstance(self.t_end, (int, float)) and self.t_end > 0):
            raise ConfigError(f"t_end must be > 0, got {self.t_end!r}")
        self.t_end = float(self.t_end)
        if not (self.rtol > 0 and self.atol > 0):
            raise ConfigError("rtol and atol must be positive")
        if not self.delta_rho > 0:
            raise ConfigError("delta_rho must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if len(self.window) != 2 or not self.window[0] < self.window[1]:
            raise ConfigError("window must be [a, b] with a < b")
        if self.datum != BUILTIN_DATUM and not Path(self.datum).is_file():
            raise ConfigError(f"datum file not found: {self.datum}")
        if self.model.startswith("table:") and not Path(self.model[6:]).is_file():
            raise ConfigError(f"model table not found: {self.model[6:]}")
        if self.snapshots is not None:
            s = [float(x) for x in self.snapshots]
            if any(b <= a for a, b in zip(s, s[1:])):
                raise ConfigError("snapshot times must be strictly increasing")
            if s and (s[0] < 0 or s[-1] > self.t_end):
                raise ConfigError(f"snapshot times must lie in [0, {self.t_end}]")
            self.snapshots = s
        return self

    def snapshot_times(self) -> list[float]:
        if self.snapshots:
            s = list(self.snapshots)
        else:
            s = [self.t_end * j / (DEFAULT_SNAPSHOTS - 1) for j in range(DEFAULT_SNAPSHOTS)]
        if s[0] > 0:
            s.insert(0, 0.0)
        if s[-1] < self.t_end:
            s.append(self.t_end)
        return s

    def resolved(self) -> dict:
        d = asdict(self)
        d["snapshots"] = self.snapshot_times()
        return d


def load_datum(config: ExperimentConfig) -> InitialDatum:
    if config.datum == BUILTIN_DATUM:
        return ic_paper()
    return InitialDatum.from_csv(config.datum)


def load_model(config: ExperimentConfig) -> VelocityModel:
    try:
        return VelocityModel.from_spec(config.model)
    except (ValueError, OSError) as exc:
        raise ConfigError(f"bad model spec {config.model!r}: {exc}") from None


# -- JSON with 17 significant digits ----------------------------------------


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return fmt(v) if math.isfinite(v) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


# -- run ---------------------------------------------------------------------


def simulate(config: ExperimentConfig, n: int | None = None, snapshot_times=None) -> Trajectory:
    datum = load_datum(config)
    model = load_model(config)
    state = partition(datum, config.n if n is None else n, config.mode)
    times = config.snapshot_times() if snapshot_times is None else snapshot_times
    return integrate(state, model, config.t_end, config.rtol, config.atol, snapshot_times=times)


def default_bumps(datum: InitialDatum, t_end: float) -> list[BumpTestFunction]:
    """Three test functions covering the left, middle and right of the initial support."""
    lo, hi = datum.support_bounds if datum.support_bounds else (-1.0, 1.0)
    w = (hi - lo) / 2
    return [
        BumpTestFunction(0.5 * t_end, 0.4 * t_end, xc, w)
        for xc in (lo, 0.5 * (lo + hi), hi)
    ]


def _entropy_entries(traj, datum, config):
    out = []
    R = datum.R
    for phi in default_bumps(datum, config.t_end):
        for k in (0.0, 0.5 * R, R):
            try:
                rep = entropy_residual(traj, k, phi)
            except ValueError as exc:
                out.append({"k": k, "phi": phi.describe(), "skipped": str(exc)})
                continue
            out.append(rep.as_dict())
    return out


def diagnostics(traj: Trajectory, datum: InitialDatum, config: ExperimentConfig) -> dict:
    model = traj.model
    d0 = reconstruct(traj.snapshots[0])
    snaps = []
    for s in traj.snapshots:
        d = reconstruct(s)
        snaps.append(
            {
                "t": s.t,
                "tv": total_variation(d),
                "max_z": oleinik(s, model).max_z,
                "min_gap": float(np.min(s.gaps)),
                "w1_from_initial": wasserstein1(d0, d),
            }
        )
    report = validate_assumptions(model, datum.R)
    notes = []
    if config.datum == BUILTIN_DATUM:
        notes.append("velocity model for the builtin datum is assumed to be v(rho) = 1 - rho (lwr)")
    if not report.v2_ok:
        notes.append("V2 unverified on [0, R]: Oleinik bound not expected to hold")
    return {
        "config": config.resolved(),
        "model": model.describe(),
        "assumptions": {"v1_ok": report.v1_ok, "v2_ok": report.v2_ok, "worst_violation": report.worst_violation},
        "ell": traj.snapshots[0].ell,
        "R": datum.R,
        "mass": datum.mass,
        "solver": {**traj.stats.as_dict(), "rtol": traj.rtol, "atol": traj.atol, "method": "bogacki-shampine-3(2)"},
        "snapshots": snaps,
        "entropy": _entropy_entries(traj, datum, config),
        "notes": notes,
    }


def run(config: ExperimentConfig) -> Path:
    """Integrate one configuration and write trajectory, densities and diagnostics."""
    config.validate()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    datum = load_datum(config)
    traj = simulate(config)
    traj.to_csv(out / "trajectory.csv")
    dens = out / "densities"
    dens.mkdir(exist_ok=True)
    for j, s in enumerate(traj.snapshots):
        reconstruct(s).to_csv(dens / f"density_{j:04d}.csv")
    diag = diagnostics(traj, datum, config)
    diag["solver"].pop("backend", None)
    (out / "diagnostics.json").write_text(dumps(diag))
    return out


# -- converge ----------------------------------------------------------------


@dataclass
class ConvergenceRow:
    n: int
    l1_error: float
    runtime: float
    accepted_steps: int
    rejected_steps: int

    def as_dict(self) -> dict:
        return asdict(self)


def _reference_density(config):
    datum = load_datum(config)
    if datum.density is None:
        raise ConfigError("convergence studies need a piecewise-constant datum")
    handle = front_track(datum.density, config.t_end, load_model(config), config.delta_rho)
    return handle.density(config.t_end)


def _converge_row(args) -> ConvergenceRow:
    config, n, ref = args
    t0 = time.perf_counter()
    traj = simulate(config, n=n, snapshot_times=[0.0, config.t_end])
    a, b = config.window
    err = l1_error(reconstruct(traj.final), ref, a, b)
    return ConvergenceRow(n, err, time.perf_counter() - t0, traj.stats.accepted_steps, traj.stats.rejected_steps)


def observed_order(ns, errors) -> float:
    """Least-squares slope of -log(error) against log(N)."""
    ns = np.asarray(ns, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if ns.size < 2 or np.unique(ns).size < 2:
        raise ValueError("need at least two distinct N to fit an order")
    slope = np.polyfit(np.log(ns), np.log(errors), 1)[0]
    return float(-slope)


def converge(config: ExperimentConfig):
    """L1 error against the front-tracking reference for every N; returns ``(rows, order)``."""
    config.validate()
    ns = config.n_list
    if not ns or len(ns) < 2:
        raise ConfigError("converge needs an N-list with at least two entries")
    ref = _reference_density(config)
    jobs = [(config, n, ref) for n in ns]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            rows = list(pool.map(_converge_row, jobs))
    else:
        rows = [_converge_row(j) for j in jobs]
    order = observed_order([r.n for r in rows], [r.l1_error for r in rows]) if len(set(ns)) > 1 else math.nan
    return rows, order


def write_convergence(rows, order, config, out) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["n,l1_error,runtime,accepted_steps,rejected_steps"]
    for r in rows:
        lines.append(f"{r.n},{fmt(r.l1_error)},{fmt(r.runtime)},{r.accepted_steps},{r.rejected_steps}")
    (out / "convergence.csv").write_text("\n".join(lines) + "\n")
    meta = {
        "config": config.resolved(),
        "observed_order": order,
        "error": "exact L1 integral of the piecewise-constant difference over the window",
        "reference": {"method": "front tracking", "delta_rho": config.delta_rho},
    }
    (out / "convergence.json").write_text(dumps(meta))
    return out


# -- check -------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    status: str  # pass | fail | n/a | flagged
    margin: float = math.nan
    detail: str = ""

    @property
    def hard_failure(self) -> bool:
        return self.status == "fail"

    def as_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "worst_margin": self.margin, "detail": self.detail}


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def check_trajectory(traj: Trajectory, datum: InitialDatum, seed: int = CHECK_SEED) -> list[CheckResult]:
    """Evaluate the discrete invariants on every snapshot of ``traj``."""
    model = traj.model
    R = datum.R
    res = []

    mp = min(max_principle_margin(s, R) for s in traj.snapshots)
    res.append(CheckResult("max_principle", _status(mp >= -1e-9), mp, "min gap * R / ell - 1"))

    tvs = [total_variation(reconstruct(s)) for s in traj.snapshots]
    inc = max((b - a for a, b in zip(tvs, tvs[1:])), default=0.0)
    res.append(CheckResult("tv_contraction", _status(inc <= 1e-8), -inc, "largest TV increase between snapshots"))

    report = validate_assumptions(model, R)
    positive = [s for s in traj.snapshots if s.t > 0]
    if not report.v2_ok:
        res.append(CheckResult("oleinik", "n/a", math.nan, "not applicable (V2 unverified)"))
    elif positive:
        worst = min(s.ell - oleinik(s, model).max_z for s in positive)
        ell = traj.snapshots[0].ell
        res.append(CheckResult("oleinik", _status(worst >= -1e-6 * ell), worst, "ell - max z_i"))

    res.append(_check_local_bv(traj, datum))

    t = traj.times
    if t.size >= 2:
        rng = np.random.default_rng(seed)
        C = w1_lipschitz_constant(model, R, traj.snapshots[0].mass)
        worst = math.inf
        for _ in range(W1_PAIRS):
            i, j = sorted(rng.choice(t.size, size=2, replace=False))
            w = wasserstein1(reconstruct(traj.snapshots[i]), reconstruct(traj.snapshots[j]))
            bound = C * (t[j] - t[i]) * (1 + 1e-6)
            worst = min(worst, bound - w)
        res.append(CheckResult("w1_lipschitz", _status(worst >= 0), worst, f"C = {fmt(C)}"))
    return res


def _check_local_bv(traj, datum) -> CheckResult:
    model = traj.model
    x0 = traj.snapshots[0].x
    lo, hi = float(x0[0]), float(x0[-1])
    t_end = traj.times[-1]
    delta = 0.25 * t_end
    edges = np.linspace(lo, hi, 5)
    windows = [(edges[i], edges[i + 1]) for i in range(4)] + [(lo - 1.0, hi + 1.0)]
    worst = math.inf
    flagged = []
    failed = False
    for a, b in windows:
        bound = local_bv_bound(model, datum.R, a, b, delta) + 1e-6
        for s in traj.snapshots:
            if s.t < delta:
                continue
            tv = local_tv_velocity(reconstruct(s), model, a, b)
            margin = bound - tv
            outside = a < s.x[0] or b > s.x[-1]
            if outside:
                if margin < 0:
                    flagged.append((a, b))
                continue
            worst = min(worst, margin)
            failed |= margin < 0
    if failed:
        return CheckResult("local_bv", "fail", worst, f"delta = {fmt(delta)}")
    if flagged:
        return CheckResult("local_bv", "flagged", worst, f"bound exceeded on windows beyond the support: {flagged}")
    return CheckResult("local_bv", "pass", worst, f"delta = {fmt(delta)}; windows beyond the support not asserted")


def check(config: ExperimentConfig, trajectory: str | None = None) -> list[CheckResult]:
    config.validate()
    datum = load_datum(config)
    model = load_model(config)
    if trajectory is None:
        traj = simulate(config)
        return [CheckResult("integrity", "pass", math.nan, "fresh integration")] + check_trajectory(traj, datum)
    try:
        with open(trajectory) as fh:
            ncols = len(fh.readline().split(","))
        n_gaps = ncols - 2
        if n_gaps < 2:
            raise IntegrityError(f"{trajectory}: too few columns")
        traj = read_trajectory_csv(trajectory, datum.mass / n_gaps, config.mode, model)
    except (IntegrityError, OSError) as exc:
        return [CheckResult("integrity", "fail", math.nan, str(exc))]
    return [CheckResult("integrity", "pass", math.nan, str(trajectory))] + check_trajectory(traj, datum)
