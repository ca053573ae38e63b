"""Follow-the-leader particle dynamics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .density import fmt
from .model import VelocityModel
from .solver import ChainStepper, IntegrationError, SolverStats, VectorFieldStepper, integrate_adaptive
from .state import IntegrityError, Mode, ParticleState, check_ordered, full_positions

DEFAULT_RTOL = 1e-6
DEFAULT_ATOL = 1e-9

__all__ = [
    "DEFAULT_ATOL",
    "DEFAULT_RTOL",
    "GapDensities",
    "IntegrationError",
    "Trajectory",
    "density_rhs",
    "integrate",
    "integrate_densities",
    "read_trajectory_csv",
    "rhs",
]


@dataclass(frozen=True, eq=False)
class GapDensities:
    """R_i = ell / (x_{i+1} - x_i) along an integrated chain (leader gap last)."""

    r: np.ndarray
    ell: float

    def __post_init__(self):
        r = np.array(self.r, dtype=float)
        if r.ndim != 1 or r.size < 1:
            raise ValueError("need at least one gap density")
        if np.any(~np.isfinite(r)) or np.any(r <= 0):
            raise ValueError("gap densities must be positive and finite")
        object.__setattr__(self, "r", r)

    @classmethod
    def from_state(cls, state: ParticleState) -> GapDensities:
        """Densities of the integrated gaps (phantom gaps excluded)."""
        y = state.chain()
        return cls(state.ell / np.diff(y), state.ell)


@dataclass
class Trajectory:
    snapshots: list
    model: VelocityModel
    stats: SolverStats = field(default_factory=SolverStats)
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL

    def __post_init__(self):
        times = [s.t for s in self.snapshots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise IntegrityError("snapshot times are not strictly increasing")

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def positions(self) -> np.ndarray:
        return np.vstack([s.x for s in self.snapshots])

    @property
    def final(self) -> ParticleState:
        return self.snapshots[-1]

    def to_csv(self, path) -> None:
        n = self.snapshots[0].x.size
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"x_{i}" for i in range(n)])
            for s in self.snapshots:
                w.writerow([fmt(s.t)] + [fmt(v) for v in s.x])


def read_trajectory_csv(path, ell: float, mode: Mode | str, model: VelocityModel) -> Trajectory:
    """Load a snapshot CSV; raises :class:`IntegrityError` on malformed or unordered rows."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "t" or len(header) < 5:
            raise IntegrityError(f"{path}: expected header 't,x_0,...,x_N' with N >= 3")
        expected = ["t"] + [f"x_{i}" for i in range(len(header) - 1)]
        if [h.strip() for h in header] != expected:
            raise IntegrityError(f"{path}: header columns must be {expected[:3]}...")
        snaps = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise IntegrityError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise IntegrityError(f"{path}:{lineno}: non-numeric entry") from None
            try:
                snaps.append(ParticleState(vals[0], np.array(vals[1:]), ell, mode))
            except IntegrityError as exc:
                raise IntegrityError(f"{path}:{lineno}: {exc}") from None
    if not snaps:
        raise IntegrityError(f"{path}: no snapshot rows")
    try:
        return Trajectory(snaps, model)
    except IntegrityError as exc:
        raise IntegrityError(f"{path}: {exc}") from None


def _chain_velocities(y: np.ndarray, ell: float, model: VelocityModel) -> np.ndarray:
    out = np.empty_like(y)
    out[:-1] = model.v(ell / np.diff(y))
    out[-1] = model.v_max
    return out


def rhs(state: ParticleState, model: VelocityModel) -> np.ndarray:
    """Velocities of all N + 1 particles.

    In phantom mode the outer entries are the time derivatives of the
    reflected positions, 2 y_1' - y_2' and 2 y_{N-1}' - y_{N-2}'.
    """
    check_ordered(state.x)
    y = state.chain()
    vy = _chain_velocities(y, state.ell, model)
    if state.mode is Mode.ANCHORED:
        return vy
    out = np.empty(state.x.size)
    out[1:-1] = vy
    out[0] = 2.0 * vy[0] - vy[1]
    out[-1] = 2.0 * vy[-1] - vy[-2]
    return out


def density_rhs(r: GapDensities, model: VelocityModel) -> np.ndarray:
    """dR_i/dt = -(R_i^2 / ell) [v(R_{i+1}) - v(R_i)], with v_max ahead of the last gap."""
    R = r.r
    ahead = np.empty_like(R)
    ahead[:-1] = model.v(R[1:])
    ahead[-1] = model.v_max
    return -(R * R / r.ell) * (ahead - model.v(R))


def integrate(
    state: ParticleState,
    model: VelocityModel,
    t_end: float,
    rel_tol: float = DEFAULT_RTOL,
    abs_tol: float = DEFAULT_ATOL,
    snapshot_times=None,
    backend: str | None = None,
) -> Trajectory:
    """Advance the particles to ``t_end`` with adaptive Bogacki-Shampine 3(2).

    ``snapshot_times`` defaults to ``[state.t, t_end]``; they are filled by
    cubic Hermite interpolation. ``stats.min_gap_seen`` is the smallest
    integrated gap over accepted steps.
    """
    if not (rel_tol > 0 and abs_tol > 0):
        raise ValueError("tolerances must be positive")
    t_end = float(t_end)
    if not t_end > state.t:
        raise ValueError(f"t_end={t_end} must exceed the initial time {state.t}")
    if snapshot_times is None:
        snapshot_times = [state.t, t_end]
    stepper = ChainStepper(state.ell, model, rel_tol, abs_tol, backend=backend)
    min_gap = [math.inf]

    def track(_t, y):
        g = float(np.min(np.diff(y)))
        if g < min_gap[0]:
            min_gap[0] = g

    res = integrate_adaptive(stepper, state.chain(), state.t, t_end, snapshot_times, on_accept=track)
    res.stats.min_gap_seen = min_gap[0]
    snaps = [
        ParticleState(t, full_positions(y, state.mode), state.ell, state.mode)
        for t, y in zip(res.times, res.states)
    ]
    return Trajectory(snaps, model, res.stats, rtol=rel_tol, atol=abs_tol)


def integrate_densities(
    r: GapDensities,
    model: VelocityModel,
    t0: float,
    t_end: float,
    snapshot_times,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-12,
):
    """Integrate the gap-density system directly; returns ``(times, list of R arrays)``."""

    def fun(R):
        if np.any(R <= 0):
            return None
        return density_rhs(GapDensities(R, r.ell), model)

    res = integrate_adaptive(VectorFieldStepper(fun, rel_tol, abs_tol), r.r, t0, t_end, snapshot_times)
    return np.array(res.times), res.states

