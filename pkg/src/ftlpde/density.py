"""Piecewise-constant densities, their CDFs and pseudo-inverses."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .state import ParticleState

MERGE_RTOL = 1e-14


@dataclass(frozen=True, eq=False)
class PiecewiseConstantDensity:
    """Value ``values[j]`` on ``[breakpoints[j], breakpoints[j+1])``, zero outside.

    Breakpoints closer than ``1e-14 * width`` are merged (the sliver cell is
    dropped) so no cell has zero width.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    cum: np.ndarray | None = None

    def __post_init__(self):
        b = np.array(self.breakpoints, dtype=float).ravel()
        c = np.array(self.values, dtype=float).ravel()
        if b.size < 2 or c.size != b.size - 1:
            raise ValueError("need m + 1 breakpoints for m values (m >= 1)")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ValueError("density has non-finite breakpoints or values")
        if np.any(np.diff(b) < 0):
            raise ValueError("breakpoints must be non-decreasing")
        if np.any(c < 0):
            raise ValueError("density values must be non-negative")
        width = b[-1] - b[0]
        if width <= 0:
            raise ValueError("density support has zero width")
        keep = np.diff(b) > MERGE_RTOL * width
        if not np.all(keep):
            c = c[keep]
            b = np.concatenate([b[:-1][keep], b[-1:]])
            object.__setattr__(self, "cum", None)
        b.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", c)
        if self.cum is not None:
            cum = np.array(self.cum, dtype=float)
            if cum.shape != b.shape:
                raise ValueError("cumulative masses must align with breakpoints")
            cum.setflags(write=False)
            object.__setattr__(self, "cum", cum)

    @classmethod
    def from_cells(cls, cells) -> PiecewiseConstantDensity:
        """Build from ``(x_left, x_right, value)`` rows; gaps between rows are vacuum."""
        rows = sorted((float(a), float(b), float(v)) for a, b, v in cells)
        if not rows:
            raise ValueError("no cells")
        bps = [rows[0][0]]
        vals = []
        for a, b, v in rows:
            if not b > a:
                raise ValueError(f"cell [{a}, {b}] has non-positive width")
            if v < 0:
                raise ValueError(f"cell [{a}, {b}] has negative value {v}")
            if a < bps[-1]:
                raise ValueError(f"cell [{a}, {b}] overlaps the previous cell")
            if a > bps[-1]:
                bps.append(a)
                vals.append(0.0)
            bps.append(b)
            vals.append(v)
        return cls(np.array(bps), np.array(vals))

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def mass(self) -> float:
        return float(np.sum(self.values * self.widths))

    @property
    def sup(self) -> float:
        return float(np.max(self.values))

    def support(self) -> tuple[float, float]:
        """Smallest interval outside of which the density vanishes."""
        nz = np.nonzero(self.values > 0)[0]
        if nz.size == 0:
            raise ValueError("density is identically zero")
        return float(self.breakpoints[nz[0]]), float(self.breakpoints[nz[-1] + 1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        inside = (idx >= 0) & (idx < self.values.size)
        out = np.where(inside, self.values[np.clip(idx, 0, self.values.size - 1)], 0.0)
        return float(out) if out.ndim == 0 else out

    def cumulative(self) -> np.ndarray:
        """CDF values at the breakpoints."""
        if self.cum is not None:
            return self.cum
        return np.concatenate([[0.0], np.cumsum(self.values * self.widths)])

    def map_values(self, fn) -> PiecewiseConstantDensity:
        """Apply ``fn`` cellwise (exact composition for piecewise-constant functions)."""
        return PiecewiseConstantDensity(self.breakpoints, np.asarray(fn(self.values), dtype=float))

    def shifted(self, d: float) -> PiecewiseConstantDensity:
        return PiecewiseConstantDensity(self.breakpoints + d, self.values)

    def cells(self):
        b = self.breakpoints
        return list(zip(b[:-1].tolist(), b[1:].tolist(), self.values.tolist()))

    def to_csv(self, path) -> None:
        write_cells_csv(path, self.cells())


def write_cells_csv(path, cells) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x_left", "x_right", "value"])
        for a, b, v in cells:
            w.writerow([fmt(a), fmt(b), fmt(v)])


def read_density_csv(path) -> PiecewiseConstantDensity:
    """Load rows ``x_left,x_right,value`` (header required)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["x_left", "x_right", "value"]:
            raise ValueError(f"{path}: expected header row 'x_left,x_right,value'")
        cells = []
        for lineno, row in enumerate(reader, start=2):
            if not row or not any(c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            try:
                cells.append(tuple(float(c) for c in row))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric entry") from None
    try:
        return PiecewiseConstantDensity.from_cells(cells)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def fmt(value: float) -> str:
    return format(float(value), ".17g")


def reconstruct(state: ParticleState) -> PiecewiseConstantDensity:
    """Value ell / (x_{i+1} - x_i) on [x_i, x_{i+1}).

    The cumulative masses are recorded as exactly ``i * ell``.
    """
    return PiecewiseConstantDensity(state.x, state.densities, cum=state.ell * np.arange(state.x.size))


def cdf(d: PiecewiseConstantDensity, x):
    """Cumulative mass of ``d`` on (-inf, x]; vectorised in ``x``."""
    return _interp_cdf(d, np.asarray(x, dtype=float))


def _interp_cdf(d, x):
    out = np.interp(x, d.breakpoints, d.cumulative())
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class PseudoInverse:
    """Non-decreasing piecewise-linear map [0, M] -> R.

    Knots share a ``z`` value where the CDF has a vacuum plateau; the map is
    right-continuous there, so ``X(z)`` is the right end of the jump.
    """

    z: np.ndarray
    x: np.ndarray

    @property
    def mass(self) -> float:
        return float(self.z[-1])

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        zk, xk = self.z, self.x
        if np.any(z < 0) or np.any(z > zk[-1] * (1 + 1e-12)):
            raise ValueError("z outside [0, mass]")
        k = np.clip(np.searchsorted(zk, z, side="right") - 1, 0, zk.size - 2)
        dz = zk[k + 1] - zk[k]
        safe = np.where(dz > 0, dz, 1.0)
        frac = np.where(dz > 0, (z - zk[k]) / safe, 1.0)
        out = xk[k] + frac * (xk[k + 1] - xk[k])
        out = np.where(z >= zk[-1], xk[-1], out)
        return float(out) if out.ndim == 0 else out


def pseudo_inverse(d: PiecewiseConstantDensity) -> PseudoInverse:
    """X(z) = inf{x : F(x) > z} as an explicit knot list."""
    if not d.mass > 0:
        raise ValueError("pseudo-inverse of a zero-mass density")
    lo, hi = d.support()
    b = d.breakpoints
    i0 = int(np.searchsorted(b, lo))
    i1 = int(np.searchsorted(b, hi)) + 1
    xk = b[i0:i1].copy()
    zk = d.cumulative()[i0:i1].copy()
    zk[0] = 0.0
    return PseudoInverse(zk, xk)
