"""Equal-mass partition of an initial datum into particle positions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import PiecewiseConstantDensity, read_density_csv
from .state import Mode, ParticleState

BISECTION_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class InitialDatum:
    """Either a piecewise-constant density or a tabulated CDF ``(x, F)``.

    ``support_bounds`` is ``None`` when the support is not known to be
    bounded, which rules out the anchored construction.
    """

    density: PiecewiseConstantDensity | None = None
    cdf_x: np.ndarray | None = None
    cdf_f: np.ndarray | None = None
    R: float = 0.0
    support_bounds: tuple[float, float] | None = None

    @classmethod
    def from_density(cls, density: PiecewiseConstantDensity) -> InitialDatum:
        if not density.mass > 0:
            raise ValueError("initial datum has zero mass")
        return cls(density=density, R=density.sup, support_bounds=density.support())

    @classmethod
    def from_cdf_table(cls, x, F, R: float, support_bounds=None) -> InitialDatum:
        """Tabulated CDF; linear between samples, so truncate unbounded supports upstream."""
        x = np.asarray(x, dtype=float)
        F = np.asarray(F, dtype=float)
        if x.ndim != 1 or x.shape != F.shape or x.size < 2:
            raise ValueError("CDF table needs matching 1-d x and F with >= 2 rows")
        if np.any(np.diff(x) <= 0):
            raise ValueError("CDF table x must be strictly increasing")
        if np.any(np.diff(F) < 0) or F[0] < 0:
            raise ValueError("CDF table F must be non-negative and non-decreasing")
        if not F[-1] - F[0] > 0:
            raise ValueError("initial datum has zero mass")
        if not R > 0:
            raise ValueError("R (sup of the density) must be positive")
        F = F - F[0]
        return cls(cdf_x=x, cdf_f=F, R=float(R), support_bounds=support_bounds)

    @classmethod
    def from_csv(cls, path) -> InitialDatum:
        return cls.from_density(read_density_csv(path))

    @property
    def mass(self) -> float:
        if self.density is not None:
            return self.density.mass
        return float(self.cdf_f[-1])

    def quantile(self, levels) -> np.ndarray:
        """sup{x : F(x) < z}: the left end of any plateau of F at level z."""
        levels = np.asarray(levels, dtype=float)
        if self.density is not None:
            return _pcd_quantile(self.density, levels)
        return _table_quantile(self.cdf_x, self.cdf_f, levels)


def ic_paper() -> InitialDatum:
    """0.4 on [-1, 0], 0.8 on (0, 1], zero elsewhere (mass 1.2)."""
    return InitialDatum.from_density(PiecewiseConstantDensity([-1.0, 0.0, 1.0], [0.4, 0.8]))


def _pcd_quantile(d: PiecewiseConstantDensity, levels: np.ndarray) -> np.ndarray:
    b = d.breakpoints
    cum = d.cumulative()
    # first breakpoint index j with cum[j] >= z; the crossing lies in cell j - 1
    j = np.searchsorted(cum, levels, side="left")
    j = np.clip(j, 1, b.size - 1)
    c = d.values[j - 1]
    safe = np.where(c > 0, c, 1.0)
    x = np.where(c > 0, b[j - 1] + (levels - cum[j - 1]) / safe, b[j])
    # levels hit exactly at a breakpoint: the left end of a following plateau is b[j]
    exact = cum[j] == levels
    return np.where(exact, b[j], np.minimum(x, b[j]))


def _table_quantile(x: np.ndarray, F: np.ndarray, levels: np.ndarray) -> np.ndarray:
    width = x[-1] - x[0]
    tol = BISECTION_RTOL * width
    out = np.empty_like(levels)
    for k, z in enumerate(levels.ravel()):
        lo, hi = x[0], x[-1]
        # invariant: F(lo) < z <= F(hi)
        if np.interp(lo, x, F) >= z:
            out.flat[k] = lo
            continue
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if np.interp(mid, x, F) < z:
                lo = mid
            else:
                hi = mid
        out.flat[k] = hi
    return out


def partition(datum: InitialDatum, N: int, mode: Mode | str = Mode.ANCHORED) -> ParticleState:
    """Split the datum into N gaps of mass M / N and place N + 1 particles at t = 0."""
    mode = Mode(mode)
    N = int(N)
    if N < 3:
        raise ValueError(f"N must be >= 3, got {N}")
    M = datum.mass
    if not M > 0:
        raise ValueError("initial datum has zero mass")
    ell = M / N
    # bisection resolves positions to BISECTION_RTOL * width, i.e. masses to R times that
    if datum.density is None and ell < 1e3 * datum.R * BISECTION_RTOL * (datum.cdf_x[-1] - datum.cdf_x[0]):
        raise ValueError(
            f"gap mass {ell:.3g} is below what a tabulated CDF resolves; "
            "use fewer particles or a piecewise-constant datum"
        )
    x = np.empty(N + 1)
    if mode is Mode.ANCHORED:
        if datum.support_bounds is None:
            raise ValueError("anchored mode needs a bounded support; use phantom mode")
        lo, hi = datum.support_bounds
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError("anchored mode needs a bounded support; use phantom mode")
        x[0] = lo
        x[N] = hi
        x[1:N] = datum.quantile(ell * np.arange(1, N))
    else:
        y = datum.quantile(ell * np.arange(1, N))
        x[1:N] = y
        x[0] = 2.0 * y[0] - y[1]
        x[N] = 2.0 * y[-1] - y[-2]
    return ParticleState(0.0, x, ell, mode)
