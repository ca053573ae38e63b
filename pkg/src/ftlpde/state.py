from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class IntegrityError(ValueError):
    """Particle positions are not strictly increasing (or not finite)."""


class Mode(str, Enum):
    """How the two outermost particles are handled.

    ``ANCHORED``: x_0 and x_N start at the support edges and are integrated,
    x_N moving at v_max. ``PHANTOM``: only x_1 .. x_{N-1} are integrated
    (x_{N-1} is the leader) and x_0, x_N are reflections of their neighbours.
    """

    ANCHORED = "anchored"
    PHANTOM = "phantom"


@dataclass(frozen=True, eq=False)
class ParticleState:
    """Positions x_0 < ... < x_N of N + 1 particles bounding N gaps of mass ``ell``."""

    t: float
    x: np.ndarray
    ell: float
    mode: Mode = Mode.ANCHORED

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "mode", Mode(self.mode))
        # phantom mode reflects from two real particles on each side
        min_particles = 4 if self.mode is Mode.PHANTOM else 3
        if x.ndim != 1 or x.size < min_particles:
            raise ValueError(f"need at least {min_particles} particles in {self.mode.value} mode, got {x.size}")
        if not self.ell > 0:
            raise ValueError(f"gap mass must be positive, got {self.ell}")
        check_ordered(x)

    @property
    def n_gaps(self) -> int:
        return self.x.size - 1

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.x)

    @property
    def densities(self) -> np.ndarray:
        """R_i = ell / (x_{i+1} - x_i)."""
        return self.ell / np.diff(self.x)

    @property
    def mass(self) -> float:
        return self.n_gaps * self.ell

    def chain(self) -> np.ndarray:
        """The integrated coordinates: all particles, or x_1..x_{N-1} in phantom mode."""
        if self.mode is Mode.PHANTOM:
            return self.x[1:-1].copy()
        return self.x.copy()

    def shifted(self, d: float) -> ParticleState:
        return ParticleState(self.t, self.x + d, self.ell, self.mode)


def check_ordered(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise IntegrityError("non-finite particle position")
    gaps = np.diff(x)
    if np.any(gaps <= 0):
        i = int(np.argmin(gaps))
        raise IntegrityError(f"positions not strictly increasing at index {i}: x[{i}]={x[i]!r}, x[{i + 1}]={x[i + 1]!r}")


def full_positions(chain: np.ndarray, mode: Mode) -> np.ndarray:
    """Inverse of :meth:`ParticleState.chain`: add reflected phantoms when needed."""
    if mode is Mode.ANCHORED:
        return np.asarray(chain, dtype=float).copy()
    y = np.asarray(chain, dtype=float)
    x = np.empty(y.size + 2)
    x[1:-1] = y
    x[0] = 2.0 * y[0] - y[1]
    x[-1] = 2.0 * y[-1] - y[-2]
    return x
