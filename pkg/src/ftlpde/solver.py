"""Adaptive Bogacki-Shampine 3(2) integration with PI step control and Hermite dense output."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels_py
from .kernels import get_kernels

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 5.0
# PI gains for an error estimator of order 2 (Hairer & Wanner, IV.2)
ALPHA = 0.7 / 3.0
BETA = 0.4 / 3.0


class IntegrationError(RuntimeError):
    def __init__(self, message, t=None, y=None, h=None):
        super().__init__(message)
        self.t = t
        self.y = y
        self.h = h


@dataclass
class SolverStats:
    accepted_steps: int = 0
    rejected_steps: int = 0
    ordering_rejections: int = 0
    min_gap_seen: float = math.inf
    backend: str = "python"

    def as_dict(self) -> dict:
        return {
            "accepted_steps": self.accepted_steps,
            "rejected_steps": self.rejected_steps,
            "ordering_rejections": self.ordering_rejections,
            "min_gap_seen": self.min_gap_seen,
            "backend": self.backend,
        }


class ChainStepper:
    """Follow-the-leader chain: y_j' = v(ell / (y_{j+1} - y_j)), last entry at v(0)."""

    def __init__(self, ell, model, rtol, atol, backend=None):
        self.ell = float(ell)
        self.model = model
        self.rtol = float(rtol)
        self.atol = float(atol)
        if backend is None:
            from .kernels import BACKEND

            backend = BACKEND if model.native_code >= 0 else "python"
        if backend == "cython" and model.native_code < 0:
            raise ValueError(f"compiled backend does not support model {model.name!r}")
        self.backend = backend
        self._k = get_kernels(backend)
        self._native = model.native_code >= 0
        self._vmax = model.v_max

    def rhs(self, y):
        out = np.empty_like(y)
        if self._native:
            st = self._k.chain_velocities(y, self.ell, self.model.gamma, self.model.v_max_scale, out)
        else:
            st = _kernels_py.chain_velocities_fn(y, self.ell, self.model.v, self._vmax, out)
        return None if st < 0 else out

    def attempt(self, y, f0, h):
        y_new = np.empty_like(y)
        f_new = np.empty_like(y)
        if self._native:
            err = self._k.chain_bs23_attempt(
                y, f0, h, self.ell, self.model.gamma, self.model.v_max_scale,
                self.rtol, self.atol, y_new, f_new,
            )
        else:
            err = _kernels_py.chain_bs23_attempt_fn(
                y, f0, h, self.ell, self.model.v, self._vmax, self.rtol, self.atol, y_new, f_new
            )
        return y_new, f_new, err

    def wnorm(self, v, y):
        return float(np.max(np.abs(v))) / (self.atol + self.rtol * (y[-1] - y[0]))


class VectorFieldStepper:
    """Generic autonomous system y' = fun(y) with componentwise mixed error scale.

    ``fun`` returns ``None`` for states outside its domain.
    """

    backend = "python"

    def __init__(self, fun, rtol, atol):
        self.fun = fun
        self.rtol = float(rtol)
        self.atol = float(atol)

    def _call(self, y, out):
        res = self.fun(y)
        if res is None or not np.all(np.isfinite(res)):
            return -1
        out[:] = res
        return 0

    def rhs(self, y):
        out = np.empty_like(y)
        return None if self._call(y, out) < 0 else out

    def attempt(self, y, f0, h):
        res = _kernels_py.bs23_stages(self._call, y, f0, h)
        if res is None:
            return y, f0, math.inf
        y_new, f_new, err = res
        sc = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y_new))
        return y_new, f_new, float(np.max(np.abs(err) / sc))

    def wnorm(self, v, y):
        return float(np.max(np.abs(v) / (self.atol + self.rtol * np.abs(y))))


def hermite(y0, f0, y1, f1, h, theta):
    t2 = theta * theta
    t3 = t2 * theta
    return (
        (2 * t3 - 3 * t2 + 1) * y0
        + (t3 - 2 * t2 + theta) * h * f0
        + (-2 * t3 + 3 * t2) * y1
        + (t3 - t2) * h * f1
    )


@dataclass
class DenseResult:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    stats: SolverStats = field(default_factory=SolverStats)
    t_final: float = 0.0
    y_final: np.ndarray | None = None


def _initial_step(stepper, y0, f0, span_t):
    d0 = stepper.wnorm(y0 - (y0[0] if isinstance(stepper, ChainStepper) else 0.0), y0)
    d1 = stepper.wnorm(f0, y0)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span_t)
    for _ in range(60):
        f1 = stepper.rhs(y0 + h0 * f0)
        if f1 is not None:
            break
        h0 *= 0.5
    else:
        raise IntegrationError("could not find an admissible initial step", y=y0)
    d2 = stepper.wnorm(f1 - f0, y0) / h0
    dm = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** (1.0 / 3.0)
    return min(100 * h0, h1, span_t)


def integrate_adaptive(stepper, y0, t0, t_end, snapshot_times, on_accept=None) -> DenseResult:
    """Integrate from ``t0`` to ``t_end`` and record ``snapshot_times`` by dense output.

    A step is rejected when the error estimate exceeds one, and halved when a
    stage leaves the domain (for particle chains: positions out of order).
    """
    y = np.array(y0, dtype=float)
    t = float(t0)
    t_end = float(t_end)
    if not t_end > t:
        raise ValueError("t_end must exceed the initial time")
    snaps = [float(s) for s in snapshot_times]
    if any(b <= a for a, b in zip(snaps, snaps[1:])):
        raise ValueError("snapshot times must be strictly increasing")
    if snaps and (snaps[0] < t or snaps[-1] > t_end):
        raise ValueError("snapshot times must lie in [t0, t_end]")

    out = DenseResult()
    out.stats.backend = stepper.backend
    f = stepper.rhs(y)
    if f is None:
        raise IntegrationError("initial state is outside the domain of the vector field", t=t, y=y)

    si = 0
    while si < len(snaps) and snaps[si] <= t:
        out.times.append(snaps[si])
        out.states.append(y.copy())
        si += 1

    h_min = 1e-14 * (t_end - t)
    h = _initial_step(stepper, y, f, t_end - t)
    err_prev = 1e-4
    rejected_last = False
    if on_accept is not None:
        on_accept(t, y)

    while t < t_end:
        if h < h_min:
            raise IntegrationError(
                f"step size underflow at t={t!r} (h={h:.3e} < {h_min:.3e})", t=t, y=y.copy(), h=h
            )
        last = t + h >= t_end
        if last:
            h = t_end - t
        y_new, f_new, err = stepper.attempt(y, f, h)

        if not math.isfinite(err):
            out.stats.rejected_steps += 1
            out.stats.ordering_rejections += 1
            h *= 0.5
            rejected_last = True
            continue
        if err > 1.0:
            out.stats.rejected_steps += 1
            h *= max(FAC_MIN, SAFETY * err ** (-1.0 / 3.0))
            rejected_last = True
            continue

        t_new = t_end if last else t + h
        while si < len(snaps) and snaps[si] <= t_new:
            s = snaps[si]
            if s == t_new:
                ys = y_new.copy()
            else:
                ys = hermite(y, f, y_new, f_new, h, (s - t) / h)
            out.times.append(s)
            out.states.append(ys)
            si += 1

        out.stats.accepted_steps += 1
        if err == 0.0:
            fac = FAC_MAX
        else:
            fac = SAFETY * err ** (-ALPHA) * err_prev**BETA
            fac = min(FAC_MAX, max(FAC_MIN, fac))
        if rejected_last:
            fac = min(fac, 1.0)
        err_prev = max(err, 1e-4)
        rejected_last = False
        t, y, f = t_new, y_new, f_new
        if on_accept is not None:
            on_accept(t, y)
        h *= fac

    out.t_final = t
    out.y_final = y
    return out
