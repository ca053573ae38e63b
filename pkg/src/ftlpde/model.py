"""Velocity laws v(rho) and the flux f(rho) = rho * v(rho)."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

ArrayFn = Callable[[np.ndarray], np.ndarray]


class DomainError(ValueError):
    """Raised when a density argument is negative or not finite."""


class ModelForm(str, Enum):
    LWR = "lwr"
    GENERALIZED_LWR = "glwr"
    TABULATED = "table"
    CUSTOM = "custom"


@dataclass(frozen=True)
class FluxEval:
    rho: float
    f: float
    df: float


@dataclass(frozen=True)
class AssumptionReport:
    v1_ok: bool
    v2_ok: bool
    worst_violation: float
    v1_worst: float = 0.0
    v2_worst: float = 0.0


@dataclass(frozen=True, eq=False)
class VelocityModel:
    """A strictly decreasing velocity law.

    ``v`` and ``dv`` accept scalars or numpy arrays. Use the constructors
    :meth:`lwr`, :meth:`generalized_lwr`, :meth:`tabulated` or
    :meth:`from_callables` rather than building instances by hand.
    """

    form: ModelForm
    _v: ArrayFn = field(repr=False)
    _dv: ArrayFn = field(repr=False)
    v_max_scale: float = 1.0
    gamma: float = 1.0
    name: str = ""

    def __post_init__(self):
        if not self.v_max > 0:
            raise ValueError(f"v_max = v(0) must be positive, got {self.v_max}")

    # -- constructors -----------------------------------------------------

    @classmethod
    def lwr(cls) -> VelocityModel:
        return cls.generalized_lwr(1.0, 1.0, _form=ModelForm.LWR)

    @classmethod
    def generalized_lwr(
        cls, gamma: float, v_max: float = 1.0, _form: ModelForm = ModelForm.GENERALIZED_LWR
    ) -> VelocityModel:
        """v(rho) = v_max * (1 - rho**gamma), gamma >= 1."""
        gamma = float(gamma)
        v_max = float(v_max)
        if gamma < 1:
            raise ValueError(f"gamma must be >= 1, got {gamma}")

        if gamma == 1.0:
            def v(rho):
                return v_max * (1.0 - np.asarray(rho, dtype=float))

            def dv(rho):
                return np.full_like(np.asarray(rho, dtype=float), -v_max)
        else:
            def v(rho):
                return v_max * (1.0 - np.asarray(rho, dtype=float) ** gamma)

            def dv(rho):
                return -v_max * gamma * np.asarray(rho, dtype=float) ** (gamma - 1.0)

        name = "lwr" if _form is ModelForm.LWR else f"glwr:{gamma:g}"
        return cls(_form, v, dv, v_max_scale=v_max, gamma=gamma, name=name)

    @classmethod
    def tabulated(cls, rho, v, name: str = "table") -> VelocityModel:
        """Monotone piecewise-cubic (PCHIP) interpolant through ``(rho, v)``.

        ``dv`` is the analytic derivative of the interpolant.
        """
        rho = np.asarray(rho, dtype=float)
        v = np.asarray(v, dtype=float)
        if rho.ndim != 1 or rho.shape != v.shape or rho.size < 2:
            raise ValueError("tabulated model needs two equal-length columns with >= 2 rows")
        if not np.all(np.isfinite(rho)) or not np.all(np.isfinite(v)):
            raise ValueError("tabulated model contains non-finite entries")
        if np.any(np.diff(rho) <= 0):
            raise ValueError("tabulated rho must be strictly increasing")
        interp = PchipInterpolator(rho, v, extrapolate=True)
        deriv = interp.derivative()
        return cls(ModelForm.TABULATED, interp, deriv, name=name)

    @classmethod
    def from_csv(cls, path) -> VelocityModel:
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip().lower() for h in header] != ["rho", "v"]:
                raise ValueError(f"{path}: expected header row 'rho,v'")
            rows = [r for r in reader if r and any(c.strip() for c in r)]
        try:
            data = np.array([[float(a), float(b)] for a, b in rows])
        except ValueError as exc:
            raise ValueError(f"{path}: malformed row ({exc})") from None
        if data.size == 0:
            raise ValueError(f"{path}: no data rows")
        return cls.tabulated(data[:, 0], data[:, 1], name=f"table:{path}")

    @classmethod
    def from_callables(cls, v: ArrayFn, dv: ArrayFn, name: str = "custom") -> VelocityModel:
        return cls(ModelForm.CUSTOM, v, dv, name=name)

    @classmethod
    def from_spec(cls, spec: str) -> VelocityModel:
        """Parse ``lwr``, ``glwr:<gamma>`` or ``table:<path>``."""
        kind, _, arg = spec.partition(":")
        kind = kind.strip().lower()
        if kind == "lwr" and not arg:
            return cls.lwr()
        if kind == "glwr" and arg:
            return cls.generalized_lwr(float(arg))
        if kind == "table" and arg:
            return cls.from_csv(arg)
        raise ValueError(f"unknown model spec {spec!r} (expected lwr, glwr:<gamma>, table:<path>)")

    # -- evaluation -------------------------------------------------------

    def v(self, rho):
        out = self._v(rho)
        return float(out) if np.ndim(out) == 0 else out

    def dv(self, rho):
        out = self._dv(rho)
        return float(out) if np.ndim(out) == 0 else out

    @property
    def v_max(self) -> float:
        return float(self._v(np.float64(0.0)))

    @property
    def native_code(self) -> int:
        """Identifier understood by the compiled kernels, -1 if unsupported."""
        if self.form in (ModelForm.LWR, ModelForm.GENERALIZED_LWR):
            return 1
        return -1

    def f(self, rho):
        rho = np.asarray(rho, dtype=float)
        out = rho * self._v(rho)
        return float(out) if out.ndim == 0 else out

    def df(self, rho):
        rho = np.asarray(rho, dtype=float)
        out = self._v(rho) + rho * self._dv(rho)
        return float(out) if out.ndim == 0 else out

    def df_inverse(self, speed: float, lo: float, hi: float) -> float:
        """Solve f'(rho) = speed for rho in [lo, hi], f' strictly decreasing."""
        if self.form in (ModelForm.LWR, ModelForm.GENERALIZED_LWR):
            # f'(rho) = v_max * (1 - (gamma + 1) rho**gamma)
            base = (1.0 - speed / self.v_max_scale) / (self.gamma + 1.0)
            rho = max(base, 0.0) ** (1.0 / self.gamma)
            return min(max(rho, lo), hi)
        from scipy.optimize import brentq

        g_lo = self.df(lo) - speed
        g_hi = self.df(hi) - speed
        if g_lo <= 0:
            return lo
        if g_hi >= 0:
            return hi
        return brentq(lambda r: self.df(r) - speed, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    def describe(self) -> dict:
        return {"form": self.form.value, "name": self.name, "v_max": self.v_max}


def flux(model: VelocityModel, rho: float) -> FluxEval:
    rho = float(rho)
    if not math.isfinite(rho) or rho < 0:
        raise DomainError(f"density must be finite and non-negative, got {rho}")
    v = model.v(rho)
    return FluxEval(rho=rho, f=rho * v, df=v + rho * model.dv(rho))


def validate_assumptions(model: VelocityModel, rho_max: float, grid_size: int = 1001) -> AssumptionReport:
    """Check v' < 0 (V1) and monotonicity of rho * v'(rho) (V2) on a grid."""
    if not rho_max > 0:
        raise ValueError("rho_max must be positive")
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    rho = np.linspace(0.0, rho_max, grid_size)
    dv = np.asarray(model.dv(rho), dtype=float)
    positive = dv[1:]
    v1_worst = max(float(np.max(positive)), 0.0) if np.any(positive >= 0) else 0.0
    v1_ok = bool(np.all(positive < 0))

    increments = np.diff(rho * dv)
    v2_worst = max(float(np.max(increments)), 0.0)
    v2_ok = bool(np.all(increments <= 1e-12))
    return AssumptionReport(
        v1_ok=v1_ok,
        v2_ok=v2_ok,
        worst_violation=max(v1_worst, v2_worst),
        v1_worst=v1_worst,
        v2_worst=v2_worst,
    )


def is_strictly_concave(model: VelocityModel, rho_max: float, grid_size: int = 2001) -> bool:
    """f' strictly decreasing on a uniform grid over [0, rho_max]."""
    if rho_max <= 0:
        return True
    rho = np.linspace(0.0, rho_max, grid_size)
    return bool(np.all(np.diff(np.asarray(model.df(rho), dtype=float)) < 0))
