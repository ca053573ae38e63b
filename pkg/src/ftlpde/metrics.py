"""Diagnostics for particle trajectories and piecewise-constant densities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .density import PiecewiseConstantDensity, PseudoInverse, pseudo_inverse, reconstruct
from .ftl import Trajectory, rhs
from .model import VelocityModel
from .state import ParticleState

W1_AGREEMENT = 1e-10
MASS_MATCH = 1e-10


class ConsistencyError(RuntimeError):
    """Two formulations of the same quantity disagree."""


# -- variation ---------------------------------------------------------------


def total_variation(d: PiecewiseConstantDensity, include_boundary: bool = True) -> float:
    c = d.values
    tv = float(np.sum(np.abs(np.diff(c))))
    if include_boundary:
        tv += abs(c[0]) + abs(c[-1])
    return tv


def local_tv(d: PiecewiseConstantDensity, a: float, b: float, fill: float = 0.0) -> float:
    """Variation of ``d`` (equal to ``fill`` outside its breakpoints) over jumps strictly inside (a, b)."""
    if not a < b:
        raise ValueError("local_tv needs a < b")
    ext = np.concatenate([[fill], d.values, [fill]])
    jumps = np.abs(np.diff(ext))
    inside = (d.breakpoints > a) & (d.breakpoints < b)
    return float(np.sum(jumps[inside]))


def local_tv_velocity(d: PiecewiseConstantDensity, model: VelocityModel, a: float, b: float) -> float:
    """Local variation of v(rho) on [a, b]; vacuum maps to v_max."""
    return local_tv(d.map_values(model.v), a, b, fill=model.v_max)


# -- distances ---------------------------------------------------------------


def _abs_linear_integral(da, db, width):
    """Integral of |D| over an interval where D is linear from da to db."""
    da = np.asarray(da, dtype=float)
    db = np.asarray(db, dtype=float)
    same = da * db >= 0
    denom = np.where(same, 1.0, np.abs(da) + np.abs(db))
    return np.where(same, 0.5 * width * (np.abs(da) + np.abs(db)), 0.5 * width * (da * da + db * db) / denom)


def _left_limit(X: PseudoInverse, z: np.ndarray) -> np.ndarray:
    zk, xk = X.z, X.x
    k = np.clip(np.searchsorted(zk, z, side="left"), 1, zk.size - 1)
    dz = zk[k] - zk[k - 1]
    safe = np.where(dz > 0, dz, 1.0)
    frac = np.where(dz > 0, (z - zk[k - 1]) / safe, 0.0)
    out = xk[k - 1] + frac * (xk[k] - xk[k - 1])
    return np.where(z <= zk[0], xk[0], out)


def _check_masses(d1, d2):
    m1, m2 = d1.mass, d2.mass
    if abs(m1 - m2) > MASS_MATCH * max(1.0, m1, m2):
        raise ValueError(f"W1 needs equal masses, got {m1!r} and {m2!r}")
    return min(m1, m2)


def w1_pseudo_inverse(d1: PiecewiseConstantDensity, d2: PiecewiseConstantDensity) -> float:
    """Integral over [0, M] of |X_1 - X_2|, exact for piecewise-linear pseudo-inverses."""
    M = _check_masses(d1, d2)
    X1, X2 = pseudo_inverse(d1), pseudo_inverse(d2)
    z = np.unique(np.concatenate([X1.z, X2.z]))
    z = z[(z >= 0) & (z <= M)]
    if z[-1] < M:
        z = np.append(z, M)
    za, zb = z[:-1], z[1:]
    width = zb - za
    keep = width > 0
    za, zb, width = za[keep], zb[keep], width[keep]
    da = X1(za) - X2(za)
    db = _left_limit(X1, zb) - _left_limit(X2, zb)
    return float(np.sum(_abs_linear_integral(da, db, width)))


def w1_cdf(d1: PiecewiseConstantDensity, d2: PiecewiseConstantDensity) -> float:
    """Integral over R of |F_1 - F_2|, exact for piecewise-linear CDFs."""
    _check_masses(d1, d2)
    x = np.unique(np.concatenate([d1.breakpoints, d2.breakpoints]))
    D = np.interp(x, d1.breakpoints, d1.cumulative()) - np.interp(x, d2.breakpoints, d2.cumulative())
    return float(np.sum(_abs_linear_integral(D[:-1], D[1:], np.diff(x))))


def wasserstein1(d1: PiecewiseConstantDensity, d2: PiecewiseConstantDensity) -> float:
    """W1 from the pseudo-inverses, cross-checked against the CDF form."""
    a = w1_pseudo_inverse(d1, d2)
    b = w1_cdf(d1, d2)
    if abs(a - b) > W1_AGREEMENT:
        raise ConsistencyError(f"W1 formulations disagree: pseudo-inverse {a!r} vs CDF {b!r}")
    return a


def l1_error(d: PiecewiseConstantDensity, ref: PiecewiseConstantDensity, a: float, b: float) -> float:
    """Exact integral of |d - ref| over [a, b]."""
    if not a < b:
        raise ValueError("l1_error needs a < b")
    x = np.concatenate([[a, b], d.breakpoints, ref.breakpoints])
    x = np.unique(x[(x >= a) & (x <= b)])
    mid = 0.5 * (x[:-1] + x[1:])
    return float(np.sum(np.abs(d(mid) - ref(mid)) * np.diff(x)))


# -- discrete Oleinik and related bounds ------------------------------------


@dataclass
class OleinikDiagnostic:
    t: float
    z: np.ndarray
    max_z: float
    ell: float

    def holds(self, rtol: float = 1e-6) -> bool:
        return self.max_z <= self.ell * (1.0 + rtol)


def oleinik(state: ParticleState, model: VelocityModel) -> OleinikDiagnostic:
    """z_i = t R_i (x'_{i+1} - x'_i) for every gap, velocities recomputed from positions."""
    if state.t == 0:
        z = np.zeros(state.n_gaps)
        return OleinikDiagnostic(0.0, z, 0.0, state.ell)
    if state.t < 0:
        raise ValueError("Oleinik diagnostic needs t >= 0")
    vel = rhs(state, model)
    z = state.t * state.densities * np.diff(vel)
    return OleinikDiagnostic(state.t, z, float(np.max(z)), state.ell)


def max_principle_margin(state: ParticleState, R: float) -> float:
    """min_i gap_i / (ell / R) - 1; negative values violate the discrete maximum principle."""
    return float(np.min(state.gaps) * R / state.ell - 1.0)


def local_bv_bound(model: VelocityModel, R: float, a: float, b: float, delta: float) -> float:
    return 2.0 * (model.v_max - model.v(R) + (b - a) / delta)


def w1_lipschitz_constant(model: VelocityModel, R: float, mass: float) -> float:
    vmax = model.v_max
    vR = model.v(R)
    return (max(vmax, abs(vR)) + 2.0 * (vmax - vR)) * mass


# -- entropy residual --------------------------------------------------------


def _bump(s):
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1
    return np.where(inside, (1.0 - s * s) ** 3, 0.0)


def _dbump(s):
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1
    return np.where(inside, -6.0 * s * (1.0 - s * s) ** 2, 0.0)


def _ibump(s):
    """Antiderivative of the bump, clamped to its support."""
    s = np.clip(np.asarray(s, dtype=float), -1.0, 1.0)
    return s - s**3 + 0.6 * s**5 - s**7 / 7.0


# max |d/ds (1 - s^2)^3| attained at s^2 = 1/5
DBUMP_SUP = 6.0 / math.sqrt(5.0) * (0.8**2)
# max |d^2/ds^2 (1 - s^2)^3| attained at s = 0
D2BUMP_SUP = 6.0


@dataclass(frozen=True)
class BumpTestFunction:
    """phi(t, x) = amplitude * b((t - t_center) / t_half) * b((x - x_center) / x_half), b(s) = (1 - s^2)^3.

    ``b`` is C^2 with compact support, and its antiderivative is a polynomial,
    so integrals against piecewise-constant densities are exact in x.
    """

    t_center: float
    t_half: float
    x_center: float
    x_half: float
    amplitude: float = 1.0

    def __post_init__(self):
        if not (self.t_half > 0 and self.x_half > 0):
            raise ValueError("bump half-widths must be positive")
        if self.t_center - self.t_half <= 0:
            raise ValueError("bump time support must lie in (0, inf)")

    @property
    def t_support(self):
        return self.t_center - self.t_half, self.t_center + self.t_half

    @property
    def x_support(self):
        return self.x_center - self.x_half, self.x_center + self.x_half

    def alpha(self, t):
        return self.amplitude * _bump((t - self.t_center) / self.t_half)

    def dalpha(self, t):
        return self.amplitude * _dbump((t - self.t_center) / self.t_half) / self.t_half

    def beta(self, x):
        return _bump((x - self.x_center) / self.x_half)

    def beta_integral(self, a, b):
        s = lambda x: (np.asarray(x) - self.x_center) / self.x_half  # noqa: E731
        return self.x_half * (_ibump(s(b)) - _ibump(s(a)))

    def __call__(self, t, x):
        return self.alpha(t) * self.beta(x)

    def sup_phi_x(self) -> float:
        return self.amplitude * DBUMP_SUP / self.x_half

    def c2_norm(self) -> float:
        """Largest sup-norm among phi and its partial derivatives up to order two."""
        a, w, tau = self.amplitude, self.x_half, self.t_half
        return a * max(1.0, DBUMP_SUP / w, DBUMP_SUP / tau, D2BUMP_SUP / w**2, D2BUMP_SUP / tau**2,
                       DBUMP_SUP**2 / (w * tau))

    def describe(self) -> dict:
        return {
            "t_center": self.t_center,
            "t_half": self.t_half,
            "x_center": self.x_center,
            "x_half": self.x_half,
            "amplitude": self.amplitude,
        }


@dataclass
class EntropyResidualReport:
    """Kruzhkov functional of the reconstructed density for one (k, phi).

    ``tol = ell * consistency + dt**2 * quadrature``: ``consistency`` is the
    time integral of (1/2) sup|phi_x| times the local variation of the
    particle velocities, which bounds the defect of the particle scheme;
    ``quadrature`` is |supp_t phi| / 12 times twice the largest second
    difference quotient of the time integrand (trapezoid rule error).
    """

    k: float
    testfn: dict
    value: float
    tol: float
    ell: float = 0.0
    dt: float = 0.0
    consistency: float = 0.0
    quadrature: float = 0.0
    phi_c2: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.value >= -self.tol

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "phi": self.testfn,
            "value": self.value,
            "tol": self.tol,
            "ell": self.ell,
            "dt": self.dt,
            "consistency": self.consistency,
            "quadrature": self.quadrature,
            "phi_c2": self.phi_c2,
            "passed": self.passed,
        }


def _entropy_integrand(state: ParticleState, model: VelocityModel, k: float, phi: BumpTestFunction):
    """Space integral at one time, plus the local velocity variation seen by phi."""
    a, b = phi.x_support
    d = reconstruct(state)
    x = np.concatenate([[a, b], d.breakpoints])
    x = np.unique(x[(x >= a) & (x <= b)])
    mid = 0.5 * (x[:-1] + x[1:])
    rho = d(mid)
    fk = model.f(k)
    sgn = np.sign(rho - k)
    at = phi.alpha(state.t)
    dat = phi.dalpha(state.t)
    bx = phi.beta(x)
    value = float(
        np.sum(np.abs(rho - k) * dat * phi.beta_integral(x[:-1], x[1:]) + sgn * (model.f(rho) - fk) * at * np.diff(bx))
    )

    vel = rhs(state, model)
    touch = (state.x[1:] > a) & (state.x[:-1] < b)
    tv_vel = float(np.sum(np.abs(np.diff(vel))[touch]))
    return value, tv_vel


def entropy_residual(traj: Trajectory, k: float, phi: BumpTestFunction) -> EntropyResidualReport:
    """Kruzhkov integral of |rho - k| phi_t + sign(rho - k)(f(rho) - f(k)) phi_x.

    Exact in x, trapezoid in t over the trajectory snapshots.
    """
    if k < 0:
        raise ValueError("entropy constant k must be non-negative")
    times = traj.times
    t0, t1 = phi.t_support
    if t0 < times[0] or t1 > times[-1]:
        raise ValueError(f"test function time support [{t0}, {t1}] exceeds snapshots [{times[0]}, {times[-1]}]")
    sel = np.nonzero((times >= t0) & (times <= t1))[0]
    lo = max(sel[0] - 1, 0) if sel.size else 0
    hi = min(sel[-1] + 1, times.size - 1) if sel.size else times.size - 1
    idx = np.arange(lo, hi + 1)
    dts = np.diff(times[idx])
    dt = float(np.max(dts)) if dts.size else math.inf
    if dt > 2 * phi.t_half / 20 * (1 + 1e-9):
        raise ValueError(f"snapshot spacing {dt:.3g} exceeds 1/20 of the test function time width")

    model = traj.model
    vals = np.empty(idx.size)
    tvs = np.empty(idx.size)
    for j, i in enumerate(idx):
        vals[j], tvs[j] = _entropy_integrand(traj.snapshots[i], model, k, phi)

    tt = times[idx]
    value = float(np.sum(0.5 * (vals[1:] + vals[:-1]) * dts))
    alpha_abs = np.abs(phi.alpha(tt))
    weight = 0.5 * phi.sup_phi_x() / phi.amplitude * alpha_abs * tvs
    consistency = float(np.sum(0.5 * (weight[1:] + weight[:-1]) * dts))

    if idx.size >= 3:
        h1 = dts[:-1]
        h2 = dts[1:]
        second = 2.0 * np.abs((vals[2:] - vals[1:-1]) / h2 - (vals[1:-1] - vals[:-2]) / h1) / (h1 + h2)
        quadrature = 2.0 * (t1 - t0) / 12.0 * float(np.max(second))
    else:
        quadrature = math.inf

    ell = traj.snapshots[0].ell
    tol = ell * consistency + dt * dt * quadrature
    return EntropyResidualReport(
        k=float(k),
        testfn=phi.describe(),
        value=value,
        tol=tol,
        ell=ell,
        dt=dt,
        consistency=consistency,
        quadrature=quadrature,
        phi_c2=phi.c2_norm(),
    )
