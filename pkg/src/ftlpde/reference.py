"""Exact reference solutions for strictly concave fluxes: Riemann problems and front tracking."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .density import PiecewiseConstantDensity
from .model import VelocityModel, is_strictly_concave

MAX_INTERACTIONS = 1_000_000
DEFAULT_DELTA_RHO = 1e-3
# cells used to resolve an exact rarefaction fan per unit of density drop
FAN_CELLS_PER_UNIT = 100_000


class UnsupportedModelError(ValueError):
    """The flux is not strictly concave on the range needed."""


class WaveKind(str, Enum):
    SHOCK = "shock"
    RAREFACTION = "rarefaction"
    NONE = "none"


@dataclass(frozen=True)
class Wave:
    kind: WaveKind
    left_state: float
    right_state: float
    speed: float = 0.0
    left_speed: float = 0.0
    right_speed: float = 0.0
    origin: tuple[float, float] = (0.0, 0.0)

    def as_dict(self) -> dict:
        d = {"kind": self.kind.value, "rho_L": self.left_state, "rho_R": self.right_state, "origin": list(self.origin)}
        if self.kind is WaveKind.SHOCK:
            d["speed"] = self.speed
        elif self.kind is WaveKind.RAREFACTION:
            d["left_speed"] = self.left_speed
            d["right_speed"] = self.right_speed
        return d

    def sample(self, model: VelocityModel, t: float, x: float) -> float:
        """Self-similar solution at (t, x) relative to the wave origin."""
        t0, x0 = self.origin
        tau = t - t0
        if tau <= 0:
            return self.left_state if x < x0 else self.right_state
        xi = (x - x0) / tau
        if self.kind is WaveKind.SHOCK:
            return self.left_state if xi < self.speed else self.right_state
        if self.kind is WaveKind.RAREFACTION:
            if xi <= self.left_speed:
                return self.left_state
            if xi >= self.right_speed:
                return self.right_state
            return model.df_inverse(xi, self.right_state, self.left_state)
        return self.left_state


def rh_speed(model: VelocityModel, rho_l: float, rho_r: float) -> float:
    """Rankine-Hugoniot speed; the characteristic speed when the states coincide."""
    if rho_l == rho_r:
        return model.df(rho_l)
    return (model.f(rho_r) - model.f(rho_l)) / (rho_r - rho_l)


def _check_concave(model, rho_max):
    if not is_strictly_concave(model, rho_max):
        raise UnsupportedModelError(f"flux of model {model.name!r} is not strictly concave on [0, {rho_max}]")


def solve_riemann(rho_l: float, rho_r: float, model: VelocityModel, origin=(0.0, 0.0)) -> Wave:
    """Entropy solution for a single jump (concave flux: shock iff rho_L < rho_R)."""
    rho_l = float(rho_l)
    rho_r = float(rho_r)
    if rho_l < 0 or rho_r < 0 or not (math.isfinite(rho_l) and math.isfinite(rho_r)):
        raise ValueError("Riemann states must be finite and non-negative")
    _check_concave(model, max(rho_l, rho_r))
    origin = (float(origin[0]), float(origin[1]))
    if rho_l == rho_r:
        return Wave(WaveKind.NONE, rho_l, rho_r, origin=origin)
    if rho_l < rho_r:
        return Wave(WaveKind.SHOCK, rho_l, rho_r, speed=rh_speed(model, rho_l, rho_r), origin=origin)
    return Wave(
        WaveKind.RAREFACTION,
        rho_l,
        rho_r,
        left_speed=model.df(rho_l),
        right_speed=model.df(rho_r),
        origin=origin,
    )


# -- front tracking ----------------------------------------------------------


@dataclass(eq=False)
class Front:
    t0: float
    x0: float
    speed: float
    left: float
    right: float
    fan: int | None = None
    t_death: float = math.inf
    alive: bool = True
    version: int = 0

    def position(self, t: float) -> float:
        return math.fsum((self.x0, self.speed * t, -self.speed * self.t0))


@dataclass
class Fan:
    """An exact centred rarefaction emitted by the initial datum."""

    t0: float
    x0: float
    left: float
    right: float
    fronts: list = field(default_factory=list)


def _fan_states(rho_l, rho_r, delta_rho):
    m = max(1, math.ceil((rho_l - rho_r) / delta_rho - 1e-12))
    return [rho_l + (rho_r - rho_l) * j / m for j in range(m + 1)]


def _emit(model, rho_l, rho_r, t, x, delta_rho):
    """Fronts (left to right) approximating the Riemann solution at (t, x)."""
    if rho_l == rho_r:
        return []
    if rho_l < rho_r:
        return [Front(t, x, rh_speed(model, rho_l, rho_r), rho_l, rho_r)]
    states = _fan_states(rho_l, rho_r, delta_rho)
    return [Front(t, x, rh_speed(model, a, b), a, b) for a, b in zip(states[:-1], states[1:])]


def _collision_time(a: Front, b: Front):
    """Time at which front ``a`` (left) catches ``b`` (right), or None."""
    ds = a.speed - b.speed
    if ds <= 0:
        return None
    num = math.fsum((b.x0, -a.x0, a.speed * a.t0, -b.speed * b.t0))
    return num / ds


class FrontTrackingSolution:
    """Front-tracking evolution of a piecewise-constant datum up to ``t_end``.

    Rarefactions are split into jumps of at most ``delta_rho``; colliding
    fronts are replaced by the solution of the local Riemann problem. Fans
    emitted by the datum are sampled with their exact continuous profile
    while no front of theirs has interacted and no other front has entered
    their exact extent.
    """

    def __init__(self, datum: PiecewiseConstantDensity, t_end: float, model: VelocityModel,
                 delta_rho: float = DEFAULT_DELTA_RHO):
        if not delta_rho > 0:
            raise ValueError("delta_rho must be positive")
        if not t_end > 0:
            raise ValueError("t_end must be positive")
        _check_concave(model, datum.sup)
        self.datum = datum
        self.t_end = float(t_end)
        self.model = model
        self.delta_rho = float(delta_rho)
        self.fronts: list[Front] = []
        self.fans: list[Fan] = []
        self.interactions = 0
        self._run()

    # -- evolution --

    def _run(self):
        b = self.datum.breakpoints
        states = np.concatenate([[0.0], self.datum.values, [0.0]])
        order: list[Front] = []
        for j, x in enumerate(b):
            rl, rr = float(states[j]), float(states[j + 1])
            new = _emit(self.model, rl, rr, 0.0, float(x), self.delta_rho)
            if rl > rr and new:
                fan = Fan(0.0, float(x), rl, rr, new)
                for fr in new:
                    fr.fan = len(self.fans)
                self.fans.append(fan)
            order.extend(new)
        self.fronts.extend(order)

        # doubly linked list over live fronts, ordered in x
        nxt = {id(f): (order[i + 1] if i + 1 < len(order) else None) for i, f in enumerate(order)}
        prv = {id(f): (order[i - 1] if i > 0 else None) for i, f in enumerate(order)}
        heap = []
        counter = 0

        def schedule(a, b):
            nonlocal counter
            if a is None or b is None:
                return
            tc = _collision_time(a, b)
            if tc is None or tc > self.t_end:
                return
            tc = max(tc, a.t0, b.t0)
            counter += 1
            heapq.heappush(heap, (tc, counter, a, a.version, b, b.version))

        for a, bb in zip(order[:-1], order[1:]):
            schedule(a, bb)

        while heap:
            tc, _, a, va, bb, vb = heapq.heappop(heap)
            if not (a.alive and bb.alive) or a.version != va or bb.version != vb or nxt[id(a)] is not bb:
                continue
            self.interactions += 1
            if self.interactions > MAX_INTERACTIONS:
                raise RuntimeError(f"front tracking exceeded {MAX_INTERACTIONS} interactions")
            xc = a.position(tc)
            # gather every front meeting at (tc, xc)
            group = [a, bb]
            tol = 1e-12 * max(1.0, abs(xc))
            left = prv[id(a)]
            while left is not None and abs(left.position(tc) - xc) <= tol:
                group.insert(0, left)
                left = prv[id(left)]
            right = nxt[id(bb)]
            while right is not None and abs(right.position(tc) - xc) <= tol:
                group.append(right)
                right = nxt[id(right)]
            for fr in group:
                fr.alive = False
                fr.t_death = tc
            new = _emit(self.model, group[0].left, group[-1].right, tc, xc, self.delta_rho)
            self.fronts.extend(new)
            chain = [left, *new, right]
            for p, q in zip(chain[:-1], chain[1:]):
                if p is not None:
                    nxt[id(p)] = q
                if q is not None:
                    prv[id(q)] = p
            for fr in new:
                nxt.setdefault(id(fr), None)
                prv.setdefault(id(fr), None)
            if left is not None:
                left.version += 1
            if right is not None:
                right.version += 1
            for p, q in zip(chain[:-1], chain[1:]):
                schedule(p, q)

    # -- sampling --

    def _live(self, t):
        live = [f for f in self.fronts if f.t0 <= t and t < f.t_death]
        live.sort(key=lambda f: (f.position(t), f.speed))
        return live

    def _check_time(self, t):
        if t < 0 or t > self.t_end * (1 + 1e-12):
            raise ValueError(f"time {t} outside the solved range [0, {self.t_end}]")

    def _exact_fans(self, t, live):
        """(x_left, x_right, fan) for fans that are still exact at time t."""
        out = []
        if t <= 0:
            return out
        pos = {id(f): f.position(t) for f in live}
        for fan in self.fans:
            if any(f.t_death <= t for f in fan.fronts):
                continue
            tau = t - fan.t0
            xl = fan.x0 + self.model.df(fan.left) * tau
            xr = fan.x0 + self.model.df(fan.right) * tau
            members = {id(f) for f in fan.fronts}
            clash = any(xl < pos[id(f)] < xr for f in live if id(f) not in members)
            if not clash:
                out.append((xl, xr, fan))
        return out

    def sample(self, t: float, x: float) -> float:
        """Pointwise value of the solution (continuous inside undisturbed fans)."""
        self._check_time(t)
        live = self._live(t)
        for xl, xr, fan in self._exact_fans(t, live):
            if xl < x < xr:
                return self.model.df_inverse((x - fan.x0) / (t - fan.t0), fan.right, fan.left)
            if x == xl:
                return fan.left
        value = 0.0
        for f in live:
            if f.position(t) <= x:
                value = f.right
            else:
                break
        return value

    def density(self, t: float, fan_cells_per_unit: int = FAN_CELLS_PER_UNIT) -> PiecewiseConstantDensity:
        """The solution at time ``t`` as a piecewise-constant density.

        Exact fans are resolved into cells of equal density drop carrying
        their exact mass (from the antiderivative rho f' - f).
        """
        self._check_time(t)
        live = self._live(t)
        fans = self._exact_fans(t, live)
        fan_member = {id(f) for _, _, fan in fans for f in fan.fronts}
        pts = []
        vals = []
        for f in live:
            if id(f) in fan_member:
                continue
            pts.append(f.position(t))
            vals.append(f.right)
        for xl, xr, fan in fans:
            m = max(2, int(math.ceil((fan.left - fan.right) * fan_cells_per_unit)))
            rho = np.linspace(fan.left, fan.right, m + 1)
            tau = t - fan.t0
            xs = fan.x0 + np.asarray(self.model.df(rho), dtype=float) * tau
            xs[0], xs[-1] = xl, xr
            g = rho * np.asarray(self.model.df(rho), dtype=float) - np.asarray(self.model.f(rho), dtype=float)
            widths = np.diff(xs)
            mass = tau * np.diff(g)
            with np.errstate(invalid="ignore", divide="ignore"):
                avg = np.where(widths > 0, mass / np.where(widths > 0, widths, 1.0), 0.5 * (rho[:-1] + rho[1:]))
            for j in range(m):
                pts.append(xs[j])
                vals.append(float(avg[j]))
            pts.append(xr)
            vals.append(fan.right)
        return _assemble(pts, vals)

    def live_fronts(self, t: float) -> list[Front]:
        self._check_time(t)
        return self._live(t)


def _assemble(pts, vals):
    """Piecewise-constant profile from (position, value-to-the-right) events."""
    if not pts:
        raise ValueError("empty profile")
    order = sorted(range(len(pts)), key=lambda i: pts[i])
    xs = np.array([pts[i] for i in order], dtype=float)
    vs = np.array([vals[i] for i in order], dtype=float)
    # coincident events: keep the last of each run, whose value holds to the right
    keep = np.append(np.diff(xs) > 0, True)
    xs_u = xs[keep]
    vs_u = vs[keep]
    nz = np.nonzero(vs_u > 0)[0]
    if nz.size == 0:
        raise ValueError("solution vanishes identically")
    lo, hi = nz[0], nz[-1] + 1
    if hi >= xs_u.size:
        raise ValueError("positive density extends to infinity")
    return PiecewiseConstantDensity(xs_u[lo : hi + 1], vs_u[lo:hi])


def front_track(datum: PiecewiseConstantDensity, t_end: float, model: VelocityModel,
                delta_rho: float = DEFAULT_DELTA_RHO) -> FrontTrackingSolution:
    return FrontTrackingSolution(datum, t_end, model, delta_rho)


def sample(handle: FrontTrackingSolution, t: float, x: float) -> float:
    return handle.sample(t, x)
