import math

import numpy as np
import pytest

from ftlpde.density import PiecewiseConstantDensity
from ftlpde.metrics import l1_error
from ftlpde.model import VelocityModel
from ftlpde.quantile import ic_paper
from ftlpde.reference import (
    MAX_INTERACTIONS,
    UnsupportedModelError,
    WaveKind,
    front_track,
    rh_speed,
    solve_riemann,
)

LWR = VelocityModel.lwr()
IC = ic_paper().density


def test_riemann_examples():
    w = solve_riemann(0, 0.4, LWR)
    assert w.kind is WaveKind.SHOCK and abs(w.speed - 0.6) <= 1e-12
    w = solve_riemann(0.4, 0.8, LWR)
    assert w.kind is WaveKind.SHOCK and abs(w.speed + 0.2) <= 1e-12
    w = solve_riemann(0.8, 0, LWR)
    assert w.kind is WaveKind.RAREFACTION
    assert abs(w.left_speed + 0.6) <= 1e-12 and abs(w.right_speed - 1) <= 1e-12
    assert w.sample(LWR, 1.0, 0.4) == pytest.approx((1 - 0.4) / 2, abs=1e-14)
    assert solve_riemann(0.3, 0.3, LWR).kind is WaveKind.NONE


def test_riemann_unsupported():
    cubic = VelocityModel.tabulated(np.linspace(0, 1, 21), (1 - np.linspace(0, 1, 21)) ** 3)
    with pytest.raises(UnsupportedModelError):
        solve_riemann(0.9, 0.1, cubic)
    with pytest.raises(ValueError):
        solve_riemann(-0.1, 0.1, LWR)


def test_rankine_hugoniot_and_admissibility():
    h = front_track(IC, 2.0, VelocityModel.generalized_lwr(2.0), 1e-2)
    m = h.model
    for f in h.fronts:
        flux_jump = m.f(f.right) - m.f(f.left)
        if f.left < f.right:
            assert abs(f.speed * (f.right - f.left) - flux_jump) <= 1e-12
        else:
            # rarefaction sub-jump: bounded size, RH chord speed
            assert f.left - f.right <= 1e-2 * (1 + 1e-12)
            assert f.speed == pytest.approx(rh_speed(m, f.left, f.right), abs=1e-14)


def test_ic_paper_at_half():
    h = front_track(IC, 0.5, LWR)
    assert h.interactions == 0
    assert h.sample(0.5, -0.9) == 0.0
    assert h.sample(0.5, -0.4) == 0.4
    assert h.sample(0.5, 1.0) == pytest.approx(0.5, abs=1e-14)
    assert h.sample(0.5, -0.7 + 1e-9) == 0.4 and h.sample(0.5, -0.7 - 1e-9) == 0.0
    assert h.sample(0.5, -0.1 + 1e-9) == 0.8 and h.sample(0.5, -0.1 - 1e-9) == 0.4
    assert h.sample(0.5, 0.69) == 0.8 and h.sample(0.5, 1.51) == 0.0
    d = h.density(0.5)
    assert d.support() == pytest.approx((-0.7, 1.5), abs=1e-14)


def test_single_riemann_datum_matches_solver():
    d = PiecewiseConstantDensity([-1.0, 0.0, 5.0], [0.9, 0.2])
    h = front_track(d, 0.5, LWR, 1e-3)
    w = solve_riemann(0.9, 0.2, LWR)
    rng = np.random.default_rng(4)
    for t, xi in zip(rng.uniform(0.05, 0.5, 50), rng.uniform(-0.8, 0.6, 50)):
        assert h.sample(t, xi * t) == pytest.approx(w.sample(LWR, t, xi * t), abs=1e-12)


def test_self_similarity():
    d = PiecewiseConstantDensity([-3.0, 0.0, 3.0], [0.1, 0.7])
    h = front_track(d, 1.0, LWR)
    rng = np.random.default_rng(6)
    for xi in rng.uniform(-0.5, 0.5, 20):
        assert h.sample(0.3, 0.3 * xi) == h.sample(0.9, 0.9 * xi)


def test_constant_datum_unchanged():
    d = PiecewiseConstantDensity([0.0, 1.0], [0.5])
    h = front_track(d, 0.4, LWR)
    assert h.sample(0.4, 0.5) == 0.5
    assert h.density(0.4).mass == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("model", [LWR, VelocityModel.generalized_lwr(2.0)])
def test_mass_conservation_through_interactions(model):
    rng = np.random.default_rng(11)
    for _ in range(5):
        m = int(rng.integers(2, 8))
        d = PiecewiseConstantDensity(np.cumsum(rng.uniform(0.1, 1, m + 1)), rng.uniform(0.1, 1, m))
        h = front_track(d, 2.0, model)
        assert h.interactions > 0
        for t in (0.5, 2.0):
            assert abs(h.density(t).mass - d.mass) <= 1e-8


def test_refinement():
    d = PiecewiseConstantDensity([-1, 0, 1, 1.5], [0.4, 0.8, 0.3])
    t = 2.0
    errs = []
    for dr in (4e-2, 2e-2, 1e-2):
        a = front_track(d, t, LWR, dr).density(t)
        b = front_track(d, t, LWR, dr / 2).density(t)
        errs.append(l1_error(a, b, -5, 5))
        assert errs[-1] <= 2.0 * dr
    assert errs[-1] < errs[0]


def test_time_range_and_arguments():
    h = front_track(IC, 0.5, LWR)
    with pytest.raises(ValueError):
        h.sample(0.6, 0.0)
    with pytest.raises(ValueError):
        front_track(IC, 0.5, LWR, 0.0)


def test_livelock_guard(monkeypatch):
    import ftlpde.reference as ref

    monkeypatch.setattr(ref, "MAX_INTERACTIONS", 3)
    with pytest.raises(RuntimeError, match="interactions"):
        ref.front_track(IC, 3.0, LWR, 1e-2)
    assert MAX_INTERACTIONS == 1_000_000 and math.isfinite(MAX_INTERACTIONS)
