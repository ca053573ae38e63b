import numpy as np
import pytest

from ftlpde import metrics
from ftlpde.density import PiecewiseConstantDensity, reconstruct
from ftlpde.ftl import integrate
from ftlpde.metrics import (
    BumpTestFunction,
    ConsistencyError,
    entropy_residual,
    l1_error,
    local_tv,
    oleinik,
    total_variation,
    w1_cdf,
    w1_pseudo_inverse,
    wasserstein1,
)
from ftlpde.model import VelocityModel
from ftlpde.quantile import ic_paper, partition
from ftlpde.reference import front_track
from ftlpde.state import ParticleState

LWR = VelocityModel.lwr()
IC = ic_paper().density


def random_density(rng, mass=None):
    m = int(rng.integers(1, 9))
    b = np.cumsum(rng.uniform(0.05, 1, m + 1)) + rng.uniform(-2, 2)
    c = rng.uniform(0, 1, m)
    c[rng.integers(0, m)] += 0.1
    d = PiecewiseConstantDensity(b, c)
    if mass is not None:
        d = PiecewiseConstantDensity(b, c * mass / d.mass)
    return d


def test_total_variation_examples():
    assert total_variation(PiecewiseConstantDensity([0, 2], [0.7])) == pytest.approx(1.4)
    assert total_variation(IC) == pytest.approx(1.6)
    rng = np.random.default_rng(1)
    for _ in range(20):
        d = random_density(rng)
        assert total_variation(d, include_boundary=False) <= total_variation(d)


def test_local_tv_examples():
    assert local_tv(IC, 0.1, 0.9) == 0.0
    assert local_tv(IC, -1, 1) == pytest.approx(total_variation(IC, include_boundary=False))
    assert local_tv(IC, -0.5, 0.5) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        local_tv(IC, 1, 0)


def test_w1_examples():
    u = PiecewiseConstantDensity([0, 1], [1])
    assert wasserstein1(u, u) == 0.0
    assert wasserstein1(u, u.shifted(0.3)) == pytest.approx(0.3, abs=1e-15)
    assert wasserstein1(u, PiecewiseConstantDensity([0, 2], [0.5])) == pytest.approx(0.5, abs=1e-15)


def test_w1_dual_forms_agree_with_vacuum():
    a = PiecewiseConstantDensity.from_cells([(0, 1, 0.5), (2, 3, 0.5)])
    b = PiecewiseConstantDensity([0.5, 1.5], [1.0])
    assert abs(w1_pseudo_inverse(a, b) - w1_cdf(a, b)) <= 1e-12


def test_w1_mass_mismatch():
    with pytest.raises(ValueError):
        wasserstein1(PiecewiseConstantDensity([0, 1], [1]), PiecewiseConstantDensity([0, 1], [2]))


def test_w1_disagreement_raises(monkeypatch):
    monkeypatch.setattr(metrics, "w1_cdf", lambda a, b: 1.0)
    u = PiecewiseConstantDensity([0, 1], [1])
    with pytest.raises(ConsistencyError):
        metrics.wasserstein1(u, u.shifted(0.1))


def test_l1_examples():
    rng = np.random.default_rng(2)
    d = random_density(rng)
    assert l1_error(d, d, -5, 5) == 0.0
    assert l1_error(PiecewiseConstantDensity([0, 1], [1]), PiecewiseConstantDensity([0, 1], [0.5]), 0, 1) == 0.5
    # window clipping
    assert l1_error(PiecewiseConstantDensity([0, 1], [1]), PiecewiseConstantDensity([0, 1], [0.5]), 0.5, 3) == 0.25


def test_l1_against_fine_grid():
    rng = np.random.default_rng(3)
    for _ in range(10):
        a, b = random_density(rng), random_density(rng)
        x = np.linspace(-4, 10, 400001)
        xm = 0.5 * (x[1:] + x[:-1])
        approx = np.sum(np.abs(a(xm) - b(xm))) * (x[1] - x[0])
        assert l1_error(a, b, -4, 10) == pytest.approx(approx, abs=1e-3)


def test_oleinik_examples():
    s = ParticleState(0.0, [0, 0.2, 0.4, 0.5], 0.1)
    assert np.all(oleinik(s, LWR).z == 0)
    s = ParticleState(0.01, [0, 0.25, 0.5, 0.75, 0.875], 0.125)
    d = oleinik(s, LWR)
    assert d.z[0] == 0 and d.z[1] == 0
    assert d.z[-1] == pytest.approx(0.01)
    assert d.holds()


def test_bump_rejects_nonpositive_time_support():
    with pytest.raises(ValueError):
        BumpTestFunction(0.1, 0.2, 0.0, 1.0)


@pytest.fixture(scope="module")
def run400():
    return integrate(partition(ic_paper(), 400), LWR, 0.5, snapshot_times=np.linspace(0, 0.5, 401))


def _oracle(k, phi, nt=101, nx=2001):
    """Same functional on the exact solution, by brute-force quadrature."""
    h = front_track(IC, 0.5, LWR)
    t0, t1 = phi.t_support
    a, b = phi.x_support
    ts = np.linspace(t0, t1, nt)
    xs = np.linspace(a, b, nx)
    xm = 0.5 * (xs[1:] + xs[:-1])
    e = 1e-6
    vals = []
    for t in ts:
        rho = h.density(t, 2000)(xm)
        pt = (phi(t + e, xm) - phi(t - e, xm)) / (2 * e)
        px = (phi(t, xm + e) - phi(t, xm - e)) / (2 * e)
        vals.append(np.sum(np.abs(rho - k) * pt + np.sign(rho - k) * (LWR.f(rho) - LWR.f(k)) * px) * (xs[1] - xs[0]))
    vals = np.array(vals)
    return float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(ts)))


def test_entropy_shock_bump_matches_oracle(run400):
    phi = BumpTestFunction(0.3, 0.15, -0.06, 0.15)
    rep = entropy_residual(run400, 0.6, phi)
    assert rep.value > rep.tol > 0
    assert rep.value == pytest.approx(_oracle(0.6, phi), rel=0.05)


@pytest.mark.parametrize("k", [0.0, 0.8, 1.0])
def test_entropy_weak_form_limits(run400, k):
    phi = BumpTestFunction(0.3, 0.15, -0.06, 0.15)
    rep = entropy_residual(run400, k, phi)
    assert abs(rep.value) <= rep.tol


def test_entropy_preconditions(run400):
    with pytest.raises(ValueError, match="support"):
        entropy_residual(run400, 0.3, BumpTestFunction(0.45, 0.1, 0.0, 0.5))
    coarse = integrate(partition(ic_paper(), 50), LWR, 0.5, snapshot_times=np.linspace(0, 0.5, 6))
    with pytest.raises(ValueError, match="spacing"):
        entropy_residual(coarse, 0.3, BumpTestFunction(0.25, 0.2, 0.0, 0.5))
    with pytest.raises(ValueError):
        entropy_residual(run400, -1.0, BumpTestFunction(0.25, 0.2, 0.0, 0.5))


def test_report_fields(run400):
    rep = entropy_residual(run400, 0.2, BumpTestFunction(0.25, 0.15, -0.85, 0.2))
    d = rep.as_dict()
    assert d["tol"] == pytest.approx(d["ell"] * d["consistency"] + d["dt"] ** 2 * d["quadrature"])
    assert np.isfinite(d["value"]) and d["phi"]["x_center"] == -0.85


def test_local_bv_after_delta(run400):
    delta = 0.1
    for a, b in [(-0.8, -0.2), (0.0, 0.6)]:
        bound = metrics.local_bv_bound(LWR, 0.8, a, b, delta) + 1e-6
        for s in run400.snapshots:
            if s.t >= delta:
                assert metrics.local_tv_velocity(reconstruct(s), LWR, a, b) <= bound
