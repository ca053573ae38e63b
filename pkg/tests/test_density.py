import numpy as np
import pytest

from ftlpde.density import PiecewiseConstantDensity, cdf, pseudo_inverse, read_density_csv, reconstruct
from ftlpde.quantile import ic_paper
from ftlpde.state import ParticleState


def random_state(rng, n=None):
    n = n or int(rng.integers(3, 40))
    x = np.cumsum(rng.uniform(0.01, 1.0, n + 1)) - 2.0
    return ParticleState(0.0, x, rng.uniform(0.01, 1.0))


def test_reconstruct_examples():
    d = reconstruct(ParticleState(0.0, [0, 0.5, 1], 0.5))
    np.testing.assert_array_equal(d.values, [1.0, 1.0])
    d = reconstruct(ParticleState(0.0, [0, 0.25, 1], 0.5))
    np.testing.assert_allclose(d.values, [2.0, 2.0 / 3.0], rtol=1e-15)
    assert d(1.0) == 0.0 and d(0.0) == 2.0 and d(-1e-9) == 0.0


def test_reconstruct_mass():
    rng = np.random.default_rng(7)
    for _ in range(50):
        s = random_state(rng)
        assert reconstruct(s).mass == pytest.approx(s.n_gaps * s.ell, rel=1e-13)


def test_cdf_examples():
    u = PiecewiseConstantDensity([0, 1], [1])
    assert cdf(u, 0.5) == 0.5
    assert cdf(ic_paper().density, 0.0) == pytest.approx(0.4)
    assert cdf(u, -3.0) == 0.0 and cdf(u, 5.0) == 1.0


def test_pseudo_inverse_uniform():
    assert pseudo_inverse(PiecewiseConstantDensity([0, 1], [1]))(0.25) == 0.25


def test_pseudo_inverse_closed_form():
    rng = np.random.default_rng(8)
    s = random_state(rng, 12)
    X = pseudo_inverse(reconstruct(s))
    R = s.densities
    for i in range(s.n_gaps):
        z = (i + rng.uniform(0, 1)) * s.ell
        assert X(z) == pytest.approx(s.x[i] + (z - i * s.ell) / R[i], abs=1e-12)


def test_round_trip_exact():
    rng = np.random.default_rng(9)
    for _ in range(30):
        s = random_state(rng)
        X = pseudo_inverse(reconstruct(s))
        np.testing.assert_array_equal(X(s.ell * np.arange(s.x.size)), s.x)


def test_vacuum_jump():
    d = PiecewiseConstantDensity.from_cells([(0, 1, 0.5), (2, 3, 0.5)])
    X = pseudo_inverse(d)
    assert X(0.5) == 2.0
    assert X(0.5 + 1e-12) == pytest.approx(2.0)
    assert X(0.5 - 1e-12) == pytest.approx(1.0)


def test_cdf_of_pseudo_inverse_identity():
    d = ic_paper().density
    X = pseudo_inverse(d)
    z = np.linspace(0, d.mass, 97)
    assert np.max(np.abs(cdf(d, X(z)) - z)) <= 1e-12


def test_zero_mass_and_invalid():
    with pytest.raises(ValueError):
        pseudo_inverse(PiecewiseConstantDensity([0, 1], [0.0]))
    with pytest.raises(ValueError):
        PiecewiseConstantDensity([0, 1, 0.5], [1, 1])
    with pytest.raises(ValueError):
        PiecewiseConstantDensity([0, 1], [-1])


def test_merges_slivers():
    d = PiecewiseConstantDensity([0, 1e-16, 1], [5, 1])
    assert d.breakpoints.size == 2 and d.values[0] == 1


def test_csv_round_trip(tmp_path):
    d = PiecewiseConstantDensity([-1, 0.1, 0.3, 2], [0.4, 0.0, 1 / 3])
    d.to_csv(tmp_path / "d.csv")
    e = read_density_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(e.breakpoints, d.breakpoints)
    np.testing.assert_array_equal(e.values, d.values)


def test_max_principle_link():
    from ftlpde.ftl import integrate
    from ftlpde.model import VelocityModel
    from ftlpde.quantile import partition

    traj = integrate(partition(ic_paper(), 50), VelocityModel.lwr(), 0.5)
    assert reconstruct(traj.final).sup <= 0.8 * (1 + 1e-9)
