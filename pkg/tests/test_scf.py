import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import small_system
from dgks.hamiltonian import initial_density, kohn_sham_functional
from dgks.reference import solve_global
from dgks.scf import (KB_AU, AndersonMixer, LinearMixer, SCFSettings, density_residual, fermi_occupations,
                      make_mixer)


def test_fermi_sums_to_electron_count():
    e = np.array([-1.0, -0.5, -0.49, 0.2, 0.3])
    f, mu = fermi_occupations(e, 2.0, 2000.0)
    assert abs(f.sum() - 2.0) < 1e-12
    assert -0.5 < mu < -0.49
    assert np.all(np.diff(f) <= 0)


def test_fermi_zero_temperature_fills_lowest():
    f, mu = fermi_occupations([0.3, -1.0, 0.1, -0.2], 2.0, 0.0)
    np.testing.assert_array_equal(f, [0, 1, 0, 1])
    assert mu == -0.2
    f, _ = fermi_occupations([0.0, 1.0, 2.0], 1.5, 0.0)
    np.testing.assert_array_equal(f, [1, 0.5, 0])


def test_fermi_rejects_overfull_and_negative_temperature():
    with pytest.raises(ValueError):
        fermi_occupations([0.0, 1.0], 3.0, 100.0)
    with pytest.raises(ValueError):
        fermi_occupations([0.0, 1.0], 1.0, -1.0)


def test_fermi_matches_formula():
    e = np.linspace(-0.3, 0.1, 9)
    f, mu = fermi_occupations(e, 4.0, 3000.0)
    np.testing.assert_allclose(f, 1 / (1 + np.exp((e - mu) / (KB_AU * 3000.0))), rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=4, max_size=12), st.floats(0.1, 0.9), st.floats(100, 20000))
def test_mu_monotone_in_electron_count(e, frac, temp):
    e = np.sort(np.array(e))
    n1 = frac * (len(e) - 1)
    _, mu1 = fermi_occupations(e, n1, temp)
    _, mu2 = fermi_occupations(e, n1 + 0.5, temp)
    assert mu2 >= mu1 - 1e-12


def test_fixed_point_is_preserved(rng):
    rho = rng.random((4, 4, 4))
    for mixer in (LinearMixer(0.3), AndersonMixer(4, 0.3)):
        np.testing.assert_array_equal(mixer(rho, rho.copy()), rho)


def test_linear_mixing_convention():
    out = LinearMixer(0.3)(np.array([1.0]), np.array([2.0]))
    assert abs(out[0] - (0.3 * 1.0 + 0.7 * 2.0)) < 1e-15


def test_depth_zero_anderson_is_linear_bitwise(rng):
    lin, and0 = LinearMixer(0.37), AndersonMixer(0, 0.37)
    rho = rng.random(50)
    for _ in range(6):
        out = np.tanh(rho) + 0.1
        a, b = lin(rho, out), and0(rho, out)
        assert np.array_equal(a, b)
        rho = a


def test_anderson_solves_scalar_linear_map_quickly():
    c, d = 0.95, 1.0
    fixed = d / (1 - c)

    def iterate(mixer, n_max=2000):
        x = np.array([0.0])
        for n in range(1, n_max + 1):
            out = c * x + d
            if abs(out[0] - x[0]) < 1e-10 * fixed:
                return n
            x = mixer(x, out)
        return n_max

    n_and = iterate(AndersonMixer(1, 0.3))
    n_lin = iterate(LinearMixer(0.3))
    assert n_and <= 3
    assert n_lin > 100


def test_mixer_validation():
    with pytest.raises(ValueError):
        LinearMixer(1.0)
    with pytest.raises(ValueError):
        AndersonMixer(-1)
    with pytest.raises(ValueError):
        make_mixer("broyden")


def test_noninteracting_stops_at_first_iteration(rng):
    s = small_system(hartree=False, xc=False, n=10)
    st_ = SCFSettings(n_states=4)
    rho0 = rng.random(s.grid.shape)
    rho0 *= s.n_electrons / (rho0.sum() * s.grid.dv)
    res, sol = solve_global(s, st_, rho0=rho0)
    assert res.converged and len(res.history) == 1
    assert abs(res.energy.total - np.dot(res.state.occupations, res.state.eigenvalues)) < 1e-14
    assert sol.converged


@pytest.fixture(scope="module")
def converged_small():
    s = small_system(n=12)
    res, sol = solve_global(s, SCFSettings(tol=1e-9, n_states=5), seed=4)
    return s, res, sol


def test_interacting_scf_converges(converged_small):
    s, res, _ = converged_small
    assert res.converged
    h = res.history
    assert h[-1]["residual"] <= 1e-9
    assert {"iteration", "residual", "etot", "mu", "seconds"} <= set(h[0])
    assert abs(res.state.rho_in.sum() * s.grid.dv - s.n_electrons) < 1e-10


def test_energy_formula_matches_functional(converged_small):
    s, res, sol = converged_small
    f = res.state.occupations
    e_functional = kohn_sham_functional(sol.orbitals, f, s)
    assert abs(e_functional - res.energy.total) <= 1e-8


def test_energy_report_identity(converged_small):
    assert converged_small[1].energy.identity_residual() < 1e-13


def test_density_residual_is_l2():
    from dgks.grids import global_grid
    g = global_grid([2.0, 2.0, 2.0], (2, 2, 2))
    a = np.zeros(g.shape)
    b = np.full(g.shape, 0.5)
    assert abs(density_residual(a, b, g.dv) - np.sqrt(8 * 0.25)) < 1e-15


def test_initial_density_positive_and_normalized():
    s = small_system()
    rho = initial_density(s)
    assert rho.min() > 0
    assert abs(rho.sum() * s.grid.dv - s.n_electrons) < 1e-12
