import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import small_system
from dgks.eigensolver import SpectralHamiltonian, apply_hamiltonian, lobpcg, precondition, tpa_filter
from dgks.grids import global_grid
from dgks.hamiltonian import initial_density, effective_potential
from dgks.reference import global_hamiltonian


def free_levels(extents, nmax=3):
    ks = [2 * np.pi * np.arange(-nmax, nmax + 1) / L for L in extents]
    e = 0.5 * (ks[0][:, None, None] ** 2 + ks[1][None, :, None] ** 2 + ks[2][None, None, :] ** 2)
    return np.sort(e.ravel())


def test_free_particle_spectrum():
    g = global_grid([8.0, 8.0, 8.0], (12, 12, 12))
    H = SpectralHamiltonian(g, np.zeros(g.shape))
    sol = lobpcg(H, 7, tol=1e-11, max_iter=200, rng=np.random.default_rng(0))
    assert sol.converged
    np.testing.assert_allclose(sol.eigenvalues, free_levels(g.extents)[:7], atol=1e-10)


def test_free_particle_non_cubic_box():
    g = global_grid([6.0, 7.0, 9.0], (10, 12, 14))
    H = SpectralHamiltonian(g, np.full(g.shape, -0.25))
    sol = lobpcg(H, 5, tol=1e-11, max_iter=200, rng=np.random.default_rng(3))
    np.testing.assert_allclose(sol.eigenvalues, free_levels(g.extents)[:5] - 0.25, atol=1e-10)


def test_planewave_is_exact_eigenfunction():
    g = global_grid([5.0, 6.0, 7.0], (10, 12, 14))
    H = SpectralHamiltonian(g, np.zeros(g.shape))
    X, Y, Z = g.mesh()
    k = 2 * np.pi * np.array([2 / 5, 1 / 6, 3 / 7])
    psi = np.cos(k[0] * X + k[1] * Y + k[2] * Z)
    np.testing.assert_allclose(apply_hamiltonian(H, psi), 0.5 * (k @ k) * psi, atol=1e-11)


def test_hamiltonian_is_symmetric(rng):
    s = small_system(n=10)
    H = global_hamiltonian(effective_potential(initial_density(s), s), s)
    u, v = rng.standard_normal((2, H.dim))
    a = u @ H.apply(v[None])[0]
    b = v @ H.apply(u[None])[0]
    assert abs(a - b) <= 1e-10 * max(abs(a), 1.0)


def test_orbitals_normalized_and_orthogonal():
    s = small_system(n=10)
    H = global_hamiltonian(effective_potential(initial_density(s), s), s)
    sol = lobpcg(H, 4, tol=1e-9, max_iter=150, rng=np.random.default_rng(1))
    psi = sol.orbitals.reshape(4, -1)
    np.testing.assert_allclose(psi @ psi.T * s.grid.dv, np.eye(4), atol=1e-12)
    assert np.all(np.diff(sol.eigenvalues) >= 0)


def test_exact_start_needs_no_iterations():
    g = global_grid([6.0, 6.0, 6.0], (8, 8, 8))
    H = SpectralHamiltonian(g, np.zeros(g.shape))
    first = lobpcg(H, 1, tol=1e-12, max_iter=100)
    again = lobpcg(H, 1, X0=first.orbitals, tol=1e-10)
    assert again.iterations == 0 and again.converged


def test_same_seed_same_answer():
    s = small_system(n=10)
    H = global_hamiltonian(effective_potential(initial_density(s), s), s)
    a = lobpcg(H, 3, max_iter=5, rng=np.random.default_rng(7))
    b = lobpcg(H, 3, max_iter=5, rng=np.random.default_rng(7))
    np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)


def test_preconditioner_speeds_up_convergence():
    s = small_system(n=12)
    H = global_hamiltonian(effective_potential(initial_density(s), s), s)
    with_p = lobpcg(H, 4, tol=1e-8, max_iter=300, rng=np.random.default_rng(2))
    without = lobpcg(H, 4, tol=1e-8, max_iter=300, precond=False, rng=np.random.default_rng(2))
    assert with_p.converged
    assert with_p.iterations <= without.iterations


def test_tpa_filter_limits():
    assert tpa_filter(0.0) == 1.0
    x = 1e4
    assert abs(tpa_filter(x) * 2 * x - 1.0) < 1e-3
    with pytest.raises(ValueError):
        precondition(np.zeros((1, 8)), 0.0, global_grid([1, 1, 1], (2, 2, 2)))


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1e6))
def test_tpa_filter_in_unit_interval_and_monotone(x):
    k = tpa_filter(x)
    assert 0 < k <= 1
    assert tpa_filter(x * 1.1 + 1e-3) <= k


def test_nonlocal_term_raises_spectrum():
    s = small_system(n=10)
    v = effective_potential(initial_density(s), s)
    H = global_hamiltonian(v, s)
    H0 = SpectralHamiltonian(s.grid, v.total)
    e = lobpcg(H, 2, tol=1e-9, max_iter=200, rng=np.random.default_rng(0)).eigenvalues
    e0 = lobpcg(H0, 2, tol=1e-9, max_iter=200, rng=np.random.default_rng(0)).eigenvalues
    assert np.all(e > e0)       # positive-weight projectors are repulsive
