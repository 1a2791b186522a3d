"""
Global planewave solver: LOBPCG on the whole periodic domain, used as the
reference that the DG pipeline is measured against.
"""

from __future__ import annotations

import time

import numpy as np

from .eigensolver import EigenSolution, SpectralHamiltonian, lobpcg
from .hamiltonian import EffectivePotential, System
from .scf import SCFResult, SCFSettings, StepResult, scf_loop


def global_hamiltonian(veff, system: System) -> SpectralHamiltonian:
    v = veff.total if isinstance(veff, EffectivePotential) else np.asarray(veff)
    return SpectralHamiltonian(system.grid, v,
                               [(p.weight, b) for p, b in zip(system.projectors, system.projector_values)])


class GlobalEigenstep:
    """Eigenstep for :func:`scf_loop` on the global grid.

    Orbitals persist between calls and seed the next solve.
    """

    def __init__(self, system: System, n_states: int, inner_iters: int = 10, tol: float = 1e-9,
                 seed: int = 0, converge_iters: int = 500):
        self.system = system
        self.n_states = n_states
        self.inner_iters = inner_iters
        self.tol = tol
        self.converge_iters = converge_iters
        self.rng = np.random.default_rng(seed)
        self.X = None
        self.solution: EigenSolution = None
        self.seconds = 0.0

    def __call__(self, veff, converge: bool = False) -> StepResult:
        t0 = time.perf_counter()
        H = global_hamiltonian(veff, self.system)
        iters = self.converge_iters if converge else self.inner_iters
        sol = lobpcg(H, self.n_states, X0=self.X, tol=self.tol, max_iter=iters, rng=self.rng)
        self.X = sol.orbitals
        self.solution = sol
        self.seconds += time.perf_counter() - t0
        orbitals = sol.orbitals

        def density(occ):
            f = np.asarray(occ, float)
            return np.einsum("i,ixyz->xyz", f, orbitals[: len(f)] ** 2)

        return StepResult(sol.eigenvalues, density,
                          {"lobpcg_iterations": sol.iterations,
                           "max_eig_residual": float(sol.residuals.max())})


def solve_global(system: System, settings: SCFSettings, inner_iters: int = 10, seed: int = 0,
                 tol: float = 1e-9, rho0=None):
    """Self-consistent planewave solution.

    Returns ``(SCFResult, EigenSolution)``; the result's ``converged`` flag
    reports SCF failure, in which case the best state is returned.
    """
    step = GlobalEigenstep(system, settings.n_states, inner_iters, tol, seed)
    result: SCFResult = scf_loop(step, system, settings, rho0=rho0)
    result.timings = {"global_solve": step.seconds}
    return result, step.solution
