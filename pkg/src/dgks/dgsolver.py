"""
The DG pipeline as an SCF eigenstep: local basis generation on every
extended element, stiffness assembly, dense eigensolve and density
reconstruction.
"""

from __future__ import annotations

import time

import numpy as np

from . import grids
from .basis import generate_basis, local_hamiltonian, svd_filter
from .dg import assemble_stiffness, reconstruct_density, solve_dg
from .geometry import Partition, extended_element
from .hamiltonian import EffectivePotential, System
from .parallel import build_workplan, parallel_map
from .scf import SCFSettings, StepResult, scf_loop


class DGEigenstep:
    """Eigenstep for :func:`scf_loop` built on adaptive local bases.

    Parameters
    ----------
    basis_counts : int or sequence of int
        Basis functions per element.
    buffer : sequence of 3 float
        Buffer width per axis (au).
    """

    def __init__(self, system: System, partition: Partition, basis_counts, buffer, n_states: int,
                 lgl_order: int = 20, alpha: float = 20.0, delta: float = 0.0, inner_iters: int = 3,
                 seed: int = 0, workers: int = 1, basis_tol: float = 1e-10, converge_iters: int = 300,
                 max_dim: int = 20000):
        self.system = system
        self.partition = partition
        M = len(partition)
        self.counts = list(np.broadcast_to(np.asarray(basis_counts, int), (M,)))
        self.n_states = n_states
        self.alpha = alpha
        self.delta = delta
        self.inner_iters = inner_iters
        self.converge_iters = converge_iters
        self.basis_tol = basis_tol
        self.max_dim = max_dim
        self.extended = [extended_element(partition, k, buffer) for k in range(M)]
        self.qgrids = [grids.extended_grid(system.grid, q) for q in self.extended]
        self.lgls = [grids.lgl_grid(el.lower, el.upper, lgl_order) for el in partition.elements]
        # element LGL boxes must sit on global grid nodes for lgl_to_uniform
        for lgl in self.lgls:
            for a in range(3):
                grids.element_uniform_indices(system.grid, lgl, a)
        cutoffs = [max((p.cutoff for p in at.projectors), default=0.0) for at in system.atoms]
        self.plan = build_workplan(partition, system.positions, cutoffs, workers)
        self.rngs = [np.random.default_rng([seed, k]) for k in range(M)]
        self.warm = [None] * M
        self.timings = {"basis": 0.0, "assembly": 0.0, "dg_eigensolve": 0.0, "density": 0.0}
        self.gram_errors = []
        self.bases = None
        self.dg = None
        self.solution = None
        self.raw_integral = None

    def generate(self, veff: np.ndarray, iters: int):
        def task(k):
            H = local_hamiltonian(self.extended[k], self.qgrids[k], veff, self.system)
            raw = generate_basis(H, self.lgls[k], self.counts[k], iters, self.warm[k], self.rngs[k],
                                 element=k, tol=self.basis_tol)
            basis = svd_filter(raw.values, raw.gradients, self.lgls[k], self.delta, element=k)
            basis.local_eigenvalues = raw.local_eigenvalues
            basis.buffer = self.extended[k].buffer
            return raw, basis

        out = parallel_map(self.plan, task)
        for k, (raw, _) in enumerate(out):
            self.warm[k] = raw.warm_start
        return [b for _, b in out]

    def __call__(self, veff, converge: bool = False) -> StepResult:
        v = veff.total if isinstance(veff, EffectivePotential) else np.asarray(veff)
        t0 = time.perf_counter()
        bases = self.generate(v, self.converge_iters if converge else self.inner_iters)
        t1 = time.perf_counter()
        dg = assemble_stiffness(bases, self.partition, v, self.system, self.alpha, plan=self.plan)
        t2 = time.perf_counter()
        sol = solve_dg(dg, self.n_states, self.max_dim)
        t3 = time.perf_counter()
        self.timings["basis"] += t1 - t0
        self.timings["assembly"] += t2 - t1
        self.timings["dg_eigensolve"] += t3 - t2
        self.gram_errors.append(max(float(np.max(np.abs(b.gram() - np.eye(b.count)))) for b in bases))
        self.bases, self.dg, self.solution = bases, dg, sol

        def density(occ):
            t = time.perf_counter()
            rho, raw = reconstruct_density(sol, bases, occ, self.system.grid, self.system.n_electrons)
            self.raw_integral = raw
            self.timings["density"] += time.perf_counter() - t
            return rho

        return StepResult(sol.eigenvalues, density,
                          {"dg_dim": dg.dim, "gram_error": self.gram_errors[-1]})


def solve_dg_scf(system: System, partition: Partition, settings: SCFSettings, basis_counts, buffer,
                 rho0=None, **kwargs):
    """Self-consistent DG solution; returns ``(SCFResult, DGEigenstep)``."""
    step = DGEigenstep(system, partition, basis_counts, buffer, settings.n_states, **kwargs)
    result = scf_loop(step, system, settings, rho0=rho0)
    result.timings = dict(step.timings)
    return result, step
