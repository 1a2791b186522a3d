"""
One element, no buffer: the local basis spans the global eigenspace
===================================================================

With a single element covering the whole periodic cell and no buffer, the
local problem *is* the global problem.  Its lowest eigenfunctions are
periodic and continuous, so every face jump vanishes and the DG matrix is the
global Hamiltonian projected on its own eigenvectors.  The DG eigenvalues
should then reproduce the planewave ones to the accuracy of the LGL
quadrature.
"""

import numpy as np

from dgks import grids
from dgks.config import generate_supercell
from dgks.dgsolver import DGEigenstep
from dgks.eigensolver import lobpcg
from dgks.geometry import Domain, build_partition
from dgks.hamiltonian import AtomSpec, ProjectorSpec, System, effective_potential, initial_density
from dgks.reference import global_hamiltonian

a = 7.994
domain = Domain((a, a, a))
positions = generate_supercell([a] * 3, [[0.25] * 3, [0.75] * 3], (1, 1, 1), amplitude=0.2, seed=1)
projectors = (ProjectorSpec(sign=1, coupling=1.0, width=1.0, form="s", cutoff=3.0),
               ProjectorSpec(sign=1, coupling=0.5, width=1.0, form="pz", cutoff=3.0))
atoms = [AtomSpec(p, depth=2.0, width=1.2, projectors=projectors) for p in positions]
system = System(domain, grids.global_grid(domain.extents, (16, 16, 16)), atoms, n_electrons=2.0)

# A fixed effective potential built from the superposed atomic guess density.
veff = effective_potential(initial_density(system), system)

# The DG side: one element, zero buffer, N + 8 basis functions.
partition = build_partition(domain, (1, 1, 1), positions)
step = DGEigenstep(system, partition, basis_counts=10, buffer=0.0, n_states=4, lgl_order=20,
                   basis_tol=1e-11, converge_iters=400)
dg = step(veff, converge=True)

# The planewave side.
ref = lobpcg(global_hamiltonian(veff, system), 4, tol=1e-11, max_iter=400, rng=np.random.default_rng(0))

print(" i      DG eigenvalue     planewave eigenvalue   difference")
for i, (e_dg, e_pw) in enumerate(zip(dg.eigenvalues, ref.eigenvalues)):
    print(f"{i:2d}  {e_dg:18.12f}  {e_pw:18.12f}  {abs(e_dg - e_pw):10.2e}")
print(f"largest surface-term entry: {np.max(np.abs(step.dg.parts['surface'])):.1e}")
