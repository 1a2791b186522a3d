"""
Local basis cost does not depend on the size of the system
==========================================================

Each element solves an eigenproblem on its own extended element, whose size
is set by the element and the buffer alone.  Growing the chain from 4 to 16
cells multiplies the number of local problems but leaves the cost of each
one unchanged.
"""

import time

import numpy as np

from dgks import grids
from dgks.config import generate_supercell
from dgks.dgsolver import DGEigenstep
from dgks.geometry import Domain, build_partition
from dgks.hamiltonian import AtomSpec, ProjectorSpec, System, effective_potential, initial_density

a = 7.994
projectors = (ProjectorSpec(sign=1, coupling=1.0, width=1.0, form="s", cutoff=3.0),
               ProjectorSpec(sign=1, coupling=0.5, width=1.0, form="pz", cutoff=3.0))

for n_cells in (4, 8, 16):
    domain = Domain((a, a, n_cells * a))
    positions = generate_supercell([a] * 3, [[0.25] * 3, [0.75] * 3], (1, 1, n_cells), 0.2, seed=1)
    atoms = [AtomSpec(p, 2.0, 1.2, projectors) for p in positions]
    system = System(domain, grids.global_grid(domain.extents, (16, 16, 16 * n_cells)), atoms,
                    float(len(atoms)))
    partition = build_partition(domain, (1, 1, n_cells), positions)
    step = DGEigenstep(system, partition, 20, (0.0, 0.0, 0.5 * a), n_states=len(atoms))
    veff = effective_potential(initial_density(system), system).total
    step.generate(veff, 3)
    times = []
    for _ in range(3):
        t0 = time.perf_counter()
        step.generate(veff, 3)
        times.append(time.perf_counter() - t0)
    print(f"{n_cells:3d} elements   {1e3 * np.median(times) / n_cells:7.1f} ms per element")
