"""
Adaptive local basis: eigenfunctions of the effective Hamiltonian restricted
to each extended element with periodic boundary conditions, interpolated to
the element's LGL grid and orthonormalized by SVD filtering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import grids
from .eigensolver import SpectralHamiltonian, lobpcg
from .hamiltonian import System, projector_fields


@dataclass
class RawBasis:
    """Pre-filter basis on an element LGL grid."""

    element: int
    values: np.ndarray          # (J, n, n, n)
    gradients: np.ndarray       # (3, J, n, n, n)
    local_eigenvalues: np.ndarray
    warm_start: np.ndarray      # LOBPCG block on the extended grid, incl. extra states
    residuals: np.ndarray = None
    iterations: int = 0


@dataclass
class LocalBasisSet:
    """Orthonormal adaptive basis of one element.

    Orthonormality is with respect to the LGL-weighted discrete product.
    """

    element: int
    values: np.ndarray          # (J, n, n, n)
    gradients: np.ndarray       # (3, J, n, n, n)
    lgl: grids.LGLGrid
    singular_values: np.ndarray
    local_eigenvalues: np.ndarray = None
    buffer: np.ndarray = None
    _traces: dict = field(default_factory=dict, repr=False)

    @property
    def count(self) -> int:
        return len(self.values)

    def gram(self) -> np.ndarray:
        M = self.values.reshape(self.count, -1) * np.sqrt(self.lgl.weights.ravel())
        return M @ M.T

    def trace(self, axis: int, side: int):
        """Values, normal derivative (along +axis) and weights on one face."""
        key = (axis, side)
        if key not in self._traces:
            v, w = grids.face_trace(self.values, self.lgl, axis, side)
            d, _ = grids.face_trace(self.gradients[axis], self.lgl, axis, side)
            self._traces[key] = (v, d, w)
        return self._traces[key]


def local_hamiltonian(q, qgrid: grids.UniformGrid, veff: np.ndarray, system: System) -> SpectralHamiltonian:
    """Periodic Hamiltonian on an extended element.

    The effective potential is copied from the global grid; projectors are
    included for atoms whose wrapped position lies inside ``q`` and are
    sampled directly on the extended grid.
    """
    v = grids.restrict_to_extended(veff, qgrid)
    inside = set(q.atoms_inside(system.positions))
    axes = [qgrid.axis_nodes(a) for a in range(3)]
    projs = [(p.weight, projector_fields(p, system.domain, axes))
             for p in system.projectors if p.atom in inside]
    return SpectralHamiltonian(qgrid, v, projs)


def restrict_orbitals(orbitals: np.ndarray, qgrid: grids.UniformGrid, lgl: grids.LGLGrid):
    """Values and gradients of extended-grid orbitals at the element LGL nodes.

    Gradients are spectral derivatives of the trigonometric interpolant on
    the extended element.
    """
    targets = [lgl.axis_nodes(a) for a in range(3)]
    vals = grids.fourier_interpolate(orbitals, qgrid, targets)
    grads = np.stack([grids.fourier_interpolate(orbitals, qgrid, targets, deriv_axis=a)
                      for a in range(3)])
    return vals, grads


def n_extra_states(count: int) -> int:
    return max(2, count // 10)


def generate_basis(H: SpectralHamiltonian, lgl: grids.LGLGrid, count: int, inner_iters: int,
                   warm_start=None, rng=None, element: int = -1, tol: float = 1e-10) -> RawBasis:
    """Lowest ``count`` local eigenfunctions restricted to the element LGL grid.

    ``count + n_extra_states(count)`` states are iterated; the surplus is
    discarded after the solve.
    """
    if count < 1:
        raise ValueError("basis count must be >= 1")
    nb = count + n_extra_states(count)
    if nb > H.dim:
        raise ValueError(f"element {element}: {nb} states requested but extended grid has {H.dim} points")
    try:
        sol = lobpcg(H, nb, X0=warm_start, tol=tol, max_iter=inner_iters, rng=rng)
    except Exception as exc:  # noqa: BLE001
        raise RuntimeError(f"local eigensolve failed on element {element}: {exc}") from exc
    vals, grads = restrict_orbitals(sol.orbitals[:count], H.grid, lgl)
    return RawBasis(element, vals, grads, sol.eigenvalues[:count], sol.orbitals,
                    sol.residuals[:count], sol.iterations)


def svd_filter(values: np.ndarray, gradients: np.ndarray, lgl: grids.LGLGrid, delta: float = 0.0,
               element: int = -1) -> LocalBasisSet:
    """Orthonormalize a raw basis under the LGL-weighted product.

    Left singular vectors with singular value above ``delta`` are kept and
    scaled back to nodal values; gradients go through the same linear map.
    """
    if delta < 0:
        raise ValueError("SVD threshold must be nonnegative")
    J = len(values)
    sw = np.sqrt(lgl.weights.ravel())
    M = values.reshape(J, -1).T * sw[:, None]
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    keep = s > delta
    if not np.any(keep):
        raise ValueError(f"element {element}: every singular value is <= delta={delta:g}; empty basis")
    U, s, Vt = U[:, keep], s[keep], Vt[keep]
    new_vals = (U / sw[:, None]).T.reshape((len(s),) + values.shape[1:])
    T = Vt.T / s                                   # (J, J~): new = old^T @ T
    new_grads = np.einsum("aj...,jk->ak...", gradients, T)
    return LocalBasisSet(element, new_vals, new_grads, lgl, s)
