"""
Interior-penalty DG stiffness matrix, dense eigensolve and density
reconstruction.

For basis functions ``phi`` living on one element each, the stiffness
matrix collects

* ``1/2 <grad phi, grad phi>`` and ``<phi, V_eff phi>`` on every element,
* ``-1/2 <[[phi]], {{grad phi}}>`` in both symmetric orders on every face,
* ``(alpha / h) <[[phi]], [[phi]]>`` on every face,
* ``sum_l gamma_l <phi, b_l><b_l, phi>`` for every projector.

The mass matrix is the identity because every local basis is orthonormal
under the LGL quadrature.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import grids
from .geometry import Face, Partition
from .hamiltonian import System, projector_fields
from .parallel import WorkPlan, build_workplan, parallel_map, projector_overlaps


@dataclass
class DGSystem:
    base: np.ndarray            # A without the penalty term
    penalty: np.ndarray         # <[[phi]], [[phi]]> summed over faces
    offsets: np.ndarray         # first row of each element block
    counts: tuple
    alpha: float
    h: float
    parts: dict = field(default_factory=dict, repr=False)

    @property
    def A(self) -> np.ndarray:
        return self.base + (self.alpha / self.h) * self.penalty

    @property
    def B(self) -> np.ndarray:
        return np.eye(self.dim)

    @property
    def dim(self) -> int:
        return int(sum(self.counts))

    def with_alpha(self, alpha: float) -> "DGSystem":
        return DGSystem(self.base, self.penalty, self.offsets, self.counts, float(alpha), self.h, self.parts)

    def index_map(self) -> list:
        """Row -> (element, local index)."""
        return [(k, j) for k, c in enumerate(self.counts) for j in range(c)]

    def block(self, k: int) -> slice:
        return slice(int(self.offsets[k]), int(self.offsets[k] + self.counts[k]))


@dataclass
class DGEigenSolution:
    eigenvalues: np.ndarray
    coefficients: np.ndarray    # (N, dim)
    residuals: np.ndarray


def jump_and_mean(u1, u2, q1, q2, n1):
    """Jump ``u1 n1 + u2 n2`` and mean ``(q1 + q2) / 2`` on a face.

    ``u`` are scalar traces (any shape), ``q`` vector traces with a leading
    axis of length 3, ``n1`` the unit normal out of the first element.
    """
    n1 = np.asarray(n1, float)
    u1, u2 = np.asarray(u1, float), np.asarray(u2, float)
    shape = (3,) + (1,) * u1.ndim
    jump = u1[None] * n1.reshape(shape) - u2[None] * n1.reshape(shape)
    mean = 0.5 * (np.asarray(q1, float) + np.asarray(q2, float))
    return jump, mean


def face_operators(face: Face, bases):
    """Normal jump and mean normal derivative of every basis function touching
    ``face``, projected on ``n1``.

    Returns ``(elements, jump, mean, weights)`` where the rows of ``jump`` and
    ``mean`` follow the concatenated bases of ``elements``.
    """
    a = face.axis
    b1, b2 = bases[face.k1], bases[face.k2]
    v1, d1, w1 = b1.trace(a, +1)
    v2, d2, w2 = b2.trace(a, -1)
    if not np.allclose(w1, w2, rtol=1e-13, atol=0):
        raise ValueError(f"face grids of elements {face.k1} and {face.k2} do not coincide")
    if face.self_paired:
        return (face.k1,), v1 - v2, 0.5 * (d1 + d2), w1
    jump = np.concatenate([v1, -v2])
    mean = np.concatenate([0.5 * d1, 0.5 * d2])
    return (face.k1, face.k2), jump, mean, w1


def element_contributions(k: int, bases, partition: Partition, veff: np.ndarray, system: System,
                          owned_projectors) -> list:
    """All stiffness contributions computed by the owner of element ``k``.

    Returns a list of ``(kind, row_element, col_element, block)``.
    """
    out = []
    b = bases[k]
    lgl = b.lgl
    J = b.count
    w = lgl.weights.ravel()
    phi = b.values.reshape(J, -1)
    grad = b.gradients.reshape(3, J, -1)
    targets = [lgl.axis_nodes(a) for a in range(3)]
    v = grids.fourier_interpolate(veff, system.grid, targets).ravel()

    kin = 0.5 * sum((g * w) @ g.T for g in grad)
    pot = (phi * (w * v)) @ phi.T
    out.append(("kinetic", k, k, kin))
    out.append(("potential", k, k, pot))

    for face in partition.faces:
        if face.k1 != k:
            continue
        elems, jump, mean, fw = face_operators(face, bases)
        jm = jump.reshape(len(jump), -1)
        mm = mean.reshape(len(mean), -1)
        fw = fw.ravel()
        surf = -0.5 * ((jm * fw) @ mm.T + (mm * fw) @ jm.T)
        pen = (jm * fw) @ jm.T
        rows = np.cumsum([0] + [bases[e].count for e in elems])
        for i, ei in enumerate(elems):
            for j, ej in enumerate(elems):
                si, sj = slice(rows[i], rows[i + 1]), slice(rows[j], rows[j + 1])
                out.append(("surface", ei, ej, surf[si, sj]))
                out.append(("penalty", ei, ej, pen[si, sj]))

    for p in owned_projectors:
        elems = projector_overlaps(partition, p.center, p.cutoff)
        ov = []
        for e in elems:
            be = bases[e]
            axes = [be.lgl.axis_nodes(a) for a in range(3)]
            bv = projector_fields(p, system.domain, axes).ravel()
            ov.append(be.values.reshape(be.count, -1) @ (be.lgl.weights.ravel() * bv))
        for i, ei in enumerate(elems):
            for j, ej in enumerate(elems):
                out.append(("nonlocal", ei, ej, p.weight * np.outer(ov[i], ov[j])))
    return out


def assemble_stiffness(bases, partition: Partition, veff: np.ndarray, system: System, alpha: float,
                       h: float = None, plan: WorkPlan = None, workers: int = 1) -> DGSystem:
    """Assemble the DG stiffness matrix element by element.

    Parameters
    ----------
    bases : list of LocalBasisSet, one per element
    veff : ndarray
        Effective potential on the global uniform grid; interpolated to each
        element's LGL grid by trigonometric interpolation.
    alpha : float
        Penalty parameter, ``> 0``.
    h : float, optional
        Mesh size; defaults to the smallest element edge.
    """
    h = partition.h if h is None else float(h)
    if alpha <= 0 or h <= 0:
        raise ValueError(f"penalty alpha and mesh size h must be positive (alpha={alpha}, h={h})")
    if plan is None:
        plan = build_workplan(partition, workers=workers)

    owners = {k: [] for k in range(len(partition))}
    for p in system.projectors:
        owners[partition.element_of(p.center)].append(p)

    counts = tuple(b.count for b in bases)
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(int)
    dim = int(sum(counts))

    results = parallel_map(plan, lambda k: element_contributions(
        k, bases, partition, veff, system, owners[k]))

    parts = {kind: np.zeros((dim, dim)) for kind in ("kinetic", "potential", "surface", "penalty", "nonlocal")}
    for contribs in results:
        for kind, ei, ej, blk in contribs:
            si = slice(offsets[ei], offsets[ei] + counts[ei])
            sj = slice(offsets[ej], offsets[ej] + counts[ej])
            parts[kind][si, sj] += blk
    base = parts["kinetic"] + parts["potential"] + parts["surface"] + parts["nonlocal"]
    return DGSystem(base, parts["penalty"], offsets, counts, float(alpha), h, parts)


def solve_dg(system: DGSystem, n_states: int, max_dim: int = 20000) -> DGEigenSolution:
    """Lowest ``n_states`` eigenpairs of the dense symmetric stiffness matrix."""
    dim = system.dim
    if dim > max_dim:
        raise ValueError(f"DG matrix dimension {dim} exceeds the cap {max_dim}; use fewer basis functions")
    if not 1 <= n_states <= dim:
        raise ValueError(f"requested {n_states} states from a {dim}-dimensional DG matrix")
    A = system.A
    A = 0.5 * (A + A.T)
    lam, C = scipy.linalg.eigh(A, subset_by_index=[0, n_states - 1])
    res = np.linalg.norm(A @ C - C * lam, axis=0)
    return DGEigenSolution(lam, C.T.copy(), res)


def reconstruct_density(sol: DGEigenSolution, bases, occupations, grid: grids.UniformGrid,
                        n_electrons: float = None):
    """Density from DG coefficients, moved to the uniform grid.

    Returns ``(rho, raw_integral)`` where ``rho`` is rescaled to integrate to
    ``n_electrons`` (if given) and ``raw_integral`` is the quadrature before
    rescaling.
    """
    f = np.asarray(occupations, float)
    offsets = np.concatenate([[0], np.cumsum([b.count for b in bases])[:-1]])
    fields, lgls = [], []
    for k, b in enumerate(bases):
        c = sol.coefficients[: len(f), offsets[k]: offsets[k] + b.count]
        psi = np.tensordot(c, b.values, axes=1)
        fields.append(np.einsum("i,ixyz->xyz", f, psi ** 2))
        lgls.append(b.lgl)
    rho = grids.lgl_to_uniform(fields, lgls, grid)
    raw = float(rho.sum() * grid.dv)
    if n_electrons is not None and raw > 0:
        rho = rho * (n_electrons / raw)
    return rho, raw


# binary dump: little-endian
#   8s   magic  b"DGKSMAT1"
#   q    dim
#   d    alpha
#   d    h
#   q    number of elements M
#   M*q  basis count per element
#   dim*dim*d  A, row-major
MAGIC = b"DGKSMAT1"


def dump_matrix(path, system: DGSystem):
    M = len(system.counts)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<8sqddq", MAGIC, system.dim, system.alpha, system.h, M))
        fh.write(struct.pack(f"<{M}q", *system.counts))
        fh.write(np.ascontiguousarray(system.A, dtype="<f8").tobytes())


def load_matrix(path):
    """Read a dump; returns ``(A, counts, alpha, h)``."""
    with open(path, "rb") as fh:
        magic, dim, alpha, h, M = struct.unpack("<8sqddq", fh.read(40))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a DG matrix dump")
        counts = struct.unpack(f"<{M}q", fh.read(8 * M))
        A = np.frombuffer(fh.read(8 * dim * dim), dtype="<f8").reshape(dim, dim)
    return A.copy(), counts, alpha, h
