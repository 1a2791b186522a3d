"""
Periodic domain, rectangular element partition, extended elements and faces.

Elements are congruent axis-aligned boxes indexed in C order over the
partition counts ``(m, n, p)``.  Every face is interior because the domain
is periodic; a face may connect an element to itself when the partition has
a single element along that axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Labels for the six faces of a box, as (axis, side) with side -1 = lower.
SIDES = [(a, s) for a in range(3) for s in (-1, +1)]


@dataclass(frozen=True)
class Domain:
    """Periodic orthorhombic box ``[0, L_x) x [0, L_y) x [0, L_z)``."""

    extents: tuple

    def __post_init__(self):
        ext = tuple(float(e) for e in self.extents)
        if len(ext) != 3 or min(ext) <= 0:
            raise ValueError(f"domain extents must be 3 positive lengths, got {self.extents}")
        object.__setattr__(self, "extents", ext)

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    def wrap(self, positions):
        """Reduce coordinates into ``[0, extent)`` along each axis."""
        L = np.asarray(self.extents)
        x = np.mod(np.asarray(positions, dtype=float), L)
        # np.mod can return L for tiny negative inputs
        return np.where(x >= L, x - L, x)

    def minimal_image(self, delta):
        L = np.asarray(self.extents)
        d = np.asarray(delta, dtype=float)
        return d - L * np.round(d / L)


@dataclass(frozen=True)
class Element:
    index: int
    ijk: tuple
    lower: np.ndarray
    upper: np.ndarray
    atom_ids: tuple = ()

    @property
    def size(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def volume(self) -> float:
        return float(np.prod(self.size))


@dataclass(frozen=True)
class Face:
    """Face shared by ``k1`` (on its upper side along ``axis``) and ``k2``
    (on its lower side).  ``normal1`` points out of ``k1``."""

    k1: int
    k2: int
    axis: int

    @property
    def normal1(self) -> np.ndarray:
        n = np.zeros(3)
        n[self.axis] = 1.0
        return n

    @property
    def normal2(self) -> np.ndarray:
        return -self.normal1

    @property
    def self_paired(self) -> bool:
        return self.k1 == self.k2


@dataclass(frozen=True)
class Partition:
    domain: Domain
    counts: tuple
    elements: list
    faces: list = field(default_factory=list)

    @property
    def element_size(self) -> np.ndarray:
        return np.asarray(self.domain.extents) / np.asarray(self.counts)

    @property
    def h(self) -> float:
        """Mesh size used by the penalty term: the smallest element edge."""
        return float(self.element_size.min())

    def __len__(self):
        return len(self.elements)

    def index(self, ijk) -> int:
        m, n, p = self.counts
        i, j, k = (int(c) % cnt for c, cnt in zip(ijk, self.counts))
        return (i * n + j) * p + k

    def neighbor(self, k: int, axis: int, side: int) -> int:
        """Element across face ``(axis, side)`` of element ``k``."""
        ijk = list(self.elements[k].ijk)
        ijk[axis] += side
        return self.index(ijk)

    def element_of(self, position) -> int:
        """Element containing a position, using half-open boxes [lo, hi)."""
        x = self.domain.wrap(position)
        ijk = np.floor(x / self.element_size).astype(int)
        ijk = np.minimum(ijk, np.asarray(self.counts) - 1)
        return self.index(ijk)


def build_partition(domain: Domain, counts, atoms=None) -> Partition:
    """Split ``domain`` into ``m x n x p`` congruent boxes and assign atoms.

    Parameters
    ----------
    domain : Domain
    counts : sequence of 3 ints
    atoms : array_like, shape (n_atoms, 3), optional
        Cartesian atom positions; wrapped before assignment.
    """
    counts = tuple(int(c) for c in counts)
    if len(counts) != 3 or min(counts) < 1:
        raise ValueError(f"partition counts must be 3 integers >= 1, got {counts}")
    size = np.asarray(domain.extents) / np.asarray(counts)
    atoms = np.zeros((0, 3)) if atoms is None else np.atleast_2d(np.asarray(atoms, float))

    owner = []
    if len(atoms):
        x = domain.wrap(atoms)
        ijk = np.minimum(np.floor(x / size).astype(int), np.asarray(counts) - 1)
        owner = [(i * counts[1] + j) * counts[2] + k for i, j, k in ijk]

    elements = []
    for i in range(counts[0]):
        for j in range(counts[1]):
            for k in range(counts[2]):
                idx = (i * counts[1] + j) * counts[2] + k
                lo = size * np.array([i, j, k])
                ids = tuple(a for a, o in enumerate(owner) if o == idx)
                elements.append(Element(idx, (i, j, k), lo, lo + size, ids))

    part = Partition(domain, counts, elements)
    part.faces.extend(face_topology(part))
    return part


def face_topology(partition: Partition) -> list:
    """Every face once, as the upper face of ``k1`` along each axis."""
    faces = []
    for el in partition.elements:
        for axis in range(3):
            faces.append(Face(el.index, partition.neighbor(el.index, axis, +1), axis))
    return faces


def face_lookup(partition: Partition) -> dict:
    """Map ``(element, axis, side)`` to the face touching that side."""
    table = {}
    for f in partition.faces:
        table[(f.k1, f.axis, +1)] = f
        table[(f.k2, f.axis, -1)] = f
    return table


@dataclass(frozen=True)
class ExtendedElement:
    """Element ``k`` enlarged symmetrically by ``buffer`` on each axis.

    The box may stick out of the domain; points are wrapped periodically.
    """

    element_index: int
    buffer: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    domain: Domain

    @property
    def size(self) -> np.ndarray:
        return self.upper - self.lower

    def atoms_inside(self, atoms) -> list:
        L = np.asarray(self.domain.extents)
        out = []
        for a, pos in enumerate(np.atleast_2d(atoms)):
            rel = np.mod(np.asarray(pos, float) - self.lower, L)
            full = np.isclose(self.size, L)
            if np.all((rel < self.size) | full):
                out.append(a)
        return out


def extended_element(partition: Partition, k: int, buffer) -> ExtendedElement:
    """Extended element ``Q_k`` around element ``k``.

    Raises
    ------
    ValueError
        If the buffer on any axis exceeds ``(domain - element) / 2``.
    """
    buf = np.broadcast_to(np.asarray(buffer, float), (3,)).copy()
    L = np.asarray(partition.domain.extents)
    cap = (L - partition.element_size) / 2
    for axis, name in enumerate("xyz"):
        if buf[axis] < 0:
            raise ValueError(f"buffer along {name} must be nonnegative, got {buf[axis]}")
        if buf[axis] > cap[axis] * (1 + 1e-12) + 1e-12:
            raise ValueError(
                f"buffer along {name} is {buf[axis]:g} au but at most {cap[axis]:g} au "
                "fits without self-overlap")
    el = partition.elements[k]
    return ExtendedElement(k, buf, el.lower - buf, el.upper + buf, partition.domain)
