"""
Element-parallel execution: work plans, neighbour dependencies and
deterministic fork-join reductions.

Tasks receive only immutable inputs captured before dispatch, run on a
thread pool (numpy releases the GIL in the heavy kernels) and their results
are combined in element order, so the answer does not depend on the number
of workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geometry import Partition

WORKERS_ENV = "DGKS_WORKERS"


class ElementTaskError(RuntimeError):
    def __init__(self, element: int, cause: BaseException):
        super().__init__(f"task failed on element {element}: {cause!r}")
        self.element = element


def resolve_workers(workers=None) -> int:
    """Explicit value, else the ``DGKS_WORKERS`` environment variable, else 1."""
    if workers is None:
        workers = os.environ.get(WORKERS_ENV, 1)
    workers = int(workers)
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    return workers


@dataclass(frozen=True)
class WorkPlan:
    assignment: tuple           # worker id per element
    dependencies: dict          # element -> sorted tuple of elements it reads
    face_neighbors: dict
    projector_elements: dict    # element -> elements overlapping projectors it owns
    workers: int

    def elements_of(self, worker: int) -> list:
        return [k for k, w in enumerate(self.assignment) if w == worker]


def _box_distance(center, lower, size, L):
    """Periodic distance from a point to an axis-aligned box."""
    t = np.mod(np.asarray(center) - lower, L)
    d = np.where(t <= size, 0.0, np.minimum(t - size, L - t))
    return float(np.sqrt(np.sum(d ** 2)))


def projector_overlaps(partition: Partition, center, cutoff: float) -> list:
    """Elements whose box intersects the open ball of radius ``cutoff``."""
    L = np.asarray(partition.domain.extents)
    return [el.index for el in partition.elements
            if _box_distance(center, el.lower, el.size, L) < cutoff]


def build_workplan(partition: Partition, atoms=(), cutoffs=(), workers: int = 1) -> WorkPlan:
    """Contiguous block assignment of elements to workers plus dependency lists.

    Parameters
    ----------
    atoms : array_like, shape (n_atoms, 3)
    cutoffs : sequence of float
        Largest projector cutoff per atom (0 for atoms without projectors).
    """
    workers = resolve_workers(workers)
    M = len(partition)
    per = -(-M // workers)
    assignment = tuple(min(k // per, workers - 1) for k in range(M))

    faces = {k: set() for k in range(M)}
    for f in partition.faces:
        faces[f.k1].add(f.k2)
        faces[f.k2].add(f.k1)

    owned = {k: set() for k in range(M)}
    atoms = np.asarray(atoms, float).reshape(-1, 3)
    for pos, rc in zip(atoms, cutoffs):
        if rc <= 0:
            continue
        owner = partition.element_of(pos)
        owned[owner].update(projector_overlaps(partition, pos, rc))

    deps = {k: tuple(sorted(faces[k] | owned[k])) for k in range(M)}
    return WorkPlan(assignment, deps, {k: tuple(sorted(v)) for k, v in faces.items()},
                    {k: tuple(sorted(v)) for k, v in owned.items()}, workers)


def pairwise_sum(items):
    """Fixed-order pairwise summation of a list of arrays or scalars."""
    items = list(items)
    if not items:
        return 0.0
    while len(items) > 1:
        nxt = [items[i] + items[i + 1] for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def parallel_map(plan: WorkPlan, task, elements=None) -> list:
    """Run ``task(k)`` for every element; results returned in element order.

    Each worker processes its own contiguous block of elements serially.
    """
    n = len(plan.assignment)
    elements = range(n) if elements is None else elements
    elements = list(elements)
    results = {}

    def run_block(worker):
        out = {}
        for k in elements:
            if plan.assignment[k] != worker:
                continue
            try:
                out[k] = task(k)
            except ElementTaskError:
                raise
            except Exception as exc:  # noqa: BLE001
                raise ElementTaskError(k, exc) from exc
        return out

    if plan.workers == 1:
        results.update(run_block(0))
    else:
        with ThreadPoolExecutor(max_workers=plan.workers) as pool:
            for part in pool.map(run_block, range(plan.workers)):
                results.update(part)
    return [results[k] for k in elements]


def parallel_map_reduce(plan: WorkPlan, task, reduction=pairwise_sum):
    """Map over elements, then reduce the ordered results.

    ``reduction`` receives the list of per-element results in element order.
    """
    return reduction(parallel_map(plan, task))
