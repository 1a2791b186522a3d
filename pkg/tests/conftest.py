import numpy as np
import pytest

from dgks.geometry import Domain, build_partition
from dgks.grids import global_grid
from dgks.hamiltonian import AtomSpec, ProjectorSpec, System

A_CELL = 7.994


def chain_positions(n_cells=4, amplitude=0.2, seed=1, a=A_CELL):
    from dgks.config import generate_supercell
    return generate_supercell([a, a, a], [[0.25, 0.25, 0.25], [0.75, 0.75, 0.75]], (1, 1, n_cells),
                              amplitude, seed)


def small_system(hartree=True, xc=True, n=12, projectors=True):
    """Two atoms in a cubic box on a coarse grid; cheap enough for unit tests."""
    L = 8.0
    dom = Domain((L, L, L))
    grid = global_grid(dom.extents, (n, n, n))
    proj = (ProjectorSpec(1, 0.5, 1.0, "s", 3.0),) if projectors else ()
    atoms = [AtomSpec([2.0, 2.1, 1.9], 2.0, 1.2, proj), AtomSpec([6.1, 5.9, 6.0], 2.0, 1.2, proj)]
    return System(dom, grid, atoms, 2.0, hartree=hartree, xc=xc)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def chain_partition():
    dom = Domain((A_CELL, A_CELL, 4 * A_CELL))
    return build_partition(dom, (1, 1, 4), chain_positions())


_ACCEPTANCE = {}


@pytest.fixture
def record_criterion():
    """Store a one-line verdict for the acceptance summary."""
    def record(number, passed, detail):
        _ACCEPTANCE[number] = (bool(passed), detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
