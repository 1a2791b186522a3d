import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dgks.geometry import Domain, build_partition, extended_element, face_lookup, face_topology


def test_two_by_one_by_one_faces():
    part = build_partition(Domain((2.0, 1.0, 1.0)), (2, 1, 1))
    assert len(part) == 2
    # two faces between the elements along x, self-paired faces along y and z
    x_faces = [f for f in part.faces if f.axis == 0]
    assert sorted((f.k1, f.k2) for f in x_faces) == [(0, 1), (1, 0)]
    assert all(f.self_paired for f in part.faces if f.axis != 0)
    assert len(part.faces) == 3 * len(part)


def test_single_element_all_faces_self_paired():
    part = build_partition(Domain((3.0, 3.0, 3.0)), (1, 1, 1))
    assert len(part.faces) == 3
    assert all(f.self_paired for f in part.faces)


def test_face_normals_opposite():
    part = build_partition(Domain((1.0, 2.0, 3.0)), (2, 2, 2))
    for f in part.faces:
        np.testing.assert_array_equal(f.normal1, -f.normal2)
        assert f.normal1[f.axis] == 1.0


def test_face_lookup_covers_every_side():
    part = build_partition(Domain((4.0, 4.0, 4.0)), (2, 1, 3))
    table = face_lookup(part)
    assert len(table) == 6 * len(part)
    for k in range(len(part)):
        for axis in range(3):
            assert table[(k, axis, +1)].k2 == part.neighbor(k, axis, +1)
            assert table[(k, axis, -1)].k1 == part.neighbor(k, axis, -1)


def test_atom_on_face_goes_to_upper_element():
    dom = Domain((2.0, 1.0, 1.0))
    part = build_partition(dom, (2, 1, 1), [[1.0, 0.5, 0.5], [2.0, 0.5, 0.5], [-1e-300, 0.2, 0.2]])
    assert part.elements[1].atom_ids == (0,)
    assert part.elements[0].atom_ids == (1, 2)


def test_wrap_of_negative_coordinate_stays_inside():
    dom = Domain((2.0, 2.0, 2.0))
    x = dom.wrap([-1e-17, 2.0, 5.0])
    assert np.all(x >= 0) and np.all(x < 2.0)


def test_buffer_cap():
    part = build_partition(Domain((8.0, 8.0, 32.0)), (1, 1, 4))
    q = extended_element(part, 0, [0.0, 0.0, 12.0])
    np.testing.assert_allclose(q.size, [8.0, 8.0, 32.0])
    with pytest.raises(ValueError, match="along z"):
        extended_element(part, 0, [0.0, 0.0, 12.5])
    with pytest.raises(ValueError, match="along x"):
        extended_element(part, 0, [0.1, 0.0, 0.0])


def test_atoms_inside_extended_element_wraps():
    dom = Domain((8.0, 8.0, 32.0))
    part = build_partition(dom, (1, 1, 4))
    q = extended_element(part, 0, [0.0, 0.0, 4.0])       # z in [-4, 12)
    inside = q.atoms_inside([[1, 1, 30.0], [1, 1, 27.0], [1, 1, 11.9], [1, 1, 12.0]])
    assert inside == [0, 2]


@settings(max_examples=50, deadline=None)
@given(counts=st.tuples(*(st.integers(1, 4),) * 3),
       pts=st.lists(st.tuples(*(st.floats(-50, 50, allow_nan=False),) * 3), min_size=1, max_size=10))
def test_every_atom_in_exactly_one_element(counts, pts):
    dom = Domain((3.0, 4.0, 5.0))
    part = build_partition(dom, counts, pts)
    owned = sorted(a for el in part.elements for a in el.atom_ids)
    assert owned == list(range(len(pts)))
    for el in part.elements:
        for a in el.atom_ids:
            x = dom.wrap(pts[a])
            assert np.all(x >= el.lower - 1e-12) and np.all(x < el.upper + 1e-12)


@settings(max_examples=30, deadline=None)
@given(counts=st.tuples(*(st.integers(1, 5),) * 3))
def test_each_face_shared_by_two_sides(counts):
    part = build_partition(Domain((1.0, 1.0, 1.0)), counts)
    faces = face_topology(part)
    sides = [(f.k1, f.axis, +1) for f in faces] + [(f.k2, f.axis, -1) for f in faces]
    assert len(set(sides)) == 6 * len(part)
