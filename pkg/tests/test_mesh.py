import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wassersolve.mesh import (
    AdmissibilityViolation,
    Mesh,
    MeshError,
    NestedMeshPair,
    NotAcute,
    ParseError,
    build_pair,
    center_of_mass_tensors,
    check_admissible,
    circumcenter,
    cocircularity_defect,
    format_mesh,
    generate_acute_triangulation,
    generate_cartesian,
    load_mesh,
    load_pair,
    parse_mesh,
    save_mesh,
    save_pair,
    subdivide_to_nested,
    triangle_angles,
    validate,
)

# two isoceles triangles with base 1 and height 1 tiling a parallelogram
STRIP_TEXT = """tpfa-mesh 1
vertices 4
0 0
1 0
0.5 1
1.5 1
cells 2
0 1 2
1 3 2
"""


def max_angle(mesh):
    return max(triangle_angles(mesh.polygon(k)).max() for k in range(mesh.n_cells))


class TestCartesian:
    def test_single_cell(self):
        m = generate_cartesian(1, 1)
        assert m.n_cells == 1 and m.n_faces == 0
        assert m.cell_measures[0] == pytest.approx(1.0)

    def test_two_cells_face_geometry(self, cart2x1):
        assert cart2x1.n_faces == 1
        assert cart2x1.face_measures[0] == pytest.approx(1.0)
        assert cart2x1.face_d[0] == pytest.approx(0.5)
        assert cart2x1.face_dK[0] == pytest.approx(0.25)
        assert cart2x1.face_dL[0] == pytest.approx(0.25)

    def test_grid_counts(self, cart4):
        # 2 * 4 * 3 interior edges of a 4x4 grid
        assert cart4.n_cells == 16 and cart4.n_faces == 24
        assert cart4.cell_measures.sum() == pytest.approx(1.0, abs=1e-14)

    def test_center_of_mass_exact(self):
        q = validate(generate_cartesian(2, 2))
        assert q.max_center_of_mass_defect <= 1e-12
        assert q.eta_h <= 1e-12

    def test_faces_oriented_low_to_high(self, cart4):
        K, L = cart4.face_cells.T
        assert (K < L).all()
        d = cart4.cell_centers[L] - cart4.cell_centers[K]
        assert (np.einsum("ij,ij->i", d, cart4.face_normals) > 0).all()


class TestAcute:
    def test_isoceles_strip_angles(self):
        m = parse_mesh(STRIP_TEXT)
        expected = np.sort(np.degrees([2 * np.arctan(0.5), np.arctan(2.0), np.arctan(2.0)]))
        for k in range(2):
            got = np.sort(np.degrees(triangle_angles(m.polygon(k))))
            assert np.allclose(got, expected, atol=1e-12)
        assert np.allclose(expected, [53.130102, 63.434949, 63.434949], atol=1e-6)

    @pytest.mark.parametrize("n", [4, 6, 8, 12])
    def test_all_acute_and_partition(self, n):
        m = generate_acute_triangulation(n)
        assert np.degrees(max_angle(m)) < 90.0
        assert m.cell_measures.sum() == pytest.approx(1.0, abs=1e-12)
        check_admissible(m)

    def test_centers_strictly_inside(self, acute4):
        for k in range(acute4.n_cells):
            poly = acute4.polygon(k)
            c = acute4.cell_centers[k]
            for i in range(3):
                a, b = poly[i], poly[(i + 1) % 3]
                assert (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]) > 0

    def test_interior_is_isoceles_lattice(self):
        # away from the sides every cell is a base = height = 1/n isoceles triangle
        n = 12
        m = generate_acute_triangulation(n)
        angles = np.array([np.sort(np.degrees(triangle_angles(m.polygon(k)))) for k in range(m.n_cells)])
        lattice = np.isclose(angles[:, 0], 53.130102, atol=1e-6)
        assert lattice.sum() > 0.6 * m.n_cells
        assert np.allclose(m.cell_measures[lattice], 0.5 / n**2)
        # and faces between lattice cells are symmetric: d_K = d_L
        both = lattice[m.face_cells[:, 0]] & lattice[m.face_cells[:, 1]]
        assert np.allclose(m.face_dK[both], m.face_dL[both], rtol=0, atol=1e-14)

    @pytest.mark.parametrize("n", [0, 1, 2, 3, 5])
    def test_rejects_bad_row_counts(self, n):
        with pytest.raises(ValueError):
            generate_acute_triangulation(n)

    def test_center_of_mass_defect(self, acute4):
        q = validate(acute4)
        assert q.max_center_of_mass_defect <= 1e-12
        assert q.eta_h <= 1e-12
        assert q.zeta >= 1.0

    def test_deterministic(self):
        assert generate_acute_triangulation(6) == generate_acute_triangulation(6)
        assert generate_acute_triangulation(6).digest() == generate_acute_triangulation(6).digest()


class TestSubdivision:
    def test_strip_subdivision(self):
        coarse = parse_mesh(STRIP_TEXT)
        pair = subdivide_to_nested(coarse)
        assert pair.fine.n_cells == 6
        assert all(len(c) == 4 for c in pair.fine.cells)
        # fine centers are midpoints of (vertex, coarse circumcenter)
        for k, cell in enumerate(pair.fine.cells):
            K = pair.containment[k]
            O = coarse.cell_centers[K]
            mids = [(pair.fine.vertices[v] + O) / 2 for v in cell]
            assert min(np.linalg.norm(m - pair.fine.cell_centers[k]) for m in mids) < 1e-14
        assert cocircularity_defect(pair.fine) <= 1e-10

    def test_nested_pair_geometry(self, nested4):
        assert nested4.fine.n_cells == 3 * nested4.coarse.n_cells
        assert not nested4.identical
        sums = np.bincount(nested4.containment, weights=nested4.fine.cell_measures)
        assert np.allclose(sums, nested4.coarse.cell_measures, rtol=1e-12)
        assert cocircularity_defect(nested4.fine) <= 1e-10
        assert validate(nested4.fine).max_center_of_mass_defect <= 1e-12

    def test_fine_faces_inside_triangles_orthogonal(self, nested4):
        fine = nested4.fine
        K, L = fine.face_cells.T
        same = nested4.containment[K] == nested4.containment[L]
        d = fine.cell_centers[L[same]] - fine.cell_centers[K[same]]
        t = np.stack([-fine.face_normals[same, 1], fine.face_normals[same, 0]], axis=1)
        assert np.abs(np.einsum("ij,ij->i", d, t)).max() <= 1e-12

    def test_rejects_obtuse(self):
        m = Mesh([[0, 0], [1, 0], [0.5, 0.2]], [(0, 1, 2)])
        with pytest.raises(NotAcute):
            subdivide_to_nested(m)

    def test_identical_pair(self, acute4):
        pair = NestedMeshPair.same(acute4)
        assert pair.identical
        assert (pair.containment == np.arange(acute4.n_cells)).all()

    def test_bad_containment(self, acute4):
        with pytest.raises(MeshError):
            NestedMeshPair(acute4, acute4, np.zeros(acute4.n_cells, dtype=int))

    @pytest.mark.parametrize("enriched", [False, True])
    def test_build_pair_levels(self, enriched):
        sizes = []
        for hbar in (0.25, 0.125):
            pair = build_pair(hbar, enriched)
            assert pair.coarse.h <= hbar
            assert pair.identical != enriched
            sizes.append(pair.coarse.n_cells)
        assert 3.3 < sizes[1] / sizes[0] < 4.0


class TestValidation:
    def test_perturbed_center_rejected(self, cart4):
        centers = cart4.cell_centers.copy()
        centers[5] += [0.01, 0.02]
        with pytest.raises(AdmissibilityViolation) as info:
            validate(Mesh(cart4.vertices, cart4.cells, centers))
        assert len(info.value.faces) > 0

    def test_validate_is_pure(self, acute4):
        assert validate(acute4) == validate(acute4)

    def test_tensor_shape(self, acute4):
        T = center_of_mass_tensors(acute4)
        assert T.shape == (acute4.n_cells, 2, 2)
        assert np.allclose(T, np.eye(2), atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-1, 1), min_size=6, max_size=6))
    def test_circumcenter_equidistant(self, xs):
        a, b, c = np.array(xs).reshape(3, 2)
        area = abs((b - a)[0] * (c - a)[1] - (b - a)[1] * (c - a)[0])
        if area < 1e-3:
            return
        o = circumcenter(a, b, c)
        r = [np.linalg.norm(o - p) for p in (a, b, c)]
        assert max(r) - min(r) <= 1e-9 * max(r)


class TestIO:
    def test_round_trip(self, tmp_path):
        m = generate_cartesian(2, 1)
        save_mesh(m, tmp_path / "m.txt")
        assert load_mesh(tmp_path / "m.txt") == m

    def test_round_trip_acute_bit_exact(self, tmp_path, acute4):
        save_mesh(acute4, tmp_path / "a.txt")
        back = load_mesh(tmp_path / "a.txt")
        assert np.array_equal(back.vertices, acute4.vertices)
        assert np.array_equal(back.cell_centers, acute4.cell_centers)
        assert np.array_equal(back.face_d, acute4.face_d)

    def test_strip_fixture(self):
        m = parse_mesh(STRIP_TEXT)
        assert m.n_cells == 2 and m.n_faces == 1

    def test_clockwise_cell(self):
        text = STRIP_TEXT.replace("0 1 2\n", "0 2 1\n")
        with pytest.raises(ParseError) as info:
            parse_mesh(text)
        assert info.value.line == 8

    @pytest.mark.parametrize("text", [
        "",
        "tpfa-mesh 2\n",
        "tpfa-mesh 1\nvertices 2\n0 0\n",
        "tpfa-mesh 1\nvertices 3\n0 0\n1 0\nx 1\ncells 1\n0 1 2\n",
        "tpfa-mesh 1\nvertices 3\n0 0\n1 0\n0 1\ncells 1\n0 1 7\n",
        STRIP_TEXT + "junk 1\n",
    ])
    def test_malformed(self, text):
        with pytest.raises(ParseError):
            parse_mesh(text)

    def test_centers_section_used(self, cart4):
        text = format_mesh(cart4)
        assert "centers 16" in text
        assert parse_mesh(text) == cart4

    def test_pair_round_trip(self, tmp_path, nested4):
        paths = save_pair(nested4, tmp_path / "m.txt")
        assert [p.name for p in paths] == ["m.coarse.txt", "m.fine.txt", "m.map.txt"]
        back = load_pair(tmp_path / "m")
        assert back.coarse == nested4.coarse and back.fine == nested4.fine
        assert np.array_equal(back.containment, nested4.containment)
