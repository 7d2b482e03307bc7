import numpy as np
import pytest
from conftest import fd_error, rel_err
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wassersolve import discrete_ops as ops
from wassersolve.discrete_ops import Kind, MeshMismatch, NegativeDensity, Operators, ZeroDensity
from wassersolve.mesh import NestedMeshPair, generate_acute_triangulation, generate_cartesian

ACUTE = generate_acute_triangulation(4)
positive = arrays(float, ACUTE.n_cells, elements=st.floats(0.05, 5.0))


class TestInnerProducts:
    def test_unit(self, cart4):
        one = np.ones(cart4.n_cells)
        assert ops.inner_cell(cart4, one, one) == pytest.approx(1.0)
        assert ops.inner_cell(cart4, 0 * one, one) == 0.0

    def test_two_cells(self, cart2x1):
        assert ops.inner_cell(cart2x1, [1, 2], [3, 4]) == pytest.approx(5.5)
        assert ops.inner_diamond(cart2x1, [1.0], [1.0]) == pytest.approx(0.5)
        assert ops.inner_flux(cart2x1, [1.0], [1.0]) == pytest.approx(0.5)
        assert ops.inner_flux(cart2x1, [-2.0], [-3.0]) == ops.inner_flux(cart2x1, [2.0], [3.0])

    def test_bilinear(self, acute4, rng):
        u, v = rng.normal(size=(2, acute4.n_faces))
        assert ops.inner_diamond(acute4, 2 * u, v) == pytest.approx(2 * ops.inner_diamond(acute4, u, v))
        assert ops.inner_diamond(acute4, 0 * u, v) == 0.0

    def test_mismatch(self, cart4):
        with pytest.raises(MeshMismatch):
            ops.inner_cell(cart4, np.ones(3), np.ones(16))
        with pytest.raises(MeshMismatch):
            ops.gradient(cart4, np.ones(15))


class TestGradDiv:
    def test_two_cells(self, cart2x1):
        assert ops.gradient(cart2x1, [0.0, 1.0]) == pytest.approx([2.0])
        assert ops.divergence(cart2x1, [3.0]) == pytest.approx([6.0, -6.0])

    def test_constants(self, acute4):
        assert np.allclose(ops.gradient(acute4, np.full(acute4.n_cells, 3.0)), 0)
        assert np.allclose(ops.divergence(acute4, np.zeros(acute4.n_faces)), 0)

    @pytest.mark.parametrize("name", ["cartesian", "nested"])
    def test_duality(self, pairs, name, rng):
        mesh = pairs[name].fine
        for _ in range(100):
            a, F = rng.normal(size=mesh.n_cells), rng.normal(size=mesh.n_faces)
            lhs = ops.inner_flux(mesh, ops.gradient(mesh, a), F)
            rhs = -ops.inner_cell(mesh, a, ops.divergence(mesh, F))
            assert abs(lhs - rhs) <= 1e-13 * max(abs(lhs), 1.0)

    def test_conservative(self, acute4, rng):
        F = rng.normal(size=acute4.n_faces)
        total = ops.inner_cell(acute4, ops.divergence(acute4, F), np.ones(acute4.n_cells))
        assert abs(total) <= 1e-14 * np.abs(F).sum()

    def test_matrices(self, acute4, rng):
        a, F = rng.normal(size=acute4.n_cells), rng.normal(size=acute4.n_faces)
        assert rel_err(ops.gradient_matrix(acute4) @ a, ops.gradient(acute4, a)) < 1e-14
        assert rel_err(ops.divergence_matrix(acute4) @ F, ops.divergence(acute4, F)) < 1e-13


class TestReconstruction:
    def test_constant(self, acute4):
        c = np.full(acute4.n_cells, 1.7)
        for kind in Kind:
            assert np.allclose(ops.reconstruct(acute4, c, kind), 1.7)

    def test_symmetric_face(self, cart2x1):
        assert ops.reconstruct(cart2x1, [1.0, 3.0], "linear") == pytest.approx([2.0])
        assert ops.reconstruct(cart2x1, [1.0, 3.0], "harmonic") == pytest.approx([1.5])

    def test_harmonic_zero(self, cart2x1):
        assert ops.reconstruct(cart2x1, [0.0, 3.0], "harmonic")[0] == 0.0
        with pytest.raises(NegativeDensity):
            ops.reconstruct(cart2x1, [-1.0, 3.0], "harmonic")

    def test_kind_parse(self):
        assert Kind.parse("HARMONIC") is Kind.HARMONIC
        with pytest.raises(ValueError):
            Kind.parse("geometric")

    @settings(max_examples=40, deadline=None)
    @given(positive, positive, st.floats(0.1, 10.0))
    def test_mean_properties(self, a, b, c):
        for kind in Kind:
            r = ops.reconstruct(ACUTE, a, kind)
            assert np.allclose(ops.reconstruct(ACUTE, c * a, kind), c * r, rtol=1e-13)
            mid = ops.reconstruct(ACUTE, 0.5 * (a + b), kind)
            assert (mid >= 0.5 * (r + ops.reconstruct(ACUTE, b, kind)) - 1e-12).all()
            assert (r > 0).all()
        assert (ops.reconstruct(ACUTE, a, "harmonic") <= ops.reconstruct(ACUTE, a, "linear") + 1e-13).all()

    def test_linear_adjoint_of_one(self, acute4):
        u = np.ones(acute4.n_faces)
        got = ops.reconstruct_diff_adjoint(acute4, np.ones(acute4.n_cells), u, "linear")
        want = np.zeros(acute4.n_cells)
        K, L = acute4.face_cells.T
        np.add.at(want, K, acute4.face_measures * acute4.face_dK)
        np.add.at(want, L, acute4.face_measures * acute4.face_dL)
        assert rel_err(got, want / acute4.cell_measures) < 1e-14

    def test_harmonic_adjoint_at_constant(self, acute4, rng):
        u = rng.normal(size=acute4.n_faces)
        c = np.full(acute4.n_cells, 2.0)
        assert rel_err(ops.reconstruct_diff_adjoint(acute4, c, u, "harmonic"),
                       ops.reconstruct_diff_adjoint(acute4, c, u, "linear")) < 1e-13

    @pytest.mark.parametrize("kind", list(Kind))
    @pytest.mark.parametrize("name", ["cartesian", "nested"])
    def test_adjoint_identity(self, pairs, name, kind, rng):
        mesh = pairs[name].fine
        for _ in range(100):
            a = rng.uniform(0.1, 2.0, mesh.n_cells)
            b, u = rng.normal(size=mesh.n_cells), rng.normal(size=mesh.n_faces)
            lhs = ops.inner_cell(mesh, ops.reconstruct_diff_adjoint(mesh, a, u, kind), b)
            rhs = ops.inner_diamond(mesh, u, ops.reconstruct_diff(mesh, a, b, kind))
            assert abs(lhs - rhs) <= 1e-13 * max(abs(lhs), 1.0)

    @pytest.mark.parametrize("kind", list(Kind))
    def test_diff_matches_fd(self, acute4, kind, rng):
        for _ in range(5):
            a = rng.uniform(0.2, 2.0, acute4.n_cells)
            b = rng.normal(size=acute4.n_cells)
            exact = ops.reconstruct_diff(acute4, a, b, kind)
            assert fd_error(lambda x: ops.reconstruct(acute4, x, kind), a, b, exact) <= 1e-6
            M = ops.reconstruct_diff_matrix(acute4, a, kind)
            assert rel_err(M @ b, exact) < 1e-14

    def test_second_diff_matches_fd(self, acute4, rng):
        for _ in range(5):
            a = rng.uniform(0.2, 2.0, acute4.n_cells)
            u, da = rng.normal(size=acute4.n_faces), rng.normal(size=acute4.n_cells)
            exact = ops.reconstruct_second_diff_action(acute4, a, u, da, "harmonic")
            err = fd_error(lambda x: ops.reconstruct_diff_adjoint(acute4, x, u, "harmonic"), a, da, exact)
            assert err <= 1e-6
            S = ops.second_diff_matrix(acute4, a, u, "harmonic")
            assert rel_err(S @ da / acute4.cell_measures, exact) < 1e-13
            assert abs(S - S.T).max() == 0

    def test_second_diff_trivial_cases(self, acute4, rng):
        a = rng.uniform(0.2, 2.0, acute4.n_cells)
        u = rng.normal(size=acute4.n_faces)
        assert not ops.reconstruct_second_diff_action(acute4, a, u, rng.normal(size=a.size), "linear").any()
        assert not ops.reconstruct_second_diff_action(acute4, a, u, np.zeros(a.size), "harmonic").any()

    def test_zero_density_guard(self, acute4):
        a = np.ones(acute4.n_cells)
        a[3] = 0.0
        with pytest.raises(ZeroDensity):
            ops.reconstruct_diff_adjoint(acute4, a, np.ones(acute4.n_faces), "harmonic")
        ops.reconstruct_diff_adjoint(acute4, a, np.ones(acute4.n_faces), "linear")


class TestInjection:
    def test_identity_pair(self, acute4, rng):
        pair = NestedMeshPair.same(acute4)
        a = rng.normal(size=acute4.n_cells)
        assert np.array_equal(ops.inject(pair, a), a)
        assert rel_err(ops.inject_adjoint(pair, a), a) < 1e-15

    def test_blocks(self, nested4, rng):
        a = rng.normal(size=nested4.coarse.n_cells)
        fine = ops.inject(nested4, a)
        assert np.array_equal(fine, a[nested4.containment])
        assert fine.min() == a.min() and fine.max() == a.max()
        mass_c = ops.inner_cell(nested4.coarse, a, np.ones(a.size))
        mass_f = ops.inner_cell(nested4.fine, fine, np.ones(fine.size))
        assert mass_f == pytest.approx(mass_c, rel=1e-13)
        assert rel_err(ops.inject_adjoint(nested4, fine), a) < 1e-14
        assert np.allclose(ops.inject_adjoint(nested4, np.full(fine.size, 4.0)), 4.0)

    def test_strip_injection(self):
        from test_mesh import STRIP_TEXT

        from wassersolve.mesh import parse_mesh, subdivide_to_nested

        pair = subdivide_to_nested(parse_mesh(STRIP_TEXT))
        fine = ops.inject(pair, [1.0, 2.0])
        assert sorted(fine.tolist()) == [1, 1, 1, 2, 2, 2]

    @pytest.mark.parametrize("name", ["cartesian", "nested"])
    def test_adjoint(self, pairs, name, rng):
        pair = pairs[name]
        for _ in range(100):
            a, b = rng.normal(size=pair.coarse.n_cells), rng.normal(size=pair.fine.n_cells)
            lhs = ops.inner_cell(pair.coarse, ops.inject_adjoint(pair, b), a)
            rhs = ops.inner_cell(pair.fine, b, ops.inject(pair, a))
            assert abs(lhs - rhs) <= 1e-13 * max(abs(lhs), 1.0)

    @pytest.mark.parametrize("kind", list(Kind))
    @pytest.mark.parametrize("name", ["cartesian", "nested"])
    def test_coarse_reconstruction_adjoint(self, pairs, name, kind, rng):
        pair = pairs[name]
        for _ in range(100):
            a = rng.uniform(0.1, 2.0, pair.coarse.n_cells)
            b, u = rng.normal(size=pair.coarse.n_cells), rng.normal(size=pair.fine.n_faces)
            lhs = ops.inner_cell(pair.coarse, ops.reconstruct_coarse_adjoint(pair, a, u, kind), b)
            rhs = ops.inner_diamond(pair.fine, u, ops.reconstruct_diff(
                pair.fine, ops.inject(pair, a), ops.inject(pair, b), kind))
            assert abs(lhs - rhs) <= 1e-13 * max(abs(lhs), 1.0)

    def test_coarse_adjoint_identical_linear(self, acute4, rng):
        pair = NestedMeshPair.same(acute4)
        a, u = rng.uniform(0.1, 1, acute4.n_cells), rng.normal(size=acute4.n_faces)
        assert rel_err(ops.reconstruct_coarse_adjoint(pair, a, u),
                       ops.reconstruct_diff_adjoint(acute4, a, u)) < 1e-15
        assert not ops.reconstruct_coarse_adjoint(pair, a, 0 * u).any()

    def test_operator_matrices(self, nested4, rng):
        O = Operators(nested4)
        a = rng.normal(size=nested4.coarse.n_cells)
        b = rng.normal(size=nested4.fine.n_cells)
        assert rel_err(O.P @ a, ops.inject(nested4, a)) == 0
        assert rel_err(O.Pstar @ b, ops.inject_adjoint(nested4, b)) < 1e-14
        assert np.array_equal(O.W, nested4.fine.diamond_weights)

