import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from afcosserat import grid_fem as gf
from afcosserat import quasistatic as qs
from afcosserat import tensor3 as t3
from oracles import mms_problem, random_deviator


class TestMesh:
    def test_single_quad(self):
        m = gf.build_mesh(1, 1)
        assert (m.n_nodes, m.n_elements) == (4, 2)
        assert m.areas.sum() == pytest.approx(1.0)

    def test_counts(self):
        m = gf.build_mesh(2, 2)
        assert (m.n_nodes, m.n_elements) == (9, 8)

    @given(st.integers(1, 12), st.integers(1, 12), st.floats(0.1, 10), st.floats(0.1, 10))
    def test_partition(self, nx, ny, Lx, Ly):
        m = gf.build_mesh(nx, ny, Lx, Ly)
        assert m.n_elements == 2 * nx * ny
        assert m.n_nodes == (nx + 1) * (ny + 1)
        assert np.all(m.areas > 0)
        assert m.areas.sum() == pytest.approx(Lx * Ly, rel=1e-12)

    def test_boundary_nodes_on_boundary(self, mesh8):
        x = mesh8.nodes[mesh8.boundary_nodes]
        on = (np.isclose(x[:, 0], 0) | np.isclose(x[:, 0], 1)
              | np.isclose(x[:, 1], 0) | np.isclose(x[:, 1], 1))
        assert on.all()
        assert len(mesh8.boundary_nodes) == 32
        assert set(mesh8.boundary_tags) == {"bottom", "top", "left", "right"}

    def test_conforming(self, mesh8):
        # every interior edge is shared by exactly two triangles
        edges = np.sort(mesh8.triangles[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2), axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        assert set(counts) <= {1, 2}
        n_boundary_edges = np.sum(counts == 1)
        assert n_boundary_edges == 4 * 8

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            gf.build_mesh(0, 3)
        with pytest.raises(ValueError):
            gf.build_mesh(3, 3, Lx=-1.0)


class TestGradient:
    def test_constant(self, mesh8):
        g = gf.gradient_at_elements(mesh8, np.ones((mesh8.n_nodes, 3)))
        np.testing.assert_allclose(g, 0, atol=1e-13)

    def test_x1(self, mesh8):
        u = np.zeros((mesh8.n_nodes, 3))
        u[:, 0] = mesh8.nodes[:, 0]
        g = gf.gradient_at_elements(mesh8, u)
        expected = np.zeros((3, 3))
        expected[0, 0] = 1
        np.testing.assert_allclose(g, np.broadcast_to(expected, g.shape), atol=1e-13)

    def test_linear(self, mesh8, rng):
        M = rng.standard_normal((3, 2))
        g = gf.gradient_at_elements(mesh8, mesh8.nodes @ M.T)
        np.testing.assert_allclose(g[:, :, :2], np.broadcast_to(M, (mesh8.n_elements, 3, 2)),
                                   atol=1e-12)
        np.testing.assert_array_equal(g[:, :, 2], 0)

    def test_sparse_operator_agrees(self, mesh8, rng):
        u = rng.standard_normal((mesh8.n_nodes, 3))
        S = gf.sym_gradient_operator(mesh8) @ u.ravel()
        np.testing.assert_allclose(S.reshape(-1, 3, 3), t3.sym(gf.gradient_at_elements(mesh8, u)),
                                   atol=1e-13)


class TestCoupledSystem:
    def test_symmetric(self, mesh8, params):
        K = gf.CoupledOperator(mesh8, params).matrix
        assert abs(K - K.T).max() <= 1e-10 * abs(K).max()

    def test_homogeneous(self, mesh8, params):
        u, a = gf.CoupledOperator(mesh8, params).solve()
        np.testing.assert_array_equal(u, 0)
        np.testing.assert_array_equal(a, 0)

    def test_patch(self, params, rng):
        mesh = gf.build_mesh(5, 7, 2.0, 1.5)
        M = rng.standard_normal((3, 2)) * 1e-3
        load = qs.LinearRamp(M, rate=0.0, offset=1.0)
        xb = mesh.nodes[mesh.boundary_nodes]
        u, a = gf.CoupledOperator(mesh, params).solve(None, None, load.g(xb, 0), load.a(xb, 0))
        np.testing.assert_allclose(u, mesh.nodes @ M.T, atol=1e-14)
        Mfull = np.zeros((3, 3))
        Mfull[:, :2] = M
        np.testing.assert_allclose(a, np.broadcast_to(t3.axl(t3.skew(Mfull)), a.shape), atol=1e-14)

    def test_uniform_plastic_strain_gives_no_motion(self, mesh8, params, rng):
        ep = np.broadcast_to(random_deviator(rng, 0.01), (mesh8.n_elements, 3, 3))
        u, a = gf.CoupledOperator(mesh8, params).solve(ep)
        np.testing.assert_allclose(u, 0, atol=1e-15)
        np.testing.assert_allclose(a, 0, atol=1e-15)

    def test_rejects_invalid_plastic_field(self, mesh8, params):
        ep = np.zeros((mesh8.n_elements, 3, 3))
        ep[:, 0, 0] = 1e-3
        with pytest.raises(gf.InvalidPlasticField):
            gf.assemble_coupled(mesh8, params, ep)
        ep = np.zeros((mesh8.n_elements, 3, 3))
        ep[:, 0, 1] = 1e-3
        with pytest.raises(gf.InvalidPlasticField):
            gf.assemble_coupled(mesh8, params, ep)

    def test_ritz_positive(self, mesh8, params, rng):
        K = gf.CoupledOperator(mesh8, params).K_ff
        X = rng.standard_normal((K.shape[0], 100))
        assert np.min(np.einsum("ij,ij->j", X, K @ X)) > 0
        assert np.linalg.eigvalsh(K.toarray()).min() > 0

    def test_galerkin_orthogonality(self, mesh8, params, rng):
        op = gf.CoupledOperator(mesh8, params)
        ep = random_deviator(rng, 1e-3, (mesh8.n_elements,))
        f = lambda x: np.column_stack([np.sin(x[:, 0]), x[:, 1], 0 * x[:, 0]])  # noqa: E731
        S = op.system(ep, f)
        u, a = op.solve(ep, f)
        x = np.column_stack([u, a]).ravel()
        r = S.rhs - S.matrix @ x
        assert np.abs(r[S.free]).max() <= 1e-10 * np.abs(S.rhs).max()

    def test_cg_matches_direct(self, mesh8, params, rng):
        ep = random_deviator(rng, 1e-3, (mesh8.n_elements,))
        op = gf.CoupledOperator(mesh8, params)
        g = rng.standard_normal((len(mesh8.boundary_nodes), 3)) * 1e-3
        ud, ad = op.solve(ep, None, g, 0.0)
        uc, ac = op.solve(ep, None, g, 0.0, method="cg", tol=1e-12)
        np.testing.assert_allclose(uc, ud, atol=1e-12)
        np.testing.assert_allclose(ac, ad, atol=1e-12)

    def test_mms_rates_quick(self, params):
        u, gu, a, ga, f, m = mms_problem(params.mu, params.lam, params.mu_c, params.l_c)
        errs = []
        for n in (8, 16, 32):
            mesh = gf.build_mesh(n, n)
            xb = mesh.nodes[mesh.boundary_nodes]
            uh, ah = gf.CoupledOperator(mesh, params).solve(None, f, u(xb), a(xb), m)
            l2u, h1u = gf.error_norms(mesh, uh, u, gu)
            l2a, h1a = gf.error_norms(mesh, ah, a, ga)
            errs.append((np.hypot(l2u, l2a), np.hypot(h1u, h1a)))
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert rates[-1, 0] == pytest.approx(2.0, abs=0.2)
        assert rates[-1, 1] == pytest.approx(1.0, abs=0.2)


class TestPCG:
    def test_identity(self):
        b = np.arange(1.0, 6.0)
        x, _ = gf.pcg(sp.identity(5, format="csr"), b, 1e-12)
        np.testing.assert_allclose(x, b)

    def test_zero_rhs(self):
        x, its = gf.pcg(sp.identity(5, format="csr") * 3, np.zeros(5), 1e-10)
        np.testing.assert_array_equal(x, 0)
        assert its == 0

    @given(st.integers(0, 10**6))
    def test_random_spd_matches_dense(self, seed):
        rng = np.random.default_rng(seed)
        Q = rng.standard_normal((50, 50))
        A = Q @ Q.T + 50 * np.eye(50)
        b = rng.standard_normal(50)
        x, _ = gf.pcg(sp.csr_matrix(A), b, 1e-12)
        ref = np.linalg.solve(A, b)
        assert np.linalg.norm(x - ref) <= 1e-9 * np.linalg.norm(ref)

    def test_no_convergence(self):
        rng = np.random.default_rng(0)
        Q = rng.standard_normal((40, 40))
        A = sp.csr_matrix(Q @ Q.T + 1e-3 * np.eye(40))
        with pytest.raises(gf.NoConvergence):
            gf.pcg(A, rng.standard_normal(40), 1e-14, maxiter=3)

    def test_solve_spd_tol_range(self, mesh8, params):
        S = gf.assemble_coupled(mesh8, params)
        with pytest.raises(ValueError):
            gf.solve_spd(S, tol=1e-3)
        u, a = gf.solve_spd(S, tol=1e-8)
        np.testing.assert_array_equal(u, 0)

    def test_factorize_fallback(self):
        A = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
        solve = gf._factorize(A)
        np.testing.assert_allclose(solve(np.array([2.0, 3.0])), [3.0, 2.0])


class TestAuxiliary:
    def test_harmonic_extension_linear(self, mesh8):
        xb = mesh8.nodes[mesh8.boundary_nodes]
        w = gf.harmonic_extension(mesh8, xb @ [[1.0, 2.0], [-0.5, 0.3]])
        np.testing.assert_allclose(w, mesh8.nodes @ [[1.0, 2.0], [-0.5, 0.3]], atol=1e-13)

    def test_error_norms_zero_for_linear(self, mesh8):
        M = np.array([[1.0, 2.0], [0.5, -1.0], [0.0, 3.0]])
        err = gf.error_norms(mesh8, mesh8.nodes @ M.T, lambda x: x @ M.T,
                             lambda x: np.broadcast_to(M, (len(x), 3, 2)))
        np.testing.assert_allclose(err, 0, atol=1e-13)

    def test_gram_positive(self, mesh8):
        G = gf.h1_gram(mesh8)
        assert G.shape == (6 * mesh8.n_nodes,) * 2
        v = np.random.default_rng(1).standard_normal(G.shape[0])
        assert v @ (G @ v) > 0
