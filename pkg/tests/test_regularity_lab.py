import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from afcosserat import grid_fem as gf
from afcosserat import quasistatic as qs
from afcosserat import regularity_lab as rl
from afcosserat import tensor3 as t3
from oracles import random_deviator

C = (0.5, 0.5)


def x1(mesh):
    return mesh.nodes[:, 0].copy()


def shell_field(center, r_in, r_out):
    """Radial field whose gradient is the unit radial vector on r_in <= r < r_out, zero elsewhere."""
    c = np.asarray(center)

    def value(x):
        r = np.linalg.norm(x - c, axis=-1)
        return np.clip(r, r_in, r_out)

    def gradient(x):
        d = x - c
        r = np.linalg.norm(d, axis=-1)
        on = (r >= r_in) & (r < r_out)
        return np.where(on[:, None], d / np.maximum(r, 1e-300)[:, None], 0.0)

    return rl.AnalyticField(value, gradient)


class TestLocalEnergy:
    def test_linear_field(self, mesh32):
        R = 0.25
        E = rl.local_energy(mesh32, x1(mesh32), rl.BallSpec(C, R))
        assert E == pytest.approx(np.pi * R**2, rel=0.02)

    def test_constant_zero(self, mesh32):
        assert rl.local_energy(mesh32, np.full(mesh32.n_nodes, 3.0), rl.BallSpec(C, 0.2)) == 0

    def test_unresolved(self, mesh8):
        with pytest.raises(rl.BallUnresolved):
            rl.local_energy(mesh8, x1(mesh8), rl.BallSpec(C, 0.5 * mesh8.h))

    def test_leaving_domain_needs_clip(self, mesh32):
        with pytest.raises(ValueError):
            rl.local_energy(mesh32, x1(mesh32), rl.BallSpec((0.1, 0.5), 0.2))
        E = rl.local_energy(mesh32, x1(mesh32), rl.BallSpec((0.0, 0.5), 0.2, clip=True))
        assert E == pytest.approx(0.5 * np.pi * 0.04, rel=0.03)

    def test_square_root_profile_slope(self):
        # |grad r^(1/2)|^2 = 1/(4r) so E(R) = pi R / 2
        mesh = gf.build_mesh(64, 64)
        radii = np.array([0.4, 0.2, 0.1, 0.05])
        E = [rl.local_energy(mesh, rl.radial_power(C, 0.5), rl.BallSpec(C, R)) for R in radii]
        np.testing.assert_allclose(E, np.pi * radii / 2, rtol=0.03)
        assert rl.ExponentFit.from_loglog(radii, E).slope == pytest.approx(1.0, abs=0.02)

    @settings(max_examples=20)
    @given(st.integers(0, 10**6), st.floats(0.1, 0.2))
    def test_monotone_and_additive(self, mesh32, seed, R):
        v = rl.random_smooth_field(mesh32, np.random.default_rng(seed))
        dens = rl.energy_density(mesh32, v)
        inner = rl.integrate_density(mesh32, dens, C, R)
        ring = rl.integrate_density(mesh32, dens, C, 2 * R, inner=R)
        outer = rl.integrate_density(mesh32, dens, C, 2 * R)
        assert inner <= outer
        assert inner + ring == pytest.approx(outer, rel=1e-12)


class TestHoleFilling:
    @pytest.mark.parametrize("alpha", [0.5, 0.75])
    def test_radial_power(self, alpha):
        mesh = gf.build_mesh(64, 64)
        res = rl.hole_filling_ratio(mesh, rl.radial_power(C, alpha), C, 0.2)
        assert res.value == pytest.approx(1.0 / (4**alpha - 1.0), rel=0.02)

    def test_linear(self, mesh32):
        res = rl.hole_filling_ratio(mesh32, x1(mesh32), C, 0.2)
        assert res.value == pytest.approx(1.0 / 3.0, rel=0.03)

    def test_annulus_only_field(self, mesh32):
        res = rl.hole_filling_ratio(mesh32, shell_field(C, 0.2, 0.4), C, 0.2)
        assert res.value == 0.0 and not res.degenerate

    def test_degenerate_annulus(self, mesh32):
        res = rl.hole_filling_ratio(mesh32, shell_field(C, 0.0, 0.15), C, 0.2)
        assert res.degenerate and res.value is None
        assert res.flag == "degenerate annulus"

    def test_needs_room_for_annulus(self, mesh32):
        with pytest.raises(ValueError):
            rl.hole_filling_ratio(mesh32, x1(mesh32), C, 0.3)


class TestWidman:
    def test_geometric_sequence(self):
        Cc = 1.5
        q = Cc / (1 + Cc)
        rep = rl.widman_iteration(q ** np.arange(6), Cc)
        np.testing.assert_allclose(rep.residuals, 0, atol=1e-15)
        assert not rep.violations.any()
        assert rep.alpha == pytest.approx(-np.log2(q) / 2)
        assert rep.fitted_alpha == pytest.approx(rep.alpha)

    def test_constant_sequence_violates(self):
        rep = rl.widman_iteration(np.ones(5), 1.0)
        assert rep.violations.all()

    def test_source_term_absorbs(self):
        # E_{j+1} = q E_j + K R_{j+1}^gamma exactly
        Cc, K, g = 1.0, 0.3, 1.0
        q = 0.5
        R = 2.0 ** -np.arange(6)
        E = [1.0]
        for j in range(5):
            E.append(q * E[-1] + K * R[j + 1] ** g)
        rep = rl.widman_iteration(E, Cc, K, g)
        assert not rep.violations.any()

    def test_too_few_levels(self):
        with pytest.raises(ValueError):
            rl.widman_iteration([1.0, 0.5, 0.25], 1.0)

    def test_growth_report_linear(self):
        mesh = gf.build_mesh(64, 64)
        dens = rl.energy_density(mesh, x1(mesh))
        rep = rl.growth_report(mesh, dens, C, [0.4, 0.2, 0.1, 0.05])
        assert rep.exponent == pytest.approx(2.0, abs=0.1)
        assert rep.widman is not None

    @pytest.mark.slow
    def test_run_energies_match_holder_estimate(self):
        traj = qs.run(qs.reference_scenario(n=64, steps=20))
        uT = traj[-1].u
        rep = rl.growth_report(traj.mesh, rl.energy_density(traj.mesh, uT), C,
                               [0.4, 0.2, 0.1, 0.05])
        a_hat = rl.holder_space(traj.mesh, uT, anchors="interior").alpha
        assert rep.widman.fitted_alpha == pytest.approx(a_hat, abs=0.1)

    def test_growth_report_zero(self, mesh32):
        rep = rl.growth_report(mesh32, np.zeros(mesh32.n_elements), C, [0.4, 0.2])
        assert rep.flag == "zero energy"


class TestHolderSpace:
    def test_linear(self, mesh32):
        rep = rl.holder_space(mesh32, x1(mesh32), sample_pairs=200)
        assert rep.alpha == pytest.approx(1.0, abs=1e-9)

    def test_constant(self, mesh32):
        rep = rl.holder_space(mesh32, np.ones(mesh32.n_nodes))
        assert rep.alpha is None and rep.flag

    def test_narrow_scale_range_flagged(self, mesh32):
        mesh = gf.build_mesh(16, 16)
        rep = rl.holder_space(mesh, x1(mesh), sample_pairs=100)
        assert rep.flag.startswith("narrow scale range")
        assert rl.holder_space(mesh32, x1(mesh32)).flag is None

    def test_too_few_pairs(self, mesh32):
        with pytest.raises(ValueError):
            rl.holder_space(mesh32, x1(mesh32), sample_pairs=50)

    def test_nonfinite(self, mesh8):
        v = x1(mesh8)
        v[3] = np.nan
        with pytest.raises(ValueError):
            rl.holder_space(mesh8, v, sample_pairs=100)

    def test_square_root(self):
        mesh = gf.build_mesh(64, 64)
        rep = rl.holder_space(mesh, rl.radial_power(C, 0.5), sample_pairs=1000, seed=0)
        assert rep.alpha == pytest.approx(0.5, abs=0.05)

    def test_seeded(self, mesh32):
        v = rl.random_smooth_field(mesh32, np.random.default_rng(4))
        a = rl.holder_space(mesh32, v, sample_pairs=150, seed=7)
        b = rl.holder_space(mesh32, v, sample_pairs=150, seed=7)
        assert a.alpha == b.alpha

    def test_anchor_sets(self, mesh32):
        v = x1(mesh32) ** 2
        for anchors in ("interior", "boundary"):
            assert 0 < rl.holder_space(mesh32, v, anchors=anchors).alpha <= 1
        with pytest.raises(ValueError):
            rl.holder_space(mesh32, v, anchors="corners")


class TestHolderTime:
    def test_constant(self, params):
        tr = qs.run(qs.Scenario(params, 4, 4, 1.0, 8))
        rep = rl.holder_time(tr, [[0.5, 0.5]])
        assert rep.alpha is None and rep.flag

    def test_linear_in_time(self, params):
        tr = qs.run(qs.Scenario(params, 4, 4, 1.0, 16, qs.LinearRamp([[0, 1e-4], [0, 0], [0, 0]])))
        rep = rl.holder_time(tr, [[0.5, 0.75], [0.25, 0.25]], alpha_space=1.0)
        assert rep.alpha == pytest.approx(1.0, abs=1e-9)
        assert rep.predicted == pytest.approx(0.25)

    def test_too_short(self, params):
        tr = qs.run(qs.Scenario(params, 2, 2, 1.0, 2))
        with pytest.raises(ValueError):
            rl.holder_time(tr, [[0.5, 0.5]])


class TestPoincare:
    def test_constant(self, mesh32):
        res = rl.poincare_annulus_check(mesh32, np.full(mesh32.n_nodes, 2.0), C, 0.2)
        assert res.value == 0.0 and res.degenerate

    @pytest.mark.parametrize("R", [0.1, 0.2])
    def test_linear_ratio_one(self, R):
        mesh = gf.build_mesh(64, 64)
        res = rl.poincare_annulus_check(mesh, x1(mesh), C, R)
        assert res.value == pytest.approx(1.0, rel=0.03)

    def test_supremum_bounded(self, mesh32):
        sup, vals = rl.poincare_supremum(mesh32, C, 0.2, n_fields=30, seed=1)
        assert len(vals) == 30 and sup == vals.max()
        assert 0 < sup < 2.0


class TestDivCurl:
    def test_zero(self, mesh8):
        res = rl.div_curl_check(mesh8, np.zeros((mesh8.n_nodes, 3)))
        assert res.degenerate

    def test_boundary_must_vanish(self, mesh8):
        u = np.zeros((mesh8.n_nodes, 3))
        u[mesh8.boundary_nodes[0], 1] = 1.0
        with pytest.raises(rl.BoundaryNotZero):
            rl.div_curl_check(mesh8, u)

    @settings(max_examples=20)
    @given(st.integers(0, 10**6))
    def test_random_interior_identity(self, mesh8, seed):
        u = np.random.default_rng(seed).standard_normal((mesh8.n_nodes, 3))
        u[mesh8.boundary_nodes] = 0
        assert rl.div_curl_check(mesh8, u).value == pytest.approx(1.0, rel=1e-10)


@pytest.fixture(scope="module")
def ramp_run():
    p = qs.reference_material()
    M = np.array([[0.0, 2e-3], [1e-3, -5e-4], [3e-4, 1e-4]])
    b0 = random_deviator(np.random.default_rng(3), 0.1)
    return qs.run(qs.Scenario(p, 6, 6, 1.0, 10, qs.LinearRamp(M), b0=b0)), M, b0


class TestEnergyReport:
    def test_zero(self, params):
        rep = rl.energy_report(qs.run(qs.Scenario(params, 4, 4, 1.0, 5)))
        for k in ("energy", "rate_sum", "excess_term", "dissipation", "max_excess"):
            np.testing.assert_array_equal(rep[k], 0)

    def test_elastic_ramp_closed_form(self, ramp_run):
        tr, M, b0 = ramp_run
        p = tr.params
        Mf = np.zeros((3, 3))
        Mf[:, :2] = M
        e = t3.sym(Mf)
        w = p.mu * t3.inner(e, e) + 0.5 * p.lam * t3.tr(e) ** 2
        rep = rl.energy_report(tr)
        t = rep["time"]
        np.testing.assert_allclose(rep["energy"], w * t**2 + t3.inner(b0, b0) / (2 * p.c), rtol=1e-10)
        np.testing.assert_allclose(rep["rate_sum"], 2 * w * t, rtol=1e-10, atol=1e-16)
        np.testing.assert_array_equal(rep["dissipation"], 0)
        np.testing.assert_array_equal(rep["excess_term"], 0)

    def test_plastic_run(self):
        tr = qs.run(qs.Scenario(qs.reference_material(), 8, 8, 1.0, 20,
                                qs.CyclicShear(0.03, period=0.8, hetero=0.3)))
        rep = rl.energy_report(tr)
        assert np.all(np.diff(rep["rate_sum"]) >= 0)
        assert np.all(np.diff(rep["dissipation"]) >= -1e-15)
        assert rep["max_excess"].max() > 0
        assert rep["max_backstress"].max() <= tr.params.backstress_bound + 1e-9


class TestBoundaryGrowth:
    def test_zero_data(self, params):
        tr = qs.run(qs.Scenario(params, 32, 32, 1.0, 4))
        (rep,) = rl.boundary_growth(tr.mesh, tr, None, [(0.5, 0.0)], [0.4, 0.2, 0.1])
        assert rep.flag == "zero energy"
        assert rep.lift_K == 0.0

    def test_linear_data(self, params):
        tr = qs.run(qs.Scenario(params, 32, 32, 1.0, 4, qs.LinearRamp([[0, 1e-4], [2e-4, 0], [0, 0]])))
        (rep,) = rl.boundary_growth(tr.mesh, tr, None, [(0.5, 0.0)], [0.4, 0.2, 0.1])
        assert rep.exponent == pytest.approx(2.0, abs=0.1)
        assert rep.lift_exponent == pytest.approx(2.0, abs=0.1)

    def test_plastic_run_positive_exponents(self):
        tr = qs.run(qs.reference_scenario(n=32, steps=20))
        centers = [(0.5, 0.0), (1.0, 0.5), (0.5, 1.0), (0.0, 0.5)]
        for rep in rl.boundary_growth(tr.mesh, tr, None, centers, [0.4, 0.2, 0.1]):
            assert rep.exponent > 0 and rep.lift_exponent > 0
            assert np.all(np.diff(rep.energies) <= 0)  # radii are sorted descending

    def test_center_off_boundary(self, params):
        tr = qs.run(qs.Scenario(params, 8, 8, 1.0, 2))
        with pytest.raises(ValueError):
            rl.boundary_growth(tr.mesh, tr, None, [(0.5, 0.5)], [0.4, 0.2])
