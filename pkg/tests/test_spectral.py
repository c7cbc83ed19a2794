import math

import numpy as np
import pytest

from helmavg.errors import PoleAtEndpoint
from helmavg.fem import DiscreteEigenBasis, basis_for_mesh, mode_mean
from helmavg.geometry import RadialProfile, domain_from_profile
from helmavg.meshing import MeshParams, build_half_mesh, build_mesh
from helmavg.pipeline import default_config, psi_for_profile
from helmavg.spectral import (DEFAULT_RANGE, FrequencyRange, mean_response,
                              psi_objective, response, trapezoid_reference,
                              uniform_eigenvalues, uniform_mean_response,
                              uniform_psi_exact, uniform_response_profile)

MU0 = math.pi**2 / 4


def toy_basis(kappas, means, omega=1.0, cutoff=600.0):
    n = len(kappas)
    return DiscreteEigenBasis(
        kappas=np.asarray(kappas, dtype=float),
        modes=np.zeros((1, n)),
        means=np.asarray(means, dtype=float),
        omega_area=omega,
        cutoff=cutoff,
        dof=10_000,
    )


class TestFrequencyRange:
    def test_validation(self):
        with pytest.raises(ValueError):
            FrequencyRange(-1.0, 60.0)
        with pytest.raises(ValueError):
            FrequencyRange(5.0, 5.0)

    def test_width(self):
        assert FrequencyRange(10.0, 60.0).width == 50.0


class TestUniformExact:
    def test_default_range_value(self):
        psi = uniform_psi_exact(DEFAULT_RANGE)
        assert math.floor(psi * 1e4) / 1e4 == 0.0742

    def test_small_range_limit(self):
        assert uniform_psi_exact(FrequencyRange(0.0, 1e-6)) == pytest.approx(1.0, abs=1e-6)

    def test_pole_at_endpoint(self):
        with pytest.raises(PoleAtEndpoint):
            uniform_psi_exact(FrequencyRange(0.0, MU0))

    def test_matches_fem_pipeline(self):
        got = psi_for_profile(RadialProfile((0.5,)), default_config(1)).psi
        assert got == pytest.approx(uniform_psi_exact(DEFAULT_RANGE), abs=2e-3)


class TestPsiObjective:
    def test_zero_mean_modes_contribute_nothing(self):
        b1 = toy_basis([2.5, 30.0, 59.99999999], [0.3, 0.2, 0.0])
        b2 = toy_basis([2.5, 30.0], [0.3, 0.2])
        r1 = psi_objective(b1, DEFAULT_RANGE)
        r2 = psi_objective(b2, DEFAULT_RANGE)
        assert r1.psi == r2.psi  # bit identical
        assert r1.n_modes_used == 3 and r2.n_modes_used == 2

    def test_pole_guard_on_contributing_mode(self):
        b = toy_basis([60.0 + 1e-9], [0.5])
        with pytest.raises(PoleAtEndpoint):
            psi_objective(b, DEFAULT_RANGE)

    def test_pole_ignored_for_silent_mode(self):
        b = toy_basis([60.0 + 1e-9, 30.0], [0.0, 0.1])
        res = psi_objective(b, DEFAULT_RANGE)
        assert math.isfinite(res.psi)

    def test_min_endpoint_gap_reported(self):
        b = toy_basis([2.0, 55.0], [0.1, 0.1])
        res = psi_objective(b, DEFAULT_RANGE)
        assert res.min_endpoint_gap == pytest.approx(2.0)

    def test_cutoff_warning(self):
        b = toy_basis([2.0], [0.1], cutoff=100.0)
        with pytest.warns(UserWarning, match="cutoff"):
            psi_objective(b, DEFAULT_RANGE)

    def test_matches_analytic_partial_sum(self):
        # identical truncation on both sides: FEM error alone remains
        a = 0.5
        mesh = build_half_mesh(RadialProfile((a,)), MeshParams(96, 48))
        basis = basis_for_mesh(mesh, 600.0, dof_rule_factor=0.0)
        got = psi_objective(basis, DEFAULT_RANGE).psi
        modes = uniform_eigenvalues(a, 600.0)
        series = 1.0 + 2 * a * math.fsum(
            (m.kappa / 60.0 * math.log(abs(m.kappa / (60.0 - m.kappa))) - 1.0) * m.mean**2
            for m in modes
        )
        assert got == pytest.approx(series, abs=8e-4)

    def test_tail_rule(self):
        # doubling the cutoff moves psi by less than the mesh error
        profile = RadialProfile((0.5,))
        mesh = build_half_mesh(profile, MeshParams(48, 12))
        psi10 = psi_objective(basis_for_mesh(mesh, 600.0, dof_rule_factor=0.0), DEFAULT_RANGE).psi
        psi20 = psi_objective(basis_for_mesh(mesh, 1200.0, dof_rule_factor=0.0), DEFAULT_RANGE).psi
        fem_error = abs(psi20 - uniform_psi_exact(DEFAULT_RANGE))
        assert abs(psi20 - psi10) < fem_error


class TestResponse:
    @pytest.fixture(scope="class")
    def uniform_basis(self):
        mesh = build_mesh(domain_from_profile(RadialProfile((0.5,))), MeshParams(40, 20))
        return basis_for_mesh(mesh, 600.0, dof_rule_factor=0.0), mesh

    def test_lambda_zero_is_exactly_one(self, uniform_basis):
        basis, _ = uniform_basis
        assert np.all(response(basis, 0.0) == 1.0)

    def test_uniform_profile_matches_separated_solution(self, uniform_basis):
        basis, mesh = uniform_basis
        lam = 20.0
        got = response(basis, lam)
        want = uniform_response_profile(lam, mesh.vertices[:, 0])
        scale = np.abs(want).max()
        assert np.abs(got - want).max() < 0.02 * scale

    def test_x2_independence_improves_quadratically(self):
        # discrete modes of x2-constant continuum modes ripple at O(h^2),
        # so the line deviation shrinks ~4x per refinement
        devs = []
        for params in (MeshParams(20, 10), MeshParams(40, 20)):
            mesh = build_mesh(domain_from_profile(RadialProfile((0.5,))), params)
            basis = basis_for_mesh(mesh, 600.0, dof_rule_factor=0.0)
            got = response(basis, 20.0)
            dev = max(
                np.ptp(got[mesh.vertices[:, 0] == x1])
                for x1 in np.unique(mesh.vertices[:, 0])
            )
            devs.append(dev)
        scale = np.abs(uniform_response_profile(20.0, np.linspace(0, 1, 50))).max()
        assert devs[1] < 0.01 * scale
        assert devs[0] / devs[1] > 2.5

    def test_value_one_on_loaded_boundary(self, uniform_basis):
        basis, mesh = uniform_basis
        got = response(basis, 17.3)
        assert np.all(got[mesh.dirichlet_nodes] == 1.0)

    def test_mean_consistency(self, uniform_basis):
        basis, mesh = uniform_basis
        lam = 20.0
        assert mode_mean(response(basis, lam), mesh) == pytest.approx(
            mean_response(basis, lam), abs=1e-10)

    def test_pole_proximity_raises(self):
        b = toy_basis([20.0], [0.5])
        with pytest.raises(PoleAtEndpoint):
            response(b, 20.0 + 1e-9)


class TestMeanResponse:
    def test_lambda_zero(self):
        assert uniform_mean_response(0.0) == 1.0

    def test_quarter_pi_value(self):
        lam = math.pi**2 / 16
        assert uniform_mean_response(lam) == pytest.approx(4 / math.pi, rel=1e-14)

    def test_blow_up_near_first_pole(self):
        below = [uniform_mean_response(MU0 - 10.0**-k) for k in range(1, 6)]
        above = [uniform_mean_response(MU0 + 10.0**-k) for k in range(1, 6)]
        assert all(np.diff(below) > 0) and below[-1] > 1e3
        assert all(np.diff(above) < 0) and above[-1] < -1e3

    def test_fem_agrees(self):
        mesh = build_half_mesh(RadialProfile((0.5,)), MeshParams(96, 48))
        basis = basis_for_mesh(mesh, 600.0, dof_rule_factor=0.0)
        assert mean_response(basis, 20.0) == pytest.approx(uniform_mean_response(20.0), rel=5e-3)


class TestUniformEigenvalues:
    def test_smallest(self):
        modes = uniform_eigenvalues(0.5, 60.0)
        assert modes[0].kappa == pytest.approx(MU0)
        assert modes[0].parity == "even" and modes[0].l == 0

    def test_second_axial(self):
        assert uniform_eigenvalues(0.5, 60.0)[2].kappa == pytest.approx(9 * math.pi**2 / 4)

    def test_normalization_factors(self):
        modes = uniform_eigenvalues(0.4, 100.0)
        for m in modes:
            want = math.sqrt(1 / 0.4) if (m.parity == "even" and m.l == 0) else math.sqrt(2 / 0.4)
            assert m.norm == pytest.approx(want)

    def test_count_matches_fem(self):
        mesh = build_mesh(domain_from_profile(RadialProfile((0.5,))), MeshParams(80, 40))
        basis = basis_for_mesh(mesh, 100.0)
        assert len(uniform_eigenvalues(0.5, 100.0)) == basis.n_modes

    def test_means_zero_off_the_axial_family(self):
        for m in uniform_eigenvalues(0.3, 200.0):
            if m.parity == "odd" or m.l > 0:
                assert m.mean == 0.0
            else:
                assert m.mean == pytest.approx(1 / math.sqrt(0.3 * m.kappa))

    def test_radius_validated(self):
        with pytest.raises(ValueError):
            uniform_eigenvalues(0.6, 10.0)


class TestTrapezoidReference:
    def test_pole_free_range_converges(self):
        rng = FrequencyRange(0.0, 1.0)
        assert trapezoid_reference(rng, 1000) == pytest.approx(uniform_psi_exact(rng), abs=1e-3)

    def test_fails_past_first_pole(self):
        rng = FrequencyRange(0.0, 10.0)
        exact = uniform_psi_exact(rng)
        err = abs(trapezoid_reference(rng, 1000) - exact)
        assert err > 0.01

    def test_doubling_does_not_restore_convergence(self):
        rng = FrequencyRange(0.0, 10.0)
        exact = uniform_psi_exact(rng)
        errs = [abs(trapezoid_reference(rng, n) - exact) for n in (1000, 2000, 4000)]
        assert min(errs) > 0.5 * errs[0] or errs[-1] > errs[0]

    def test_needs_two_steps(self):
        with pytest.raises(ValueError):
            trapezoid_reference(DEFAULT_RANGE, 1)
