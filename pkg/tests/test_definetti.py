import numpy as np
import pytest

from meanfield_bose_lab import definetti as D
from meanfield_bose_lab.fock import FockBasis


def analytic_product_error(dim: int, n: int) -> float:
    """Exact k=1 trace-norm error for a pure product state.

    Sphere moments give the reconstruction diag((N+1)/(N+D), 1/(N+D), ...)
    in the condensate basis, so the distance to diag(1, 0, ...) is
    2 (D-1) / (N+D).
    """
    return 2.0 * (dim - 1) / (n + dim)


class TestSymmetricState:
    def test_validation(self):
        basis = FockBasis.build(2, 3)
        good = np.eye(basis.size) / basis.size
        D.SymmetricState.from_matrix(2, 3, good)
        with pytest.raises(ValueError):
            D.SymmetricState.from_matrix(2, 3, 2.0 * good)  # trace 2
        bad = good.copy()
        bad[0, 1] = 0.5
        with pytest.raises(ValueError):
            D.SymmetricState.from_matrix(2, 3, bad)  # not Hermitian
        indef = good.copy()
        indef[0, 0] = -0.1
        indef[1, 1] += 0.1 + 1.0 / basis.size
        with pytest.raises(ValueError):
            D.SymmetricState.from_matrix(2, 3, indef)

    def test_product_is_rank_one(self):
        state = D.SymmetricState.product(np.array([1.0, 1.0j]), 4)
        vals = np.linalg.eigvalsh(state.matrix)
        assert abs(vals[-1] - 1.0) < 1e-12
        assert np.max(np.abs(vals[:-1])) < 1e-12


class TestCoherentStates:
    def test_schur_constants(self):
        assert D.schur_constant(2, 2) == 3
        assert D.schur_constant(3, 2) == 6

    def test_overlap_law(self):
        rng = np.random.default_rng(0)
        basis = FockBasis.build(4, 5)
        u = rng.normal(size=4) + 1j * rng.normal(size=4)
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        u /= np.linalg.norm(u)
        v /= np.linalg.norm(v)
        cu = D.product_coefficients(u[None, :], basis)[0]
        cv = D.product_coefficients(v[None, :], basis)[0]
        assert abs(np.vdot(cu, cv) - np.vdot(u, v) ** 5) < 1e-12

    def test_resolution_of_identity_small(self):
        rep = D.coherent_resolution_check(2, 1, samples=20_000, seed=1)
        assert rep["c_n"] == 2
        assert rep["within_band"]
        assert rep["operator_error"] < 0.1

    def test_resolution_of_identity_n10(self):
        rep = D.coherent_resolution_check(2, 10, samples=60_000, seed=2)
        assert rep["within_band"]


class TestHusimi:
    def test_maximally_mixed_density_constant(self):
        state = D.SymmetricState.maximally_mixed(2, 10)
        mu = D.husimi_measure(state, samples=4000, seed=3)
        assert np.ptp(mu.densities) < 1e-12
        assert abs(mu.total_mass - 1.0) < 1e-12

    def test_product_density_peaks_at_condensate(self):
        u0 = np.array([1.0, 0.0], dtype=complex)
        state = D.SymmetricState.product(u0, 10)
        mu = D.husimi_measure(state, samples=20_000, seed=4)
        c_n = D.schur_constant(2, 10)
        assert mu.max_density <= c_n + 1e-9
        assert mu.max_density >= 0.9 * c_n  # order statistics of 2e4 samples
        assert abs(mu.total_mass - 1.0) <= 3 * mu.mass_sigma

    def test_phase_invariance_exact(self):
        state = D.SymmetricState.random(2, 6, np.random.default_rng(5))
        basis = state.basis
        rng = np.random.default_rng(6)
        us = D.sample_sphere(2, 10, rng)
        for u in us:
            v1 = D.product_coefficients(u[None, :], basis)[0]
            v2 = D.product_coefficients((np.exp(0.7j) * u)[None, :], basis)[0]
            d1 = np.real(np.vdot(v1, state.matrix @ v1))
            d2 = np.real(np.vdot(v2, state.matrix @ v2))
            assert abs(d1 - d2) < 1e-12


class TestPartialTrace:
    def test_product_state_reduction(self):
        rng = np.random.default_rng(7)
        u = rng.normal(size=3) + 1j * rng.normal(size=3)
        u /= np.linalg.norm(u)
        state = D.SymmetricState.product(u, 5)
        mat, basis = D.partial_trace(state, 2)
        ref = D.product_coefficients(u[None, :], basis)[0]
        assert np.max(np.abs(mat - np.outer(ref, ref.conj()))) < 1e-12

    def test_iterated_consistency(self):
        state = D.SymmetricState.random(3, 5, np.random.default_rng(8))
        m3, b3 = D.partial_trace(state, 3)
        m2_direct, _ = D.partial_trace(state, 2)
        from meanfield_bose_lab.fock import trace_one_particle
        m2_via, _ = trace_one_particle(m3, b3)
        assert np.max(np.abs(m2_direct - m2_via)) < 1e-12

    def test_full_k_is_identity_map(self):
        state = D.SymmetricState.random(2, 4, np.random.default_rng(9))
        mat, _ = D.partial_trace(state, 4)
        assert np.max(np.abs(mat - state.matrix)) < 1e-14


class TestTraceNorm:
    def test_two_routes_agree(self):
        rng = np.random.default_rng(10)
        a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        herm = a + a.conj().T
        assert abs(D.trace_norm(herm, hermitian=True)
                   - D.trace_norm(herm, hermitian=False)) < 1e-10


class TestDeFinettiError:
    def test_bound_value(self):
        state = D.SymmetricState.random(2, 10, np.random.default_rng(11))
        rep = D.definetti_error(state, 1, samples=20_000, seed=12)
        assert abs(rep["bound"] - 0.5) < 1e-14

    def test_product_state_error_matches_analytic(self):
        u0 = np.array([1.0, 0.0], dtype=complex)
        state = D.SymmetricState.product(u0, 20)
        rep = D.definetti_error(state, 1, samples=100_000, seed=13)
        target = analytic_product_error(2, 20)
        assert rep["error"] > 0.0
        assert rep["error"] <= 0.25 + 3.0 * rep["sigma"]
        assert abs(rep["error"] - target) <= 3.0 * rep["sigma"] + 5e-3

    def test_error_routes_agree(self):
        state = D.SymmetricState.random(2, 8, np.random.default_rng(14))
        rep = D.definetti_error(state, 1, samples=20_000, seed=15)
        assert abs(rep["error"] - rep["error_eig_route"]) < 1e-10

    def test_random_states_within_bound(self):
        rng = np.random.default_rng(16)
        for trial in range(5):
            state = D.SymmetricState.random(2, 10, rng)
            rep = D.definetti_error(state, 1, samples=50_000,
                                    seed=100 + trial)
            assert rep["within_bound"]

    def test_monotone_in_n_for_product_states(self):
        u0 = np.array([1.0, 0.0], dtype=complex)
        errors, sigmas = [], []
        for n in (6, 10, 14):
            state = D.SymmetricState.product(u0, n)
            rep = D.definetti_error(state, 1, samples=60_000, seed=n)
            errors.append(rep["error"])
            sigmas.append(rep["sigma"])
        # analytic errors decrease; MC estimates within combined bands
        for i in range(len(errors) - 1):
            assert errors[i + 1] <= errors[i] + 3 * (sigmas[i] + sigmas[i + 1])
        assert errors[-1] < errors[0]

    def test_not_applicable_range(self):
        state = D.SymmetricState.random(2, 4, np.random.default_rng(17))
        rep = D.definetti_error(state, 2, samples=10_000, seed=18)
        assert not rep["applicable"]
        assert rep["bound"] is None

    def test_reconstruction_psd_and_normalized(self):
        state = D.SymmetricState.random(2, 10, np.random.default_rng(19))
        mu = D.husimi_measure(state, samples=50_000, seed=20)
        recon, _, _ = D.reconstruction_from_measure(mu, 1)
        vals = np.linalg.eigvalsh(0.5 * (recon + recon.conj().T))
        assert vals[0] > -0.02  # PSD within MC noise
        assert abs(np.trace(recon).real - 1.0) < 0.02
