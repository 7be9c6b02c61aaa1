from math import comb, factorial

import numpy as np
import pytest

from meanfield_bose_lab import bogoliubov as B
from meanfield_bose_lab import fock as F
from meanfield_bose_lab import gp as G
from meanfield_bose_lab import model as M

from conftest import TWO_PI


def cos_modes(n_modes=5, grid=32):
    sp = M.build_model(M.ModelConfig(dim=1, extent=TWO_PI, modes=grid))
    h = M.make_one_body(sp)
    w = M.make_interaction(sp, func=lambda x: 1.0 + np.cos(x))
    return F.plane_wave_modes(sp, h, w, n_modes), sp, h, w


def product_state(basis, u):
    occ = basis.occupations
    n = basis.n_particles
    return np.array([
        np.sqrt(factorial(n) / np.prod([factorial(int(o)) for o in row]))
        * np.prod(np.asarray(u, dtype=complex) ** row) for row in occ])


class TestBasis:
    def test_size_and_order(self):
        basis = F.FockBasis.build(3, 4)
        assert basis.size == comb(4 + 3 - 1, 3 - 1)
        assert np.all(np.diff(basis.codes) > 0)
        assert basis.occupations.sum(axis=1).tolist() == [4] * basis.size

    def test_index_roundtrip(self):
        basis = F.FockBasis.build(4, 3)
        idx = basis.index_of(basis.occupations)
        assert np.array_equal(idx, np.arange(basis.size))
        with pytest.raises(KeyError):
            basis.index_of(np.array([[5, 0, 0, 0]]))

    def test_basis_too_large(self):
        modes, *_ = cos_modes(5)
        with pytest.raises(F.BasisTooLarge):
            F.build_hamiltonian(modes, 40, nnz_cap=1e4)


class TestHamiltonian:
    def test_two_mode_two_particle_oracle(self):
        """Hand-built first-quantized 3x3 matrix on the symmetric basis."""
        modes, sp, h, w = cos_modes(2)
        op = F.build_hamiltonian(modes, 2, lam=1.0)
        f = modes.functions
        x = sp.axes[0]
        wt = sp.weight
        pair = 1.0 + np.cos(x[:, None] - x[None, :])

        def hker(a, b):
            return np.vdot(f[a], h.apply(f[b].reshape(sp.shape)).ravel()) * wt

        def wker(a, b, c, d):
            return np.einsum("i,j,ij,i,j->", f[a].conj(), f[b].conj(), pair,
                             f[c], f[d]) * wt * wt

        sym = {(2, 0): [(1.0, (0, 0))],
               (1, 1): [(2 ** -0.5, (0, 1)), (2 ** -0.5, (1, 0))],
               (0, 2): [(1.0, (1, 1))]}
        keys = [(0, 2), (1, 1), (2, 0)]  # lexicographic, as in FockBasis
        href = np.zeros((3, 3), dtype=complex)
        for r, ka in enumerate(keys):
            for c, kb in enumerate(keys):
                val = 0.0
                for ca, pa in sym[ka]:
                    for cb, pb in sym[kb]:
                        one = 0.0
                        if pa[1] == pb[1]:
                            one += hker(pa[0], pb[0])
                        if pa[0] == pb[0]:
                            one += hker(pa[1], pb[1])
                        val += np.conj(ca) * cb * (one + wker(*pa, *pb))
                href[r, c] = val
        assert np.max(np.abs(op.matrix.toarray() - href)) < 1e-14

    def test_product_state_energy_identity(self):
        modes, *_ = cos_modes(3)
        rng = np.random.default_rng(7)
        op = F.build_hamiltonian(modes, 4)  # lam = 1/(N-1)
        for _ in range(20):
            a = rng.normal(size=3) + 1j * rng.normal(size=3)
            a /= np.linalg.norm(a)
            amps = product_state(op.basis, a)
            e_many = float(np.real(np.vdot(amps, op.matrix @ amps)))
            assert abs(e_many - 4 * F.gp_energy_modes(a, modes, 1.0)) < 1e-10

    def test_free_spectrum_and_condensate(self):
        sp = M.build_model(M.ModelConfig(dim=1, extent=TWO_PI, modes=32))
        h = M.make_one_body(sp)
        w0 = M.make_interaction(sp, func=lambda x: 0.0 * x)
        modes = F.plane_wave_modes(sp, h, w0, 3)
        op = F.build_hamiltonian(modes, 5, lam=1.0)
        vals, vecs = F.lowest_eigenpairs(op, 4)
        assert abs(vals[0]) < 1e-12
        ground_occ = op.basis.occupations[int(np.argmax(np.abs(vecs[:, 0])))]
        assert ground_occ.tolist() == [5, 0, 0]
        # one-body eigenvalues are 0, 1, 1: first excited many-body level is 1
        assert abs(vals[1] - 1.0) < 1e-12 and abs(vals[2] - 1.0) < 1e-12

    def test_hermitian_and_number_conserving(self):
        modes, *_ = cos_modes(4)
        op = F.build_hamiltonian(modes, 3)
        diff = abs(op.matrix - op.matrix.conj().T).max()
        assert diff < 1e-12

    def test_momentum_block_structure(self):
        modes, *_ = cos_modes(5)
        op = F.build_hamiltonian(modes, 4)
        ptot = F.total_momentum_labels(op)
        mat = op.matrix.toarray()
        off_block = mat[ptot[:, None] != ptot[None, :]]
        assert np.max(np.abs(off_block)) == 0.0

    def test_energy_per_particle_monotone(self):
        modes, *_ = cos_modes(5)
        previous = -np.inf
        for n in range(2, 13):
            op = F.build_hamiltonian(modes, n)
            val = float(F.lowest_eigenpairs(op, 1)[0][0]) / n
            assert val >= previous - 1e-12
            previous = val

    def test_variational_upper_bound(self):
        modes, *_ = cos_modes(5)
        e_gp = F.minimize_gp_modes(modes, seed=0)["energy"]
        for n in (4, 8):
            op = F.build_hamiltonian(modes, n)
            assert float(F.lowest_eigenpairs(op, 1)[0][0]) <= n * e_gp + 1e-10


class TestEnergyBounds:
    def test_two_sided_bound_ladder(self):
        modes, sp, h, w = cos_modes(5)
        e_gp = F.minimize_gp_modes(modes, seed=0)["energy"]
        epp = {}
        for n in range(4, 13):
            op = F.build_hamiltonian(modes, n)
            epp[n] = float(F.lowest_eigenpairs(op, 1)[0][0]) / n
        rep = F.energy_bounds_check(epp, e_gp, w)
        assert rep["gap_decreasing"]
        assert abs(rep["constant"] - 2.0) < 1e-12  # w1(0) + w2(0) for 1 + cos

    def test_mixed_sign_constant_is_series_abs_sum(self, torus64):
        w = M.make_interaction(torus64, func=lambda x: np.cos(x) - np.cos(2 * x))
        w1, w2 = w.split_samples()
        constant = w1.flat[0] + w2.flat[0]
        assert abs(constant - np.sum(np.abs(w.series))) < 1e-12

    def test_bound_violation_raises(self, cos_interaction):
        with pytest.raises(F.BoundViolation):
            F.energy_bounds_check({5: 1.0}, 0.5, cos_interaction)

    def test_free_case_equality(self):
        sp = M.build_model(M.ModelConfig(dim=1, extent=TWO_PI, modes=32))
        h = M.make_one_body(sp)
        w0 = M.make_interaction(sp, func=lambda x: 0.0 * x)
        modes = F.plane_wave_modes(sp, h, w0, 3)
        op = F.build_hamiltonian(modes, 6)
        e_pp = float(F.lowest_eigenpairs(op, 1)[0][0]) / 6
        assert abs(e_pp - 0.0) < 1e-12  # equals e_gp exactly


class TestReducedDensityMatrices:
    def test_product_state(self):
        basis = F.FockBasis.build(3, 4)
        rng = np.random.default_rng(0)
        a = rng.normal(size=3) + 1j * rng.normal(size=3)
        a /= np.linalg.norm(a)
        psi = product_state(basis, a)
        for k in (1, 2):
            rdm = F.reduced_density_matrix(psi, basis, k)
            bk = F.FockBasis.build(3, k)
            ref = product_state(bk, a)
            assert np.max(np.abs(rdm.matrix - np.outer(ref, ref.conj()))) < 1e-12
            assert abs(rdm.trace - 1.0) < 1e-10

    def test_partial_trace_consistency(self):
        basis = F.FockBasis.build(3, 5)
        rng = np.random.default_rng(1)
        psi = rng.normal(size=basis.size) + 1j * rng.normal(size=basis.size)
        psi /= np.linalg.norm(psi)
        g3 = F.reduced_density_matrix(psi, basis, 3)
        g2 = F.reduced_density_matrix(psi, basis, 2)
        reduced, bdown = F.trace_one_particle(g3.matrix, g3.basis)
        assert bdown.n_particles == 2
        assert np.max(np.abs(reduced - g2.matrix)) < 1e-10

    def test_psd_and_trace(self):
        basis = F.FockBasis.build(4, 4)
        rng = np.random.default_rng(2)
        for _ in range(25):
            psi = rng.normal(size=basis.size) + 1j * rng.normal(size=basis.size)
            psi /= np.linalg.norm(psi)
            rdm = F.reduced_density_matrix(psi, basis, 2)
            assert abs(rdm.trace - 1.0) < 1e-10
            assert np.linalg.eigvalsh(rdm.matrix)[0] > -1e-10

    def test_condensate_fraction_grows_with_n(self):
        modes, *_ = cos_modes(5)
        fractions = []
        for n in (4, 8, 12):
            op = F.build_hamiltonian(modes, n)
            _, vecs = F.lowest_eigenpairs(op, 1)
            rdm = F.reduced_density_matrix(vecs[:, 0], op.basis, 1)
            fractions.append(rdm.eigenvalues()[0])
        assert all(b > a for a, b in zip(fractions, fractions[1:]))
        assert fractions[-1] > 0.9


class TestInequalities:
    def test_hoffmann_ostenhof_random_states(self):
        rng = np.random.default_rng(3)
        m = 8
        h_mat = 2.0 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1)
        h_mat += np.diag(rng.uniform(0, 1, m))
        basis = F.FockBasis.build(m, 3)
        strict = 0
        for _ in range(200):
            psi = rng.normal(size=basis.size) + 1j * rng.normal(size=basis.size)
            psi /= np.linalg.norm(psi)
            rep = F.hoffmann_ostenhof_check(psi, basis, h_mat)
            assert rep["slack"] >= -1e-10
            if rep["slack"] > 1e-10:
                strict += 1
        assert strict > 150  # complex phases make the inequality strict

    def test_hoffmann_ostenhof_equality_case(self):
        rng = np.random.default_rng(4)
        m = 6
        h_mat = 2.0 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1)
        basis = F.FockBasis.build(m, 3)
        u = np.abs(rng.normal(size=m))
        u /= np.linalg.norm(u)
        psi = product_state(basis, u)
        rep = F.hoffmann_ostenhof_check(psi, basis, h_mat)
        assert abs(rep["slack"]) < 1e-10

    def test_hoffmann_ostenhof_rejects_bad_h(self):
        basis = F.FockBasis.build(3, 2)
        with pytest.raises(ValueError):
            F.hoffmann_ostenhof_check(np.ones(basis.size), basis,
                                      np.array([[1.0, 0.5, 0], [0.5, 1, 0],
                                                [0, 0, 1.0]]))

    def test_interaction_bound_equality_case(self, torus64, cos_interaction):
        rng = np.random.default_rng(5)
        cells = rng.integers(0, torus64.size, size=6)
        eta = np.bincount(cells, minlength=torus64.size).reshape(
            torus64.shape) / torus64.weight
        rep = F.interaction_lower_bound_check(cos_interaction, eta, cells)
        assert abs(rep["slack"]) < 1e-10

    def test_interaction_bound_random_configs(self, torus64, cos_interaction):
        rng = np.random.default_rng(6)
        eta = 6 * np.ones(torus64.shape) / torus64.volume
        for _ in range(500):
            cells = rng.integers(0, torus64.size, size=6)
            rep = F.interaction_lower_bound_check(cos_interaction, eta, cells)
            assert rep["slack"] >= -1e-10

    def test_interaction_bound_two_particles(self, torus64, cos_interaction):
        rng = np.random.default_rng(7)
        eta = np.zeros(torus64.shape)
        for _ in range(100):
            cells = rng.integers(0, torus64.size, size=2)
            rep = F.interaction_lower_bound_check(cos_interaction, eta, cells)
            # eta = 0 reduces the bound to positive definiteness of w1
            assert rep["slack"] >= -1e-10


class TestExcitationDecomposition:
    def test_pure_condensate(self):
        basis = F.FockBasis.build(3, 5)
        u = np.array([1.0, 0.0, 0.0], dtype=complex)
        psi = product_state(basis, u)
        phis = F.excitation_decompose(psi, basis, mode0=0)
        assert abs(phis[0][0] - 1.0) < 1e-12
        assert all(np.max(np.abs(p)) < 1e-12 for p in phis[1:])

    def test_isometry_and_roundtrip(self):
        basis = F.FockBasis.build(4, 4)
        rng = np.random.default_rng(8)
        psi = rng.normal(size=basis.size) + 1j * rng.normal(size=basis.size)
        psi /= np.linalg.norm(psi)
        phis = F.excitation_decompose(psi, basis, mode0=1)
        total = sum(float(np.vdot(p, p).real) for p in phis)
        assert abs(total - 1.0) < 1e-12
        back = F.excitation_recompose(phis, basis, mode0=1)
        assert np.max(np.abs(back - psi)) < 1e-12


class TestQuadraticHamiltonianED:
    def test_ground_energy_against_symplectic(self):
        modes, *_ = cos_modes(5)
        gpres = F.minimize_gp_modes(modes, seed=0)
        quad = B.build_hessian_from_modes(modes.h_mat, modes.w_tensor,
                                          gpres["alpha"], g=1.0)
        spec = B.diagonalize(quad, ladder=4)
        sectors = F.BosonSectors(4, 12)
        hq = F.build_quadratic_hamiltonian(sectors, quad.a, quad.b)
        vals = np.linalg.eigvalsh(hq.toarray())[:4]
        tail = abs(vals[0] - spec.ground_energy)
        assert tail < 1e-7  # truncation tail at n_max = 12
        assert np.max(np.abs(vals - np.array(spec.ladder))) < 1e-6

    def test_degenerate_gp_raises(self):
        # attractive interaction localizes the condensate; torus translates
        # produce distinct minimizers and the theorem hypotheses fail
        sp = M.build_model(M.ModelConfig(dim=1, extent=TWO_PI, modes=16))
        h = M.make_one_body(sp)
        w = M.make_interaction(sp, func=lambda x: -3.0 * np.cos(x))
        modes = F.plane_wave_modes(sp, h, w, 5)
        with pytest.raises((F.DegenerateGP, B.DegenerateHessian)):
            F.excitation_spectrum_convergence(modes, [4, 6], j_count=2,
                                              n_max_quad=6, seed=0)

    def test_free_case_deltas_vanish(self):
        sp = M.build_model(M.ModelConfig(dim=1, extent=TWO_PI, modes=32))
        h = M.make_one_body(sp)
        w0 = M.make_interaction(sp, func=lambda x: 0.0 * x)
        modes = F.plane_wave_modes(sp, h, w0, 3)
        rep = F.excitation_spectrum_convergence(modes, [4, 6], j_count=3,
                                                n_max_quad=8, seed=0)
        for n in (4, 6):
            assert np.max(rep["deltas"][n]) < 1e-9
            assert rep["overlaps"][n] > 1.0 - 1e-9


class TestEigenmodeBasis:
    def _trapped(self, n_modes=4):
        sp = M.build_model(M.ModelConfig(dim=1, extent=8.0, modes=48,
                                         bc=M.DIRICHLET))
        h = M.make_one_body(sp, lambda x: 0.5 * (x - 4.0) ** 2)
        w = M.make_interaction(sp, func=M.gaussian_interaction(0.8, 1.0))
        return F.eigenmode_modes(sp, h, w, n_modes), sp, h, w

    def test_orthonormal_and_diagonal(self):
        modes, sp, h, w = self._trapped()
        gram = modes.functions.conj() @ modes.functions.T * sp.weight
        assert np.max(np.abs(gram - np.eye(4))) < 1e-10
        offdiag = modes.h_mat - np.diag(np.diag(modes.h_mat))
        assert np.max(np.abs(offdiag)) < 1e-10
        assert np.all(np.diff(np.diag(modes.h_mat).real) > 0)

    def test_w_tensor_symmetries(self):
        modes, *_ = self._trapped()
        wt = modes.w_tensor
        assert np.max(np.abs(wt - wt.transpose(1, 0, 3, 2))) < 1e-12
        assert np.max(np.abs(wt.conj() - wt.transpose(2, 3, 0, 1))) < 1e-12

    def test_quadrature_tensor_matches_grid_energy(self):
        # validates the quadrature W tensor against the convolution route
        modes, sp, h, w = self._trapped()
        rng = np.random.default_rng(3)
        alpha = rng.normal(size=4) + 1j * rng.normal(size=4)
        alpha /= np.linalg.norm(alpha)
        u_grid = (alpha @ modes.functions).reshape(sp.shape)
        p = G.GPProblem(sp, h, w, 1.7)
        assert abs(F.gp_energy_modes(alpha, modes, 1.7)
                   - G.gp_energy(u_grid, p)) < 1e-10


class TestRotatedModeSet:
    def test_energy_invariant_under_rotation(self):
        modes, *_ = cos_modes(4)
        rng = np.random.default_rng(4)
        alpha0 = rng.normal(size=4) + 1j * rng.normal(size=4)
        alpha0 /= np.linalg.norm(alpha0)
        rotated = F.rotate_modeset(modes, alpha0)
        from meanfield_bose_lab.bogoliubov import _householder_complement
        rot = np.column_stack([alpha0, _householder_complement(alpha0)])
        for _ in range(5):
            beta = rng.normal(size=4) + 1j * rng.normal(size=4)
            beta /= np.linalg.norm(beta)
            assert abs(F.gp_energy_modes(beta, rotated, 1.0)
                       - F.gp_energy_modes(rot @ beta, modes, 1.0)) < 1e-12

    def test_spectral_convergence_basis_independent(self):
        # a randomly rotated mode basis must reproduce identical spectra
        modes, *_ = cos_modes(4)
        rng = np.random.default_rng(5)
        z = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        unitary = np.linalg.qr(z)[0]
        scrambled = F.ModeSet(
            space=modes.space,
            functions=unitary.T @ modes.functions,
            h_mat=unitary.conj().T @ modes.h_mat @ unitary,
            w_tensor=np.einsum("am,bn,abcd,cp,dq->mnpq",
                               unitary.conj(), unitary.conj(),
                               modes.w_tensor, unitary, unitary,
                               optimize=True))
        ladder = [4, 8]
        ref = F.excitation_spectrum_convergence(modes, ladder, j_count=3,
                                                n_max_quad=8, seed=0)
        rot = F.excitation_spectrum_convergence(scrambled, ladder, j_count=3,
                                                n_max_quad=8, seed=0)
        for n in ladder:
            assert np.max(np.abs(ref["deltas"][n] - rot["deltas"][n])) < 1e-7
            assert abs(ref["overlaps"][n] - rot["overlaps"][n]) < 1e-7
        assert abs(ref["e_gp_discrete"] - rot["e_gp_discrete"]) < 1e-9


class TestDiscreteGP:
    def test_cosine_minimum_is_flat(self):
        modes, *_ = cos_modes(5)
        rep = F.minimize_gp_modes(modes, seed=0)
        assert abs(rep["energy"] - 0.5) < 1e-10
        assert abs(abs(rep["alpha"][0]) - 1.0) < 1e-6
        assert not rep["degenerate"]

    def test_mode_energy_matches_grid_energy(self):
        modes, sp, h, w = cos_modes(5)
        rng = np.random.default_rng(9)
        alpha = rng.normal(size=5) + 1j * rng.normal(size=5)
        alpha /= np.linalg.norm(alpha)
        u_grid = (alpha @ modes.functions).reshape(sp.shape)
        p = G.GPProblem(sp, h, w, 1.0)
        assert abs(F.gp_energy_modes(alpha, modes, 1.0)
                   - G.gp_energy(u_grid, p)) < 1e-10
