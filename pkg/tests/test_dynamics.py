import numpy as np
import pytest

from meanfield_bose_lab import dynamics as DY
from meanfield_bose_lab import fock as F
from meanfield_bose_lab import gp as G
from meanfield_bose_lab import model as M

from conftest import TWO_PI


def small_problem(modes=3, coeffs=(1.0, 1.0)):
    sp = M.build_model(M.ModelConfig(dim=1, extent=TWO_PI, modes=modes))
    h = M.make_one_body(sp)
    w = M.make_interaction(sp, func=M.cosine_interaction(list(coeffs), TWO_PI))
    return G.GPProblem(sp, h, w, 1.0)


class TestGPEvolution:
    def test_free_plane_wave_exact(self):
        sp = M.build_model(M.ModelConfig(dim=1, extent=TWO_PI, modes=16))
        h = M.make_one_body(sp)
        w0 = M.make_interaction(sp, func=lambda x: 0.0 * x)
        p = G.GPProblem(sp, h, w0, 0.0)
        x = sp.axes[0]
        u0 = np.exp(1j * x) / np.sqrt(TWO_PI)
        traj = DY.evolve_gp(u0, p, 1.0, dt=5e-3)
        exact = np.exp(1j * x) * np.exp(-1j) / np.sqrt(TWO_PI)
        assert np.max(np.abs(traj.states[-1] - exact)) <= 1e-8
        assert traj.norm_drift <= 1e-12

    def test_minimizer_density_stationary(self):
        sp = M.build_model(M.ModelConfig(dim=1, extent=TWO_PI, modes=32))
        h = M.make_one_body(sp)
        w = M.make_interaction(sp, func=lambda x: 1.0 + np.cos(x))
        p = G.GPProblem(sp, h, w, 1.0)
        sol = G.solve_gp(p, restarts=2, seed=0)
        traj = DY.evolve_gp(sol.u0, p, 2.0, dt=1e-2)
        dev = max(np.max(np.abs(np.abs(s) ** 2 - sol.u0.density()))
                  for s in traj.states)
        assert dev <= 1e-7

    def test_energy_conservation_horizon(self):
        sp = M.build_model(M.ModelConfig(dim=1, extent=TWO_PI, modes=64))
        h = M.make_one_body(sp)
        w = M.make_interaction(sp, func=lambda x: 1.0 + np.cos(x))
        p = G.GPProblem(sp, h, w, 1.0)
        x = sp.axes[0]
        u0 = 1.0 + 0.2 * np.exp(1j * x)
        u0 /= sp.norm(u0)
        traj = DY.evolve_gp(u0, p, 5.0, dt=1e-2)
        assert traj.energy_drift <= 1e-6
        assert traj.norm_drift <= 1e-8

    def test_requires_periodic(self):
        sp = M.build_model(M.ModelConfig(dim=1, extent=10.0, modes=16,
                                         bc=M.DIRICHLET))
        h = M.make_one_body(sp)
        w = M.make_interaction(sp, func=lambda x: 0.0 * x)
        p = G.GPProblem(sp, h, w, 0.0)
        with pytest.raises(ValueError):
            DY.evolve_gp(np.ones(16), p, 1.0)

    def test_step_collapse(self):
        p = small_problem(modes=8)
        u0 = np.ones(8, dtype=complex)
        u0 /= p.space.norm(u0)
        with pytest.raises(DY.StepCollapse):
            DY.evolve_gp(u0, p, 1.0, dt=0.5, energy_tol=1e-300, min_dt=0.3)


class TestBogoliubovEvolution:
    def test_free_sectors_decouple(self):
        sp = M.build_model(M.ModelConfig(dim=1, extent=TWO_PI, modes=3))
        h = M.make_one_body(sp)
        w0 = M.make_interaction(sp, func=lambda x: 0.0 * x)
        p = G.GPProblem(sp, h, w0, 0.0)
        u0 = np.ones(3, dtype=complex)
        u0 /= sp.norm(u0)
        traj = DY.evolve_gp(u0, p, 1.0, dt=2.5e-3)
        modes = F.plane_wave_modes(sp, h, w0, 3)
        # one excitation in the k = +1 plane-wave mode
        one = np.zeros(3, dtype=complex)
        kplus = int(np.nonzero(modes.labels == 1)[0][0])
        one[kplus] = 1.0
        fl = DY.evolve_bogoliubov([np.zeros(1, dtype=complex), one],
                                  traj, modes, n_max=4)
        final = fl.vectors[-1][fl.sectors.sector_slice(1)]
        expected = one * np.exp(-1j * 1.0)  # phase e^{-i k^2 t}, k = 1
        assert np.max(np.abs(final - expected)) <= 1e-8
        assert np.max(np.abs(fl.norms - 1.0)) <= 1e-10

    def test_vacuum_quench_parity(self):
        p = small_problem()
        u0 = np.ones(3, dtype=complex)
        u0 /= p.space.norm(u0)
        traj = DY.evolve_gp(u0, p, 1.0, dt=2.5e-3)
        modes = F.plane_wave_modes(p.space, p.h, p.w, 3)
        fl = DY.evolve_bogoliubov([np.array([1.0 + 0j])], traj, modes, n_max=8)
        odd_mass = fl.sector_norms[-1][1::2].sum()
        assert odd_mass <= 1e-10
        assert fl.sector_norms[-1][2] > 1e-3  # pairs are created
        assert np.max(np.abs(fl.norms - 1.0)) <= 1e-6
        assert np.max(fl.occupancy) <= 1e-6

    def test_rk4_fourth_order_self_convergence(self):
        # halving the step cuts the fluctuation error ~16x
        p = small_problem()
        u0 = np.ones(3, dtype=complex)
        u0 /= p.space.norm(u0)
        modes = F.plane_wave_modes(p.space, p.h, p.w, 3)
        phis0 = [np.array([1.0 + 0j])]
        finals = []
        for dt in (2e-2, 1e-2, 5e-3, 2.5e-3):
            traj = DY.evolve_gp(u0, p, 1.0, dt=dt)
            fl = DY.evolve_bogoliubov(phis0, traj, modes, n_max=8)
            finals.append(fl.vectors[-1])
        errs = [np.linalg.norm(finals[i] - finals[-1]) for i in range(3)]
        ratios = [errs[i] / errs[i + 1] for i in range(2)]
        assert all(10.0 < r < 24.0 for r in ratios)

    def test_strang_second_order_self_convergence(self):
        # the split-step condensate flow is second order: halving gives ~4x
        p = small_problem(modes=16)
        x = p.space.axes[0]
        u0 = 1.0 + 0.2 * np.exp(1j * x)
        u0 /= p.space.norm(u0)
        ref = DY.evolve_gp(u0, p, 1.0, dt=1.25e-4, energy_tol=1.0).states[-1]
        errs = []
        for dt in (4e-3, 2e-3, 1e-3):
            traj = DY.evolve_gp(u0, p, 1.0, dt=dt, energy_tol=1.0)
            errs.append(np.max(np.abs(traj.states[-1] - ref)))
        ratios = [errs[i] / errs[i + 1] for i in range(2)]
        assert all(3.0 < r < 5.5 for r in ratios)

    def test_truncation_leak_raises(self):
        p = small_problem(coeffs=(1.0, 4.0))  # strong quench
        u0 = np.ones(3, dtype=complex)
        u0 /= p.space.norm(u0)
        traj = DY.evolve_gp(u0, p, 2.0, dt=2.5e-3)
        modes = F.plane_wave_modes(p.space, p.h, p.w, 3)
        with pytest.raises(DY.TruncationLeak):
            DY.evolve_bogoliubov([np.array([1.0 + 0j])], traj, modes, n_max=2)


class TestCompareExact:
    def test_free_interaction_factorizes(self):
        sp = M.build_model(M.ModelConfig(dim=1, extent=TWO_PI, modes=3))
        h = M.make_one_body(sp)
        w0 = M.make_interaction(sp, func=lambda x: 0.0 * x)
        p = G.GPProblem(sp, h, w0, 0.0)
        x = sp.axes[0]
        u0 = np.exp(1j * x)
        u0 /= sp.norm(u0)
        rep = DY.compare_exact(p, [4, 8], u0, [np.array([1.0 + 0j])],
                               t_final=0.5, dt=2.5e-3, n_max=6)
        for n in (4, 8):
            assert np.max(rep["distance"][n]) <= 1e-8

    def test_distance_zero_at_start_and_decreasing(self):
        p = small_problem()
        u0 = np.ones(3, dtype=complex)
        u0 /= p.space.norm(u0)
        amp = 0.3
        phis0 = [np.array([np.sqrt(1 - amp ** 2)], dtype=complex),
                 np.array([0.0, amp, 0.0], dtype=complex)]
        rep = DY.compare_exact(p, [4, 8, 12], u0, phis0, t_final=0.5,
                               dt=2.5e-3, n_max=8)
        finals = []
        for n in (4, 8, 12):
            dist = rep["distance"][n]
            assert dist[0] <= 1e-10
            finals.append(dist[-1])
            assert rep["norm_drift"][n] <= 1e-10
            assert rep["energy_drift"][n] <= 1e-10
        assert all(a > b for a, b in zip(finals, finals[1:]))
        assert rep["orthogonality"] <= 1e-6
        assert rep["leakage_max"] <= 1e-6
