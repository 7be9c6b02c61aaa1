"""Time-dependent Gross-Pitaevskii flow and Bogoliubov fluctuation dynamics.

The condensate follows the gauged GP equation
i du/dt = (-Lap + V + g (w*|u|^2) - eps(t)) u integrated by Strang splitting
(the nonlinear phase step is exact because |u| is invariant under it).  The
fluctuation vector lives on a number-truncated Fock space over the full mode
set and follows i dPhi/dt = H(t) Phi with the quadratic Hamiltonian rebuilt
from the instantaneous condensate; leakage into the condensate mode is
projected out each step and logged.  Exact many-body propagation of small
systems provides the reference.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Sequence

import numpy as np
import scipy.sparse as sparse

from . import gp as _gp
from .fock import BosonSectors, ModeSet, build_hamiltonian
from .model import PERIODIC


class StepCollapse(RuntimeError):
    """Time step underflowed while chasing the drift tolerances."""


class TruncationLeak(RuntimeError):
    """Top Fock sector carries too much norm; raise n_max."""


# ---------------------------------------------------------------------------
# condensate propagation
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class GPTrajectory:
    problem: "_gp.GPProblem"
    times: np.ndarray
    states: np.ndarray
    eps: np.ndarray
    norm_drift: float
    energy_drift: float
    dt: float


def _gauge_eps(rho: np.ndarray, p: "_gp.GPProblem") -> float:
    return 0.5 * p.g * float(np.sum(p.w.convolve(rho) * rho) * p.space.weight)


def _run_split_step(u0: np.ndarray, p: "_gp.GPProblem", t_final: float,
                    dt: float):
    sp = p.space
    steps = max(1, int(round(t_final / dt)))
    dt = t_final / steps
    half_kin = np.exp(-0.5j * dt * sp.kinetic)
    states = np.empty((steps + 1,) + sp.shape, dtype=complex)
    eps = np.empty(steps + 1)
    u = u0.copy()
    states[0] = u
    eps[0] = _gauge_eps(np.abs(u) ** 2, p)
    for s in range(steps):
        u = sp.from_modes(half_kin * sp.to_modes(u))
        rho = np.abs(u) ** 2
        e_t = _gauge_eps(rho, p)
        phase = p.h.potential + p.g * p.w.convolve(rho) - e_t
        u = u * np.exp(-1j * dt * phase)
        u = sp.from_modes(half_kin * sp.to_modes(u))
        states[s + 1] = u
        eps[s + 1] = _gauge_eps(np.abs(u) ** 2, p)
    times = np.arange(steps + 1) * dt
    return times, states, eps, dt


def evolve_gp(u0, p: "_gp.GPProblem", t_final: float, dt: float = 1e-2,
              norm_tol: float = 1e-8, energy_tol: float = 1e-6,
              min_dt: float = 1e-8) -> GPTrajectory:
    """Strang split-step propagation with drift-controlled step halving."""
    if p.space.bc != PERIODIC:
        raise ValueError("time propagation is restricted to periodic spaces")
    sp = p.space
    vals = u0.values if hasattr(u0, "values") else np.asarray(u0, dtype=complex)
    vals = vals.reshape(sp.shape)
    vals = vals / sp.norm(vals)
    e0 = _gp.gp_energy(vals, p)
    scale = max(1.0, abs(e0))
    while True:
        times, states, eps, dt_used = _run_split_step(vals, p, t_final, dt)
        norms = np.array([sp.norm(s) for s in states])
        energies = np.array([_gp.gp_energy(s, p) for s in states])
        norm_drift = float(np.max(np.abs(norms - 1.0)))
        energy_drift = float(np.max(np.abs(energies - e0)) / scale)
        if norm_drift <= norm_tol and energy_drift <= energy_tol:
            return GPTrajectory(problem=p, times=times, states=states, eps=eps,
                                norm_drift=norm_drift,
                                energy_drift=energy_drift, dt=dt_used)
        dt *= 0.5
        if dt < min_dt:
            raise StepCollapse(
                f"dt underflow at {dt:.2e}: drifts {norm_drift:.2e}/{energy_drift:.2e}")


# ---------------------------------------------------------------------------
# quadratic Hamiltonian assembly over number sectors
# ---------------------------------------------------------------------------

class QuadraticAssembler:
    """Pattern-cached assembly of sum a_ij a'_i a_j + pairing over sectors."""

    def __init__(self, sectors: BosonSectors):
        self.sectors = sectors
        m = sectors.n_modes
        dim = sectors.total_dim
        rows, cols, amps, terms = [], [], [], []
        for n in range(1, sectors.n_max + 1):
            off = sectors.offsets[n]
            for i in range(m):
                ai = sectors.lower[n][i]
                for j in range(m):
                    prod = (ai.conj().T @ sectors.lower[n][j]).tocoo()
                    rows.append(prod.row + off)
                    cols.append(prod.col + off)
                    amps.append(prod.data)
                    terms.append(np.full(prod.nnz, i * m + j))
        n_number_terms = m * m
        for n in range(0, sectors.n_max - 1):
            off_from = sectors.offsets[n]
            off_to = sectors.offsets[n + 2]
            for i in range(m):
                for j in range(m):
                    up = (self.sectors.lower[n + 2][i].conj().T
                          @ self.sectors.lower[n + 1][j].conj().T).tocoo()
                    tid = n_number_terms + i * m + j
                    rows.append(up.row + off_to)
                    cols.append(up.col + off_from)
                    amps.append(up.data)
                    terms.append(np.full(up.nnz, tid))
                    # hermitian conjugate block
                    rows.append(up.col + off_from)
                    cols.append(up.row + off_to)
                    amps.append(up.data.conj())
                    terms.append(np.full(up.nnz, tid + m * m))
        self.rows = np.concatenate(rows) if rows else np.zeros(0, dtype=int)
        self.cols = np.concatenate(cols) if cols else np.zeros(0, dtype=int)
        self.amps = np.concatenate(amps) if amps else np.zeros(0)
        self.terms = np.concatenate(terms).astype(int) if terms else np.zeros(0, dtype=int)
        self.dim = dim
        self.n_number_terms = n_number_terms

    def assemble(self, h_mat: np.ndarray, b_mat: np.ndarray) -> sparse.csr_matrix:
        m = self.sectors.n_modes
        coeffs = np.concatenate([
            np.asarray(h_mat, dtype=complex).ravel(),
            0.5 * np.asarray(b_mat, dtype=complex).ravel(),
            0.5 * np.asarray(b_mat, dtype=complex).conj().ravel()])
        vals = self.amps * coeffs[self.terms]
        return sparse.csr_matrix((vals, (self.rows, self.cols)),
                                 shape=(self.dim, self.dim))


def _mode_coefficients(modes: ModeSet, u_grid: np.ndarray) -> np.ndarray:
    sp = modes.space
    return modes.functions.conj() @ u_grid.ravel() * sp.weight


def bogoliubov_blocks(modes: ModeSet, alpha: np.ndarray, g: float):
    """One-body and pairing blocks of the fluctuation Hamiltonian at u = alpha.

    Returns (h_b, k2, eps) with h_b = h + g (w*|u|^2) - eps + Q K1~ Q and
    k2 = Q K2~ conj(Q); everything in the mode basis, condensate included.
    """
    w = modes.w_tensor
    mf = np.einsum("mpnq,p,q->mn", w, alpha.conj(), alpha, optimize=True)
    k1t = np.einsum("mqpn,p,q->mn", w, alpha, alpha.conj(), optimize=True)
    k2t = np.einsum("mnpq,p,q->mn", w, alpha, alpha, optimize=True)
    eps = 0.5 * g * float(np.real(np.einsum(
        "mnpq,m,n,p,q", w, alpha.conj(), alpha.conj(), alpha, alpha)))
    q = np.eye(len(alpha), dtype=complex) - np.outer(alpha, alpha.conj())
    k1 = q @ (g * k1t) @ q
    k2 = q @ (g * k2t) @ q.conj()
    h_b = modes.h_mat + g * mf - eps * np.eye(len(alpha)) + k1
    return h_b, 0.5 * (k2 + k2.T), eps


# ---------------------------------------------------------------------------
# ladder helpers on sector vectors
# ---------------------------------------------------------------------------

def _annihilate(sectors: BosonSectors, vec: np.ndarray,
                weights: np.ndarray) -> np.ndarray:
    """Apply a_u = sum_i conj(alpha_i) a_i; weights = conj(alpha)."""
    out = np.zeros_like(vec)
    for n in range(1, sectors.n_max + 1):
        seg = vec[sectors.sector_slice(n)]
        acc = None
        for i in range(sectors.n_modes):
            if weights[i] == 0:
                continue
            term = sectors.lower[n][i] @ seg
            acc = term * weights[i] if acc is None else acc + term * weights[i]
        if acc is not None:
            out[sectors.sector_slice(n - 1)] = acc
    return out


def _create(sectors: BosonSectors, vec: np.ndarray,
            alpha: np.ndarray) -> np.ndarray:
    out = np.zeros_like(vec)
    for n in range(1, sectors.n_max + 1):
        seg = vec[sectors.sector_slice(n - 1)]
        acc = None
        for i in range(sectors.n_modes):
            if alpha[i] == 0:
                continue
            term = sectors.lower[n][i].conj().T @ seg
            acc = term * alpha[i] if acc is None else acc + term * alpha[i]
        if acc is not None:
            out[sectors.sector_slice(n)] = acc
    return out


def project_out_mode(sectors: BosonSectors, vec: np.ndarray,
                     alpha: np.ndarray) -> np.ndarray:
    """Project onto states with zero occupation of the mode ``alpha``.

    Normal-ordered expansion sum_j (-1)^j / j! (a'_u)^j (a_u)^j, exact on a
    number-truncated space.
    """
    weights = np.conj(alpha)
    out = vec.copy()
    lowered = vec
    sign = -1.0
    for j in range(1, sectors.n_max + 1):
        lowered = _annihilate(sectors, lowered, weights)
        if not np.any(lowered):
            break
        lifted = lowered
        for _ in range(j):
            lifted = _create(sectors, lifted, alpha)
        out = out + (sign / factorial(j)) * lifted
        sign = -sign
    return out


def mode_occupancy(sectors: BosonSectors, vec: np.ndarray,
                   alpha: np.ndarray) -> float:
    """< a'_u a_u > of the sector vector."""
    low = _annihilate(sectors, vec, np.conj(alpha))
    return float(np.vdot(low, low).real)


# ---------------------------------------------------------------------------
# fluctuation propagation
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class BogoliubovTrajectory:
    sectors: BosonSectors
    times: np.ndarray
    vectors: np.ndarray
    norms: np.ndarray
    occupancy: np.ndarray
    leakage: np.ndarray
    sector_norms: np.ndarray


def evolve_bogoliubov(phi0: Sequence[np.ndarray], traj: GPTrajectory,
                      modes: ModeSet, n_max: int,
                      top_sector_tol: float = 1e-2,
                      hermiticity_tol: float = 1e-12) -> BogoliubovTrajectory:
    """RK4 integration of i dPhi/dt = H(t) Phi on the truncated Fock space.

    The RK4 step is two condensate steps long so that stage times coincide
    with stored snapshots.  Condensate-mode leakage is projected out after
    every step and logged; the top sector must stay below
    ``top_sector_tol`` of the norm.
    """
    p = traj.problem
    sectors = BosonSectors(modes.n_modes, n_max)
    assembler = QuadraticAssembler(sectors)
    n_snap = len(traj.times)
    if n_snap < 3 or (n_snap - 1) % 2 != 0:
        raise ValueError("trajectory needs an even number of steps")
    phi = np.zeros(sectors.total_dim, dtype=complex)
    for n, comp in enumerate(phi0):
        if n > n_max:
            break
        phi[sectors.sector_slice(n)] = np.asarray(comp, dtype=complex)

    alphas = [(_mode_coefficients(modes, traj.states[i])) for i in range(n_snap)]
    hams = {}

    def ham(idx):
        if idx not in hams:
            a = alphas[idx]
            a = a / np.linalg.norm(a)
            h_b, k2, _ = bogoliubov_blocks(modes, a, p.g)
            herm = np.max(np.abs(h_b - h_b.conj().T))
            if herm > hermiticity_tol * max(1.0, np.max(np.abs(h_b))):
                raise AssertionError(f"one-body block not Hermitian: {herm:.2e}")
            hams[idx] = assembler.assemble(h_b, k2)
            for stale in [k for k in hams if k < idx - 2]:
                del hams[stale]
        return hams[idx]

    h_step = 2.0 * traj.dt
    n_steps = (n_snap - 1) // 2
    out_times = traj.times[::2]
    vectors = np.empty((n_steps + 1, sectors.total_dim), dtype=complex)
    norms = np.empty(n_steps + 1)
    occupancy = np.empty(n_steps + 1)
    leakage = np.zeros(n_steps + 1)
    sec_norms = np.empty((n_steps + 1, n_max + 1))

    def log(idx, vec):
        vectors[idx] = vec
        norms[idx] = float(np.linalg.norm(vec))
        a = alphas[2 * idx]
        occupancy[idx] = mode_occupancy(sectors, vec, a / np.linalg.norm(a))
        sec_norms[idx] = sectors.sector_norms(vec)

    log(0, phi)
    for s in range(n_steps):
        i0, i1, i2 = 2 * s, 2 * s + 1, 2 * s + 2
        h0, h1, h2 = ham(i0), ham(i1), ham(i2)
        k1 = -1j * (h0 @ phi)
        k2 = -1j * (h1 @ (phi + 0.5 * h_step * k1))
        k3 = -1j * (h1 @ (phi + 0.5 * h_step * k2))
        k4 = -1j * (h2 @ (phi + h_step * k3))
        phi = phi + (h_step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        a = alphas[i2]
        a = a / np.linalg.norm(a)
        projected = project_out_mode(sectors, phi, a)
        leakage[s + 1] = float(np.linalg.norm(phi - projected))
        phi = projected
        log(s + 1, phi)
    top_fraction = sec_norms[:, -1] / np.maximum(norms ** 2, 1e-300)
    if float(np.max(top_fraction)) > top_sector_tol:
        raise TruncationLeak(
            f"top sector holds {float(np.max(top_fraction)):.2%} of the norm")
    return BogoliubovTrajectory(sectors=sectors, times=out_times,
                                vectors=vectors, norms=norms,
                                occupancy=occupancy, leakage=leakage,
                                sector_norms=sec_norms)


# ---------------------------------------------------------------------------
# exact comparison
# ---------------------------------------------------------------------------

def condensate_dressed_state(sectors: BosonSectors, alpha: np.ndarray,
                             phis: Sequence[np.ndarray],
                             n_particles: int) -> np.ndarray:
    """sum_n a'_alpha^{N-n} phi_n / sqrt((N-n)!) in the N-particle basis."""
    if sectors.n_max < n_particles:
        raise ValueError("sectors must reach the particle number")
    total = np.zeros(sectors.dims[n_particles], dtype=complex)
    for n, comp in enumerate(phis):
        if n > n_particles:
            break
        vec = sectors.embed(n, np.asarray(comp, dtype=complex))
        for _ in range(n_particles - n):
            vec = _create(sectors, vec, alpha)
        total += vec[sectors.sector_slice(n_particles)] \
            / np.sqrt(factorial(n_particles - n))
    return total


def compare_exact(p: "_gp.GPProblem", n_list: Sequence[int], u0,
                  phis0: Sequence[np.ndarray], t_final: float,
                  dt: float = 2.5e-3, n_max: int = 8,
                  n_compare: int = 5, dense_cutoff: int = 4000) -> dict:
    """Norm distance between exact and condensate+Bogoliubov evolution.

    For each N the many-body state starts as the dressed state built from
    (u0, phi_n) and evolves exactly; the model state recombines the evolved
    condensate and fluctuations.  Reports D(N, t) on ``n_compare`` output
    times plus conservation diagnostics.
    """
    sp = p.space
    modes_all = _plane_wave_modeset_for(p)
    traj = evolve_gp(u0, p, t_final, dt=dt)
    fluct = evolve_bogoliubov(phis0, traj, modes_all, n_max=n_max)
    idx_out = np.linspace(0, len(fluct.times) - 1, n_compare).astype(int)
    out_times = fluct.times[idx_out]
    report = {"times": out_times, "distance": {}, "energy_drift": {},
              "norm_drift": {}, "gp_norm_drift": traj.norm_drift,
              "gp_energy_drift": traj.energy_drift,
              "orthogonality": float(np.max(fluct.occupancy)),
              "leakage_max": float(np.max(fluct.leakage)),
              "phi_norms": fluct.norms[idx_out],
              "occupancy": fluct.occupancy[idx_out],
              "leakage": fluct.leakage[idx_out],
              "sector_norms": fluct.sector_norms[idx_out]}
    alpha0 = _mode_coefficients(modes_all, traj.states[0])
    alpha0 = alpha0 / np.linalg.norm(alpha0)
    for n in n_list:
        lam = 1.0 / (n - 1)
        op = build_hamiltonian(modes_all, n, lam=lam)
        sectors_n = BosonSectors(modes_all.n_modes, n)
        psi0 = condensate_dressed_state(sectors_n, alpha0, phis0, n)
        h = op.matrix.toarray() if op.basis.size <= dense_cutoff else None
        if h is None:
            raise ValueError("exact comparison needs a dense-manageable basis")
        vals, vecs = np.linalg.eigh(h)
        coef0 = vecs.conj().T @ psi0
        dists = []
        e0 = float(np.real(np.vdot(psi0, h @ psi0)))
        norm_dev, energy_dev = 0.0, 0.0
        for ti, t in enumerate(out_times):
            psi_t = vecs @ (np.exp(-1j * vals * t) * coef0)
            norm_dev = max(norm_dev, abs(np.linalg.norm(psi_t) - np.linalg.norm(psi0)))
            energy_dev = max(energy_dev,
                             abs(float(np.real(np.vdot(psi_t, h @ psi_t))) - e0))
            snap = idx_out[ti]
            alpha_t = _mode_coefficients(modes_all, traj.states[2 * snap])
            alpha_t = alpha_t / np.linalg.norm(alpha_t)
            phis_t = [fluct.vectors[snap][fluct.sectors.sector_slice(m)]
                      for m in range(min(n, n_max) + 1)]
            model = condensate_dressed_state(sectors_n, alpha_t, phis_t, n)
            dists.append(float(np.linalg.norm(psi_t - model)))
        report["distance"][n] = np.array(dists)
        report["norm_drift"][n] = norm_dev
        report["energy_drift"][n] = energy_dev
    return report


def _plane_wave_modeset_for(p: "_gp.GPProblem") -> ModeSet:
    from .fock import plane_wave_modes
    return plane_wave_modes(p.space, p.h, p.w, p.space.modes)
