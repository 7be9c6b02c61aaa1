"""Finite-dimensional quantum de Finetti toolkit.

Coherent-state resolution of identity over the complex unit sphere, Husimi
measures of bosonic states, and the trace-norm comparison between reduced
density matrices and their coherent-state reconstructions, with Monte Carlo
error bands from batch means.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial
from typing import Optional

import numpy as np

from .fock import FockBasis, trace_one_particle


class BoundExceeded(AssertionError):
    """Measured trace-norm error beyond the quantitative bound plus MC band."""


@dataclass(eq=False)
class SymmetricState:
    """Bosonic density matrix on the N-particle symmetric space over C^dim."""

    dim: int
    n_particles: int
    matrix: np.ndarray
    basis: FockBasis

    @classmethod
    def from_matrix(cls, dim: int, n_particles: int, matrix: np.ndarray,
                    psd_tol: float = 1e-10, trace_tol: float = 1e-10):
        basis = FockBasis.build(dim, n_particles)
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (basis.size, basis.size):
            raise ValueError("matrix does not match the symmetric space")
        herm = np.max(np.abs(matrix - matrix.conj().T))
        if herm > 1e-10:
            raise ValueError(f"matrix not Hermitian ({herm:.2e})")
        tr = np.trace(matrix).real
        if abs(tr - 1.0) > trace_tol:
            raise ValueError(f"trace {tr} is not 1")
        if np.linalg.eigvalsh(matrix)[0] < -psd_tol:
            raise ValueError("matrix is not positive semidefinite")
        return cls(dim=dim, n_particles=n_particles, matrix=matrix, basis=basis)

    @classmethod
    def product(cls, u: np.ndarray, n_particles: int) -> "SymmetricState":
        u = np.asarray(u, dtype=complex).ravel()
        u = u / np.linalg.norm(u)
        basis = FockBasis.build(u.size, n_particles)
        vec = product_coefficients(u[None, :], basis)[0]
        return cls(dim=u.size, n_particles=n_particles,
                   matrix=np.outer(vec, vec.conj()), basis=basis)

    @classmethod
    def maximally_mixed(cls, dim: int, n_particles: int) -> "SymmetricState":
        basis = FockBasis.build(dim, n_particles)
        return cls(dim=dim, n_particles=n_particles,
                   matrix=np.eye(basis.size, dtype=complex) / basis.size,
                   basis=basis)

    @classmethod
    def random(cls, dim: int, n_particles: int, rng) -> "SymmetricState":
        basis = FockBasis.build(dim, n_particles)
        x = rng.normal(size=(basis.size, basis.size)) \
            + 1j * rng.normal(size=(basis.size, basis.size))
        mat = x @ x.conj().T
        mat = mat / np.trace(mat).real
        return cls(dim=dim, n_particles=n_particles, matrix=mat, basis=basis)


def schur_constant(dim: int, n_particles: int) -> int:
    """c_N = C(N + dim - 1, dim - 1), the resolution-of-identity weight."""
    return comb(n_particles + dim - 1, dim - 1)


def product_coefficients(us: np.ndarray, basis: FockBasis) -> np.ndarray:
    """Symmetric-basis coefficient vectors of u^{(x) N} for each row u.

    <mu | u^N> = sqrt(N! / prod mu_i!) prod_i u_i^{mu_i}.
    """
    us = np.atleast_2d(np.asarray(us, dtype=complex))
    occ = basis.occupations
    mono = np.prod(us[:, None, :] ** occ[None, :, :], axis=2)
    weights = np.array([
        np.sqrt(factorial(basis.n_particles)
                / np.prod([factorial(int(o)) for o in row]))
        for row in occ])
    return mono * weights[None, :]


def sample_sphere(dim: int, count: int, rng) -> np.ndarray:
    """Uniform samples on the complex unit sphere via normalized Gaussians."""
    z = rng.normal(size=(count, dim)) + 1j * rng.normal(size=(count, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _batch_slices(total: int, batches: int):
    size = total // batches
    return [slice(b * size, (b + 1) * size if b < batches - 1 else total)
            for b in range(batches)]


def coherent_resolution_check(dim: int, n_particles: int, samples: int = 10_000,
                              seed: Optional[int] = None,
                              batches: int = 20) -> dict:
    """Monte Carlo check of c_N int |u^N><u^N| du = identity.

    Reports the operator- and Frobenius-norm deviation of the sample mean
    from the identity together with a 3-sigma Frobenius band from batch
    means.
    """
    basis = FockBasis.build(dim, n_particles)
    if basis.size > 500:
        raise ValueError("symmetric space too large for a sane MC check")
    rng = np.random.default_rng(seed)
    us = sample_sphere(dim, samples, rng)
    vecs = product_coefficients(us, basis)
    c_n = schur_constant(dim, n_particles)
    batch_ops = []
    for sl in _batch_slices(samples, batches):
        v = vecs[sl]
        batch_ops.append(c_n * (v.conj().T @ v) / v.shape[0])
    batch_ops = np.array(batch_ops)
    est = np.mean(batch_ops, axis=0)
    var_mean = np.var(batch_ops, axis=0, ddof=1) / batches
    sigma_f = float(np.sqrt(np.sum(var_mean)))
    diff = est - np.eye(basis.size)
    op_err = float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))
    fro_err = float(np.linalg.norm(diff))
    return {"c_n": c_n, "operator_error": op_err, "frobenius_error": fro_err,
            "sigma": sigma_f, "within_band": fro_err <= 3.0 * sigma_f,
            "samples": samples, "seed": seed}


@dataclass(eq=False)
class HusimiMeasure:
    """Importance archive of the Husimi density c_N <u^N, Gamma u^N>."""

    dim: int
    n_particles: int
    samples: np.ndarray
    densities: np.ndarray
    total_mass: float
    mass_sigma: float
    seed: Optional[int]

    @property
    def max_density(self) -> float:
        return float(np.max(self.densities))


def husimi_measure(state: SymmetricState, samples: int = 100_000,
                   seed: Optional[int] = None,
                   batches: int = 20) -> HusimiMeasure:
    rng = np.random.default_rng(seed)
    us = sample_sphere(state.dim, samples, rng)
    vecs = product_coefficients(us, state.basis)
    c_n = schur_constant(state.dim, state.n_particles)
    dens = c_n * np.real(np.einsum("si,ij,sj->s", vecs.conj(),
                                   state.matrix, vecs, optimize=True))
    masses = [float(np.mean(dens[sl])) for sl in _batch_slices(samples, batches)]
    return HusimiMeasure(dim=state.dim, n_particles=state.n_particles,
                         samples=us, densities=dens,
                         total_mass=float(np.mean(masses)),
                         mass_sigma=float(np.std(masses, ddof=1) / np.sqrt(batches)),
                         seed=seed)


def partial_trace(state: SymmetricState, k: int):
    """Exact k-particle reduction by iterated one-particle traces."""
    if not 0 < k <= state.n_particles:
        raise ValueError("need 0 < k <= N")
    mat, basis = state.matrix, state.basis
    while basis.n_particles > k:
        mat, basis = trace_one_particle(mat, basis)
    return mat, basis


def trace_norm(matrix: np.ndarray, hermitian: Optional[bool] = None) -> float:
    """Sum of singular values; eigenvalue route for Hermitian input."""
    matrix = np.asarray(matrix)
    if hermitian is None:
        hermitian = np.max(np.abs(matrix - matrix.conj().T)) < 1e-12
    if hermitian:
        return float(np.sum(np.abs(np.linalg.eigvalsh(matrix))))
    return float(np.sum(np.linalg.svd(matrix, compute_uv=False)))


def reconstruction_from_measure(measure: HusimiMeasure, k: int,
                                batches: int = 20):
    """Monte Carlo integral int |u^k><u^k| dmu_N with batch means."""
    basis_k = FockBasis.build(measure.dim, k)
    vecs = product_coefficients(measure.samples, basis_k)
    weighted = vecs * measure.densities[:, None]
    ops = []
    for sl in _batch_slices(vecs.shape[0], batches):
        ops.append((weighted[sl].T @ vecs[sl].conj()) / (sl.stop - sl.start))
    ops = np.array(ops)
    return np.mean(ops, axis=0), ops, basis_k


def definetti_error(state: SymmetricState, k: int,
                    measure: Optional[HusimiMeasure] = None,
                    samples: int = 100_000, seed: Optional[int] = None,
                    batches: int = 20, enforce: bool = True) -> dict:
    """Trace-norm distance between Gamma^(k) and its Husimi reconstruction.

    The quantitative bound 2 k dim / (N - k dim) applies for
    k <= N / (2 dim); outside that range it is reported as not applicable.
    Raises BoundExceeded when the measured error beats bound + 3 sigma.
    """
    if measure is None:
        measure = husimi_measure(state, samples=samples, seed=seed)
    gamma_k, basis_k = partial_trace(state, k)
    recon, batch_ops, _ = reconstruction_from_measure(measure, k, batches)
    diff = gamma_k - recon
    err_eig = trace_norm(0.5 * (diff + diff.conj().T), hermitian=True)
    err_svd = trace_norm(diff, hermitian=False)
    var_mean = np.var(batch_ops, axis=0, ddof=1) / batch_ops.shape[0]
    sigma_f = float(np.sqrt(np.sum(var_mean)))
    sigma = float(np.sqrt(basis_k.size) * sigma_f)
    applicable = k <= state.n_particles / (2.0 * state.dim)
    bound = (2.0 * k * state.dim / (state.n_particles - k * state.dim)
             if applicable else None)
    within = (err_svd <= bound + 3.0 * sigma) if applicable else None
    if enforce and applicable and not within:
        raise BoundExceeded(
            f"trace-norm error {err_svd:.4f} > bound {bound:.4f} + 3 sigma")
    return {"error": err_svd, "error_eig_route": err_eig, "bound": bound,
            "sigma": sigma, "applicable": applicable, "within_bound": within,
            "k": k, "dim": state.dim, "n_particles": state.n_particles,
            "total_mass": measure.total_mass, "seed": measure.seed}
