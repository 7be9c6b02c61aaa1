"""Quadratic (Bogoliubov) Hamiltonians at a Gross-Pitaevskii minimizer.

The Hessian of the GP energy on the sphere defines the blocks A = h0 + K1
and B = K2 on the orthogonal complement of the condensate mode; symplectic
diagonalization of the doubled matrix yields the excitation energies e_j and
the quadratic ground energy via (sum e_j - tr A) / 2.  Closed-form
homogeneous-gas formulas and the second-order energy correction live here
too.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from . import gp as _gp
from .model import WaveFunction

_TWO_PI = 2.0 * np.pi


class ResidualTooLarge(RuntimeError):
    """The reference state does not solve the GP equation well enough."""


class DegenerateHessian(RuntimeError):
    """Hessian is not positive definite; no stable Bogoliubov spectrum."""


class InstabilityAt(RuntimeError):
    def __init__(self, momentum):
        super().__init__(f"imaginary excitation energy at |k| = {momentum}")
        self.momentum = momentum


class NonIntegrable(RuntimeError):
    """Momentum integrand does not decay on the truncated domain."""


@dataclass(frozen=True, eq=False)
class QuadraticHamiltonian:
    """Blocks of the doubled Hessian on the condensate complement.

    ``a`` is Hermitian (h0 + K1 restricted), ``b`` symmetric (K2 restricted),
    both in the orthonormal basis given by the columns of ``complement``.
    ``hs_norm_sq`` logs iint w(x-y)^2 |u0|^2 |u0|^2 (finite on any grid, kept
    as a diagnostic of the Hilbert-Schmidt condition on K1, K2).
    """

    a: np.ndarray
    b: np.ndarray
    complement: np.ndarray
    u0_modes: np.ndarray
    coupling: float
    hs_norm_sq: float

    @property
    def n_excitation_modes(self) -> int:
        return self.a.shape[0]

    def doubled(self) -> np.ndarray:
        """Hermitian block matrix of the energy Hessian on (v, conj v).

        With ``b`` holding the pair-creation coefficients (conjugated-basis
        convention), the quadratic form <v, A v> + Re(conj(c)^T b conj(c))
        corresponds to the block matrix [[A, b], [conj(b), conj(A)]].
        """
        return np.block([[self.a, self.b],
                         [self.b.conj(), self.a.conj()]])

    def dynamical_matrix(self) -> np.ndarray:
        return np.block([[self.a, self.b],
                         [-self.b.conj(), -self.a.conj()]])


@dataclass(eq=False)
class BogoliubovSpectrum:
    energies: np.ndarray
    ground_energy: float
    eta_min: float
    valid: bool
    ladder: Optional[list] = None


def _householder_complement(v: np.ndarray) -> np.ndarray:
    """Columns form an orthonormal basis of the complement of unit vector v.

    Reduces to coordinate deletion when v is (numerically) a basis vector, so
    homogeneous problems keep their exact momentum labels.
    """
    v = np.asarray(v, dtype=complex).ravel()
    n = v.size
    q = int(np.argmax(np.abs(v)))
    alpha = v[q] / abs(v[q])
    w = v.copy()
    w[q] += alpha
    h = np.eye(n, dtype=complex) - 2.0 * np.outer(w, w.conj()) / np.vdot(w, w).real
    return np.delete(h, q, axis=1)


def build_hessian(u0, p: "_gp.GPProblem", eps0: float,
                  resid_tol: float = 1e-8) -> QuadraticHamiltonian:
    """Hessian blocks of the GP energy at a minimizer, in the mode basis."""
    sp = p.space
    vals = u0.values if isinstance(u0, WaveFunction) else np.asarray(u0, dtype=complex)
    vals = vals.reshape(sp.shape)
    resid = sp.norm(_gp.gp_gradient(vals, p))
    if resid > resid_tol:
        raise ResidualTooLarge(f"GP residual {resid:.3e} exceeds {resid_tol:.1e}")
    rho = np.abs(vals) ** 2
    mf = p.g * p.w.convolve(rho)

    mode_t = sp.mode_transform_matrix()
    h0_m = p.h.dense() + sp.multiplier_mode_matrix(mf) \
        - eps0 * np.eye(sp.size, dtype=complex)

    pair = p.w.pair_matrix() * (p.g * sp.weight)
    uflat = vals.ravel()
    k1_psi = pair * np.outer(uflat, uflat.conj())
    k2_psi = pair * np.outer(uflat, uflat)
    k1_m = mode_t @ k1_psi @ mode_t.conj().T
    k2_m = mode_t @ k2_psi @ mode_t.T

    psi0 = uflat * np.sqrt(sp.weight)
    u0_m = mode_t @ psi0
    u0_m = u0_m / np.linalg.norm(u0_m)
    comp = _householder_complement(u0_m)
    a = comp.conj().T @ (h0_m + k1_m) @ comp
    b = comp.conj().T @ k2_m @ comp.conj()
    a = 0.5 * (a + a.conj().T)
    b = 0.5 * (b + b.T)

    w2 = p.w.pair_matrix() ** 2
    hs = float(np.real(rho.ravel() @ w2 @ rho.ravel()) * sp.weight ** 2) * p.g ** 2
    return QuadraticHamiltonian(a=a, b=b, complement=comp, u0_modes=u0_m,
                                coupling=p.g, hs_norm_sq=hs)


def build_hessian_from_modes(h_mat: np.ndarray, w_tensor: np.ndarray,
                             alpha0: np.ndarray, g: float,
                             eps0: Optional[float] = None) -> QuadraticHamiltonian:
    """Hessian blocks for a problem given directly by (h, W) in a mode basis.

    ``w_tensor[m, n, p, q]`` is the two-body matrix element <mn|w|pq>; this is
    the exact counterpart of the truncated many-body Hamiltonian, so spectra
    built here compare to exact diagonalization without discretization slack.
    """
    alpha0 = np.asarray(alpha0, dtype=complex).ravel()
    alpha0 = alpha0 / np.linalg.norm(alpha0)
    mf = np.einsum("mpnq,p,q->mn", w_tensor, alpha0.conj(), alpha0)
    if eps0 is None:
        hu = h_mat @ alpha0 + g * (mf @ alpha0)
        eps0 = float(np.real(np.vdot(alpha0, hu)))
    k1 = g * np.einsum("mqpn,p,q->mn", w_tensor, alpha0, alpha0.conj())
    k2 = g * np.einsum("mnpq,p,q->mn", w_tensor, alpha0, alpha0)
    h0 = h_mat + g * mf - eps0 * np.eye(len(alpha0))
    comp = _householder_complement(alpha0)
    a = comp.conj().T @ (h0 + k1) @ comp
    b = comp.conj().T @ k2 @ comp.conj()
    a = 0.5 * (a + a.conj().T)
    b = 0.5 * (b + b.T)
    w2 = np.einsum("mnpq,mnrs->pqrs", w_tensor.conj(), w_tensor)
    hs = float(np.real(np.einsum("pqrs,p,q,r,s", w2, alpha0.conj(), alpha0.conj(),
                                 alpha0, alpha0))) * g ** 2
    return QuadraticHamiltonian(a=a, b=b, complement=comp, u0_modes=alpha0,
                                coupling=g, hs_norm_sq=hs)


def check_nondegeneracy(q: QuadraticHamiltonian) -> float:
    """Smallest eigenvalue of the doubled Hessian block matrix."""
    return float(np.linalg.eigvalsh(q.doubled())[0])


def quasiparticle_ladder(energies: np.ndarray, ground: float, count: int) -> list:
    """Lowest ``count`` values of ground + sum over an excitation multiset."""
    heap = [(0.0, ())]
    seen = {()}
    out = []
    while heap and len(out) < count:
        e, multiset = heapq.heappop(heap)
        out.append(ground + e)
        start = multiset[-1] if multiset else 0
        for j in range(start, len(energies)):
            nxt = multiset + (j,)
            if nxt not in seen:
                seen.add(nxt)
                heapq.heappush(heap, (e + energies[j], nxt))
    return out


def diagonalize(q: QuadraticHamiltonian, ladder: int = 0,
                imag_tol: float = 1e-8) -> BogoliubovSpectrum:
    """Symplectic diagonalization of the quadratic Hamiltonian.

    Eigenvalues of the dynamical matrix [[A, B], [-conj B, -conj A]] come in
    +/- pairs when the Hessian is positive; the positive branch gives the
    excitation energies and E0 = (sum_j e_j - tr A) / 2.
    """
    eta = check_nondegeneracy(q)
    if eta <= 0.0:
        raise DegenerateHessian(f"Hessian minimum eigenvalue {eta:.3e} <= 0")
    m = q.n_excitation_modes
    ev = np.linalg.eigvals(q.dynamical_matrix())
    order = np.argsort(ev.real)
    positive = ev[order][m:]
    scale = max(1.0, float(np.max(np.abs(ev)))) if m else 1.0
    if m and float(np.max(np.abs(positive.imag))) > imag_tol * scale:
        raise DegenerateHessian("complex quasiparticle energies despite eta > 0")
    energies = np.sort(positive.real)
    ground = 0.5 * (float(np.sum(energies)) - float(np.trace(q.a).real))
    lad = quasiparticle_ladder(energies, ground, ladder) if ladder else None
    return BogoliubovSpectrum(energies=energies, ground_energy=ground,
                              eta_min=eta, valid=True, ladder=lad)


# ---------------------------------------------------------------------------
# homogeneous-gas closed forms
# ---------------------------------------------------------------------------

def homogeneous_dispersion(k, what, n_particles: int, dim: int = 1):
    """sqrt(|k|^4 + 2 (2 pi)^{d/2} (N-1) what(k) |k|^2).

    ``what`` is the Fourier transform of the interaction seen by a
    unit-density condensate (for a unit-norm condensate on a box of volume V,
    pass the stored transform times the condensate density 1/V).
    """
    k = np.asarray(k, dtype=float)
    what = np.asarray(what, dtype=float)
    coef = 2.0 * _TWO_PI ** (dim / 2.0) * (n_particles - 1)
    rad = k ** 4 + coef * what * k ** 2
    bad = rad < -1e-12 * np.maximum(1.0, k ** 4)
    if np.any(bad):
        kbad = k[bad] if k.shape else k
        raise InstabilityAt(np.atleast_1d(kbad)[0])
    return np.sqrt(np.maximum(rad, 0.0))


def classify_dispersion(k: np.ndarray, e: np.ndarray, rel_tol: float = 1e-9) -> str:
    """Label a sampled dispersion curve on k >= 0 as phonon or maxon-roton."""
    k = np.asarray(k, dtype=float)
    e = np.asarray(e, dtype=float)
    order = np.argsort(k)
    e = e[order]
    tol = rel_tol * max(1.0, float(np.max(np.abs(e))))
    diffs = np.diff(e)
    descents = np.where(diffs < -tol)[0]
    if descents.size == 0:
        return "phonon"
    ascents_after = np.where(diffs[descents[0]:] > tol)[0]
    if ascents_after.size:
        return "phonon-maxon-roton"
    return "phonon"


def second_order_correction(what: Callable, dim: int = 1, kcut: float = 40.0,
                            torus_extent: Optional[float] = None,
                            tail_fraction: float = 0.01) -> dict:
    """Bogoliubov correction to the energy density of a unit-density gas.

    Evaluates -(2 (2 pi)^d)^{-1} * integral of
    |k|^2 + (2 pi)^{d/2} what - |k| sqrt(|k|^2 + 2 (2 pi)^{d/2} what)
    by quadrature on |k| <= kcut (isotropic what for d = 2), together with
    the finite-torus lattice-sum analogue when ``torus_extent`` is given.
    """
    s_of = lambda k: _TWO_PI ** (dim / 2.0) * what(k)

    def integrand(k):
        s = s_of(k)
        return k ** 2 + s - k * np.sqrt(np.maximum(k ** 2 + 2.0 * s, 0.0))

    ks = np.linspace(0.0, kcut, 2001)
    svals = s_of(ks)
    if np.min(svals) < -1e-12:
        raise ValueError("second-order correction requires what >= 0")
    if dim == 1:
        total, _ = integrate.quad(integrand, 0.0, kcut, limit=400)
        tail, _ = integrate.quad(integrand, kcut / 2.0, kcut, limit=200)
        value = -total / _TWO_PI
    elif dim == 2:
        radial = lambda k: integrand(k) * k
        total, _ = integrate.quad(radial, 0.0, kcut, limit=400)
        tail, _ = integrate.quad(radial, kcut / 2.0, kcut, limit=200)
        value = -total / (2.0 * _TWO_PI)
    else:
        raise ValueError("dim must be 1 or 2")
    if abs(total) > 0 and abs(tail) > tail_fraction * abs(total):
        raise NonIntegrable(
            f"last octave carries {abs(tail / total):.2%} of the integral")
    torus = None
    if torus_extent is not None:
        torus = second_order_torus_sum(what, dim, torus_extent, kcut)
    return {"integral": value, "torus_sum": torus, "kcut": kcut}


def second_order_torus_sum(what: Callable, dim: int, extent: float,
                           kcut: float = 40.0) -> float:
    """(1/2 V) sum_k (e(k) - A_kk) over the nonzero momentum lattice."""
    dk = _TWO_PI / extent
    nmax = int(np.floor(kcut / dk))
    axis = dk * np.arange(-nmax, nmax + 1)
    if dim == 1:
        kmag = np.abs(axis)
    else:
        kx, ky = np.meshgrid(axis, axis, indexing="ij")
        kmag = np.sqrt(kx ** 2 + ky ** 2).ravel()
    kmag = kmag[(kmag > 1e-12) & (kmag <= kcut)]
    s = _TWO_PI ** (dim / 2.0) * what(kmag)
    e = kmag * np.sqrt(np.maximum(kmag ** 2 + 2.0 * s, 0.0))
    a_diag = kmag ** 2 + s
    return float(0.5 * np.sum(e - a_diag) / extent ** dim)


def extrapolate_torus_sums(sums, extents) -> float:
    """Richardson extrapolation of torus sums over doubling box sizes.

    The leading finite-volume error is the omitted k = 0 lattice cell,
    an O(1/V) effect; one elimination level per doubling.
    """
    vals = [float(v) for v in sums]
    exts = [float(x) for x in extents]
    if len(vals) != len(exts) or len(vals) < 2:
        raise ValueError("need matching sums and extents, at least two")
    order = np.argsort(exts)
    vals = [vals[i] for i in order]
    level = 1
    while len(vals) > 1:
        factor = 2.0 ** level
        vals = [(factor * vals[i + 1] - vals[i]) / (factor - 1.0)
                for i in range(len(vals) - 1)]
        level += 1
    return vals[0]
