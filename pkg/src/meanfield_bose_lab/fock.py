"""Exact many-body reference in truncated bosonic Fock spaces.

Occupation-number bases at fixed particle number, second-quantized
Hamiltonians H = sum h a'a + (lam/2) sum W a'a'aa, low eigenpairs, reduced
density matrices, the condensate/excitation decomposition and the quadratic
(Bogoliubov) Hamiltonian on number-truncated Fock spaces.  Everything here
is small and dense-ish by design: it is the ground truth the variational
modules are checked against.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from . import bogoliubov as _bog
from .model import Interaction, ModelSpace, OneBodyOperator


class BasisTooLarge(RuntimeError):
    """Estimated operator size exceeds the configured cap."""


class ConvergenceFailure(RuntimeError):
    """Iterative eigensolver did not reach the requested residual."""


class BoundViolation(AssertionError):
    """A rigorous two-sided energy bound failed numerically."""


class DegenerateGP(RuntimeError):
    """Multiple distinct discrete GP minimizers; theorem hypotheses fail."""


# ---------------------------------------------------------------------------
# occupation bases and ladder maps
# ---------------------------------------------------------------------------

def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in _compositions(total - head, parts - 1):
            yield (head,) + tail


@dataclass(frozen=True, eq=False)
class FockBasis:
    """All occupations of ``n_particles`` bosons in ``n_modes`` modes."""

    n_modes: int
    n_particles: int
    occupations: np.ndarray
    codes: np.ndarray

    @classmethod
    def build(cls, n_modes: int, n_particles: int) -> "FockBasis":
        occ = np.array(list(_compositions(n_particles, n_modes)), dtype=np.int64)
        occ = occ.reshape(-1, n_modes)
        strides = (n_particles + 1) ** np.arange(n_modes - 1, -1, -1, dtype=np.int64)
        codes = occ @ strides
        assert occ.shape[0] == comb(n_particles + n_modes - 1, n_modes - 1)
        assert np.all(np.diff(codes) > 0)
        return cls(n_modes=n_modes, n_particles=n_particles,
                   occupations=occ, codes=codes)

    @property
    def size(self) -> int:
        return self.occupations.shape[0]

    def _strides(self) -> np.ndarray:
        return (self.n_particles + 1) ** np.arange(self.n_modes - 1, -1, -1,
                                                   dtype=np.int64)

    def index_of(self, occ: np.ndarray) -> np.ndarray:
        """Indices of occupation rows (must all be present)."""
        occ = np.atleast_2d(np.asarray(occ, dtype=np.int64))
        codes = occ @ self._strides()
        idx = np.searchsorted(self.codes, codes)
        if np.any(idx >= self.size) or np.any(self.codes[idx] != codes):
            raise KeyError("occupation not in basis")
        return idx


def lowering_map(basis_from: FockBasis, basis_to: FockBasis, mode: int):
    """Sparse matrix of a_mode from ``basis_from`` (N) to ``basis_to`` (N-1)."""
    occ = basis_from.occupations
    mask = occ[:, mode] > 0
    src = np.nonzero(mask)[0]
    target = occ[mask].copy()
    amp = np.sqrt(target[:, mode].astype(float))
    target[:, mode] -= 1
    strides = basis_to._strides()
    codes = target @ strides
    rows = np.searchsorted(basis_to.codes, codes)
    return sparse.csr_matrix((amp, (rows, src)),
                             shape=(basis_to.size, basis_from.size))


class BosonSectors:
    """Direct sum of fixed-number sectors n = 0..n_max over a mode set.

    Holds per-sector bases and per-mode lowering maps; quadratic and quartic
    operators are assembled from these.
    """

    def __init__(self, n_modes: int, n_max: int):
        self.n_modes = n_modes
        self.n_max = n_max
        self.bases = [FockBasis.build(n_modes, n) for n in range(n_max + 1)]
        self.dims = [b.size for b in self.bases]
        self.offsets = np.concatenate([[0], np.cumsum(self.dims)])
        self.total_dim = int(self.offsets[-1])
        # lower[n][i]: sector n -> n-1
        self.lower = [None]
        for n in range(1, n_max + 1):
            self.lower.append([lowering_map(self.bases[n], self.bases[n - 1], i)
                               for i in range(n_modes)])

    def sector_slice(self, n: int) -> slice:
        return slice(int(self.offsets[n]), int(self.offsets[n + 1]))

    def sector_norms(self, vec: np.ndarray) -> np.ndarray:
        return np.array([float(np.vdot(vec[self.sector_slice(n)],
                                       vec[self.sector_slice(n)]).real)
                         for n in range(self.n_max + 1)])

    def embed(self, n: int, component: np.ndarray, out=None) -> np.ndarray:
        if out is None:
            out = np.zeros(self.total_dim, dtype=complex)
        out[self.sector_slice(n)] = component
        return out


# ---------------------------------------------------------------------------
# mode sets: one-body matrix + two-body tensor in an orthonormal basis
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ModeSet:
    """Orthonormal one-body modes with h-matrix and two-body tensor.

    ``w_tensor[m, n, p, q] = <phi_m phi_n | w(x-y) | phi_p phi_q>``; the
    labels array carries momentum indices for plane-wave sets (else None).
    """

    space: ModelSpace
    functions: np.ndarray
    h_mat: np.ndarray
    w_tensor: np.ndarray
    labels: Optional[np.ndarray] = None

    @property
    def n_modes(self) -> int:
        return self.h_mat.shape[0]


def _w_tensor_by_quadrature(space: ModelSpace, w: Interaction,
                            funcs: np.ndarray) -> np.ndarray:
    m = funcs.shape[0]
    wt = np.zeros((m, m, m, m), dtype=complex)
    fgrid = funcs.reshape((m,) + space.shape)
    for n in range(m):
        for q in range(m):
            pair = np.conj(fgrid[n]) * fgrid[q]
            conv = w.convolve(pair).ravel()
            wt[:, n, :, q] = (funcs.conj() * conv) @ funcs.T * space.weight
    return wt


def plane_wave_modes(space: ModelSpace, h: OneBodyOperator, w: Interaction,
                     n_modes: int) -> ModeSet:
    """Lowest-|k| plane waves on a 1d torus; exact two-body tensor from c_k."""
    if space.bc != "periodic" or space.dim != 1:
        raise ValueError("plane-wave mode sets are built on 1d periodic spaces")
    if n_modes > space.modes:
        raise ValueError("more modes requested than the grid carries")
    ints = sorted(range(-(space.modes // 2), (space.modes + 1) // 2),
                  key=lambda n: (abs(n), -n))
    labels = np.array(ints[:n_modes])
    x = space.axes[0]
    base = 2.0 * np.pi / space.extent
    funcs = np.array([np.exp(1j * base * n * x) / np.sqrt(space.extent)
                      for n in labels])
    kin = (base * labels) ** 2
    h_mat = np.diag(kin.astype(complex))
    if np.any(h.potential):
        h_mat = h_mat + np.array(
            [[space.inner(funcs[a], h.potential.ravel() * funcs[b])
              for b in range(n_modes)] for a in range(n_modes)])
    # series coefficient lookup by integer momentum transfer
    coeff = {}
    for idx in range(space.modes):
        n = idx if idx <= space.modes // 2 else idx - space.modes
        coeff[n] = float(w.series[idx])
    m = n_modes
    wt = np.zeros((m, m, m, m))
    for a in range(m):
        for b in range(m):
            for c in range(m):
                d = labels[a] + labels[b] - labels[c]
                hits = np.nonzero(labels == d)[0]
                if hits.size:
                    transfer = int(labels[a] - labels[c])
                    if transfer in coeff:
                        wt[a, b, c, hits[0]] = coeff[transfer]
    return ModeSet(space=space, functions=funcs, h_mat=h_mat,
                   w_tensor=wt.astype(complex), labels=labels)


def eigenmode_modes(space: ModelSpace, h: OneBodyOperator, w: Interaction,
                    n_modes: int) -> ModeSet:
    """First ``n_modes`` eigenmodes of h; two-body tensor by quadrature."""
    vals, vecs = np.linalg.eigh(h.dense())
    funcs = []
    for a in range(n_modes):
        f = space.from_modes(vecs[:, a].reshape(space.shape)).ravel()
        funcs.append(f / space.norm(f))
    funcs = np.array(funcs)
    h_mat = np.diag(vals[:n_modes].astype(complex))
    wt = _w_tensor_by_quadrature(space, w, funcs)
    return ModeSet(space=space, functions=funcs, h_mat=h_mat, w_tensor=wt)


def rotate_modeset(modes: ModeSet, alpha0: np.ndarray) -> ModeSet:
    """New ModeSet whose mode 0 is the state with coefficients ``alpha0``."""
    alpha0 = np.asarray(alpha0, dtype=complex).ravel()
    alpha0 = alpha0 / np.linalg.norm(alpha0)
    comp = _bog._householder_complement(alpha0)
    rot = np.column_stack([alpha0, comp])
    h_new = rot.conj().T @ modes.h_mat @ rot
    w_new = np.einsum("am,bn,abcd,cp,dq->mnpq", rot.conj(), rot.conj(),
                      modes.w_tensor, rot, rot, optimize=True)
    funcs = rot.T @ modes.functions
    return ModeSet(space=modes.space, functions=funcs, h_mat=h_new,
                   w_tensor=w_new, labels=None)


# ---------------------------------------------------------------------------
# many-body Hamiltonian
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class ManyBodyOperator:
    basis: FockBasis
    matrix: sparse.csr_matrix
    lam: float
    modes: ModeSet


def build_hamiltonian(modes: ModeSet, n_particles: int,
                      lam: Optional[float] = None,
                      nnz_cap: float = 2e6) -> ManyBodyOperator:
    """H = sum h_ij a'_i a_j + lam sum_{j<k} w(x_j - x_k) at fixed N.

    ``lam`` defaults to the mean-field coupling 1/(N-1).
    """
    m = modes.n_modes
    n = int(n_particles)
    if lam is None:
        lam = 1.0 / (n - 1)
    basis = FockBasis.build(m, n)
    below = FockBasis.build(m, n - 1)
    tuples = np.argwhere(np.abs(modes.w_tensor) > 1e-15)
    est = basis.size * (m * m + len(tuples)) // 2
    if est > nnz_cap:
        raise BasisTooLarge(
            f"~{est:.2e} nonzeros would exceed the cap {nnz_cap:.1e}")
    lower = [lowering_map(basis, below, i) for i in range(m)]
    hmat = sparse.csr_matrix((basis.size, basis.size), dtype=complex)
    for i in range(m):
        for j in range(m):
            if abs(modes.h_mat[i, j]) > 1e-15:
                hmat = hmat + modes.h_mat[i, j] * (lower[i].conj().T @ lower[j])
    if n >= 2 and len(tuples):
        below2 = FockBasis.build(m, n - 2)
        lower2 = [lowering_map(below, below2, i) for i in range(m)]
        pair = {}
        needed = {(int(q), int(p)) for _, _, p, q in tuples} | \
                 {(int(n_), int(m_)) for m_, n_, _, _ in tuples}
        for (x, y) in needed:
            pair[(x, y)] = lower2[x] @ lower[y]
        for m_, n_, p, q in tuples:
            wval = modes.w_tensor[m_, n_, p, q]
            term = pair[(int(n_), int(m_))].conj().T @ pair[(int(q), int(p))]
            hmat = hmat + (0.5 * lam * wval) * term
    hmat = hmat.tocsr()
    herm_err = abs(hmat - hmat.conj().T).max()
    if herm_err > 1e-12 * max(1.0, abs(hmat).max()):
        raise AssertionError(f"Hamiltonian not Hermitian: {herm_err:.2e}")
    return ManyBodyOperator(basis=basis, matrix=hmat, lam=lam, modes=modes)


def lowest_eigenpairs(op: ManyBodyOperator, count: int,
                      dense_cutoff: int = 2000, tol: float = 1e-10):
    """Lowest eigenpairs; dense below ``dense_cutoff``, Lanczos above."""
    h = op.matrix
    dim = h.shape[0]
    count = min(count, dim)
    if dim <= dense_cutoff or count >= dim - 1:
        from scipy.linalg import eigh as dense_eigh
        vals, vecs = dense_eigh(h.toarray(), subset_by_index=(0, count - 1))
        return vals[:count], vecs[:, :count]
    try:
        vals, vecs = spla.eigsh(h, k=count, which="SA", tol=0)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceFailure(str(exc)) from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    scale = max(1.0, float(np.abs(vals).max()))
    for j in range(count):
        res = np.linalg.norm(h @ vecs[:, j] - vals[j] * vecs[:, j])
        if res > tol * scale * 100:
            raise ConvergenceFailure(f"eigenpair {j} residual {res:.2e}")
    return vals, vecs


def total_momentum_labels(op: ManyBodyOperator) -> Optional[np.ndarray]:
    if op.modes.labels is None:
        return None
    return op.basis.occupations @ op.modes.labels


# ---------------------------------------------------------------------------
# reduced density matrices
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class ReducedDensityMatrix:
    order: int
    matrix: np.ndarray
    basis: FockBasis

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)[::-1]


def _comb_table(n: int) -> np.ndarray:
    t = np.zeros((n + 1, n + 1), dtype=float)
    for a in range(n + 1):
        for b in range(a + 1):
            t[a, b] = comb(a, b)
    return t


def reduced_density_matrix(psi: np.ndarray, basis: FockBasis,
                           k: int) -> ReducedDensityMatrix:
    """k-particle reduced density matrix of a pure state, trace one.

    Splits each occupation n into (r, n - r) with hypergeometric weights
    prod_i C(n_i, r_i) / C(N, k); the RDM is Phi Phi' for the resulting
    rectangular coefficient matrix.
    """
    n = basis.n_particles
    m = basis.n_modes
    if not 0 < k <= n:
        raise ValueError("need 0 < k <= N")
    bk = FockBasis.build(m, k)
    bnk = FockBasis.build(m, n - k)
    table = _comb_table(n)
    denom = comb(n, k)
    occ = basis.occupations
    psi = np.asarray(psi, dtype=complex).ravel()
    phi = np.zeros((bk.size, bnk.size), dtype=complex)
    for ridx in range(bk.size):
        r = bk.occupations[ridx]
        ok = np.all(occ >= r, axis=1)
        if not np.any(ok):
            continue
        rows = occ[ok]
        amps = np.sqrt(np.prod(table[rows, r], axis=1) / denom)
        cols = bnk.index_of(rows - r)
        phi[ridx, cols] = psi[ok] * amps
    gamma = phi @ phi.conj().T
    return ReducedDensityMatrix(order=k, matrix=gamma, basis=bk)


def trace_one_particle(gamma: np.ndarray, basis: FockBasis):
    """Partial trace over one particle: k-particle matrix from (k)-basis.

    Returns (matrix, basis) for k-1 particles.
    """
    k = basis.n_particles
    m = basis.n_modes
    if k < 1:
        raise ValueError("nothing to trace out")
    bdown = FockBasis.build(m, k - 1)
    out = np.zeros((bdown.size, bdown.size), dtype=complex)
    occ_down = bdown.occupations
    for i in range(m):
        up = occ_down.copy()
        up[:, i] += 1
        rows = basis.index_of(up)
        wts = np.sqrt((occ_down[:, i] + 1).astype(float))
        block = gamma[np.ix_(rows, rows)]
        out += (wts[:, None] * wts[None, :]) * block
    return out / k, bdown


# ---------------------------------------------------------------------------
# inequality checks
# ---------------------------------------------------------------------------

def hoffmann_ostenhof_check(psi: np.ndarray, basis: FockBasis,
                            h_mat: np.ndarray) -> dict:
    """Kinetic-energy bound <Psi, sum h_j Psi> >= N <sqrt(rho), h sqrt(rho)>.

    ``h_mat`` must be real symmetric with nonpositive off-diagonal entries
    (a positivity-preserving one-body operator in a localized mode basis);
    the density is the diagonal of the one-particle reduced matrix.
    """
    h_mat = np.asarray(h_mat)
    if np.iscomplexobj(h_mat) and np.max(np.abs(h_mat.imag)) > 1e-14:
        raise ValueError("h must be real")
    h_real = np.real(h_mat)
    off = h_real - np.diag(np.diag(h_real))
    if off.max() > 1e-12:
        raise ValueError("h must have nonpositive off-diagonal entries")
    n = basis.n_particles
    g1 = reduced_density_matrix(psi, basis, 1).matrix
    lhs = n * float(np.trace(h_real @ g1).real)
    rho = np.clip(np.diag(g1).real, 0.0, None)
    root = np.sqrt(rho)
    rhs = n * float(root @ h_real @ root)
    return {"lhs": lhs, "rhs": rhs, "slack": lhs - rhs}


def interaction_lower_bound_check(w: Interaction, eta: np.ndarray,
                                  cells: np.ndarray) -> dict:
    """Completing-the-square bound for the positive-definite part w1.

    For particle positions on grid cells, checks
    sum_{j<k} w1(x_j - x_k) >= sum_j (eta * w1)(x_j)
                               - 1/2 iint w1 eta eta - (N/2) w1(0).
    """
    sp = w.space
    w1_samples, _ = w.split_samples()
    w1 = Interaction(space=sp, period=w.period, grid_n=w.grid_n,
                     diff_values=w1_samples, series=w.series_pos,
                     fourier=w.fourier_pos, kgrid=w.kgrid)
    cells = np.asarray(cells, dtype=int).ravel()
    n = cells.size
    counts = np.bincount(cells, minlength=sp.size).reshape(sp.shape)
    raw = w1.kernel_sum(counts).ravel()
    lhs = 0.5 * (float(np.sum(raw[cells])) - n * w1.value_at_zero())
    eta = np.asarray(eta, dtype=float).reshape(sp.shape)
    conv_eta = w1.convolve(eta)
    term1 = float(np.sum(conv_eta.ravel()[cells]))
    term2 = 0.5 * float(np.sum(conv_eta * eta) * sp.weight)
    rhs = term1 - term2 - 0.5 * n * w1.value_at_zero()
    return {"lhs": lhs, "rhs": rhs, "slack": lhs - rhs}


# ---------------------------------------------------------------------------
# condensate / excitation decomposition (U_N)
# ---------------------------------------------------------------------------

def excitation_decompose(psi: np.ndarray, basis: FockBasis,
                         mode0: int = 0) -> list:
    """Components phi_n over the excitation modes, mode0 = condensate.

    phi_n collects the coefficients of basis states with N - n particles in
    the condensate mode, re-indexed to the (M-1)-mode n-particle basis; the
    map is the coefficient isometry, so norms add up to |Psi|^2.
    """
    psi = np.asarray(psi, dtype=complex).ravel()
    n = basis.n_particles
    m = basis.n_modes
    keep = [i for i in range(m) if i != mode0]
    phis = []
    for nexc in range(n + 1):
        bexc = FockBasis.build(m - 1, nexc)
        sel = basis.occupations[:, mode0] == n - nexc
        rows = basis.occupations[sel][:, keep]
        comp = np.zeros(bexc.size, dtype=complex)
        comp[bexc.index_of(rows)] = psi[sel]
        phis.append(comp)
    return phis


def excitation_recompose(phis: Sequence[np.ndarray], basis: FockBasis,
                         mode0: int = 0) -> np.ndarray:
    psi = np.zeros(basis.size, dtype=complex)
    n = basis.n_particles
    m = basis.n_modes
    keep = [i for i in range(m) if i != mode0]
    for nexc, comp in enumerate(phis):
        if nexc > n:
            break
        bexc = FockBasis.build(m - 1, nexc)
        sel = basis.occupations[:, mode0] == n - nexc
        rows = basis.occupations[sel][:, keep]
        psi[sel] = np.asarray(comp, dtype=complex)[bexc.index_of(rows)]
    return psi


# ---------------------------------------------------------------------------
# quadratic Hamiltonian on the truncated Fock space
# ---------------------------------------------------------------------------

def build_quadratic_hamiltonian(sectors: BosonSectors, a_mat: np.ndarray,
                                b_mat: np.ndarray) -> sparse.csr_matrix:
    """sum a_ij a'_i a_j + 1/2 sum (b_ij a'_i a'_j + conj) over sectors."""
    m = sectors.n_modes
    dim = sectors.total_dim
    out = sparse.lil_matrix((dim, dim), dtype=complex)
    for n in range(1, sectors.n_max + 1):
        sl = sectors.sector_slice(n)
        block = sparse.csr_matrix((sectors.dims[n], sectors.dims[n]), dtype=complex)
        for i in range(m):
            for j in range(m):
                if abs(a_mat[i, j]) > 1e-15:
                    block = block + a_mat[i, j] * (
                        sectors.lower[n][i].conj().T @ sectors.lower[n][j])
        out[sl, sl] = block
    for n in range(0, sectors.n_max - 1):
        sl_from = sectors.sector_slice(n)
        sl_to = sectors.sector_slice(n + 2)
        block = sparse.csr_matrix((sectors.dims[n + 2], sectors.dims[n]),
                                  dtype=complex)
        for i in range(m):
            for j in range(m):
                if abs(b_mat[i, j]) > 1e-15:
                    raise_ij = sectors.lower[n + 2][i].conj().T @ \
                        sectors.lower[n + 1][j].conj().T
                    block = block + (0.5 * b_mat[i, j]) * raise_ij
        out[sl_to, sl_from] = block
        out[sl_from, sl_to] = block.conj().T
    return out.tocsr()


# ---------------------------------------------------------------------------
# discrete GP minimization over a mode set
# ---------------------------------------------------------------------------

def gp_energy_modes(alpha: np.ndarray, modes: ModeSet, g: float = 1.0) -> float:
    alpha = np.asarray(alpha, dtype=complex).ravel()
    one = float(np.real(np.vdot(alpha, modes.h_mat @ alpha)))
    two = float(np.real(np.einsum("mnpq,m,n,p,q", modes.w_tensor,
                                  alpha.conj(), alpha.conj(), alpha, alpha)))
    return one + 0.5 * g * two


def gp_gradient_modes(alpha: np.ndarray, modes: ModeSet, g: float = 1.0):
    alpha = np.asarray(alpha, dtype=complex).ravel()
    raw = modes.h_mat @ alpha + g * np.einsum(
        "mnpq,n,p,q->m", modes.w_tensor, alpha.conj(), alpha, alpha)
    mu = float(np.real(np.vdot(alpha, raw)))
    return raw - mu * alpha, mu


def minimize_gp_modes(modes: ModeSet, g: float = 1.0, restarts: int = 6,
                      tol: float = 1e-11, max_iter: int = 2000,
                      seed: Optional[int] = None) -> dict:
    """Discrete GP infimum over the span of the mode set (unit vectors).

    Small dense problem; Armijo projected gradient plus a Barzilai-Borwein
    polish, multi-restart.  Reports all converged minima so callers can
    detect degeneracy.
    """
    rng = np.random.default_rng(seed)
    m = modes.n_modes
    found = []
    for r in range(restarts):
        if r == 0:
            alpha = np.linalg.eigh(modes.h_mat)[1][:, 0].astype(complex)
        else:
            alpha = rng.normal(size=m) + 1j * rng.normal(size=m)
        alpha = alpha / np.linalg.norm(alpha)
        energy = gp_energy_modes(alpha, modes, g)
        step = 0.1
        it = 0
        stalled = False
        while it < max_iter:
            it += 1
            grad, _ = gp_gradient_modes(alpha, modes, g)
            resid = np.linalg.norm(grad)
            if resid <= tol:
                break
            step = min(step * 1.3, 10.0)
            while step > 1e-18:
                trial = alpha - step * grad
                trial = trial / np.linalg.norm(trial)
                e_t = gp_energy_modes(trial, modes, g)
                if e_t <= energy - 1e-4 * step * 2.0 * resid ** 2:
                    break
                step *= 0.5
            else:
                stalled = True
                break
            alpha, energy = trial, e_t
        if stalled or it >= max_iter:
            # Barzilai-Borwein polish: residual-driven, no energy tests
            grad, _ = gp_gradient_modes(alpha, modes, g)
            resid = np.linalg.norm(grad)
            best_a, best_r = alpha, resid
            tau = max(step, 1e-4)
            for _ in range(2000):
                if best_r <= tol:
                    break
                new = alpha - tau * grad
                new = new / np.linalg.norm(new)
                gnew, _ = gp_gradient_modes(new, modes, g)
                rnew = np.linalg.norm(gnew)
                if rnew > 1e3 * best_r:
                    alpha, grad = best_a, gp_gradient_modes(best_a, modes, g)[0]
                    tau *= 0.25
                    continue
                da, dg = (new - alpha).ravel(), (gnew - grad).ravel()
                denom = np.vdot(da, dg).real
                if abs(denom) > 1e-300:
                    tau = abs(np.vdot(da, da).real / denom)
                alpha, grad = new, gnew
                if rnew < best_r:
                    best_a, best_r = new, rnew
            alpha = best_a
            energy = gp_energy_modes(alpha, modes, g)
        grad, mu = gp_gradient_modes(alpha, modes, g)
        if np.linalg.norm(grad) <= max(tol, 1e-9):
            found.append((energy, alpha, mu))
    if not found:
        raise ConvergenceFailure("no discrete GP restart converged")
    found.sort(key=lambda t: t[0])
    best_e, best_a, best_mu = found[0]
    distinct = [best_a]
    for e, a, _ in found[1:]:
        if e - best_e > 1e-8:
            continue
        if all(1.0 - abs(np.vdot(a, b)) > 1e-6 for b in distinct):
            distinct.append(a)
    return {"energy": best_e, "alpha": best_a, "mu": best_mu,
            "degenerate": len(distinct) > 1, "distinct": distinct,
            "restarts": restarts, "seed": seed}


# ---------------------------------------------------------------------------
# theorem-level reports
# ---------------------------------------------------------------------------

def energy_bounds_check(energies_per_particle: dict, e_gp_disc: float,
                        w: Interaction, slack: float = 1e-10) -> dict:
    """Two-sided bound e_gp - (w1(0)+w2(0))/(N-3) <= E(N)/N <= e_gp."""
    w1, w2 = w.split_samples()
    constant = float(w1.flat[0] + w2.flat[0])
    gaps = {}
    for n, e_pp in sorted(energies_per_particle.items()):
        if n < 4:
            raise ValueError("lower bound needs N >= 4")
        upper_ok = e_pp <= e_gp_disc + slack
        lower_ok = e_pp >= e_gp_disc - constant / (n - 3) - slack
        if not (upper_ok and lower_ok):
            raise BoundViolation(
                f"N={n}: E/N={e_pp!r} outside "
                f"[{e_gp_disc - constant / (n - 3)!r}, {e_gp_disc!r}]")
        gaps[n] = e_gp_disc - e_pp
    ns = sorted(gaps)
    decreasing = all(gaps[a] >= gaps[b] - slack for a, b in zip(ns, ns[1:]))
    return {"constant": constant, "gaps": gaps, "gap_decreasing": decreasing,
            "e_gp_discrete": e_gp_disc}


def excitation_spectrum_convergence(modes: ModeSet, n_ladder: Sequence[int],
                                    j_count: int = 5, n_max_quad: int = 12,
                                    seed: Optional[int] = None) -> dict:
    """Spectral gaps of H_N against the quadratic Hamiltonian ladder.

    For each N in the ladder computes delta_j = |lambda_j(H_N) - N e_gp -
    lambda_j(HB)| for j <= j_count, plus the overlap of the decomposed
    many-body ground state with the quadratic-Hamiltonian ground state on
    the number-truncated excitation Fock space.
    """
    gpres = minimize_gp_modes(modes, g=1.0, seed=seed)
    if gpres["degenerate"]:
        raise DegenerateGP("distinct discrete GP minimizers found")
    e_gp = gpres["energy"]
    rotated = modes
    alpha0 = gpres["alpha"]
    if np.abs(np.abs(alpha0[0]) - 1.0) > 1e-9:
        rotated = rotate_modeset(modes, alpha0)
        alpha0 = np.zeros(modes.n_modes, dtype=complex)
        alpha0[0] = 1.0
    else:  # already aligned with mode 0 up to a phase
        phase = alpha0[0] / abs(alpha0[0])
        alpha0 = alpha0 / phase
    quad = _bog.build_hessian_from_modes(rotated.h_mat, rotated.w_tensor,
                                         alpha0, g=1.0)
    spec = _bog.diagonalize(quad, ladder=j_count)
    ladder_vals = np.array(spec.ladder)
    m_exc = rotated.n_modes - 1
    sectors = BosonSectors(m_exc, n_max_quad)
    hquad = build_quadratic_hamiltonian(sectors, quad.a, quad.b)
    qvals, qvecs = np.linalg.eigh(hquad.toarray())
    phi_ground = qvecs[:, 0]
    deltas = {}
    overlaps = {}
    for n in n_ladder:
        op = build_hamiltonian(rotated, n)
        vals, vecs = lowest_eigenpairs(op, j_count + 1)
        shifted = vals[:j_count] - n * e_gp
        deltas[n] = np.abs(shifted - ladder_vals[:j_count])
        phis = excitation_decompose(vecs[:, 0], op.basis, mode0=0)
        overlap = 0.0 + 0.0j
        for nexc in range(min(n, sectors.n_max) + 1):
            sl = sectors.sector_slice(nexc)
            overlap += np.vdot(phi_ground[sl], phis[nexc])
        overlaps[n] = abs(overlap)
    return {"e_gp_discrete": e_gp, "quad_ladder": ladder_vals,
            "quad_ground": spec.ground_energy, "gap": float(spec.energies[0]),
            "deltas": deltas, "overlaps": overlaps,
            "eta_min": spec.eta_min, "truncation_levels": qvals[:3]}
