"""Discretized model spaces, pair interactions and one-body operators.

Two discretizations share one sample layout: periodic boxes use plane waves
on an M-point grid per axis, Dirichlet boxes use sine modes on the midpoint
grid.  Fields are arrays on the spatial grid, inner products carry the
uniform quadrature weight h^d, and the mode transforms are unitary with
respect to that weight.  Natural units throughout (hbar = 1, 2m = 1), so the
kinetic multiplier is |k|^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import fft as sfft

PERIODIC = "periodic"
DIRICHLET = "dirichlet"

_TWO_PI = 2.0 * np.pi


class ModelError(ValueError):
    """Invalid model-space or interaction construction."""


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 1
    extent: float = _TWO_PI
    modes: int = 64
    bc: str = PERIODIC


@dataclass(frozen=True, eq=False)
class ModelSpace:
    """Spatial grid plus its mode basis (plane waves or sine modes)."""

    dim: int
    extent: float
    modes: int
    bc: str
    axes: tuple
    step: float
    weight: float
    kinetic: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    # -- geometry ---------------------------------------------------------

    @property
    def shape(self) -> tuple:
        return (self.modes,) * self.dim

    @property
    def size(self) -> int:
        return self.modes ** self.dim

    @property
    def volume(self) -> float:
        return self.extent ** self.dim

    def grids(self):
        """Meshgrid of sample coordinates, one array per axis."""
        return np.meshgrid(*self.axes, indexing="ij")

    def momenta(self):
        """Per-axis momentum values in mode (FFT) ordering; periodic only."""
        if self.bc != PERIODIC:
            raise ModelError("momentum lattice is defined for periodic spaces")
        return tuple(_TWO_PI * sfft.fftfreq(self.modes, d=self.step)
                     for _ in range(self.dim))

    # -- inner products ---------------------------------------------------

    def inner(self, f, g) -> complex:
        return complex(np.vdot(f, g) * self.weight)

    def norm(self, f) -> float:
        return float(np.sqrt(np.vdot(f, f).real * self.weight))

    # -- mode transforms --------------------------------------------------

    def to_modes(self, u: np.ndarray) -> np.ndarray:
        """Orthonormal-mode coefficients of grid samples (unitary w.r.t. h^d)."""
        u = np.asarray(u, dtype=complex).reshape(self.shape)
        if self.bc == PERIODIC:
            return sfft.fftn(u) * (self.weight / self.extent ** (self.dim / 2.0))
        scale = self.weight ** 0.5
        re = sfft.dstn(u.real, type=2, norm="ortho")
        im = sfft.dstn(u.imag, type=2, norm="ortho")
        return (re + 1j * im) * scale

    def from_modes(self, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c, dtype=complex).reshape(self.shape)
        if self.bc == PERIODIC:
            return sfft.ifftn(c) * (self.extent ** (self.dim / 2.0) / self.weight)
        scale = self.weight ** 0.5
        re = sfft.idstn(c.real / scale, type=2, norm="ortho")
        im = sfft.idstn(c.imag / scale, type=2, norm="ortho")
        return re + 1j * im

    def apply_kinetic(self, u: np.ndarray) -> np.ndarray:
        return self.from_modes(self.kinetic * self.to_modes(u))

    def mode_transform_matrix(self) -> np.ndarray:
        """Dense unitary mapping grid samples (times h^{d/2}) to mode coefficients."""
        key = "mode_matrix"
        if key not in self._cache:
            eye = np.eye(self.size, dtype=complex)
            cols = [self.to_modes(eye[:, j].reshape(self.shape)).ravel()
                    for j in range(self.size)]
            self._cache[key] = np.array(cols).T / self.weight ** 0.5
        return self._cache[key]

    def multiplier_mode_matrix(self, values: np.ndarray) -> np.ndarray:
        """Mode-basis matrix of pointwise multiplication by ``values``."""
        t = self.mode_transform_matrix()
        return (t * np.asarray(values, dtype=complex).ravel()) @ t.conj().T


def build_model(config: ModelConfig) -> ModelSpace:
    """Construct a model space with consistent grids and quadrature."""
    d, ll, m, bc = config.dim, float(config.extent), int(config.modes), config.bc
    if d not in (1, 2):
        raise ModelError(f"unsupported dimension {d}")
    if m < 2:
        raise ModelError(f"need at least 2 modes per axis, got {m}")
    if not ll > 0:
        raise ModelError(f"extent must be positive, got {ll}")
    if bc not in (PERIODIC, DIRICHLET):
        raise ModelError(f"unknown boundary condition {bc!r}")
    h = ll / m
    if bc == PERIODIC:
        axis = np.arange(m) * h
        k1 = _TWO_PI * sfft.fftfreq(m, d=h)
        mults = [k1 ** 2] * d
    else:
        axis = (np.arange(m) + 0.5) * h
        n = np.arange(1, m + 1)
        mults = [(n * np.pi / ll) ** 2] * d
    kin = mults[0]
    if d == 2:
        kin = mults[0][:, None] + mults[1][None, :]
    return ModelSpace(dim=d, extent=ll, modes=m, bc=bc,
                      axes=tuple(axis.copy() for _ in range(d)),
                      step=h, weight=h ** d, kinetic=kin)


# ---------------------------------------------------------------------------
# wave functions
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class WaveFunction:
    """Complex one-body state sampled on the grid."""

    space: ModelSpace
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex).reshape(self.space.shape)

    def norm(self) -> float:
        return self.space.norm(self.values)

    def normalized(self) -> "WaveFunction":
        n = self.norm()
        if n == 0.0:
            raise ModelError("cannot normalize the zero state")
        return WaveFunction(self.space, self.values / n)

    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2


# ---------------------------------------------------------------------------
# one-body operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OneBodyOperator:
    """h = -Laplacian + V, applied spectrally, with a dense mode realization."""

    space: ModelSpace
    potential: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    def apply(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=complex).reshape(self.space.shape)
        return self.space.apply_kinetic(u) + self.potential * u

    def expectation(self, u: np.ndarray) -> float:
        return float(np.real(self.space.inner(u, self.apply(u))))

    def dense(self) -> np.ndarray:
        """Matrix in the orthonormal mode basis."""
        if "dense" not in self._cache:
            sp = self.space
            mat = np.diag(sp.kinetic.ravel().astype(complex))
            if np.any(self.potential):
                mat = mat + sp.multiplier_mode_matrix(self.potential)
            self._cache["dense"] = mat
        return self._cache["dense"]

    def ground_mode(self) -> np.ndarray:
        """Grid samples of the lowest eigenmode, normalized and phase-fixed."""
        sp = self.space
        if not np.any(self.potential):
            if sp.bc == PERIODIC:
                u = np.ones(sp.shape, dtype=complex)
            else:
                c = np.zeros(sp.shape)
                c[(0,) * sp.dim] = 1.0
                u = sp.from_modes(c)
        else:
            vals, vecs = np.linalg.eigh(self.dense())
            c = vecs[:, 0].reshape(sp.shape)
            u = sp.from_modes(c)
        u = u / sp.norm(u)
        j = int(np.argmax(np.abs(u)))
        return u * (np.abs(u.flat[j]) / u.flat[j])


def make_one_body(space: ModelSpace, potential=None) -> OneBodyOperator:
    if potential is None:
        v = np.zeros(space.shape)
    elif callable(potential):
        v = np.asarray(potential(*space.grids()), dtype=float)
    else:
        v = np.asarray(potential, dtype=float).reshape(space.shape)
    return OneBodyOperator(space=space, potential=v)


# ---------------------------------------------------------------------------
# pair interactions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Interaction:
    """Even pair potential with Fourier data and its sign-split parts.

    ``diff_values`` holds w on the displacement grid in FFT-natural order
    (period ``period`` per axis; the displacement grid coincides with the
    space grid for periodic spaces and is doubled for Dirichlet boxes).
    ``fourier`` stores what(k) = (2 pi)^{-d/2} * integral of w * exp(-ikx)
    over one period, evaluated on the displacement momentum lattice; the
    plain Fourier-series coefficients c_k = what(k) * (2 pi)^{d/2} / P^d
    are kept in ``series``.
    """

    space: ModelSpace
    period: float
    grid_n: int
    diff_values: np.ndarray
    series: np.ndarray
    fourier: np.ndarray
    kgrid: tuple

    # -- derived splits ----------------------------------------------------

    @property
    def fourier_pos(self) -> np.ndarray:
        return np.maximum(self.fourier, 0.0)

    @property
    def fourier_neg(self) -> np.ndarray:
        return np.maximum(-self.fourier, 0.0)

    @property
    def series_pos(self) -> np.ndarray:
        return np.maximum(self.series, 0.0)

    @property
    def series_neg(self) -> np.ndarray:
        return np.maximum(-self.series, 0.0)

    def split_samples(self):
        """Real-space samples (w1, w2) of the positive/negative-definite parts."""
        w1 = _series_to_samples(self.series_pos, self.space.dim)
        w2 = _series_to_samples(self.series_neg, self.space.dim)
        return w1, w2

    def value_at_zero(self) -> float:
        return float(self.diff_values.flat[0].real)

    def scaled(self, factor: float) -> "Interaction":
        return Interaction(space=self.space, period=self.period, grid_n=self.grid_n,
                           diff_values=self.diff_values * factor,
                           series=self.series * factor,
                           fourier=self.fourier * factor,
                           kgrid=self.kgrid)

    # -- convolution -------------------------------------------------------

    def convolve(self, rho: np.ndarray) -> np.ndarray:
        """Quadrature convolution (w * rho)(x_i) = h^d sum_j w(x_i-x_j) rho(x_j)."""
        return self.kernel_sum(rho) * self.space.weight

    def pair_matrix(self) -> np.ndarray:
        """Dense matrix W[i, j] = w(x_i - x_j) over flattened grid nodes."""
        sp = self.space
        idx = [np.arange(sp.modes)] * sp.dim
        mesh = np.meshgrid(*idx, indexing="ij")
        flat = [m.ravel() for m in mesh]
        out = self.diff_values
        sel = tuple((f[:, None] - f[None, :]) % self.grid_n for f in flat)
        return out[sel]

    def kernel_sum(self, rho: np.ndarray) -> np.ndarray:
        """Plain kernel sum sum_j w(x_i - x_j) rho(x_j), no quadrature weight."""
        sp = self.space
        rho = np.asarray(rho).reshape(sp.shape)
        if sp.bc == PERIODIC:
            out = sfft.ifftn(sfft.fftn(self.diff_values) * sfft.fftn(rho))
        else:
            pad = np.zeros((self.grid_n,) * sp.dim, dtype=complex)
            pad[tuple(slice(0, sp.modes) for _ in range(sp.dim))] = rho
            full = sfft.ifftn(sfft.fftn(self.diff_values) * sfft.fftn(pad))
            out = full[tuple(slice(0, sp.modes) for _ in range(sp.dim))]
        if np.isrealobj(rho) and np.isrealobj(self.diff_values):
            return out.real
        return out


def _series_to_samples(series: np.ndarray, dim: int) -> np.ndarray:
    n = series.shape[0]
    vals = sfft.ifftn(series) * (n ** dim)
    return vals.real


def _displacement_components(period: float, n: int, dim: int, step: float):
    delta = sfft.fftfreq(n, d=1.0 / n) * step  # 0, h, ..., -h in FFT order
    return np.meshgrid(*([delta] * dim), indexing="ij")


def make_interaction(space: ModelSpace,
                     func: Optional[Callable] = None,
                     samples: Optional[np.ndarray] = None,
                     even_tol: float = 1e-10) -> Interaction:
    """Build an Interaction from a closed form or displacement-grid samples.

    ``func`` is called with one displacement array per axis.  ``samples``
    must live on the displacement grid in FFT-natural order: the space grid
    itself for periodic spaces, the doubled 2M-point grid for Dirichlet.
    """
    if (func is None) == (samples is None):
        raise ModelError("provide exactly one of func= or samples=")
    if space.bc == PERIODIC:
        period, n = space.extent, space.modes
    else:
        period, n = 2.0 * space.extent, 2 * space.modes
    if func is not None:
        comps = _displacement_components(period, n, space.dim, space.step)
        w = np.asarray(func(*comps), dtype=float)
    else:
        w = np.asarray(samples, dtype=float).reshape((n,) * space.dim)
    # evenness: w(x) = w(-x) on the displacement torus
    rev = w
    for ax in range(space.dim):
        rev = np.flip(np.roll(rev, -1, axis=ax), axis=ax)
    asym = float(np.max(np.abs(w - rev)))
    if asym > even_tol * max(1.0, float(np.max(np.abs(w)))):
        raise ModelError(f"interaction is not even (asymmetry {asym:.3e})")
    w = 0.5 * (w + rev)

    series = sfft.fftn(w) / (n ** space.dim)
    if np.max(np.abs(series.imag)) > 1e-12 * max(1.0, np.max(np.abs(series.real))):
        raise ModelError("even interaction produced complex Fourier data")
    series = series.real
    # snap coefficients at FFT-noise level to zero so sign splits are exact
    series[np.abs(series) < 1e-14 * max(1.0, float(np.max(np.abs(series))))] = 0.0
    what = series * (period ** space.dim) / _TWO_PI ** (space.dim / 2.0)
    kaxis = _TWO_PI * sfft.fftfreq(n, d=space.step)
    kgrid = tuple(np.meshgrid(*([kaxis] * space.dim), indexing="ij"))
    return Interaction(space=space, period=period, grid_n=n, diff_values=w,
                       series=series, fourier=what, kgrid=kgrid)


def interaction_from_table(space: ModelSpace, x: np.ndarray, w: np.ndarray) -> Interaction:
    """Interaction from tabulated (x, w(x)) pairs, interpolated onto the grid."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if space.dim != 1:
        raise ModelError("tabulated interactions are one-dimensional")
    order = np.argsort(x)
    x, w = x[order], w[order]
    period = space.extent if space.bc == PERIODIC else 2.0 * space.extent
    n = space.modes if space.bc == PERIODIC else 2 * space.modes
    delta = sfft.fftfreq(n, d=1.0 / n) * space.step
    lo, hi = -period / 2.0, period / 2.0
    if x[0] > lo + space.step or x[-1] < hi - space.step:
        raise ModelError("tabulated interaction must cover one displacement period")
    return make_interaction(space, samples=np.interp(delta, x, w))


# closed forms used throughout ------------------------------------------------

def truncated_lennard_jones(cap: float = 1e3) -> Callable:
    """w(x) = min(cap, |x|^-12 - |x|^-6); the cap removes the core singularity."""
    def w(*comps):
        r2 = np.asarray(sum(c ** 2 for c in comps), dtype=float)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            val = np.where(r2 > 0.0, r2 ** -6 - r2 ** -3, np.inf)
        return np.minimum(cap, val)
    return w


def gaussian_interaction(strength: float = 1.0, width: float = 1.0) -> Callable:
    def w(*comps):
        r2 = sum(c ** 2 for c in comps)
        return strength * np.exp(-0.5 * r2 / width ** 2)
    return w


def cosine_interaction(coefficients: Sequence[float], extent: float) -> Callable:
    """w(x) = sum_j a_j cos(2 pi j x / extent) from coefficient list [a_0, a_1, ...]."""
    coeff = list(coefficients)

    def w(*comps):
        r = comps[0]
        for c in comps[1:]:
            r = r + c  # separable cosines only make sense in 1d; keep simple
        out = np.zeros_like(np.asarray(r, dtype=float))
        for j, a in enumerate(coeff):
            out = out + a * np.cos(_TWO_PI * j * r / extent)
        return out
    return w


# ---------------------------------------------------------------------------
# convolution and law-of-large-numbers checks
# ---------------------------------------------------------------------------

def convolve_density(rho: np.ndarray, w: Interaction, mass_tol: float = 1e-8) -> np.ndarray:
    """(w * rho) for a probability density rho >= 0 with unit mass."""
    sp = w.space
    rho = np.asarray(rho, dtype=float).reshape(sp.shape)
    if np.min(rho) < -1e-12:
        raise ModelError("density must be nonnegative")
    mass = float(np.sum(rho) * sp.weight)
    if abs(mass - 1.0) > mass_tol:
        raise ModelError(f"density mass {mass} is not 1 within {mass_tol}")
    return w.convolve(rho)


def mean_field_consistency_check(u: WaveFunction, w: Interaction,
                                 n_particles, seed: Optional[int] = None) -> dict:
    """Empirical pair field versus the mean-field convolution.

    Draws iid positions from |u|^2 and compares the per-particle empirical
    field (N-1)^{-1} sum_{k != j} w(x_j - x_k) with (w * |u|^2)(x_j).  When a
    ladder of particle numbers is given, fits the decay exponent of the
    deviation (CLT predicts -1/2).
    """
    rng = np.random.default_rng(seed)
    sp = w.space
    ladder = [int(n) for n in (n_particles if np.iterable(n_particles) else [n_particles])]
    if min(ladder) < 2:
        raise ModelError("need at least two particles")
    rho = u.density()
    p = (rho * sp.weight).ravel()
    p = p / p.sum()
    degenerate = bool(p.max() > 0.999)
    expected = w.convolve(rho / (rho.sum() * sp.weight)).ravel()
    w0 = w.value_at_zero()
    devs = []
    for n in ladder:
        cells = rng.choice(sp.size, size=n, p=p)
        counts = np.bincount(cells, minlength=sp.size).reshape(sp.shape)
        raw = w.kernel_sum(counts).ravel()
        emp = (raw[cells] - w0) / (n - 1)
        devs.append(float(np.max(np.abs(emp - expected[cells]))))
    slope = None
    if len(ladder) >= 3:
        slope = float(np.polyfit(np.log(ladder), np.log(devs), 1)[0])
    return {"n_ladder": ladder, "deviation": devs, "slope": slope,
            "degenerate": degenerate, "seed": seed}


# ---------------------------------------------------------------------------
# classical stability probe
# ---------------------------------------------------------------------------

def _pair_energy(w: Interaction, counts: np.ndarray, n: int) -> float:
    raw = w.kernel_sum(counts)
    total = float(np.sum(raw * counts).real)
    return 0.5 * (total - n * w.value_at_zero())


def _greedy_descent(w: Interaction, cells: np.ndarray, rng, max_sweeps: int = 40):
    sp = w.space
    counts = np.bincount(cells, minlength=sp.size).astype(float).reshape(sp.shape)
    for _ in range(max_sweeps):
        moved = False
        for j in range(len(cells)):
            flat = counts.ravel()
            flat[cells[j]] -= 1
            field = w.kernel_sum(counts).ravel()
            best = int(np.argmin(field))
            if field[best] < field[cells[j]] - 1e-12:
                cells[j] = best
                moved = True
            flat[cells[j]] += 1
        if not moved:
            break
    counts = np.bincount(cells, minlength=sp.size).reshape(sp.shape)
    return cells, counts


def classical_stability_probe(w: Interaction, n_particles: int, trials: int = 4,
                              seed: Optional[int] = None) -> dict:
    """Heuristic search for configurations violating classical stability.

    Minimizes the pair energy over random + greedy-descent configurations for
    particle numbers 2..N, reports the per-particle minimum, a quadratic-fit
    estimate of the superstability constant, and flags interactions whose
    per-particle minimum keeps sinking linearly with N.
    """
    if n_particles < 2 or trials < 1:
        raise ModelError("need n_particles >= 2 and trials >= 1")
    rng = np.random.default_rng(seed)
    sp = w.space
    ns = sorted(set(np.linspace(2, n_particles, min(6, n_particles - 1)).astype(int)))
    u_min = []
    for n in ns:
        best = np.inf
        for _ in range(trials):
            cells = rng.integers(0, sp.size, size=n)
            cells, counts = _greedy_descent(w, cells, rng)
            best = min(best, _pair_energy(w, counts, n))
        u_min.append(best)
    u_min = np.array(u_min)
    ns_arr = np.array(ns, dtype=float)
    per_particle = u_min / ns_arr
    wscale = max(float(np.max(np.abs(w.diff_values))), 1e-300)
    if len(ns) >= 2:
        slope = float(np.polyfit(ns_arr, per_particle, 1)[0])
    else:
        slope = 0.0
    flagged = slope < -0.02 * wscale
    # U(n) ~ eps*n^2/(2|Omega|) - C*n
    design = np.vstack([ns_arr ** 2 / (2.0 * sp.volume), ns_arr]).T
    coef, *_ = np.linalg.lstsq(design, u_min, rcond=None)
    return {"n_ladder": ns, "min_pair_energy": u_min.tolist(),
            "min_per_particle": float(per_particle.min()),
            "stable_estimate": not flagged, "flagged": flagged,
            "superstable_epsilon_estimate": float(coef[0]),
            "per_particle_slope": slope, "seed": seed}
