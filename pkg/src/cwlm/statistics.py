"""Conditioned output statistics from counting-field generating functions.

The generating function is sampled on a uniform chi grid and inverted with an
FFT:

    P(V) = (T / 2 pi) * int dchi exp(-i chi V T) C(chi; T)

With ``chi_m = (m - n/2) dchi`` the conjugate output grid is
``V_k = (k - n/2) * 2 pi / (T n dchi)``.  Densities on the rescaled axis
``O = V / a_VQ`` carry an extra factor ``|a_VQ|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import least_squares

from .errors import (
    GridMismatch,
    IllConditionedStencil,
    InsufficientDecay,
    PoorFit,
    ZeroOverlapDenominator,
)
from .generator import JointLiouvillian, Liouvillian, vec
from .model import IDENTITY, PostSelector, QubitState
from .propagate import expm_increment, propagator_increment

RAW_V = "raw_V"
RESCALED_O = "rescaled_O"
AXES = (RAW_V, RESCALED_O)

DENOMINATOR_TOL = 1e-14
EDGE_TOL = 1e-10
CHUNK = 4096


# ---------------------------------------------------------------- grids


@dataclass(frozen=True)
class ChiGridSpec:
    """Requested chi grid.

    ``n_points`` and ``chi_max`` may be left to the automatic choice.  The
    automatic grid resolves the output to ``sigma / resolution`` and covers at
    least ``|O| <= max_o`` on the rescaled axis (default: eigenvalue spread
    plus 14 sigma).
    """

    n_points: int | None = None
    chi_max: float | str = "auto"
    max_o: float | None = None
    resolution: float = 20.0
    eps: float = 1e-12

    def __post_init__(self):
        if self.n_points is not None:
            if int(self.n_points) != self.n_points or self.n_points < 64 or self.n_points % 2:
                raise ValueError("n_points must be an even integer >= 64")
        if self.chi_max != "auto":
            if not (isinstance(self.chi_max, (int, float)) and math.isfinite(self.chi_max)
                    and self.chi_max > 0):
                raise ValueError("chi_max must be a positive number or 'auto'")
        if self.max_o is not None and not self.max_o > 0:
            raise ValueError("max_o must be positive")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")

    @property
    def is_auto(self) -> bool:
        return self.chi_max == "auto"


@dataclass(frozen=True, eq=False)
class ChiGrid:
    chi_max: float
    n_points: int

    @property
    def dchi(self) -> float:
        return 2.0 * self.chi_max / self.n_points

    @property
    def chi_values(self) -> np.ndarray:
        return (np.arange(self.n_points) - self.n_points // 2) * self.dchi

    def output_grid(self, t: float) -> np.ndarray:
        """Raw-V grid conjugate to the chi grid."""
        dv = 2 * math.pi / (t * self.n_points * self.dchi)
        return (np.arange(self.n_points) - self.n_points // 2) * dv


def _next_pow2(x: float) -> int:
    return 1 << max(6, math.ceil(math.log2(max(x, 1.0))))


def resolve_grid(spec: ChiGridSpec | ChiGrid | None, svv: float, a_vq: float, t: float,
                 spread: float = 1.0) -> ChiGrid:
    """Turn a grid request into concrete (chi_max, n_points)."""
    if isinstance(spec, ChiGrid):
        return spec
    spec = ChiGridSpec() if spec is None else spec
    if not t > 0:
        raise ValueError("measurement time must be positive")
    st = svv * t
    sigma_o = math.sqrt(st) / (abs(a_vq) * t)
    if spec.is_auto:
        chi_decay = math.sqrt(2 * math.log(1 / spec.eps) / st)
        chi_res = math.pi * spec.resolution / (abs(a_vq) * t * sigma_o)
        chi_max = max(chi_decay, chi_res)
    else:
        chi_max = float(spec.chi_max)
    if spec.n_points is not None:
        return ChiGrid(chi_max, int(spec.n_points))
    d_o = math.pi / (abs(a_vq) * t * chi_max)
    cover = spread + 14 * sigma_o
    if spec.max_o is not None:
        cover = max(cover, spec.max_o)
    return ChiGrid(chi_max, _next_pow2(2 * cover / d_o))


# ---------------------------------------------------------------- generating function


def _selector_op(p) -> np.ndarray:
    if p is None:
        return IDENTITY
    return p.op if isinstance(p, PostSelector) else np.asarray(p, dtype=complex)


def _rho(rho0) -> np.ndarray:
    return rho0.rho if isinstance(rho0, QubitState) else np.asarray(rho0, dtype=complex)


class ConditionedCF:
    """chi -> Tr(p rho(chi; t)) / Tr(p rho(0; t)); ``p=None`` is unconditioned."""

    def __init__(self, l: Liouvillian, rho0, p, t: float):
        self.l = l
        self.t = float(t)
        self.rho0 = _rho(rho0)
        self.p = _selector_op(p)
        self._r = self.p.T.reshape(-1)
        self._v = vec(self.rho0)
        self._static = complex(self._r @ self._v)
        self.denominator = self._raw(np.zeros(1))[0]
        if abs(self.denominator) < DENOMINATOR_TOL:
            raise ZeroOverlapDenominator(
                f"Tr(p rho(T)) = {abs(self.denominator):.3g} at chi=0; the initial state is "
                "orthogonal to the post-selector and nothing mixes them, include dephasing "
                "or other regularizing dynamics")

    def _raw(self, chi: np.ndarray) -> np.ndarray:
        out = np.empty(chi.shape, dtype=complex)
        for s in range(0, chi.size, CHUNK):
            c = chi[s:s + CHUNK]
            inc, gauss = propagator_increment(self.l, c, self.t)
            out[s:s + CHUNK] = gauss * (self._static + (inc @ self._v) @ self._r)
        return out

    def __call__(self, chi) -> np.ndarray:
        chi = np.asarray(chi, dtype=float)
        return (self._raw(chi.reshape(-1)) / self.denominator).reshape(chi.shape)

    @property
    def scale(self) -> float:
        """Natural chi scale used by the cumulant stencil."""
        st = self.l.svv * self.t
        h = self.l.hamiltonian
        if h is not None:
            e = np.linalg.eigvalsh(h)
            w = float(e[-1] - e[0])
            if w > 0:
                return math.sqrt(st + (self.l.a_vq / w) ** 2)
        return math.sqrt(st)


@dataclass(frozen=True, eq=False)
class GeneratingFunctionSamples:
    chi_values: np.ndarray
    values: np.ndarray
    t_total: float
    normalization: complex = 1.0
    a_vq: float = 1.0
    source: Callable | None = field(default=None, repr=False)

    def symmetry_residual(self) -> float:
        """max |C(-chi) - conj C(chi)| over the pairs present on the grid."""
        n = self.values.size
        v = self.values[1:]
        return float(np.max(np.abs(v - np.conj(v[::-1])))) if n > 1 else 0.0

    def value_at_zero(self) -> complex:
        i = int(np.argmin(np.abs(self.chi_values)))
        return complex(self.values[i])


def sample_cf(l: Liouvillian, rho0, p, t: float,
              grid: ChiGridSpec | ChiGrid | None = None) -> GeneratingFunctionSamples:
    """Sample the conditioned generating function on a uniform chi grid.

    On an automatic grid the range is widened until the edge values fall below
    ``EDGE_TOL``.
    """
    cf = ConditionedCF(l, rho0, p, t)
    spread = l.obs.spread if l.obs is not None else 1.0
    g = resolve_grid(grid, l.svv, l.a_vq, t, spread)
    auto = grid is None or (isinstance(grid, ChiGridSpec) and grid.is_auto)
    for _ in range(8):
        chis = g.chi_values
        vals = cf(chis)
        if not auto or _edge(vals) <= EDGE_TOL:
            break
        # widen chi range at fixed output range
        g = ChiGrid(g.chi_max * 2, g.n_points * 2)
    return GeneratingFunctionSamples(chis, vals, float(t), cf.denominator, l.a_vq, cf)


def _edge(values: np.ndarray) -> float:
    return float(max(abs(values[0]), abs(values[-1]), abs(values[1]), abs(values[-2])))


# ---------------------------------------------------------------- distributions


@dataclass(frozen=True, eq=False)
class Distribution:
    grid: np.ndarray
    density: np.ndarray
    axis: str
    t_total: float
    imag_residual: float = 0.0
    flags: tuple = ()

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.grid))

    def mean(self) -> float:
        return float(np.trapezoid(self.grid * self.density, self.grid) / self.integral())

    def variance(self) -> float:
        m = self.mean()
        return float(np.trapezoid((self.grid - m) ** 2 * self.density, self.grid)
                     / self.integral())

    def min_density(self) -> float:
        return float(np.min(self.density))

    def clipped(self, tol: float = 1e-8) -> np.ndarray:
        """Presentation copy with ringing in (-tol, 0) set to zero."""
        d = self.density.copy()
        d[(d < 0) & (d > -tol)] = 0.0
        return d

    def cdf(self) -> np.ndarray:
        from scipy.integrate import cumulative_trapezoid

        return cumulative_trapezoid(self.density, self.grid, initial=0.0)

    def __call__(self, x) -> np.ndarray:
        return np.interp(x, self.grid, self.density)

    def crop(self, lo: float, hi: float) -> "Distribution":
        m = (self.grid >= lo) & (self.grid <= hi)
        return Distribution(self.grid[m], self.density[m], self.axis, self.t_total,
                            self.imag_residual, self.flags)


def _fft_density(values: np.ndarray, t: float, dchi: float) -> np.ndarray:
    return (t * dchi / (2 * math.pi)) * np.fft.fftshift(np.fft.fft(np.fft.ifftshift(values)))


def invert(cf: GeneratingFunctionSamples, axis: str = RESCALED_O,
           a_vq: float | None = None) -> Distribution:
    """Discrete Fourier inversion of sampled generating function values."""
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}")
    chi = np.asarray(cf.chi_values, dtype=float)
    n = chi.size
    if n < 64 or n % 2:
        raise ValueError("chi grid must have an even number (>= 64) of points")
    dchi = chi[1] - chi[0]
    if not np.allclose(np.diff(chi), dchi, rtol=1e-9, atol=0) or \
            abs(chi[n // 2]) > 1e-12 * abs(dchi):
        raise ValueError("chi grid must be uniform with chi = 0 at index n/2")
    edge = _edge(cf.values)
    if edge > EDGE_TOL:
        raise InsufficientDecay(f"|C| = {edge:.3g} at the chi grid edge; enlarge chi_max")
    raw = _fft_density(cf.values, cf.t_total, dchi)
    peak = float(np.max(np.abs(raw.real)))
    v = (np.arange(n) - n // 2) * (2 * math.pi / (cf.t_total * n * dchi))
    a = cf.a_vq if a_vq is None else a_vq
    dens = raw.real
    if axis == RESCALED_O:
        v = v / a
        dens = dens * abs(a)
        if a < 0:
            v, dens = v[::-1], dens[::-1]
    resid = float(np.max(np.abs(raw.imag)) / peak) if peak > 0 else 0.0
    return Distribution(v, dens, axis, cf.t_total, resid)


def conditioned_distribution(l: Liouvillian, rho0, p, t: float, grid=None,
                             axis: str = RESCALED_O) -> Distribution:
    return invert(sample_cf(l, rho0, p, t, grid), axis)


# ---------------------------------------------------------------- cumulants

# nine-point central stencils on offsets -4..4, exact for polynomials of degree 8
_STENCILS = {
    1: (np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0, 4 / 5, -1 / 5, 4 / 105, -1 / 280]), 8),
    2: (np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315,
                  -1 / 560]), 8),
    3: (np.array([-7 / 240, 3 / 10, -169 / 120, 61 / 30, 0, -61 / 30, 169 / 120, -3 / 10,
                  7 / 240]), 6),
    4: (np.array([7 / 240, -2 / 5, 169 / 60, -122 / 15, 91 / 8, -122 / 15, 169 / 60, -2 / 5,
                  7 / 240]), 6),
}
_OFFSETS = np.arange(-4, 5)


@dataclass(frozen=True, eq=False)
class CumulantVector:
    """kappa[n-1] is the n-th cumulant of the integrated output int_0^T V dt."""

    kappa: np.ndarray
    errors: np.ndarray
    imag: np.ndarray
    h: float
    t_total: float
    a_vq: float = 1.0
    flags: tuple = ()

    def __getitem__(self, n: int) -> float:
        return float(self.kappa[n - 1])

    @property
    def mean_output(self) -> float:
        """Mean of the rescaled time-averaged output, kappa_1 / (a T)."""
        return float(self.kappa[0] / (self.a_vq * self.t_total))


def _derivatives(f: Callable, h: float,
                 n_max: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Richardson-extrapolated derivatives of ln f at 0, error estimates, roundoff floors."""
    steps = [h, h / 2, h / 4]
    pts = np.concatenate([_OFFSETS * s for s in steps])
    with np.errstate(divide="ignore", invalid="ignore"):
        lv = np.log(np.asarray(f(pts), dtype=complex))
    lv = lv.reshape(3, 9)
    if not np.all(np.isfinite(lv)):
        raise IllConditionedStencil("generating function vanishes on the stencil")
    # keep the branch continuous across the stencil
    lv = lv.real + 1j * np.unwrap(lv.imag, axis=1)
    scale = max(1.0, float(np.max(np.abs(lv))))
    est, err, noise = [], [], []
    for n in range(1, n_max + 1):
        w, p = _STENCILS[n]
        noise.append(16 * np.finfo(float).eps * np.sum(np.abs(w)) * scale / steps[-1] ** n)
        d = [lv[i] @ w / steps[i] ** n for i in range(3)]
        r1 = [(2**p * d[i + 1] - d[i]) / (2**p - 1) for i in range(2)]
        q = p + 2
        r2 = (2**q * r1[1] - r1[0]) / (2**q - 1)
        est.append(r2)
        # the first-level spread catches non-smooth functions whose last level agrees by accident
        err.append(max(abs(r2 - r1[1]), abs(r1[1] - r1[0])))
    return np.array(est), np.array(err), np.array(noise)


def cumulants(cf, n_max: int = 4, h: float | None = None,
              check: bool = True) -> CumulantVector:
    """Cumulants kappa_n = d^n/d(i chi)^n ln C at chi = 0.

    ``cf`` is a GeneratingFunctionSamples carrying its source, a ConditionedCF,
    or any callable of chi together with an explicit step ``h``.
    """
    if not 1 <= n_max <= 4:
        raise ValueError("n_max must be between 1 and 4")
    src = cf.source if isinstance(cf, GeneratingFunctionSamples) else cf
    if src is None:
        raise ValueError("generating function samples carry no source for the stencil pass")
    if h is None:
        if not isinstance(src, ConditionedCF):
            raise ValueError("a step h is required for a bare callable")
        h = 0.01 / src.scale
    t = src.t if isinstance(src, ConditionedCF) else getattr(cf, "t_total", 1.0)
    a = src.l.a_vq if isinstance(src, ConditionedCF) else getattr(cf, "a_vq", 1.0)
    d, err, floor = _derivatives(src, h, n_max)
    n = np.arange(1, n_max + 1)
    kappa = (-1j) ** n * d
    flags = []
    for k in range(n_max):
        if check and err[k] > 0.01 * abs(kappa[k]) + floor[k]:
            raise IllConditionedStencil(
                f"kappa_{k + 1}: Richardson error {err[k]:.3g} vs value {abs(kappa[k]):.3g}")
    if n_max >= 2 and kappa[1].real < 0:
        flags.append("negative_kappa2")
    return CumulantVector(kappa.real, err, kappa.imag, float(h), float(t), float(a), tuple(flags))


# ---------------------------------------------------------------- comparisons


@dataclass(frozen=True, eq=False)
class ConditionedComparison:
    p_plus: Distribution
    p_minus: Distribution
    difference: np.ndarray
    certainty: np.ndarray
    extrema: dict

    @property
    def grid(self) -> np.ndarray:
        return self.p_plus.grid

    @property
    def t_total(self) -> float:
        return self.p_plus.t_total


def compare(p_plus: Distribution, p_minus: Distribution,
            floor: float = 1e-300) -> ConditionedComparison:
    """Difference and certainty (P+ - P-)/(P+ + P-) on a shared grid.

    The certainty uses clipped densities so FFT ringing cannot push it outside
    [-1, 1]; where the clipped sum is below ``floor`` it is NaN.
    """
    if p_plus.grid.shape != p_minus.grid.shape or not np.array_equal(p_plus.grid, p_minus.grid):
        raise GridMismatch("conditioned distributions live on different grids")
    diff = p_plus.density - p_minus.density
    pp, pm = np.maximum(p_plus.density, 0), np.maximum(p_minus.density, 0)
    tot = pp + pm
    cert = np.full_like(diff, np.nan)
    ok = tot > floor
    cert[ok] = (pp[ok] - pm[ok]) / tot[ok]
    g = p_plus.grid
    i_max, i_min = int(np.argmax(diff)), int(np.argmin(diff))
    extrema = {
        "difference_max": float(diff[i_max]), "o_at_max": float(g[i_max]),
        "difference_min": float(diff[i_min]), "o_at_min": float(g[i_min]),
    }
    return ConditionedComparison(p_plus, p_minus, diff, cert, extrema)


# ---------------------------------------------------------------- two detectors


@dataclass(frozen=True, eq=False)
class Distribution2D:
    grid_x: np.ndarray
    grid_y: np.ndarray
    density: np.ndarray  # indexed [ix, iy]
    axis: str
    t_total: float
    imag_residual: float = 0.0

    def integral(self) -> float:
        return float(np.trapezoid(np.trapezoid(self.density, self.grid_y, axis=1), self.grid_x))

    def marginal(self, axis: str = "x") -> Distribution:
        """Integrate out the other output (Riemann sum on the periodic grid)."""
        if axis == "x":
            dy = self.grid_y[1] - self.grid_y[0]
            return Distribution(self.grid_x, self.density.sum(axis=1) * dy, self.axis,
                                self.t_total)
        if axis == "y":
            dx = self.grid_x[1] - self.grid_x[0]
            return Distribution(self.grid_y, self.density.sum(axis=0) * dx, self.axis,
                                self.t_total)
        raise ValueError("axis must be 'x' or 'y'")


def joint_cf(jl: JointLiouvillian, rho0, p, t: float, chi_x, chi_y) -> np.ndarray:
    """C(chi_x, chi_y; t) on the outer product grid, normalized at the origin."""
    rho = _rho(rho0)
    r = _selector_op(p).T.reshape(-1)
    v = vec(rho)
    cx, cy = np.meshgrid(np.asarray(chi_x, float), np.asarray(chi_y, float), indexing="ij")
    flat_x, flat_y = cx.reshape(-1), cy.reshape(-1)

    def raw(fx, fy):
        out = np.empty(fx.shape, dtype=complex)
        for s in range(0, fx.size, CHUNK):
            x, y = fx[s:s + CHUNK], fy[s:s + CHUNK]
            m = (jl.l0 + x[:, None, None] * jl.lx + y[:, None, None] * jl.ly) * t
            inc = expm_increment(m)
            gauss = np.exp(-0.5 * t * (x**2 * jl.svv_x + y**2 * jl.svv_y))
            out[s:s + CHUNK] = gauss * (r @ v + (inc @ v) @ r)
        return out

    den = raw(np.zeros(1), np.zeros(1))[0]
    if abs(den) < DENOMINATOR_TOL:
        raise ZeroOverlapDenominator(f"Tr(p rho(T)) = {abs(den):.3g} at chi = 0")
    return (raw(flat_x, flat_y) / den).reshape(cx.shape)


def joint_distribution(jl: JointLiouvillian, rho0, p, t: float,
                       grid_x: ChiGridSpec | ChiGrid | None = None,
                       grid_y: ChiGridSpec | ChiGrid | None = None,
                       axis: str = RESCALED_O) -> Distribution2D:
    """Joint density of the two time-averaged outputs by 2-D FFT inversion."""
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}")
    gx = resolve_grid(grid_x, jl.svv_x, jl.a_x, t)
    gy = resolve_grid(grid_y, jl.svv_y, jl.a_y, t)
    c = joint_cf(jl, rho0, p, t, gx.chi_values, gy.chi_values)
    edge = max(np.max(np.abs(c[[0, -1], :])), np.max(np.abs(c[:, [0, -1]])))
    if edge > EDGE_TOL:
        raise InsufficientDecay(f"|C| = {edge:.3g} at the chi grid edge; enlarge chi_max")
    pref = (t * gx.dchi / (2 * math.pi)) * (t * gy.dchi / (2 * math.pi))
    raw = pref * np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(c)))
    vx, vy = gx.output_grid(t), gy.output_grid(t)
    dens = raw.real
    if axis == RESCALED_O:
        vx, vy = vx / jl.a_x, vy / jl.a_y
        dens = dens * abs(jl.a_x * jl.a_y)
        if jl.a_x < 0:
            vx, dens = vx[::-1], dens[::-1, :]
        if jl.a_y < 0:
            vy, dens = vy[::-1], dens[:, ::-1]
    peak = float(np.max(np.abs(raw.real)))
    resid = float(np.max(np.abs(raw.imag)) / peak) if peak > 0 else 0.0
    return Distribution2D(vx, vy, dens, axis, float(t), resid)


# ---------------------------------------------------------------- long-time shift model


def shift_model_difference(o, s: float, mean_o: float, sigma: float) -> np.ndarray:
    """P+ - P- to first order in S for Gaussians centred at <O> +- S t_a / T.

    With sigma^2 = t_a / 4T the shift is 4 S sigma^2 and the difference is
    8 S x g(x), x = O - <O>, g the zero-mean Gaussian of width sigma.
    """
    x = np.asarray(o, dtype=float) - mean_o
    g = np.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
    return 8 * s * x * g


@dataclass(frozen=True)
class ShiftFit:
    s: float
    mean_o: float
    residual: float
    n_points: int
    note: str = ""


def fit_shift_model(comparisons: Sequence[ConditionedComparison], t_a: float,
                    min_t_ratio: float = 4.0, signal_floor: float = 1e-6,
                    crop_sigma: float = 5.0) -> ShiftFit:
    """Least-squares fit of S and <O> to the long-time difference of P+ and P-.

    Each comparison contributes the points within ``crop_sigma`` of its mean.
    If every difference is below ``signal_floor`` times the peak density the
    difference has vanished and S = 0 is returned without fitting.
    """
    if not comparisons:
        raise ValueError("no comparisons to fit")
    xs, ys, sig, peaks = [], [], [], []
    for c in comparisons:
        t = c.t_total
        if t < min_t_ratio * t_a * (1 - 1e-12):
            raise ValueError(f"T = {t:g} is below {min_t_ratio:g} t_a; not in the long-time regime")
        sigma = math.sqrt(t_a / (4 * t))
        m = 0.5 * (c.p_plus.mean() + c.p_minus.mean())
        sel = np.abs(c.grid - m) <= crop_sigma * sigma
        xs.append(c.grid[sel])
        ys.append(c.difference[sel])
        sig.append(np.full(sel.sum(), sigma))
        peaks.append(max(np.max(c.p_plus.density), np.max(c.p_minus.density)))
    x, y, s_arr = np.concatenate(xs), np.concatenate(ys), np.concatenate(sig)
    if np.max(np.abs(y)) <= signal_floor * max(peaks):
        return ShiftFit(0.0, float(np.mean([0.5 * (c.p_plus.mean() + c.p_minus.mean())
                                            for c in comparisons])),
                        0.0, int(x.size), "difference below signal floor")

    m0 = float(np.mean([0.5 * (c.p_plus.mean() + c.p_minus.mean()) for c in comparisons]))
    basis = shift_model_difference(x, 1.0, m0, s_arr)
    s0 = float(basis @ y / (basis @ basis))

    def resid(p):
        return shift_model_difference(x, p[0], p[1], s_arr) - y

    sol = least_squares(resid, x0=[s0, m0], x_scale=[max(abs(s0), 1e-3), 0.1], method="lm")
    rel = float(np.linalg.norm(sol.fun) / np.linalg.norm(y))
    if rel > 0.2:
        raise PoorFit(f"relative residual {rel:.3f} > 0.2 (S = {sol.x[0]:.4g})")
    return ShiftFit(float(sol.x[0]), float(sol.x[1]), rel, int(x.size))
