"""Closed-form distributions and cumulants for limiting regimes.

These are fast paths and oracles for the numerical pipeline.  All densities
live on the rescaled output axis O = V / a_VQ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidK, NonzeroOverlap, ZeroOverlap
from .model import DetectorParams, ObservableSpec, QubitState, _as_ket
from .statistics import RESCALED_O, Distribution, shift_model_difference

DENOMINATOR_TOL = 1e-14


def gaussian(x, sigma: float):
    """Zero-mean normal density of width sigma."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))


def _dist(grid, density, t=float("nan"), flags=()) -> Distribution:
    return Distribution(np.asarray(grid, dtype=float), np.asarray(density, dtype=float),
                        RESCALED_O, t, 0.0, tuple(flags))


# ---------------------------------------------------------------- half-sum peaks


@dataclass(frozen=True, eq=False)
class AnalyticWeights:
    """Weights of the Gaussians centred at (O_i + O_j) / 2, in the O eigenbasis."""

    w: np.ndarray
    eigenvalues: np.ndarray
    regularized: bool
    gamma_t: float
    denominator: float

    def centre_weights(self) -> dict[float, float]:
        """Total (real) weight per distinct peak position."""
        out: dict[float, float] = {}
        n = len(self.eigenvalues)
        for i in range(n):
            for j in range(n):
                c = round(0.5 * float(self.eigenvalues[i] + self.eigenvalues[j]), 12)
                out[c] = out.get(c, 0.0) + float(self.w[i, j].real)
        return dict(sorted(out.items()))


def half_sum_weights(rho0, psi, obs: ObservableSpec, gamma_t: float = 0.0) -> AnalyticWeights:
    """W_ij = Psi_j Psi_i^* rho_ij exp(-gamma T (O_i - O_j)^2 / 2) / W.

    ``psi`` is the post-selected pure state.  With ``gamma_t = 0`` the
    normalization is the overlap <Psi|rho0|Psi>.
    """
    if gamma_t < 0:
        raise ValueError("gamma_t must be non-negative")
    rho = rho0.rho if isinstance(rho0, QubitState) else np.asarray(rho0, dtype=complex)
    r = obs.to_eigenbasis(rho)
    p = obs.to_eigenbasis(_as_ket(psi))
    o = obs.eigenvalues
    w = np.conj(p)[:, None] * p[None, :] * r
    if gamma_t > 0:
        w = w * np.exp(-0.5 * gamma_t * (o[:, None] - o[None, :]) ** 2)
    den = w.sum()
    if abs(den) < DENOMINATOR_TOL:
        raise ZeroOverlap("post-selected state is orthogonal to the initial state; "
                          "use zero_overlap_distribution or the regularized jump forms")
    return AnalyticWeights(w / den.real, o.copy(), gamma_t > 0, float(gamma_t), float(den.real))


def half_sum_distribution(w: AnalyticWeights, sigma: float, grid) -> Distribution:
    """Sum of weighted Gaussians at the half-sums of eigenvalue pairs.

    Negative densities are kept and flagged ``nonphysical``.
    """
    grid = np.asarray(grid, dtype=float)
    dens = np.zeros_like(grid)
    for centre, weight in w.centre_weights().items():
        dens += weight * gaussian(grid - centre, sigma)
    flags = ("nonphysical",) if np.min(dens) < -1e-12 * np.max(np.abs(dens)) else ()
    return _dist(grid, dens, flags=flags)


def zero_overlap_distribution(k: float, sigma: float, grid) -> Distribution:
    """(1 + ((O/sigma)^2 - 1)/K) g(O): orthogonal pre- and post-selection, short T."""
    if not k >= 1:
        raise InvalidK(f"detector quality K = {k} < 1")
    grid = np.asarray(grid, dtype=float)
    dens = (1 + ((grid / sigma) ** 2 - 1) / k) * gaussian(grid, sigma)
    return _dist(grid, dens)


# ---------------------------------------------------------------- sudden jump


def sudden_jump_cf(chi, t: float, d: DetectorParams, omega: float | None = None,
                   general: tuple | None = None):
    """Conditioned generating function for orthogonal pre/post states as T -> 0.

    Default: drive (omega/2) sigma_x, measured sigma_y, Z+ -> Z-, giving
    (1 - i chi a / omega)^2 times the detector Gaussian.

    ``general = (h, initial, final, obs)`` evaluates
    <f|H_k|i><i|H_b|f> / |<f|H|i>|^2 with H_k,b = H -+ chi a O / 2.
    """
    chi = np.asarray(chi, dtype=float)
    gauss = np.exp(-0.5 * chi**2 * t * d.s_vv)
    if general is None:
        if not omega:
            raise ValueError("omega must be nonzero")
        return (1 - 1j * chi * d.a_vq / omega) ** 2 * gauss
    h, initial, final, obs = general
    h = np.asarray(h, dtype=complex)
    i, f = _as_ket(initial), _as_ket(final)
    if abs(np.vdot(f, i)) ** 2 > 1e-12:
        raise NonzeroOverlap("initial and post-selected states must be orthogonal")
    o = obs.matrix if isinstance(obs, ObservableSpec) else np.asarray(obs, dtype=complex)
    hfi = np.vdot(f, h @ i)
    ofi = np.vdot(f, o @ i)
    hif = np.vdot(i, h @ f)
    oif = np.vdot(i, o @ f)
    norm = abs(hfi) ** 2
    if norm < DENOMINATOR_TOL:
        raise ZeroOverlap("Hamiltonian does not connect the two states")
    half = 0.5 * chi * d.a_vq
    return (hfi - half * ofi) * (hif + half * oif) / norm * gauss


def sudden_jump_cumulants(n: int, a_vq: float, omega: float) -> float:
    """Printed closed form 2 (-1)^n (a/omega)^n (n-1)! for the jump cumulants.

    It agrees with the log-derivatives of ``sudden_jump_cf`` for odd n only;
    see ``sudden_jump_cumulants_exact``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if omega == 0:
        raise ValueError("omega must be nonzero")
    return 2.0 * (-1) ** n * (a_vq / omega) ** n * math.factorial(n - 1)


def sudden_jump_cumulants_exact(n: int, a_vq: float, omega: float) -> float:
    """d^n/d(i chi)^n of 2 ln(1 - i chi a / omega) at zero: -2 (n-1)! (a/omega)^n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if omega == 0:
        raise ValueError("omega must be nonzero")
    return -2.0 * (a_vq / omega) ** n * math.factorial(n - 1)


def regularized_jump_cf(chi, t: float, d: DetectorParams, omega: float,
                        gamma: float | None = None):
    """Jump generating function with back-action dephasing gamma (default S_QQ)."""
    gamma = d.gamma if gamma is None else gamma
    if not (gamma > 0 or t > 0):
        raise ValueError("need gamma > 0 or t > 0")
    chi = np.asarray(chi, dtype=float)
    num = 4 * gamma + t * (omega - 1j * d.a_vq * chi) ** 2
    return num / (4 * gamma + t * omega**2) * np.exp(-0.5 * chi**2 * t * d.s_vv)


def regularized_jump_mean(t, gamma: float, omega: float):
    """Conditioned mean output -2 omega / (4 gamma + T omega^2)."""
    t = np.asarray(t, dtype=float)
    if not (gamma > 0 or np.all(t > 0)):
        raise ValueError("need gamma > 0 or t > 0")
    return -2 * omega / (4 * gamma + t * omega**2)


def regularized_jump_distribution(grid, t: float, omega: float, d: DetectorParams) -> Distribution:
    """[(K - 1) + (T/4t_a)(omega t_a - 4 O)^2] / [K + T t_a omega^2 / 4] g(O)."""
    k, ta = d.K, d.t_a
    if not k >= 1 - 1e-12:
        raise InvalidK(f"detector quality K = {k} < 1")
    grid = np.asarray(grid, dtype=float)
    num = (k - 1) + (t / (4 * ta)) * (omega * ta - 4 * grid) ** 2
    dens = num / (k + t * ta * omega**2 / 4) * gaussian(grid, d.sigma(t))
    return _dist(grid, dens, t)


def unregularized_jump_distribution(grid, t: float, omega: float, d: DetectorParams) -> Distribution:
    """((1 - 4 O/(omega t_a))^2 - 4/(omega^2 T t_a)) g(O); negative near the centre."""
    ta = d.t_a
    grid = np.asarray(grid, dtype=float)
    dens = ((1 - 4 * grid / (omega * ta)) ** 2 - 4 / (omega**2 * t * ta)) \
        * gaussian(grid, d.sigma(t))
    flags = ("nonphysical",) if np.min(dens) < 0 else ()
    return _dist(grid, dens, t, flags)


# ---------------------------------------------------------------- long times


def long_time_model(o_grid, s: float, mean_o: float, sigma: float):
    """Difference and certainty of two Gaussians shifted by +-4 S sigma^2.

    Returns ``(difference, certainty)`` with difference 8 S x g(x) to first
    order in S and certainty tanh(4 S x), x = O - <O>.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(o_grid, dtype=float) - mean_o
    return shift_model_difference(o_grid, s, mean_o, sigma), np.tanh(4 * s * x)


class RabiKinematics(NamedTuple):
    y_avg: np.ndarray | float
    p_minus: np.ndarray | float


def rabi_kinematics(t, omega: float, delta: float = 0.0) -> RabiKinematics:
    """Time-averaged <sigma_y> and Z- population for free evolution from Z+.

    H = (omega sigma_x + delta sigma_z) / 2, W = sqrt(omega^2 + delta^2):
    y(t) = -(omega/W) sin(W t), p_-(t) = (omega/W)^2 sin^2(W t / 2).
    """
    if omega == 0:
        raise ValueError("omega must be nonzero")
    t = np.asarray(t, dtype=float)
    w = math.hypot(omega, delta)
    wt = w * t
    with np.errstate(invalid="ignore", divide="ignore"):
        y = np.where(wt > 1e-6, -(omega / w) * (1 - np.cos(wt)) / np.where(wt > 0, wt, 1),
                     -(omega / w) * wt / 2)
    p = (omega / w) ** 2 * np.sin(wt / 2) ** 2
    if y.ndim == 0:
        return RabiKinematics(float(y), float(p))
    return RabiKinematics(y, p)
