"""Monte Carlo unraveling of the measured qubit with sampled post-selection.

The output channel is monitored as a diffusive record of ``c = alpha O`` with

    alpha = (a_VQ / 2 - i S_QV) / sqrt(S_VV).

Each time step applies, in the O eigenbasis, the exact Gaussian Kraus operator

    M(y) = exp(i Im(alpha) (y O - Re(alpha) dt O^2)) G(y),
    G_i(y) = exp(-(y - 2 Re(alpha) O_i dt)^2 / (4 dt)),

whose record increment of the integrated output is ``sqrt(S_VV) y``.  Averaged
with the counting field this generates exactly the linear and quadratic
chi terms of the Liouvillian together with a dephasing ``|alpha|^2 D[O]``.
The rest, ``l0 + |alpha|^2 D[O]``, must itself be a valid Lindblad generator
and is applied around each Kraus step as a symmetric (Strang) split.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.linalg import expm
from scipy.stats import kstwo

from .errors import EmptyEnsemble, PhysicsWarning, StateBlowup, UnravelingInfeasible
from .generator import Liouvillian, dissipator
from .model import IDENTITY, PostSelector, QubitState
from .statistics import RESCALED_O, Distribution

BLOWUP_TOL = 1e-6
CP_TOL = 1e-10
SELECTED, REJECTED, ALL = "selected", "rejected", "all"


@dataclass(frozen=True)
class TrajectoryConfig:
    """Integration settings.

    ``dt=None`` picks 0.01 * min(t_a, 1 / spectral radius of l0).
    ``efficiency`` is fixed by the detector: the monitored fraction of the
    O-dephasing is ``|alpha|^2 / gamma`` (1/K for S_QV = 0).  Passing a value
    only asserts it.
    """

    n_traj: int = 1000
    seed: int = 0
    dt: float | None = None
    efficiency: float | None = None
    decouple_record: bool = False
    chunk: int = 4096

    def __post_init__(self):
        if int(self.n_traj) != self.n_traj or self.n_traj < 1:
            raise ValueError("n_traj must be a positive integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.dt is not None and not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError("dt must be positive")
        if self.efficiency is not None and not 0 < self.efficiency <= 1:
            raise ValueError("efficiency must lie in (0, 1]")
        if self.chunk < 1:
            raise ValueError("chunk must be positive")


def _choi(sup: np.ndarray) -> np.ndarray:
    """Choi matrix sum_ij E_ij (x) L(E_ij) of a row-major superoperator."""
    c = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[i, j] = 1
            c += np.kron(e, (sup @ e.reshape(-1)).reshape(2, 2))
    return c


def conditional_cp_margin(sup: np.ndarray) -> float:
    """Smallest eigenvalue of the Choi matrix projected off the maximally entangled state.

    Non-negative iff exp(sup t) is completely positive for all t >= 0
    (given Hermiticity preservation).
    """
    omega = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)
    q = np.eye(4) - np.outer(omega, omega.conj())
    c = q @ _choi(sup) @ q
    return float(np.min(np.linalg.eigvalsh(0.5 * (c + c.conj().T))))


@dataclass(frozen=True, eq=False)
class Unraveling:
    """Split of a Liouvillian into a monitored channel and a residual generator."""

    l: Liouvillian
    alpha: complex
    l_res: np.ndarray
    cp_margin: float
    efficiency: float
    eigenvalues: np.ndarray = field(repr=False)
    basis: np.ndarray = field(repr=False)

    @classmethod
    def from_liouvillian(cls, l: Liouvillian, decouple_record: bool = False) -> "Unraveling":
        if l.obs is None:
            raise ValueError("Liouvillian must carry its observable")
        s_qv = l.detector.s_qv if l.detector is not None else 0.0
        alpha = 0j if decouple_record else (0.5 * l.a_vq - 1j * s_qv) / math.sqrt(l.svv)
        o = l.obs.matrix
        l_res = l.l0 + abs(alpha) ** 2 * dissipator(o)
        scale = max(1.0, float(np.max(np.abs(l.l0))))
        margin = conditional_cp_margin(l_res)
        if margin < -CP_TOL * scale:
            raise UnravelingInfeasible(
                f"l0 + |alpha|^2 D[O] is not a Lindblad generator (Choi margin {margin:.3g}); "
                f"the record demands more back-action (|alpha|^2 = {abs(alpha)**2:.4g}) "
                "than the generator provides")
        # monitored share of the O-dephasing seen in l0
        d_o = dissipator(o)
        gamma_o = max(float(np.real(-np.vdot(d_o.reshape(-1), l.l0.reshape(-1))
                                    / np.vdot(d_o.reshape(-1), d_o.reshape(-1)))), 0.0)
        eff = abs(alpha) ** 2 / gamma_o if gamma_o > 0 else float("nan")
        return cls(l, complex(alpha), l_res, margin, eff, l.obs.eigenvalues.copy(),
                   l.obs.eigenvectors.copy())

    def default_dt(self) -> float:
        ta = self.l.detector.t_a if self.l.detector is not None else 4 * self.l.svv / self.l.a_vq**2
        rad = float(np.max(np.abs(np.linalg.eigvals(self.l.l0))))
        return 0.01 * min(ta, 1 / rad) if rad > 0 else 0.01 * ta

    def real_propagator(self, tau: float) -> np.ndarray:
        """exp(l_res tau) acting on (rho_00, rho_11, Re rho_01, Im rho_01) in the O basis."""
        v = self.basis
        to_eig = np.kron(v.conj().T, v.T)
        sup = to_eig @ self.l_res @ np.linalg.inv(to_eig)
        e = expm(sup * tau)
        # complex vec (00, 01, 10, 11) <-> real params
        t = np.array([[1, 0, 0, 0], [0, 0, 1, 1j], [0, 0, 1, -1j], [0, 1, 0, 0]], dtype=complex)
        tinv = np.linalg.inv(t)
        r = tinv @ e @ t
        return np.ascontiguousarray(r.real)


def _apply(r: np.ndarray, s: list) -> list:
    """r @ (s0, s1, s2, s3) with explicit elementwise sums.

    Avoids BLAS so every trajectory's arithmetic is independent of batch size.
    """
    return [r[k, 0] * s[0] + r[k, 1] * s[1] + r[k, 2] * s[2] + r[k, 3] * s[3]
            for k in range(4)]


RNG_BLOCK = 512


class _Streams:
    """Per-trajectory Philox streams keyed by (seed, stream_index).

    Each stream yields, per block of RNG_BLOCK steps, that many normals then
    that many uniforms; one final uniform decides the post-selection.
    """

    def __init__(self, seed: int, indices: np.ndarray):
        self.gens = [np.random.Generator(np.random.Philox(key=int(seed),
                                                          counter=[0, 0, 0, int(i)]))
                     for i in indices]

    def block(self, n_steps: int) -> tuple[np.ndarray, np.ndarray]:
        z = np.empty((n_steps, len(self.gens)))
        u = np.empty((n_steps, len(self.gens)))
        for k, g in enumerate(self.gens):
            z[:, k] = g.standard_normal(n_steps)
            u[:, k] = g.random(n_steps)
        return z, u

    def final(self) -> np.ndarray:
        return np.array([g.random() for g in self.gens])


@dataclass(frozen=True)
class TrajectoryOutcome:
    stream_index: int
    integrated_v: float
    final_state: QubitState
    post_selected: bool


@dataclass(frozen=True, eq=False)
class TrajectoryBatch:
    stream_indices: np.ndarray
    integrated_v: np.ndarray
    selected: np.ndarray
    final_rho: np.ndarray
    selection_prob: np.ndarray
    t_total: float
    a_vq: float
    dt: float
    n_steps: int

    def __len__(self) -> int:
        return int(self.integrated_v.size)

    @property
    def o_values(self) -> np.ndarray:
        """Rescaled time-averaged outputs (int V dt) / (a_VQ T)."""
        return self.integrated_v / (self.a_vq * self.t_total)

    @property
    def selected_fraction(self) -> float:
        return float(np.mean(self.selected))

    def mean_state(self) -> np.ndarray:
        return self.final_rho.mean(axis=0)

    def outcome(self, k: int) -> TrajectoryOutcome:
        return TrajectoryOutcome(int(self.stream_indices[k]), float(self.integrated_v[k]),
                                 QubitState(self.final_rho[k]), bool(self.selected[k]))

    def outcomes(self) -> list[TrajectoryOutcome]:
        return [self.outcome(k) for k in range(len(self))]


def _run_chunk(u: Unraveling, rho0: np.ndarray, p_eig: np.ndarray, dt: float,
               n_steps: int, streams: _Streams):
    n = len(streams.gens)
    o = u.eigenvalues
    ar, ai = u.alpha.real, u.alpha.imag
    r_half = u.real_propagator(0.5 * dt)
    r_full = u.real_propagator(dt)
    s = [np.full(n, x) for x in (rho0[0, 0].real, rho0[1, 1].real, rho0[0, 1].real,
                                 rho0[0, 1].imag)]
    mu = 2 * ar * o * dt
    # Kraus action relative to the two eigen-branches
    d_mu = mu[0] - mu[1]
    s_mu = mu[0] + mu[1]
    phase_y = ai * (o[0] - o[1])
    phase_0 = -ai * ar * dt * (o[0] ** 2 - o[1] ** 2)
    sq = math.sqrt(dt)
    y_sum = np.zeros(n)
    for b0 in range(0, n_steps, RNG_BLOCK):
        nb = min(RNG_BLOCK, n_steps - b0)
        z, un = streams.block(nb)
        for j in range(nb):
            s = _apply(r_half if b0 + j == 0 else r_full, s)
            p0 = s[0] / (s[0] + s[1])
            y = np.where(un[j] >= p0, mu[1], mu[0]) + sq * z[j]
            y_sum += y
            delta = (d_mu / (4 * dt)) * (2 * y - s_mu)
            ph = phase_y * y + phase_0
            # scaled by exp(-|delta|) so sharp records cannot overflow
            m = np.abs(delta)
            c, sn = np.cos(ph) * np.exp(-m), np.sin(ph) * np.exp(-m)
            a00, a11 = s[0] * np.exp(delta - m), s[1] * np.exp(-delta - m)
            inv = 1.0 / (a00 + a11)
            s = [a00 * inv, a11 * inv, (s[2] * c - s[3] * sn) * inv,
                 (s[2] * sn + s[3] * c) * inv]
        if not all(np.all(np.isfinite(x)) for x in s):
            raise StateBlowup("non-finite state; reduce dt")
    s = np.stack(_apply(r_half, s), axis=1)
    tr = s[:, 0] + s[:, 1]
    det = s[:, 0] * s[:, 1] - s[:, 2] ** 2 - s[:, 3] ** 2
    if np.max(np.abs(tr - 1)) > BLOWUP_TOL or np.min(det) < -BLOWUP_TOL \
            or np.min(s[:, :2]) < -BLOWUP_TOL:
        raise StateBlowup("trajectory state lost trace or positivity; reduce dt")
    s = s / tr[:, None]
    rho_eig = np.empty((n, 2, 2), dtype=complex)
    rho_eig[:, 0, 0] = s[:, 0]
    rho_eig[:, 1, 1] = s[:, 1]
    rho_eig[:, 0, 1] = s[:, 2] + 1j * s[:, 3]
    rho_eig[:, 1, 0] = s[:, 2] - 1j * s[:, 3]
    q = np.clip(np.einsum("ij,nji->n", p_eig, rho_eig).real, 0.0, 1.0)
    sel = streams.final() < q
    v = u.basis
    rho = v[None] @ rho_eig @ v.conj().T[None]
    return math.sqrt(u.l.svv) * y_sum, sel, rho, q


def simulate_ensemble(l: Liouvillian, rho0, p: PostSelector | None, t: float,
                      cfg: TrajectoryConfig, start_index: int = 0,
                      indices=None, threads: int = 1) -> TrajectoryBatch:
    """Run ``cfg.n_traj`` trajectories (or the given stream indices).

    Chunks of ``cfg.chunk`` runs may be spread over ``threads`` worker threads;
    the result does not depend on either setting.
    """
    if not t > 0:
        raise ValueError("measurement time must be positive")
    u = Unraveling.from_liouvillian(l, cfg.decouple_record)
    if cfg.efficiency is not None and not math.isclose(cfg.efficiency, u.efficiency,
                                                       rel_tol=1e-9):
        raise ValueError(f"efficiency {cfg.efficiency} is inconsistent with the detector "
                         f"parameters, which fix it at {u.efficiency:.6g}")
    dt_max = u.default_dt()
    dt_req = dt_max if cfg.dt is None else cfg.dt
    if cfg.dt is not None and cfg.dt > dt_max * (1 + 1e-9):
        warnings.warn(f"dt = {cfg.dt:g} exceeds the recommended {dt_max:.3g}", PhysicsWarning)
    n_steps = max(1, math.ceil(t / dt_req - 1e-9))
    dt = t / n_steps
    rho = rho0.rho if isinstance(rho0, QubitState) else np.asarray(rho0, dtype=complex)
    rho_e = l.obs.to_eigenbasis(rho)
    p_op = IDENTITY if p is None else (p.op if isinstance(p, PostSelector) else np.asarray(p))
    p_eig = l.obs.to_eigenbasis(np.asarray(p_op, dtype=complex))
    if indices is None:
        indices = np.arange(start_index, start_index + cfg.n_traj, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)

    def work(lo):
        return _run_chunk(u, rho_e, p_eig, dt, n_steps,
                          _Streams(cfg.seed, indices[lo:lo + cfg.chunk]))

    starts = range(0, indices.size, cfg.chunk)
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(work, starts))
    else:
        parts = [work(lo) for lo in starts]
    iv, sel, rhos, q = (np.concatenate([pt[i] for pt in parts]) for i in range(4))
    return TrajectoryBatch(indices, iv, sel, rhos, q, float(t), float(l.a_vq), float(dt), n_steps)


def simulate_run(l: Liouvillian, rho0, p: PostSelector | None, t: float,
                 cfg: TrajectoryConfig, stream_index: int) -> TrajectoryOutcome:
    """Single trajectory, bit-identical to the same stream inside an ensemble."""
    return simulate_ensemble(l, rho0, p, t, cfg, indices=[stream_index]).outcome(0)


# ---------------------------------------------------------------- histograms and tests


@dataclass(frozen=True, eq=False)
class EnsembleHistogram:
    distribution: Distribution
    counts: np.ndarray
    edges: np.ndarray
    stderr: np.ndarray
    samples: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return int(self.counts.sum())


def _subset(batch, condition: str) -> np.ndarray:
    if isinstance(batch, TrajectoryBatch):
        o, sel = batch.o_values, batch.selected
    else:
        runs = list(batch)
        if not runs:
            raise EmptyEnsemble("no runs")
        raise TypeError("pass a TrajectoryBatch; use simulate_ensemble to build one")
    if condition == SELECTED:
        return o[sel]
    if condition == REJECTED:
        return o[~sel]
    if condition == ALL:
        return o
    raise ValueError(f"condition must be one of {SELECTED, REJECTED, ALL}")


def ensemble_histogram(batch: TrajectoryBatch, condition: str = SELECTED, bins=100,
                       range_=None, min_runs: int = 100) -> EnsembleHistogram:
    """Normalized histogram of rescaled outputs with multinomial standard errors."""
    x = _subset(batch, condition)
    if x.size < min_runs:
        raise EmptyEnsemble(f"only {x.size} runs in the '{condition}' subset (< {min_runs})")
    if range_ is None and np.ptp(x) == 0:
        range_ = (x[0] - 0.5, x[0] + 0.5)
        if np.ndim(bins) == 0:
            bins = 1
    counts, edges = np.histogram(x, bins=bins, range=range_)
    width = np.diff(edges)
    n = x.size
    f = counts / n
    dens = f / width
    err = np.sqrt(f * (1 - f) / n) / width
    centres = 0.5 * (edges[1:] + edges[:-1])
    dist = Distribution(centres, dens, RESCALED_O, batch.t_total)
    return EnsembleHistogram(dist, counts, edges, err, np.sort(x))


@dataclass(frozen=True)
class KSResult:
    statistic: float
    p_value: float
    n: int


def _reference_cdf(reference: Distribution):
    c = cumulative_trapezoid(reference.density, reference.grid, initial=0.0)
    c = c / c[-1]
    return lambda x: np.interp(x, reference.grid, c, left=0.0, right=1.0)


def ks_distance(empirical, reference) -> KSResult:
    """Kolmogorov-Smirnov distance between samples and a reference distribution.

    ``empirical`` is an array of samples or an EnsembleHistogram (its raw
    samples are used).  ``reference`` is a Distribution, a second sample array
    or histogram, or a CDF callable.
    """
    x = empirical.samples if isinstance(empirical, EnsembleHistogram) else np.sort(
        np.asarray(empirical, dtype=float))
    n = x.size
    if n == 0:
        raise EmptyEnsemble("no samples")
    if isinstance(reference, Distribution):
        cdf = _reference_cdf(reference)
    elif callable(reference):
        cdf = reference
    else:
        y = reference.samples if isinstance(reference, EnsembleHistogram) else np.sort(
            np.asarray(reference, dtype=float))
        grid = np.concatenate([x, y])
        fx = np.searchsorted(x, grid, side="right") / n
        fy = np.searchsorted(y, grid, side="right") / y.size
        d = float(np.max(np.abs(fx - fy)))
        ne = n * y.size / (n + y.size)
        return KSResult(d, float(kstwo.sf(d, max(1, round(ne)))), n)
    f = cdf(x)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
    return KSResult(d, float(kstwo.sf(d, n)), n)


def write_records(batch: TrajectoryBatch, path) -> None:
    """One row per run: stream_index, integrated_v, selected (0/1)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stream_index", "integrated_v", "selected"])
        for i, v, s in zip(batch.stream_indices, batch.integrated_v, batch.selected):
            w.writerow([int(i), repr(float(v)), int(s)])
