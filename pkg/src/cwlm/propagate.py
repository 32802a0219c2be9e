"""Fixed-chi propagation of quasi-density matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import DegenerateKernel, ExpmFailure
from .generator import Liouvillian, unvec, vec
from .model import PostSelector, QubitState, is_hermitian

KERNEL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class PropagationResult:
    rho_final: QubitState
    chi: float
    t_total: float


def _as_rho(rho0) -> np.ndarray:
    return rho0.rho if isinstance(rho0, QubitState) else np.asarray(rho0, dtype=complex)


def _l0(l) -> np.ndarray:
    return l.l0 if isinstance(l, Liouvillian) else np.asarray(l, dtype=complex)


def propagator(l: Liouvillian, chi, t: float) -> np.ndarray:
    """exp(L(chi) t) for a scalar chi or an array of chi values (stacked)."""
    if t < 0:
        raise ValueError("propagation time must be non-negative")
    chi = np.asarray(chi, dtype=float)
    # the -chi^2 svv/2 identity term commutes with the rest and is applied as a scalar
    with np.errstate(over="ignore", invalid="ignore"):
        m = (l.l0 + chi[..., None, None] * l.l1) * t
        u = expm(m) * np.exp(-0.5 * chi**2 * l.svv * t)[..., None, None]
    if not np.all(np.isfinite(u)):
        raise ExpmFailure(f"matrix exponential overflowed (t={t}, max|chi|={np.max(np.abs(chi))})")
    return u


def expm_increment(m: np.ndarray) -> np.ndarray:
    """exp(m) - 1 for stacked square matrices, accurate to its own size.

    Computed as ``m phi1(m)`` with phi1 read off the exponential of the block
    matrix [[m, 1], [0, 0]], so nothing is lost to cancellation against the
    identity when m is small.
    """
    n = m.shape[-1]
    block = np.zeros(m.shape[:-2] + (2 * n, 2 * n), dtype=complex)
    block[..., :n, :n] = m
    block[..., :n, n:] = np.eye(n)
    with np.errstate(over="ignore", invalid="ignore"):
        inc = m @ expm(block)[..., :n, n:]
    if not np.all(np.isfinite(inc)):
        raise ExpmFailure("matrix exponential overflowed")
    return inc


def propagator_increment(l: Liouvillian, chi, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Split exp(L(chi) t) = (1 + inc) * gauss, see ``expm_increment``."""
    if t < 0:
        raise ValueError("propagation time must be non-negative")
    chi = np.asarray(chi, dtype=float)
    inc = expm_increment((l.l0 + chi[..., None, None] * l.l1) * t)
    return inc, np.exp(-0.5 * chi**2 * l.svv * t)


def evolve(l: Liouvillian, chi: float, rho0, t: float) -> PropagationResult:
    """rho(chi; t) = unvec(exp(L(chi) t) vec(rho0))."""
    u = propagator(l, chi, t)
    rho = unvec(u @ vec(_as_rho(rho0)))
    return PropagationResult(QubitState(rho, quasi=chi != 0), float(chi), float(t))


def evolve_many(l: Liouvillian, chis, rho0, t: float) -> np.ndarray:
    """Final quasi-density matrices for every chi, shape (n, 2, 2)."""
    u = propagator(l, np.asarray(chis, dtype=float), t)
    return (u @ vec(_as_rho(rho0))).reshape(-1, 2, 2)


def stationary_state(l, diagnostics: dict | None = None) -> QubitState:
    """Unique trace-one null vector of l0.

    Pass a dict as ``diagnostics`` to receive the residual, the Hermiticity
    defect before symmetrization and the singular-value gap.
    """
    l0 = _l0(l)
    _, s, vh = np.linalg.svd(l0)
    scale = max(np.max(np.abs(l0)), 1e-300)
    if s[-2] <= KERNEL_TOL * scale:
        raise DegenerateKernel(
            f"second smallest singular value {s[-2]:.3g} <= {KERNEL_TOL:g} * |l0|")
    rho = unvec(vh[-1].conj())
    tr = np.trace(rho)
    if abs(tr) < 1e-14:
        raise DegenerateKernel("null vector of l0 is traceless")
    rho = rho / tr
    asym = float(np.max(np.abs(rho - rho.conj().T)))
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    residual = float(np.linalg.norm(l0 @ vec(rho)))
    if diagnostics is not None:
        diagnostics.update(residual=residual, asymmetry=asym,
                           singular_gap=float(s[-2] / scale))
    return QubitState(rho)


def unitary(h, t: float) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h):
        raise ValueError("Hamiltonian must be Hermitian")
    return expm(-1j * h * t)


def rotate_post_selector(p: PostSelector, h, t: float) -> PostSelector:
    """U p U^dagger with U = exp(-i h t): post-select on the freely evolved state."""
    u = unitary(h, t)
    op = u @ p.op @ u.conj().T
    return PostSelector(0.5 * (op + op.conj().T), label=p.label)


def integrated_propagator(l0, t: float) -> np.ndarray:
    """int_0^t exp(l0 s) ds from the block exponential [[l0, 1], [0, 0]]."""
    l0 = np.asarray(l0, dtype=complex)
    n = l0.shape[0]
    block = np.zeros((2 * n, 2 * n), dtype=complex)
    block[:n, :n] = l0
    block[:n, n:] = np.eye(n)
    return expm(block * t)[:n, n:]


def time_averaged_expectation(l, rho0, op, t: float) -> float:
    """(1/t) int_0^t Tr(op rho(s)) ds for the chi = 0 dynamics."""
    if not t > 0:
        raise ValueError("averaging window must be positive")
    rho_int = unvec(integrated_propagator(_l0(l), t) @ vec(_as_rho(rho0)))
    return float(np.real(np.trace(np.asarray(op) @ rho_int)) / t)

