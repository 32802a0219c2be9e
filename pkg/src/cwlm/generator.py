"""Counting-field augmented Liouvillians.

Superoperators act on row-major vectorized 2x2 matrices, ``vec(rho) =
rho.reshape(-1)``, for which ``vec(A rho B) = kron(A, B.T) @ vec(rho)``.  Every
generator has the form

    L(chi) = l0 + chi * l1 - (chi**2 * svv / 2) * Id

with l0 the ordinary Lindblad generator and l1 the part linear in the
counting field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    IDENTITY,
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    DetectorParams,
    ObservableSpec,
    QubitParams,
)

ID4 = np.eye(4, dtype=complex)
TRACE_ROW = IDENTITY.reshape(-1).copy()
TRACE_ROW.flags.writeable = False


def vec(rho) -> np.ndarray:
    return np.asarray(rho, dtype=complex).reshape(-1)


def unvec(v) -> np.ndarray:
    return np.asarray(v).reshape(2, 2)


def left(a) -> np.ndarray:
    """rho -> a @ rho"""
    return np.kron(a, IDENTITY)


def right(b) -> np.ndarray:
    """rho -> rho @ b"""
    return np.kron(IDENTITY, np.asarray(b).T)


def commutator(a) -> np.ndarray:
    """rho -> [a, rho]"""
    return left(a) - right(a)


def anticommutator(a) -> np.ndarray:
    """rho -> {a, rho}"""
    return left(a) + right(a)


def sandwich(a, b=None) -> np.ndarray:
    """rho -> a @ rho @ b (b defaults to a^dagger)"""
    a = np.asarray(a, dtype=complex)
    b = a.conj().T if b is None else np.asarray(b)
    return np.kron(a, b.T)


def hamiltonian_part(h) -> np.ndarray:
    """rho -> -i [h, rho]"""
    return -1j * commutator(h)


def dissipator(a) -> np.ndarray:
    """rho -> (a^dag a rho + rho a^dag a) / 2 - a rho a^dag.

    Enters the equations of motion with a minus sign, ``-rate * D[a]``.
    """
    a = np.asarray(a, dtype=complex)
    n = a.conj().T @ a
    return 0.5 * anticommutator(n) - sandwich(a)


def counting_part(obs: ObservableSpec, d: DetectorParams) -> np.ndarray:
    """Linear-in-chi terms: -S_QV [rho, O] + (i a_VQ / 2) {rho, O}."""
    o = obs.matrix
    return -d.s_qv * (right(o) - left(o)) + 0.5j * d.a_vq * anticommutator(o)


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """Polynomial generator in a single counting field.

    ``a_vq`` and ``obs`` are carried along so downstream code can pick output
    axes and grids without re-deriving them.
    """

    l0: np.ndarray
    l1: np.ndarray
    svv: float
    a_vq: float = 1.0
    obs: ObservableSpec | None = None
    detector: DetectorParams | None = None
    hamiltonian: np.ndarray | None = None

    def __post_init__(self):
        for name in ("l0", "l1"):
            m = np.array(getattr(self, name), dtype=complex)
            m.flags.writeable = False
            object.__setattr__(self, name, m)

    def at(self, chi: float) -> np.ndarray:
        return self.l0 + chi * self.l1 - 0.5 * chi**2 * self.svv * ID4

    def trace_residual(self) -> float:
        """max |t . l0|, zero for a trace-preserving generator."""
        return float(np.max(np.abs(TRACE_ROW @ self.l0)))

    def with_l0(self, l0) -> "Liouvillian":
        return Liouvillian(l0, self.l1, self.svv, self.a_vq, self.obs, self.detector,
                           self.hamiltonian)


@dataclass(frozen=True, eq=False)
class JointLiouvillian:
    """Generator with two counting fields for simultaneous x and y detectors."""

    l0: np.ndarray
    lx: np.ndarray
    ly: np.ndarray
    svv_x: float
    svv_y: float
    a_x: float = 1.0
    a_y: float = 1.0
    obs_x: ObservableSpec | None = None
    obs_y: ObservableSpec | None = None

    def at(self, chi_x: float, chi_y: float) -> np.ndarray:
        return (self.l0 + chi_x * self.lx + chi_y * self.ly
                - 0.5 * (chi_x**2 * self.svv_x + chi_y**2 * self.svv_y) * ID4)

    def trace_residual(self) -> float:
        return float(np.max(np.abs(TRACE_ROW @ self.l0)))

    def slice_x(self) -> Liouvillian:
        """Single-field generator in chi_x with chi_y held at zero."""
        return Liouvillian(self.l0, self.lx, self.svv_x, self.a_x, self.obs_x)

    def slice_y(self) -> Liouvillian:
        return Liouvillian(self.l0, self.ly, self.svv_y, self.a_y, self.obs_y)


def build_ideal(obs: ObservableSpec, d: DetectorParams, h=None) -> Liouvillian:
    """Single coupling operator with detector back-action as the only dissipation."""
    h = np.zeros((2, 2), complex) if h is None else np.asarray(h, dtype=complex)
    l0 = hamiltonian_part(h) - d.s_qq * dissipator(obs.matrix)
    return Liouvillian(l0, counting_part(obs, d), d.s_vv, d.a_vq, obs, d, h)


def experimental_l0(q: QubitParams) -> np.ndarray:
    return (hamiltonian_part(q.hamiltonian())
            - q.gamma_d * dissipator(SIGMA_Z)
            - q.gamma_up * dissipator(SIGMA_PLUS)
            - q.gamma_down * dissipator(SIGMA_MINUS))


def build_experimental(obs: ObservableSpec, q: QubitParams, d: DetectorParams) -> Liouvillian:
    """Driven, detuned qubit with intrinsic dephasing, excitation and relaxation.

    The detector back-action is assumed to be contained in the three intrinsic
    rates, so ``d.s_qq`` does not enter.
    """
    return Liouvillian(experimental_l0(q), counting_part(obs, d), d.s_vv, d.a_vq, obs, d,
                       q.hamiltonian())


def build_nondemolition(obs: ObservableSpec, d: DetectorParams,
                        gamma: float | None = None) -> Liouvillian:
    """Pure measurement plus dephasing by the measured operator; no Hamiltonian.

    ``gamma`` defaults to the detector back-action constant ``d.s_qq``.
    """
    gamma = d.s_qq if gamma is None else gamma
    if gamma < 0:
        raise ValueError("dephasing rate must be non-negative")
    l0 = -gamma * dissipator(obs.matrix)
    return Liouvillian(l0, counting_part(obs, d), d.s_vv, d.a_vq, obs, d,
                       np.zeros((2, 2), complex))


def build_two_detector(q: QubitParams, dx: DetectorParams, dy: DetectorParams,
                       ideal: bool = True) -> JointLiouvillian:
    """Simultaneous sigma_x and sigma_y measurement by independent detectors.

    ``ideal=True``: decoherence comes from the two back-actions only.
    ``ideal=False``: intrinsic rates of ``q`` replace the back-action terms.
    """
    ox, oy = ObservableSpec(SIGMA_X), ObservableSpec(SIGMA_Y)
    if ideal:
        l0 = (hamiltonian_part(q.hamiltonian())
              - dx.s_qq * dissipator(SIGMA_X) - dy.s_qq * dissipator(SIGMA_Y))
    else:
        l0 = experimental_l0(q)
    return JointLiouvillian(l0, counting_part(ox, dx), counting_part(oy, dy),
                            dx.s_vv, dy.s_vv, dx.a_vq, dy.a_vq, ox, oy)
