"""Domain types, unit conventions and parameter validation.

Conventions used throughout the package:

* hbar = 1; every rate and time is expressed in one user-declared time unit.
* Qubit basis ordering is (|e>, |g>), so sigma_z = |e><e| - |g><g| = diag(1, -1),
  sigma_+ = |e><g| and sigma_- = |g><e|.  The labels ``Z+``/``Z-`` denote the
  sigma_z eigenstates |e> and |g>.
* The detector output is expressed on the rescaled axis O = V / a_vq unless a
  raw axis is requested explicitly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    InvalidState,
    NonFiniteParameter,
    NotNormalized,
    NotOrthogonal,
    PhysicalityViolation,
    PhysicsWarning,
    ProbabilityOutOfRange,
)

HERMITIAN_TOL = 1e-12

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)

PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}

for _m in (IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z, SIGMA_PLUS, SIGMA_MINUS):
    _m.flags.writeable = False

_S = 1 / math.sqrt(2)
_KETS = {
    "Z+": (1, 0),
    "Z-": (0, 1),
    "X+": (_S, _S),
    "X-": (_S, -_S),
    "Y+": (_S, 1j * _S),
    "Y-": (_S, -1j * _S),
}
_KETS["e"] = _KETS["Z+"]
_KETS["g"] = _KETS["Z-"]


def ket(label: str) -> np.ndarray:
    """Return the normalized state vector for a label such as ``"Z+"`` or ``"g"``."""
    try:
        return np.array(_KETS[label], dtype=complex)
    except KeyError:
        raise ValueError(f"unknown state label {label!r}; known: {sorted(_KETS)}") from None


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    arr.flags.writeable = False
    return arr


def _check_finite(**values):
    for name, v in values.items():
        if not np.all(np.isfinite(v)):
            raise NonFiniteParameter(f"{name} must be finite, got {v!r}")


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    return bool(np.max(np.abs(a - a.conj().T)) <= tol * max(1.0, np.max(np.abs(a))))


def _normalized_ket(psi, what: str = "state") -> np.ndarray:
    v = np.asarray(psi, dtype=complex).reshape(-1)
    if v.shape != (2,):
        raise ValueError(f"{what} must be a 2-component vector")
    _check_finite(**{what: v})
    norm = np.linalg.norm(v)
    if abs(norm - 1) > HERMITIAN_TOL:
        raise NotNormalized(f"{what} has norm {norm:.15g}, expected 1")
    return v


def _as_ket(psi) -> np.ndarray:
    return ket(psi) if isinstance(psi, str) else _normalized_ket(psi)


# ---------------------------------------------------------------------------
# parameter types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DetectorParams:
    """Zero-frequency correlators of a linear detector.

    ``s_qq`` is the input noise, ``s_vv`` the output noise, ``s_qv`` the cross
    noise, ``a_vq`` the forward gain and ``a_qv`` the reverse gain.
    """

    s_qq: float
    s_vv: float
    s_qv: float = 0.0
    a_vq: float = 1.0
    a_qv: float = 0.0

    def __post_init__(self):
        _check_finite(s_qq=self.s_qq, s_vv=self.s_vv, s_qv=self.s_qv,
                      a_vq=self.a_vq, a_qv=self.a_qv)
        if self.s_qq < 0 or self.s_vv < 0:
            raise ValueError("noise spectral densities must be non-negative")
        if self.a_vq == 0:
            raise ValueError("forward gain a_vq must be nonzero")

    @classmethod
    def from_acquisition_time(cls, t_a: float, k: float = 1.0, a_vq: float = 1.0,
                              s_qv: float = 0.0, a_qv: float = 0.0) -> "DetectorParams":
        """Build a detector from its acquisition time and quality ``k = gamma * t_a``."""
        if not t_a > 0:
            raise ValueError("acquisition time must be positive")
        return cls(s_qq=k / t_a, s_vv=t_a * a_vq**2 / 4, s_qv=s_qv, a_vq=a_vq, a_qv=a_qv)

    @property
    def gamma(self) -> float:
        """Back-action dephasing constant S_QQ (hbar = 1)."""
        return self.s_qq

    @property
    def t_a(self) -> float:
        return 4 * self.s_vv / self.a_vq**2

    @property
    def K(self) -> float:
        return self.gamma * self.t_a

    def sigma(self, t: float) -> float:
        """Width of the time-averaged rescaled output after a window ``t``."""
        if not t > 0:
            raise ValueError("measurement time must be positive")
        return math.sqrt(self.t_a / (4 * t))


@dataclass(frozen=True)
class QubitParams:
    omega: float = 0.0
    delta: float = 0.0
    gamma_d: float = 0.0
    gamma_up: float = 0.0
    gamma_down: float = 0.0

    def __post_init__(self):
        _check_finite(omega=self.omega, delta=self.delta, gamma_d=self.gamma_d,
                      gamma_up=self.gamma_up, gamma_down=self.gamma_down)
        if min(self.gamma_d, self.gamma_up, self.gamma_down) < 0:
            raise ValueError("dissipation rates must be non-negative")

    def hamiltonian(self) -> np.ndarray:
        """Rotating-frame Hamiltonian (omega sigma_x + delta sigma_z) / 2."""
        return 0.5 * self.omega * SIGMA_X + 0.5 * self.delta * SIGMA_Z

    def without_dissipation(self) -> "QubitParams":
        return QubitParams(omega=self.omega, delta=self.delta)


class ObservableSpec:
    """Hermitian 2x2 measured operator together with its eigendecomposition."""

    def __init__(self, matrix):
        m = np.array(matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("observable must be a 2x2 matrix")
        _check_finite(observable=m)
        if not is_hermitian(m):
            raise InvalidState("observable must be Hermitian")
        m = 0.5 * (m + m.conj().T)
        w, v = np.linalg.eigh(m)
        self.matrix = _frozen(m)
        self.eigenvalues = w
        self.eigenvalues.flags.writeable = False
        self.eigenvectors = _frozen(v)

    @classmethod
    def pauli(cls, axis: str) -> "ObservableSpec":
        return cls(PAULI[axis.lower()])

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def to_eigenbasis(self, a: np.ndarray) -> np.ndarray:
        """Matrix elements <i|a|j> in the eigenbasis (or components of a ket)."""
        v = self.eigenvectors
        a = np.asarray(a)
        if a.ndim == 1:
            return v.conj().T @ a
        return v.conj().T @ a @ v

    @property
    def spread(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    def __repr__(self):
        return f"ObservableSpec(eigenvalues={self.eigenvalues.tolist()})"


@dataclass(frozen=True, eq=False)
class QubitState:
    """2x2 density matrix; ``quasi`` marks counting-field evolved matrices."""

    rho: np.ndarray
    quasi: bool = False

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.shape != (2, 2):
            raise ValueError("a qubit state is a 2x2 matrix")
        rho.flags.writeable = False
        object.__setattr__(self, "rho", rho)

    @classmethod
    def physical(cls, rho) -> "QubitState":
        rho = np.asarray(rho, dtype=complex)
        _check_finite(rho=rho)
        if not is_hermitian(rho):
            raise InvalidState("density matrix must be Hermitian")
        if abs(np.trace(rho) - 1) > HERMITIAN_TOL:
            raise InvalidState("density matrix must have unit trace")
        if np.min(np.linalg.eigvalsh(rho)) < -HERMITIAN_TOL:
            raise InvalidState("density matrix must be positive semidefinite")
        return cls(rho)

    @classmethod
    def pure(cls, psi) -> "QubitState":
        v = _as_ket(psi)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls) -> "QubitState":
        return cls(IDENTITY / 2)

    @classmethod
    def from_bloch(cls, r) -> "QubitState":
        x, y, z = r
        if x * x + y * y + z * z > 1 + HERMITIAN_TOL:
            raise InvalidState("Bloch vector outside the unit ball")
        return cls(0.5 * (IDENTITY + x * SIGMA_X + y * SIGMA_Y + z * SIGMA_Z))

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    def expectation(self, op) -> complex:
        return complex(np.trace(np.asarray(op) @ self.rho))

    def is_physical(self, tol: float = 1e-10) -> bool:
        rho = self.rho
        return (is_hermitian(rho, tol) and abs(np.trace(rho) - 1) <= tol
                and np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) >= -tol)


@dataclass(frozen=True, eq=False)
class PostSelector:
    """Operator replacing the final projector; unit trace, eigenvalues in [0, 1]."""

    op: np.ndarray
    label: str = ""

    def __post_init__(self):
        op = np.array(self.op, dtype=complex)
        if op.shape != (2, 2):
            raise ValueError("post-selector must be 2x2")
        _check_finite(post_selector=op)
        if not is_hermitian(op):
            raise InvalidState("post-selector must be Hermitian")
        if abs(np.trace(op) - 1) > HERMITIAN_TOL:
            raise InvalidState("post-selector must have unit trace")
        w = np.linalg.eigvalsh(op)
        if w.min() < -HERMITIAN_TOL or w.max() > 1 + HERMITIAN_TOL:
            raise InvalidState("post-selector eigenvalues must lie in [0, 1]")
        op.flags.writeable = False
        object.__setattr__(self, "op", op)

    def complement(self) -> "PostSelector":
        """Orthogonal partner I - op (only defined for rank-one projectors)."""
        return PostSelector(IDENTITY - self.op, label=f"not({self.label})")


def make_post_selector(psi=None, *, faulty=None, label: str | None = None) -> PostSelector:
    """Projector on ``psi``, or the faulty mixture ``(psi1, psi2, p_e)``.

    ``faulty=(psi1, psi2, p_e)`` yields (1 - p_e)|psi1><psi1| + p_e|psi2><psi2|
    with orthogonal psi1, psi2.  States may be vectors or labels like ``"Z-"``.
    """
    if (psi is None) == (faulty is None):
        raise ValueError("give exactly one of psi or faulty=(psi1, psi2, p_e)")
    if psi is not None:
        v = _as_ket(psi)
        name = label if label is not None else (psi if isinstance(psi, str) else "psi")
        return PostSelector(np.outer(v, v.conj()), label=name)
    psi1, psi2, p_e = faulty
    _check_finite(p_e=p_e)
    if not 0 <= p_e <= 1:
        raise ProbabilityOutOfRange(f"error probability {p_e} outside [0, 1]")
    v1, v2 = _as_ket(psi1), _as_ket(psi2)
    if abs(np.vdot(v1, v2)) > HERMITIAN_TOL:
        raise NotOrthogonal("faulty post-selection needs orthogonal states")
    op = (1 - p_e) * np.outer(v1, v1.conj()) + p_e * np.outer(v2, v2.conj())
    name = label if label is not None else (
        f"{psi1 if isinstance(psi1, str) else 'psi1'}(p_e={p_e:g})")
    return PostSelector(op, label=name)


@dataclass(frozen=True)
class MeasurementConfig:
    t_total: float
    observable: ObservableSpec
    frame_rotation: bool = False
    chi_grid: object = None  # statistics.ChiGridSpec; None means automatic

    def __post_init__(self):
        _check_finite(t_total=self.t_total)
        if not self.t_total > 0:
            raise ValueError("measurement duration must be positive")


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InequalityCheck:
    name: str
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs

    @property
    def passed(self) -> bool:
        return self.margin >= -1e-12 * max(1.0, abs(self.lhs), abs(self.rhs))

    def as_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs,
                "margin": self.margin, "passed": self.passed}


@dataclass
class ValidationReport:
    checks: list[InequalityCheck] = field(default_factory=list)
    derived: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.as_dict() for c in self.checks],
                "derived": dict(self.derived), "notes": list(self.notes)}

    def raise_or_warn(self, strict: bool) -> "ValidationReport":
        if self.passed:
            return self
        failed = ", ".join(f"{c.name} (margin {c.margin:.4g})" for c in self.checks if not c.passed)
        msg = f"Cauchy-Schwarz bound violated: {failed}"
        if strict:
            raise PhysicalityViolation(msg)
        warnings.warn(msg, PhysicsWarning, stacklevel=3)
        return self


def _detector_derived(d: DetectorParams) -> dict:
    return {"gamma": d.gamma, "t_a": d.t_a, "K": d.K}


def validate_single_detector(d: DetectorParams, strict: bool = False) -> ValidationReport:
    """Check S_QQ S_VV - |S_QV|^2 >= |a_VQ - a_QV|^2 / 4 for a single detector."""
    report = ValidationReport(derived=_detector_derived(d))
    report.checks.append(InequalityCheck(
        "single_detector",
        lhs=d.s_qq * d.s_vv - abs(d.s_qv) ** 2,
        rhs=0.25 * abs(d.a_vq - d.a_qv) ** 2,
    ))
    if d.s_qv == 0 and d.a_qv == 0:
        report.notes.append("reduced form gamma * t_a >= 1 applies (K >= 1)")
    return report.raise_or_warn(strict)


def validate_experimental(q: QubitParams,
                          d: DetectorParams | Mapping[str, DetectorParams],
                          strict: bool = False) -> ValidationReport:
    """Check (gamma_up + gamma_down) S_VV / 4 - |S_QV|^2 >= |a_VQ|^2 / 4 per channel.

    ``d`` is a single detector or a mapping channel name -> detector for
    simultaneous measurements.
    """
    channels = {"detector": d} if isinstance(d, DetectorParams) else dict(d)
    report = ValidationReport()
    for name, det in channels.items():
        report.checks.append(InequalityCheck(
            f"experimental[{name}]",
            lhs=0.25 * (q.gamma_up + q.gamma_down) * det.s_vv - abs(det.s_qv) ** 2,
            rhs=0.25 * abs(det.a_vq) ** 2,
        ))
        report.derived[name] = {"t_a": det.t_a, "K_dephasing": q.gamma_d * det.t_a,
                                "s_vv": det.s_vv, "a_vq": det.a_vq}
        report.notes.append(f"{name}: output normalized with a_vq={det.a_vq:g}, "
                            f"S_VV = t_a a_vq^2 / 4 = {det.s_vv:g}")
    return report.raise_or_warn(strict)


def sigma_table(d: DetectorParams, t_values: Sequence[float]) -> list[dict]:
    return [{"t": float(t), "sigma": d.sigma(t)} for t in t_values]
