"""Shared strategies and small builders for the test suite."""

from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from cwlm.generator import build_experimental, build_ideal, build_nondemolition
from cwlm.model import (
    DetectorParams,
    ObservableSpec,
    QubitParams,
    QubitState,
    make_post_selector,
)

PAULI_LABELS = ("x", "y", "z")


@st.composite
def bloch_states(draw, max_r=1.0):
    v = np.array([draw(st.floats(-1, 1)) for _ in range(3)])
    n = np.linalg.norm(v)
    r = draw(st.floats(0, max_r))
    v = np.array([0, 0, 1.0]) if n < 1e-6 else v / n
    return QubitState.from_bloch(r * v)


@st.composite
def pure_kets(draw):
    theta = draw(st.floats(0, np.pi))
    phi = draw(st.floats(0, 2 * np.pi))
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


@st.composite
def detectors(draw, k_min=1.0):
    t_a = draw(st.floats(0.3, 3.0))
    k = draw(st.floats(k_min, 5.0))
    return DetectorParams.from_acquisition_time(t_a, k=k)


@st.composite
def scenarios(draw):
    """(liouvillian, rho0, post-selector, T) for a random physical setup."""
    model = draw(st.sampled_from(["ideal", "nondemolition", "experimental"]))
    obs = ObservableSpec.pauli(draw(st.sampled_from(PAULI_LABELS)))
    d = draw(detectors())
    t = draw(st.floats(0.1, 3.0)) * d.t_a
    if model == "ideal":
        q = QubitParams(omega=draw(st.floats(0, 3)), delta=draw(st.floats(-2, 2)))
        l = build_ideal(obs, d, q.hamiltonian())
    elif model == "nondemolition":
        l = build_nondemolition(obs, d)
    else:
        q = QubitParams(omega=draw(st.floats(0, 3)), delta=draw(st.floats(-2, 2)),
                        gamma_d=draw(st.floats(0, 1)), gamma_up=draw(st.floats(0.05, 1)),
                        gamma_down=draw(st.floats(0.05, 1)))
        l = build_experimental(obs, q, d)
    rho0 = draw(bloch_states())
    psi = draw(pure_kets())
    p = make_post_selector(psi, label="psi")
    # keep away from the zero-overlap regime here
    return l, rho0, p, t


def gaussian(x, mu, sigma):
    return np.exp(-0.5 * ((x - mu) / sigma) ** 2) / (sigma * np.sqrt(2 * np.pi))
