import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from cwlm.analytic import (
    gaussian,
    half_sum_distribution,
    half_sum_weights,
    long_time_model,
    rabi_kinematics,
    regularized_jump_cf,
    regularized_jump_distribution,
    regularized_jump_mean,
    sudden_jump_cf,
    sudden_jump_cumulants,
    sudden_jump_cumulants_exact,
    unregularized_jump_distribution,
    zero_overlap_distribution,
)
from cwlm.errors import InvalidK, NonzeroOverlap, ZeroOverlap
from cwlm.generator import build_ideal, build_nondemolition
from cwlm.model import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    DetectorParams,
    ObservableSpec,
    QubitParams,
    QubitState,
    make_post_selector,
)
from cwlm.propagate import time_averaged_expectation
from cwlm.statistics import ConditionedCF, conditioned_distribution, cumulants

from helpers import bloch_states, pure_kets

SX, SY = ObservableSpec.pauli("x"), ObservableSpec.pauli("y")


def test_gaussian_examples():
    assert gaussian(0.0, 1.0) == pytest.approx(0.3989422804, abs=1e-10)
    assert gaussian(0.7, 0.7) / gaussian(0.0, 0.7) == pytest.approx(math.exp(-0.5))
    assert quad(lambda x: gaussian(x, 0.3), -np.inf, np.inf)[0] == pytest.approx(1, abs=1e-10)
    with pytest.raises(ValueError):
        gaussian(0.0, 0.0)


def test_half_sum_weights_examples():
    w = half_sum_weights(QubitState.pure("Z+"), "Z+", SX)
    assert np.allclose(w.w, 0.25)
    w = half_sum_weights(QubitState.pure("X+"), "Z+", SX)
    i = int(np.argmax(SX.eigenvalues))
    expect = np.zeros((2, 2))
    expect[i, i] = 1
    assert np.allclose(w.w, expect)
    w = half_sum_weights(QubitState.pure("Z+"), "Z-", SX, gamma_t=0.5)
    assert np.allclose(np.diag(w.w).real, 0.7909883534, atol=1e-9)
    assert np.allclose(w.w[0, 1].real, -0.2909883534, atol=1e-9)
    assert w.centre_weights()[0.0] == pytest.approx(-0.5819767069, abs=1e-9)


def test_half_sum_zero_overlap():
    with pytest.raises(ZeroOverlap):
        half_sum_weights(QubitState.pure("Z+"), "Z-", SX)


def test_half_sum_distribution_examples():
    grid = np.linspace(-5, 5, 1001)
    w = half_sum_weights(QubitState.pure("X+"), "Z+", SX)
    dist = half_sum_distribution(w, 0.5, grid)
    assert np.allclose(dist.density, gaussian(grid - 1, 0.5))
    w = half_sum_weights(QubitState.pure("Z+"), "Z+", SX)
    assert w.centre_weights() == pytest.approx({-1.0: 0.25, 0.0: 0.5, 1.0: 0.25})


@settings(max_examples=30, deadline=None)
@given(bloch_states(), pure_kets(), st.floats(0, 2))
def test_weights_sum_to_one_and_hermitian(rho0, psi, gt):
    try:
        w = half_sum_weights(rho0, psi, SX, gt)
    except ZeroOverlap:
        return
    assert abs(w.w.sum() - 1) < 1e-12
    if np.allclose(rho0.rho.imag, 0) and np.allclose(np.asarray(psi).imag, 0):
        assert np.allclose(w.w, w.w.conj().T, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(bloch_states(), st.floats(0.0, 1.0))
def test_complete_basis_sum_cancels_interference(rho0, theta):
    psi = np.array([math.cos(theta), math.sin(theta)])
    perp = np.array([-math.sin(theta), math.cos(theta)])
    grid = np.linspace(-4, 4, 801)
    sigma = 0.6
    total = np.zeros_like(grid)
    for p in (psi, perp):
        try:
            w = half_sum_weights(rho0, p, SX)
        except ZeroOverlap:
            continue
        prob = np.real(np.conj(p) @ rho0.rho @ p)
        total += prob * half_sum_distribution(w, sigma, grid).density
    r = SX.to_eigenbasis(rho0.rho)
    ref = sum(r[i, i].real * gaussian(grid - SX.eigenvalues[i], sigma) for i in range(2))
    assert np.max(np.abs(total - ref)) < 1e-12


@settings(max_examples=20, deadline=None)
@given(bloch_states(max_r=1.0), pure_kets(), st.floats(0.05, 2.0))
def test_nondemolition_oracle(rho0, psi, gt):
    d = DetectorParams.from_acquisition_time(1.0, k=1.0)
    t = gt / d.gamma
    try:
        w = half_sum_weights(rho0, psi, SX, gamma_t=gt)
    except ZeroOverlap:
        return
    if abs(w.denominator) < 1e-6:
        return
    l = build_nondemolition(SX, d)
    num = conditioned_distribution(l, rho0, make_post_selector(psi, label="psi"), t)
    ana = half_sum_distribution(w, d.sigma(t), num.grid)
    assert np.max(np.abs(num.density - ana.density)) < 1e-6


def test_zero_overlap_distribution():
    grid = np.linspace(-10, 10, 20001)
    for k in (1, 2, 5, 12, 1e9):
        dist = zero_overlap_distribution(k, 0.8, grid)
        assert dist.integral() == pytest.approx(1, abs=1e-10)
        assert dist.min_density() >= -1e-15
    assert zero_overlap_distribution(1, 0.8, np.array([0.0])).density[0] == 0.0
    far = zero_overlap_distribution(1e9, 0.8, grid).density
    assert np.max(np.abs(far - gaussian(grid, 0.8))) < 1e-9
    with pytest.raises(InvalidK):
        zero_overlap_distribution(0.9, 1.0, grid)


def test_sudden_jump_cf_properties():
    d = DetectorParams.from_acquisition_time(1.0)
    assert sudden_jump_cf(0.0, 0.1, d, 1.0) == pytest.approx(1.0)
    c = 0.7
    assert sudden_jump_cf(c, 0.1, d, 1.0) == pytest.approx(np.conj(sudden_jump_cf(-c, 0.1, d, 1.0)))


def test_sudden_jump_general_form_matches_concrete():
    d = DetectorParams.from_acquisition_time(1.0)
    omega = 1.3
    h = 0.5 * omega * SIGMA_X
    chi = np.linspace(-2, 2, 9)
    a = sudden_jump_cf(chi, 0.01, d, omega)
    b = sudden_jump_cf(chi, 0.01, d, general=(h, "Z+", "Z-", SIGMA_Y))
    assert np.allclose(a, b, atol=1e-13)
    with pytest.raises(NonzeroOverlap):
        sudden_jump_cf(chi, 0.01, d, general=(h, "Z+", "X+", SIGMA_Y))
    with pytest.raises(ZeroOverlap):
        sudden_jump_cf(chi, 0.01, d, general=(SIGMA_Z, "Z+", "Z-", SIGMA_Y))


def test_sudden_jump_cf_matches_master_equation():
    omega = 1.0
    d0 = DetectorParams.from_acquisition_time(1.0)
    d = DetectorParams(0.0, d0.s_vv)
    l = build_ideal(SY, d, 0.5 * omega * SIGMA_X)
    t = 1e-4
    cf = ConditionedCF(l, QubitState.pure("Z+"), make_post_selector("Z-"), t)
    chi = np.linspace(-3, 3, 13)
    assert np.allclose(cf(chi), sudden_jump_cf(chi, t, d, omega), atol=1e-3)


def test_printed_cumulant_formula():
    assert sudden_jump_cumulants(1, 1, 1) == -2
    assert sudden_jump_cumulants(2, 1, 1) == 2
    assert sudden_jump_cumulants(4, 2, 1) == 192
    # the log-derivatives of the concrete CF agree with the printed form for odd n only
    for n in (1, 3):
        assert sudden_jump_cumulants_exact(n, 1.3, 0.7) == pytest.approx(
            sudden_jump_cumulants(n, 1.3, 0.7))
    assert sudden_jump_cumulants_exact(2, 1, 1) == -2


def test_numerical_jump_cumulants_follow_log_derivatives():
    omega = 1.0
    d = DetectorParams(0.0, 0.25)
    l = build_ideal(SY, d, 0.5 * omega * SIGMA_X)
    t = 1e-3 / omega
    k = cumulants(ConditionedCF(l, QubitState.pure("Z+"), make_post_selector("Z-"), t), check=False)
    assert "negative_kappa2" in k.flags
    for n in (1, 2, 3):
        expect = sudden_jump_cumulants_exact(n, 1.0, omega) + (d.s_vv * t if n == 2 else 0)
        assert k[n] == pytest.approx(expect, rel=5e-3)


def test_regularized_jump_mean_and_limits():
    assert regularized_jump_mean(0.0, 0.5, 2.0) == pytest.approx(-2.0)
    with pytest.raises(ValueError):
        regularized_jump_mean(0.0, 0.0, 1.0)
    d = DetectorParams.from_acquisition_time(1.0, k=1.0)
    omega = 12.0
    zero = regularized_jump_distribution(np.array([omega * d.t_a / 4]), 0.1, omega, d)
    assert zero.density[0] == pytest.approx(0, abs=1e-15)
    grid = np.linspace(-40, 40, 40001)
    for t, k in ((0.05, 1.0), (0.3, 2.0)):
        dk = DetectorParams.from_acquisition_time(1.0, k=k)
        dist = regularized_jump_distribution(grid, t, omega, dk)
        assert dist.integral() == pytest.approx(1, abs=1e-9)
        assert dist.mean() == pytest.approx(regularized_jump_mean(t, dk.gamma, omega), abs=1e-8)
        assert dist.min_density() >= -1e-15
    # omega -> 0 reproduces the zero-overlap form
    dk = DetectorParams.from_acquisition_time(1.0, k=3.0)
    a = regularized_jump_distribution(grid, 0.2, 1e-9, dk).density
    b = zero_overlap_distribution(3.0, dk.sigma(0.2), grid).density
    assert np.max(np.abs(a - b)) < 1e-9
    with pytest.raises(InvalidK):
        regularized_jump_distribution(grid, 0.2, 1.0, DetectorParams.from_acquisition_time(1, k=0.5))


def test_regularized_cf_inverts_to_distribution():
    d = DetectorParams.from_acquisition_time(1.0, k=2.0)
    omega, t = 3.0, 0.4
    from cwlm.statistics import ChiGrid, GeneratingFunctionSamples, invert

    g = ChiGrid(60.0, 2048)
    s = GeneratingFunctionSamples(g.chi_values, regularized_jump_cf(g.chi_values, t, d, omega), t)
    dist = invert(s)
    ref = regularized_jump_distribution(dist.grid, t, omega, d)
    assert np.max(np.abs(dist.density - ref.density)) < 1e-10


def test_unregularized_jump_is_flagged():
    d = DetectorParams.from_acquisition_time(1.0)
    dist = unregularized_jump_distribution(np.linspace(-3, 3, 601), 0.01, 10.0, d)
    assert "nonphysical" in dist.flags


def test_long_time_model_shape():
    o = np.linspace(-3, 3, 60001)
    diff, cert = long_time_model(o, 0.04, 0.2, 0.5)
    i0 = int(np.argmin(np.abs(o - 0.2)))
    assert diff[i0] == pytest.approx(0, abs=1e-12) and cert[i0] == pytest.approx(0, abs=1e-12)
    assert o[np.argmax(diff)] == pytest.approx(0.7, abs=1e-4)
    assert o[np.argmin(diff)] == pytest.approx(-0.3, abs=1e-4)
    far = long_time_model(np.array([1e4, -1e4]), 0.04, 0.2, 0.5)[1]
    assert np.allclose(far, [1, -1])


def test_rabi_examples():
    omega = 1.7
    assert rabi_kinematics(2 * np.pi / omega, omega).p_minus == pytest.approx(0, abs=1e-15)
    t = 1e-3
    assert rabi_kinematics(t, omega).p_minus == pytest.approx((omega * t / 2) ** 2, rel=1e-6)
    w = math.hypot(omega, 1.7 * omega)
    assert rabi_kinematics(np.pi / w, omega, 1.7 * omega).p_minus == pytest.approx(
        1 / (1 + 1.7**2), rel=1e-12)


@pytest.mark.parametrize("delta_ratio", [0.0, 1.7, -0.4])
def test_rabi_matches_numerical_evolution(delta_ratio):
    omega = 1.1
    q = QubitParams(omega=omega, delta=delta_ratio * omega)
    l = build_ideal(SY, DetectorParams(0.0, 1.0), q.hamiltonian())
    rho0 = QubitState.pure("Z+")
    for t in (0.01, 0.7, 3.0, 9.0):
        y = time_averaged_expectation(l, rho0, SIGMA_Y, t)
        assert rabi_kinematics(t, omega, q.delta).y_avg == pytest.approx(y, abs=1e-12)


def test_conditioned_mean_times_probability():
    # no dissipation, no back-action: conditioned mean * p_minus = contribution to the mean
    omega = 1.0
    d = DetectorParams(0.0, 0.25)
    l = build_ideal(SY, d, 0.5 * omega * SIGMA_X)
    rho0 = QubitState.pure("Z+")
    for t in (0.3, 1.0, 2.5):
        cm = cumulants(ConditionedCF(l, rho0, make_post_selector("Z-"), t), n_max=1)
        cp = cumulants(ConditionedCF(l, rho0, make_post_selector("Z+"), t), n_max=1)
        pm = rabi_kinematics(t, omega).p_minus
        y = rabi_kinematics(t, omega).y_avg
        assert cm.mean_output * pm + cp.mean_output * (1 - pm) == pytest.approx(y, abs=1e-6)
        assert abs(cp.mean_output) < 1e-6
        assert cm.mean_output * pm == pytest.approx(y, abs=1e-6)
