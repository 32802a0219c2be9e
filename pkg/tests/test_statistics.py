import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cwlm.errors import (
    GridMismatch,
    IllConditionedStencil,
    InsufficientDecay,
    PoorFit,
    ZeroOverlapDenominator,
)
from cwlm.generator import build_ideal, build_nondemolition, build_two_detector
from cwlm.model import (
    SIGMA_X,
    DetectorParams,
    ObservableSpec,
    QubitParams,
    QubitState,
    make_post_selector,
)
from cwlm.propagate import evolve, time_averaged_expectation
from cwlm.statistics import (
    RAW_V,
    ChiGrid,
    ChiGridSpec,
    ConditionedCF,
    Distribution,
    GeneratingFunctionSamples,
    compare,
    conditioned_distribution,
    cumulants,
    fit_shift_model,
    invert,
    joint_cf,
    joint_distribution,
    resolve_grid,
    sample_cf,
    shift_model_difference,
)

from helpers import bloch_states, gaussian, scenarios

SX, SY = ObservableSpec.pauli("x"), ObservableSpec.pauli("y")


def gaussian_samples(svv, t, a=1.0, mean=0.0, n=1024, chi_max=None):
    chi_max = chi_max or math.sqrt(2 * math.log(1e14) / (svv * t))
    g = ChiGrid(chi_max, n)
    c = g.chi_values
    vals = np.exp(-0.5 * svv * c**2 * t + 1j * c * a * t * mean)
    return GeneratingFunctionSamples(c, vals, t, 1.0, a)


def test_grid_layout():
    g = resolve_grid(ChiGridSpec(n_points=128, chi_max=4.0), 1.0, 1.0, 1.0)
    c = g.chi_values
    assert c.size == 128 and c[64] == 0.0
    assert np.allclose(np.diff(c), 2 * 4.0 / 128)
    with pytest.raises(ValueError):
        ChiGridSpec(n_points=63)
    with pytest.raises(ValueError):
        ChiGridSpec(chi_max=-1.0)


def test_auto_grid_resolution_and_coverage():
    d = DetectorParams.from_acquisition_time(1.0)
    t = 2.0
    g = resolve_grid(ChiGridSpec(max_o=6.0), d.s_vv, d.a_vq, t, spread=1.0)
    o = g.output_grid(t) / d.a_vq
    assert o[1] - o[0] <= d.sigma(t) / 20 * (1 + 1e-12)
    assert o[0] <= -6.0 and o[-1] >= 6.0 - (o[1] - o[0])
    assert g.n_points & (g.n_points - 1) == 0


def test_gaussian_inversion():
    d = DetectorParams.from_acquisition_time(1.0)
    t = 0.8
    dist = invert(gaussian_samples(d.s_vv, t))
    assert np.max(np.abs(dist.density - gaussian(dist.grid, 0, d.sigma(t)))) < 1e-12
    assert dist.integral() == pytest.approx(1, abs=1e-12)


def test_shift_theorem():
    dist = invert(gaussian_samples(0.25, 1.0, mean=1.0))
    assert np.max(np.abs(dist.density - gaussian(dist.grid, 1.0, 0.5))) < 1e-12


def test_raw_axis_scales_with_gain():
    a = 3.0
    s = gaussian_samples(0.25 * a**2, 1.0, a=a, mean=0.5)
    raw = invert(s, axis=RAW_V)
    res = invert(s)
    assert raw.mean() == pytest.approx(a * res.mean(), rel=1e-12)
    assert raw.integral() == pytest.approx(1, abs=1e-12)


def test_insufficient_decay_raises():
    s = gaussian_samples(1.0, 1.0, chi_max=2.0)
    with pytest.raises(InsufficientDecay):
        invert(s)


def test_nonuniform_grid_rejected():
    s = gaussian_samples(1.0, 1.0)
    c = s.chi_values.copy()
    c[3] += 1e-3
    with pytest.raises(ValueError):
        invert(GeneratingFunctionSamples(c, s.values, 1.0))


def test_cf_normalization_and_eigenstate_form():
    d = DetectorParams(s_qq=0.0, s_vv=0.5, a_vq=1.0)
    l = build_ideal(SX, d)
    cf = ConditionedCF(l, QubitState.pure("X+"), None, 1.3)
    assert cf(0.0) == pytest.approx(1.0)
    chi = np.linspace(-3, 3, 7)
    assert np.allclose(cf(chi), np.exp(-0.5 * d.s_vv * chi**2 * 1.3 + 1j * chi * 1.3), atol=1e-13)


def test_zero_overlap_denominator():
    d = DetectorParams.from_acquisition_time(1.0)
    l = build_ideal(SX, d)  # X+ never leaks into X- with O = sigma_x
    with pytest.raises(ZeroOverlapDenominator):
        ConditionedCF(l, QubitState.pure("X+"), make_post_selector("X-"), 1.0)


def test_gaussian_cumulants():
    svv, t = 0.3, 2.0

    def f(chi):
        return np.exp(-0.5 * svv * np.asarray(chi) ** 2 * t)

    k = cumulants(f, n_max=4, h=0.01)
    assert k[1] == pytest.approx(0, abs=1e-12)
    assert k[2] == pytest.approx(svv * t, rel=1e-10)
    assert k[3] == pytest.approx(0, abs=1e-8)


def test_stencil_exact_on_polynomials():
    # log C = sum c_n (i chi)^n / n!  ->  kappa_n = c_n for a degree-6 polynomial
    c = [0.0, 0.7, -1.1, 0.4, 2.3, 0.5, -0.2]

    def f(chi):
        x = 1j * np.asarray(chi, dtype=complex)
        return np.exp(sum(cn * x**n / math.factorial(n) for n, cn in enumerate(c)))

    k = cumulants(f, n_max=4, h=0.05)
    assert np.allclose(k.kappa, c[1:5], rtol=1e-8, atol=1e-9)


def test_ill_conditioned_stencil():
    # Laplace-type CF, not differentiable at the origin
    def f(chi):
        return np.exp(-np.abs(np.asarray(chi, dtype=float)))

    with pytest.raises(IllConditionedStencil):
        cumulants(f, n_max=2, h=0.01)


def test_regularized_jump_mean_from_cumulant():
    omega, gamma = 1.0, 0.8
    d = DetectorParams.from_acquisition_time(1.0, k=gamma)
    l = build_ideal(SY, DetectorParams(gamma, d.s_vv), 0.5 * omega * SIGMA_X)
    t = 0.01
    k = cumulants(ConditionedCF(l, QubitState.pure("Z+"), make_post_selector("Z-"), t))
    assert k.mean_output == pytest.approx(-2 * omega / (4 * gamma + t * omega**2), rel=5e-3)


def test_compare_identical_and_mismatch():
    dist = invert(gaussian_samples(0.25, 1.0))
    c = compare(dist, dist)
    assert np.all(c.difference == 0)
    assert np.all(np.nan_to_num(c.certainty) == 0)
    other = Distribution(dist.grid[:-1], dist.density[:-1], dist.axis, 1.0)
    with pytest.raises(GridMismatch):
        compare(dist, other)


def test_shift_model_extrema():
    sigma, s, m = 0.3, 0.04, -0.1
    o = np.linspace(-2, 2, 400001)
    diff = shift_model_difference(o, s, m, sigma)
    i = int(np.argmax(diff))
    assert o[i] == pytest.approx(m + sigma, abs=1e-5)
    # 8 S / sqrt(2 pi e) = 1.936 S, independent of sigma
    assert diff[i] == pytest.approx(8 * s / math.sqrt(2 * math.pi * math.e), rel=1e-8)
    assert diff[i] == pytest.approx(1.936 * s, rel=1e-3)


def _synthetic_comparisons(s, mean_o, t_a, ts):
    out = []
    for t in ts:
        sigma = math.sqrt(t_a / (4 * t))
        g = np.linspace(-4, 4, 4001)
        shift = s * t_a / t
        pp = Distribution(g, gaussian(g, mean_o + shift, sigma), "rescaled_O", t)
        pm = Distribution(g, gaussian(g, mean_o - shift, sigma), "rescaled_O", t)
        out.append(compare(pp, pm))
    return out


def test_fit_recovers_linearized_model():
    t_a = 1.0
    ts = [4.0, 8.0, 16.0]
    comps = []
    for t in ts:
        sigma = math.sqrt(t_a / (4 * t))
        g = np.linspace(-4, 4, 4001)
        base = Distribution(g, gaussian(g, -0.1, sigma), "rescaled_O", t)
        diff = shift_model_difference(g, 0.04, -0.1, sigma)
        pp = Distribution(g, base.density + diff / 2, "rescaled_O", t)
        pm = Distribution(g, base.density - diff / 2, "rescaled_O", t)
        comps.append(compare(pp, pm))
    fit = fit_shift_model(comps, t_a)
    assert fit.s == pytest.approx(0.04, abs=1e-6)
    assert fit.mean_o == pytest.approx(-0.1, abs=1e-6)


def test_fit_exact_shift_is_close():
    fit = fit_shift_model(_synthetic_comparisons(0.04, 0.0, 1.0, [4.0, 8.0]), 1.0)
    assert fit.s == pytest.approx(0.04, rel=0.02)


def test_fit_zero_signal():
    fit = fit_shift_model(_synthetic_comparisons(0.0, 0.2, 1.0, [4.0, 8.0]), 1.0)
    assert fit.s == 0.0


def test_fit_rejects_short_times_and_bad_shapes():
    with pytest.raises(ValueError):
        fit_shift_model(_synthetic_comparisons(0.04, 0.0, 1.0, [1.0]), 1.0)
    g = np.linspace(-4, 4, 2001)
    t = 4.0
    sigma = 0.25
    even = 0.01 * (gaussian(g, 0, sigma) - gaussian(g, 0, 2 * sigma))
    pp = Distribution(g, gaussian(g, 0, sigma) + even, "rescaled_O", t)
    pm = Distribution(g, gaussian(g, 0, sigma) - even, "rescaled_O", t)
    with pytest.raises(PoorFit):
        fit_shift_model([compare(pp, pm)], 1.0)


def test_joint_product_of_independent_gaussians():
    d = DetectorParams(s_qq=0.0, s_vv=0.25)
    jl = build_two_detector(QubitParams(), d, d)
    t = 1.0
    spec = ChiGridSpec(n_points=128)
    dd = joint_distribution(jl, QubitState.maximally_mixed(), None, t, spec, spec)
    # maximally mixed and no back-action: outputs are mixtures, check symmetry and norm
    assert dd.density.sum() * (dd.grid_x[1] - dd.grid_x[0]) * (dd.grid_y[1] - dd.grid_y[0]) \
        == pytest.approx(1, abs=1e-8)
    assert np.max(np.abs(dd.density - dd.density.T)) < 1e-10


def test_joint_cf_conjugation():
    d = DetectorParams.from_acquisition_time(1.0)
    jl = build_two_detector(QubitParams(omega=0.7), d, d)
    c = np.array([-0.5, 0.5])
    v = joint_cf(jl, QubitState.pure("Z+"), make_post_selector("Z-"), 1.0, c, c)
    assert abs(v[0, 0] - np.conj(v[1, 1])) < 1e-12
    assert abs(v[0, 1] - np.conj(v[1, 0])) < 1e-12


@settings(max_examples=20, deadline=None)
@given(scenarios())
def test_value_at_zero_and_symmetry(sc):
    l, rho0, p, t = sc
    try:
        s = sample_cf(l, rho0, p, t)
    except ZeroOverlapDenominator:
        return
    assert abs(s.value_at_zero() - 1) < 1e-10
    assert s.symmetry_residual() < 1e-9


@settings(max_examples=15, deadline=None)
@given(scenarios())
def test_unconditioned_mean_matches_time_average(sc):
    l, rho0, _, t = sc
    dist = conditioned_distribution(l, rho0, None, t)
    expect = time_averaged_expectation(l, rho0, l.obs.matrix, t)
    assert dist.mean() == pytest.approx(expect, abs=1e-6)


@settings(max_examples=15, deadline=None)
@given(scenarios())
def test_grid_doubling_stability(sc):
    l, rho0, _, t = sc
    g = resolve_grid(ChiGridSpec(), l.svv, l.a_vq, t, l.obs.spread)
    a = invert(sample_cf(l, rho0, None, t, g))
    b = invert(sample_cf(l, rho0, None, t, ChiGrid(g.chi_max, 2 * g.n_points)))
    # the doubled grid covers twice the range at the same spacing
    n = a.grid.size
    inner = b.density[n // 2: n // 2 + n]
    assert np.allclose(b.grid[n // 2: n // 2 + n], a.grid, atol=1e-12)
    assert np.max(np.abs(inner - a.density)) < 1e-8


@settings(max_examples=20, deadline=None)
@given(scenarios(), st.integers(0, 2))
def test_partition_identity(sc, axis):
    l, rho0, _, t = sc
    label = "XYZ"[axis]
    pp, pm = make_post_selector(f"{label}+"), make_post_selector(f"{label}-")
    g = resolve_grid(ChiGridSpec(), l.svv, l.a_vq, t, l.obs.spread)
    g = ChiGrid(g.chi_max * 2, g.n_points * 2)
    full = invert(sample_cf(l, rho0, None, t, g))
    acc = np.zeros_like(full.density)
    for p in (pp, pm):
        try:
            s = sample_cf(l, rho0, p, t, g)
        except ZeroOverlapDenominator:
            continue
        acc += s.normalization.real * invert(s).density
    assert np.max(np.abs(acc - full.density)) < 1e-9


def test_nondemolition_unconditioned_is_classical_mixture():
    d = DetectorParams.from_acquisition_time(1.0)
    l = build_nondemolition(SX, d)
    t = 0.5
    dist = conditioned_distribution(l, QubitState.pure("Z+"), None, t)
    s = d.sigma(t)
    ref = 0.5 * gaussian(dist.grid, 1, s) + 0.5 * gaussian(dist.grid, -1, s)
    assert np.max(np.abs(dist.density - ref)) < 1e-10


@settings(max_examples=20, deadline=None)
@given(bloch_states(), st.floats(0.2, 2.0))
def test_cf_matches_trace_of_evolved_state(rho0, t):
    d = DetectorParams.from_acquisition_time(1.0, k=1.5)
    l = build_ideal(SX, d, 0.3 * SIGMA_X)
    cf = ConditionedCF(l, rho0, None, t)
    chi = 0.8
    assert cf(chi) == pytest.approx(np.trace(evolve(l, chi, rho0, t).rho_final.rho), abs=1e-12)
