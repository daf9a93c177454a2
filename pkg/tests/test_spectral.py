"""Spectral densities, scalar transforms, kernel assembly, discretization."""

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

import gqbm
from gqbm.errors import ContractViolationError, ValidationError
from gqbm.spectral import SIGMA_X

from conftest import GAMMA0, TEMPERATURE, make_model

# ---- spectral density -------------------------------------------------------


def test_ohmic_density_vanishes_at_zero():
    model = make_model(1.0)
    assert gqbm.eval_spectral_density(model, 0.0) == 0.0


def test_ohmic_density_at_cutoff():
    model = make_model(1.0)
    expected = math.sqrt(math.pi * GAMMA0 / 2.0) * 1.0 * math.exp(-1.0)
    assert gqbm.eval_spectral_density(model, 1.0) == pytest.approx(
        expected, rel=1e-14)


def test_channel_ratios():
    model = make_model(0.5)
    om = np.linspace(0.1, 6.0, 40)
    jv = gqbm.eval_spectral_density(model, om, channel="v")
    jw = gqbm.eval_spectral_density(model, om, channel="w")
    jvw = gqbm.eval_spectral_density(model, om, channel="vw")
    np.testing.assert_allclose(jw / jv, 0.25, rtol=1e-14)
    np.testing.assert_allclose(jvw / jv, 0.5, rtol=1e-14)


def test_negative_omega_rejected():
    model = make_model(1.0)
    with pytest.raises(ValidationError):
        gqbm.eval_spectral_density(model, -0.1)


def test_unknown_channel_rejected():
    with pytest.raises(ValidationError):
        gqbm.eval_spectral_density(make_model(1.0), 1.0, channel="x")


def test_model_validation():
    with pytest.raises(ValidationError):
        make_model(alpha=1.5)
    with pytest.raises(ValidationError):
        make_model(alpha=1.0, gamma0=-1e-4)
    with pytest.raises(ValidationError):
        gqbm.SpectralModel(family="ohmic", cutoff=0.0)
    with pytest.raises(ValidationError):
        make_model(alpha=1.0, temperature=-0.1)
    with pytest.raises(ValidationError):
        gqbm.SpectralModel(family="lorentzian")


def test_tabulated_validation():
    om = np.linspace(0.0, 5.0, 50)
    with pytest.raises(ValidationError):
        gqbm.SpectralModel(family="tabulated")
    with pytest.raises(ValidationError):
        gqbm.SpectralModel(family="tabulated", tab_omega=om[::-1],
                           tab_j=np.ones(50))
    with pytest.raises(ValidationError):
        gqbm.SpectralModel(family="tabulated", tab_omega=om,
                           tab_j=-np.ones(50))


def test_default_omega_s_value():
    model = make_model(1.0)
    assert gqbm.default_omega_s(model) == pytest.approx(
        math.sqrt(2.0 * GAMMA0 / math.pi), rel=1e-15)
    tab = gqbm.SpectralModel(family="tabulated", temperature=0.0,
                             tab_omega=np.array([0.0, 1.0]),
                             tab_j=np.array([0.0, 1.0]))
    with pytest.raises(ContractViolationError):
        gqbm.default_omega_s(tab)


# ---- scalar transform g_v ---------------------------------------------------


def test_g_v_closed_form_at_zero():
    # sqrt(gamma0 / (8 pi)) with cutoff = 1
    val = gqbm.eval_g_v(make_model(1.0), 0.0)
    assert complex(val) == pytest.approx(3.454941494713355e-3, rel=1e-15)


def test_g_v_closed_form_at_one():
    # (1 + i t)^-2 at t = 1 is -i/2, so g_v(1) is purely imaginary
    val = complex(gqbm.eval_g_v(make_model(1.0), 1.0))
    assert val == pytest.approx(-1.7274707473566775e-3j, rel=1e-15, abs=0)


def test_g_v_against_adaptive_quadrature():
    # independent route: adaptive quadrature of J_V(w) e^{-iwt} / 2pi
    model = make_model(1.0)
    for dt in (1.0, 0.3, 4.0):
        re = quad(lambda w: math.sqrt(math.pi * GAMMA0 / 2.0) * w
                  * math.exp(-w) * math.cos(w * dt) / (2 * math.pi),
                  0.0, np.inf, limit=200)[0]
        im = quad(lambda w: -math.sqrt(math.pi * GAMMA0 / 2.0) * w
                  * math.exp(-w) * math.sin(w * dt) / (2 * math.pi),
                  0.0, np.inf, limit=200)[0]
        ref = re + 1j * im
        val = complex(gqbm.eval_g_v(model, dt))
        assert abs(val - ref) / abs(ref) < 1e-8


def test_g_v_long_time_decay():
    model = make_model(1.0)
    t = np.array([10.0, 20.0, 40.0, 80.0])
    mags = np.abs(gqbm.eval_g_v(model, t))
    # 1/t^2 asymptotics: magnitude * t^2 approaches a constant
    plateau = mags * t**2
    assert np.all(np.abs(plateau / plateau[-1] - 1.0) < 0.02)
    assert mags[-1] < mags[0] / 50.0


def test_g_v_tabulated_family_matches_ohmic_shape():
    # tabulate the ohmic profile densely; the quadrature route must agree
    # with the closed form wherever the table resolves the profile
    om = np.linspace(0.0, 30.0, 4000)
    jv = np.sqrt(np.pi * GAMMA0 / 2.0) * om * np.exp(-om)
    tab = gqbm.SpectralModel(family="tabulated", temperature=0.0,
                             tab_omega=om, tab_j=jv)
    ohmic = make_model(1.0, temperature=0.0)
    for dt in (0.0, 1.0, 3.0):
        a = complex(gqbm.eval_g_v(tab, dt))
        b = complex(gqbm.eval_g_v(ohmic, dt))
        assert abs(a - b) / abs(b) < 5e-5  # limited by table linearization


# ---- kernel assembly --------------------------------------------------------


def test_kernel_alpha1_all_entries_pure_imaginary():
    kernel = gqbm.build_kernels(make_model(1.0, temperature=0.0))
    dt = np.linspace(0.0, 8.0, 30)
    g = kernel.g(dt)
    gv = kernel.g_v(dt)
    # every entry collapses to 2i Im g_v (conjugating a pure imaginary
    # number and negating is the identity)
    expected = 2j * gv.imag
    np.testing.assert_allclose(g[:, 0, 0], expected, atol=1e-18)
    np.testing.assert_allclose(g[:, 0, 1], expected, atol=1e-18)
    np.testing.assert_allclose(g[:, 1, 0], expected, atol=1e-18)
    np.testing.assert_allclose(g[:, 1, 1], expected, atol=1e-18)


def test_kernel_zero_temperature_gtilde():
    # T = 0 removes every thermal transform: Gt11 = conj(g_w) = alpha^2 conj(g_v)
    alpha = 0.6
    kernel = gqbm.build_kernels(make_model(alpha, temperature=0.0))
    dt = np.linspace(0.0, 5.0, 17)
    gt = kernel.gtilde(dt)
    gv = kernel.g_v(dt)
    np.testing.assert_allclose(gt[:, 0, 0], alpha**2 * np.conj(gv), atol=1e-18)
    np.testing.assert_allclose(gt[:, 1, 1], np.conj(gv), atol=1e-18)
    np.testing.assert_allclose(gt[:, 0, 1], alpha * np.conj(gv), atol=1e-18)


def test_gtilde_against_discrete_sum():
    # 2000-mode discrete-bath summation as the independent route; the gauss
    # scheme makes the summation itself far more accurate than the target
    model = make_model(0.5)
    kernel = gqbm.build_kernels(model)
    bath = gqbm.discretize_bath(model, 2000, 20.0, scheme="gauss")
    dkernel = gqbm.kernels_from_bath(bath)
    dt = np.array([0.0, 1.0, 5.0])
    cont = kernel.gtilde(dt)
    disc = dkernel.gtilde(dt)
    scale = np.max(np.abs(cont))
    assert np.max(np.abs(cont - disc)) / scale < 1e-6


_KERNELS_FOR_PROPS = [
    gqbm.build_kernels(make_model(a, temperature=t))
    for a, t in ((0.0, 0.0), (0.7, 0.01), (1.0, 0.05))
]


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=-20.0, max_value=20.0,
                 allow_nan=False, allow_infinity=False),
       st.sampled_from(_KERNELS_FOR_PROPS))
def test_g_conjugation_symmetry_property(dt, kernel):
    g = kernel.g(np.array([dt]))[0]
    ref = -SIGMA_X @ np.conj(g) @ SIGMA_X
    assert np.max(np.abs(g - ref)) <= 1e-15 * max(np.max(np.abs(g)), 1e-30)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=0.0, max_value=20.0,
                 allow_nan=False, allow_infinity=False),
       st.sampled_from(_KERNELS_FOR_PROPS))
def test_gtilde_time_hermiticity_property(dt, kernel):
    gp = kernel.gtilde(np.array([dt]))[0]
    gm = kernel.gtilde(np.array([-dt]))[0]
    scale = max(np.max(np.abs(gp)), 1e-30)
    assert np.max(np.abs(np.conj(gp).T - gm)) <= 1e-9 * scale


def test_n_bar_behavior():
    assert np.all(gqbm.n_bar(np.array([0.5, 1.0]), 0.0) == 0.0)
    val = float(gqbm.n_bar(np.array([1.0]), 0.5)[0])
    assert val == pytest.approx(1.0 / math.expm1(2.0), rel=1e-12)
    # classical limit: n_bar -> T / omega for omega << T
    hot = float(gqbm.n_bar(np.array([1e-6]), 1.0)[0])
    assert hot == pytest.approx(1e6, rel=1e-5)


# ---- bath discretization ----------------------------------------------------


def test_single_bin_weight():
    model = make_model(1.0, temperature=0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        bath = gqbm.discretize_bath(model, 1, 2.0)
    # V_1^2 = J_V(midpoint) * bin_width / 2 pi
    j_mid = gqbm.eval_spectral_density(model, 1.0)
    assert bath.v_couplings[0] ** 2 == pytest.approx(
        j_mid * 2.0 / (2.0 * math.pi), rel=1e-12)


def test_coupling_sum_rule():
    # 2 pi sum V_j^2 over a bin approximates int J_V over that bin
    model = make_model(1.0)
    bath = gqbm.discretize_bath(model, 2000, 20.0)
    lo, hi = 0.5, 1.5
    mask = (bath.frequencies >= lo) & (bath.frequencies < hi)
    discrete = 2.0 * math.pi * np.sum(bath.v_couplings[mask] ** 2)
    exact = quad(lambda w: math.sqrt(math.pi * GAMMA0 / 2.0) * w
                 * math.exp(-w), lo, hi)[0]
    assert discrete == pytest.approx(exact, rel=1e-4)


def test_alpha0_kills_pair_couplings():
    bath = gqbm.discretize_bath(make_model(0.0), 50, 20.0)
    assert np.all(bath.w_couplings == 0.0)


def test_w_couplings_ratio():
    bath = gqbm.discretize_bath(make_model(0.5), 50, 20.0)
    np.testing.assert_allclose(bath.w_couplings, 0.5 * bath.v_couplings,
                               rtol=1e-15)


def test_coverage_warning_for_small_omega_max():
    with pytest.warns(RuntimeWarning, match="covers only"):
        gqbm.discretize_bath(make_model(1.0), 100, 5.0)


def test_discrete_sum_reproduces_g_v():
    model = make_model(1.0)
    bath = gqbm.discretize_bath(model, 2000, 20.0)
    dkernel = gqbm.kernels_from_bath(bath)
    dt = np.linspace(0.0, 10.0, 101)
    cont = gqbm.eval_g_v(model, dt)
    disc = dkernel.g_v(dt)
    assert np.max(np.abs(cont - disc)) < 1e-4


def test_midpoint_convergence_order():
    # kernel error at fixed dt should drop ~ N^-2 for the midpoint rule
    model = make_model(1.0, temperature=0.0)
    dt = np.array([2.0])
    exact = gqbm.eval_g_v(model, dt)[0]
    errs = []
    for n in (250, 500, 1000, 2000):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            bath = gqbm.discretize_bath(model, n, 20.0)
        errs.append(abs(gqbm.kernels_from_bath(bath).g_v(dt)[0] - exact))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(3)]
    assert min(orders) >= 1.8


def test_gauss_scheme_nodes_and_validation():
    bath = gqbm.discretize_bath(make_model(1.0), 64, 20.0, scheme="gauss")
    assert bath.scheme == "gauss"
    assert np.all(np.diff(bath.frequencies) > 0.0)
    with pytest.raises(ValidationError):
        gqbm.discretize_bath(make_model(1.0), 64, 20.0, scheme="simpson")
    with pytest.raises(ValidationError):
        gqbm.discretize_bath(make_model(1.0), 0, 20.0)
    with pytest.raises(ValidationError):
        gqbm.discretize_bath(make_model(1.0), 64, -1.0)


def test_kernels_from_bath_rejects_squeezes():
    import dataclasses
    bath = gqbm.discretize_bath(make_model(0.5), 16, 20.0)
    bad = dataclasses.replace(
        bath, squeezes=np.full(16, 0.1 + 0.0j, dtype=complex))
    with pytest.raises(ContractViolationError):
        gqbm.kernels_from_bath(bad)


def test_thermal_occupations_filled():
    bath = gqbm.discretize_bath(make_model(1.0), 64, 20.0)
    x = bath.frequencies / TEMPERATURE
    rep = x <= 700.0  # beyond this the occupation underflows to zero
    np.testing.assert_allclose(bath.occupations[rep],
                               1.0 / np.expm1(x[rep]), rtol=1e-12)
    assert np.all(bath.occupations[~rep] == 0.0)
    assert np.all(bath.squeezes == 0.0)
