import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from hypothesis import given, settings, strategies as st

from oscbound.funcspace import (
    DERIVATIVE_SUM,
    SPECTRAL,
    NormBracket,
    NormFlavorError,
    PiecewisePoly,
    SmoothnessError,
    SobolevParams,
    TrigPoly,
    TruncationError,
    eval_ref_basis,
    fourier_of_spline,
    inner_hk,
    norm_hk,
    osc_moments,
    ref_deriv_matrix,
    ref_endpoint_values,
    ref_stiffness,
    wave_pairings,
)
from oscbound.mesh import build_counterexample_mesh, uniform_mesh

TWO_PI = 2.0 * math.pi

# Reference values computed with mpmath at 40 digits:
# int_0^h exp(i f t) phi_a(t) dt on h = 0.7813.
MOMENT_TABLE = {
    (0.03, 0): 0.883830827627822553 + 0.0103585296252787454j,
    (0.03, 1): -0.0000700891099675327103 + 0.00598028082278472286j,
    (0.03, 2): -0.0000180961728646183052 - 2.12087807827912009e-7j,
    (0.03, 3): 4.20137755706079745e-10 - 3.58478195049239891e-8j,
    (0.03, 4): 5.29300318564449769e-11 + 6.20341909235610314e-13j,
    (3.7, 0): 0.0758795951698154211 + 0.601967417098943985j,
    (3.7, 1): -0.589919402514454977 + 0.0743609108634839487j,
    (3.7, 2): -0.0295791900558812494 - 0.234657401610659082j,
    (3.7, 3): 0.0593419988287376168 - 0.00748021690175989837j,
    (3.7, 4): 0.0013919923176918838 + 0.0110429426807996801j,
    (40.0, 0): -0.00461565733122449328 + 0.00037916381040218946j,
    (40.0, 1): -0.00803658110118714143 - 0.0978313421798559994j,
    (40.0, 2): 0.0139270707508821879 - 0.00114407132824231227j,
    (40.0, 3): -0.0118429294255953875 - 0.144166986739692233j,
    (40.0, 4): 0.0919149983263583113 - 0.00755056939837586746j,
}


def hat_spline(mesh, center_element):
    """Continuous hat peaking at the node between center_element and its
    successor; exact Legendre coefficients of t/h and 1 - t/h."""
    h = mesh.h
    coeffs = np.zeros((mesh.n_elements, 2))
    rise = center_element
    fall = (center_element + 1) % mesh.n_elements
    coeffs[rise] = [0.5 * math.sqrt(h), 0.5 * math.sqrt(h / 3.0)]
    coeffs[fall] = [0.5 * math.sqrt(h), -0.5 * math.sqrt(h / 3.0)]
    return PiecewisePoly(mesh, coeffs, smoothness=1)


def hat_fourier_coeff(n, h, x_center):
    """Closed form: the hat transforms to h sinc^2(n h / 2) up to phase."""
    z = 0.5 * n * h
    s = 1.0 if z == 0 else math.sin(z) / z
    return np.exp(-1j * n * x_center) * h * s * s / TWO_PI


def test_single_mode_norm_values():
    k = 7.0
    u = TrigPoly.single_mode(7)
    got = norm_hk(u, SobolevParams(k, 1, DERIVATIVE_SUM))
    want = math.sqrt(TWO_PI * (1.0 + k**2 / (1.0 + k**2)))
    assert_allclose(got, want, rtol=1e-14)
    got = norm_hk(u, SobolevParams(k, 2.5, SPECTRAL))
    assert_allclose(got, math.sqrt(TWO_PI * 2.0**2.5), rtol=1e-14)
    assert_allclose(norm_hk(u, SobolevParams(k, 0, DERIVATIVE_SUM)),
                    math.sqrt(TWO_PI), rtol=1e-15)


def test_moment_kernel_matches_reference_values():
    h = 0.7813
    for f in (0.03, 3.7, 40.0):
        M = osc_moments(4, h, np.array([f]))
        for a in range(5):
            want = MOMENT_TABLE[(f, a)]
            assert abs(M[a, 0] - want) <= 1e-14 + 1e-13 * abs(want)


def test_moment_kernel_zero_frequency():
    h = 0.7813
    M = osc_moments(4, h, np.array([0.0]))
    assert_allclose(M[0, 0], math.sqrt(h), rtol=1e-15)
    assert_allclose(M[1:, 0], 0.0, atol=1e-16)


def test_moment_kernel_conjugate_symmetry():
    h = 1.3
    f = np.array([0.1, 2.0, 17.0])
    Mp = osc_moments(5, h, f)
    Mm = osc_moments(5, h, -f)
    assert_allclose(Mm, np.conj(Mp), rtol=1e-13, atol=1e-16)


def test_moment_branches_agree_at_switch():
    # the Taylor branch and the library evaluation must agree to full
    # precision in a window around the |f| h / 2 = 0.5 switch
    from scipy.special import spherical_jn

    from oscbound.funcspace import _spherical_jn_taylor

    z = np.linspace(0.4, 0.6, 21)
    for a in range(9):
        taylor = _spherical_jn_taylor(a, z)
        library = spherical_jn(a, z)
        assert_allclose(taylor, library, rtol=5e-13)


def test_deriv_matrix_differentiates_monomials():
    h = 0.7813
    deg = 5
    # exact Gauss projection of t^j onto the orthonormal basis
    xg, wg = np.polynomial.legendre.leggauss(deg + 4)
    t = 0.5 * h * (xg + 1.0)
    w = 0.5 * h * wg
    B = eval_ref_basis(deg, h, t)
    D = ref_deriv_matrix(deg, h)
    tq = np.linspace(0.0, h, 11)
    for j in range(deg + 1):
        c = B @ (w * t**j)
        got = (D @ c) @ eval_ref_basis(deg, h, tq)
        want = 0.0 * tq if j == 0 else j * tq ** (j - 1)
        assert_allclose(got, want, atol=1e-12 * max(1.0, h ** (j - 1)))


def test_endpoint_values_and_stiffness():
    h = 0.7813
    deg = 5
    xg, wg = np.polynomial.legendre.leggauss(deg + 4)
    t = 0.5 * h * (xg + 1.0)
    w = 0.5 * h * wg
    c = eval_ref_basis(deg, h, t) @ (w * t**3)
    v0, vL = ref_endpoint_values(deg, h, order=1)
    assert_allclose(v0 @ c, 0.0, atol=1e-12)
    assert_allclose(vL @ c, 3 * h**2, rtol=1e-12)
    # stiffness against direct quadrature of the differentiated basis
    S = ref_stiffness(deg, h, 2)
    B2 = eval_ref_basis(deg, h, t, order=2)
    assert_allclose(S, B2 @ (w[:, None] * B2.T), rtol=1e-10, atol=1e-10)
    assert_allclose(ref_stiffness(deg, h, 0), np.eye(deg + 1))


def test_trigpoly_evaluate_and_derivative():
    u = TrigPoly.from_dict({3: 1.0 - 2.0j, -1: 0.5j, 0: 2.0})
    x = np.linspace(-1.0, 5.0, 7)
    want = ((1.0 - 2.0j) * np.exp(3j * x) + 0.5j * np.exp(-1j * x) + 2.0)
    assert_allclose(u.evaluate(x), want, rtol=1e-14)
    du = u.derivative(2)
    want2 = ((1.0 - 2.0j) * (3j)**2 * np.exp(3j * x)
             + 0.5j * (-1j)**2 * np.exp(-1j * x))
    assert_allclose(du.evaluate(x), want2, rtol=1e-13, atol=1e-14)


def test_uniform_spline_l2_is_coefficient_norm():
    mesh = uniform_mesh(5)
    rng = np.random.default_rng(3)
    Q = rng.standard_normal((5, 3))
    v = PiecewisePoly(mesh, Q)
    assert_allclose(v.l2_norm(), np.linalg.norm(Q), rtol=1e-14)
    # cross-check one element against plain quadrature of evaluate()
    xg, wg = np.polynomial.legendre.leggauss(24)
    a0 = mesh.breakpoints[1]
    x = a0 + 0.5 * mesh.h * (xg + 1.0)
    val = np.sum(0.5 * mesh.h * wg * v.evaluate(x) ** 2)
    assert_allclose(val, np.sum(Q[1] ** 2), rtol=1e-12)


def test_wave_pairings_uniform_against_quadrature():
    mesh = uniform_mesh(6)
    rng = np.random.default_rng(5)
    v = PiecewisePoly(mesh, rng.standard_normal((6, 4)))
    freqs = np.array([-9, -3, 0, 1, 4, 12])
    got = wave_pairings(v, freqs)
    xg, wg = np.polynomial.legendre.leggauss(48)
    for j, n in enumerate(freqs):
        val = 0.0j
        for e in range(6):
            a0 = mesh.breakpoints[e]
            x = a0 + 0.5 * mesh.h * (xg + 1.0)
            val += np.sum(0.5 * mesh.h * wg * v.evaluate(x)
                          * np.exp(-1j * n * x))
        assert abs(got[j] - val) <= 1e-12


def test_wave_pairings_zero_mode_of_derivative_telescopes():
    # int v' dx over the circle equals the sum of the jump corrections,
    # i.e. minus the jumps of v at the nodes; per element it telescopes.
    mesh = uniform_mesh(4)
    rng = np.random.default_rng(8)
    v = PiecewisePoly(mesh, rng.standard_normal((4, 3)))
    got = wave_pairings(v, np.array([0]), deriv=1)[0]
    v0, vL = ref_endpoint_values(2, mesh.h)
    want = np.sum(v.coeffs @ vL - v.coeffs @ v0)
    assert abs(got - want) <= 1e-12


def test_indicator_fourier_closed_form():
    mesh = uniform_mesh(4)
    h = mesh.h
    coeffs = np.zeros((4, 1))
    coeffs[2, 0] = math.sqrt(h)  # constant one on element 2
    v = PiecewisePoly(mesh, coeffs)
    tp, tail = fourier_of_spline(v, 12)
    x_mid = mesh.breakpoints[2] + 0.5 * h
    for n in range(-12, 13):
        z = 0.5 * n * h
        s = 1.0 if n == 0 else math.sin(z) / z
        want = np.exp(-1j * n * x_mid) * h * s / TWO_PI
        assert abs(tp.coeff(n) - want) <= 1e-14
    assert tail >= -1e-12
    assert_allclose(tail, h - TWO_PI * np.sum(np.abs(tp.coeffs) ** 2),
                    rtol=1e-12)


def test_hat_fourier_and_tail_decay():
    mesh = uniform_mesh(8)
    v = hat_spline(mesh, 2)
    x_center = mesh.breakpoints[3]
    tails = {}
    for N in (64, 128, 256):
        tp, tail = fourier_of_spline(v, N)
        tails[N] = tail
        assert tail >= -1e-12
        for n in (-N, -17, -2, 0, 1, 9, N):
            want = hat_fourier_coeff(n, mesh.h, x_center)
            assert abs(tp.coeff(n) - want) <= 1e-14
    # coefficients fall like n^-2, so the tail mass falls like N^-3
    ratio = tails[256] / tails[128]
    assert 0.5 * 2.0**-3 <= ratio <= 2.0 * 2.0**-3


def test_negative_order_bracket_contains_closed_form():
    mesh = uniform_mesh(8)
    v = hat_spline(mesh, 2)
    x_center = mesh.breakpoints[3]
    k, s = 4.0, -1.0
    n = np.arange(-1_000_000, 1_000_001)
    z = 0.5 * n * mesh.h
    sinc = np.ones_like(z)
    nz = n != 0
    sinc[nz] = np.sin(z[nz]) / z[nz]
    c2 = (mesh.h * sinc**2 / TWO_PI) ** 2
    truth = math.sqrt(TWO_PI * np.sum((1.0 + (n / k) ** 2) ** s * c2))
    for N in (64, 256):
        br = norm_hk(v, SobolevParams(k, s, SPECTRAL, bracket_N=N))
        assert isinstance(br, NormBracket)
        assert br.lower - 1e-12 <= truth <= br.upper + 1e-12
    wide = norm_hk(v, SobolevParams(k, s, SPECTRAL, bracket_N=64))
    tight = norm_hk(v, SobolevParams(k, s, SPECTRAL, bracket_N=256))
    assert tight.width < wide.width


def test_trig_negative_order_bracket_is_exact():
    u = TrigPoly.from_dict({2: 1.0, -5: 0.5j})
    br = norm_hk(u, SobolevParams(3.0, -2.0, SPECTRAL))
    assert isinstance(br, NormBracket)
    assert br.width == 0.0
    want = math.sqrt(TWO_PI * ((1 + (2 / 3.0) ** 2) ** -2
                               + 0.25 * (1 + (5 / 3.0) ** 2) ** -2))
    assert_allclose(br.lower, want, rtol=1e-14)


def test_inner_products_match_quadrature():
    mesh = uniform_mesh(8)
    rng = np.random.default_rng(11)
    pars = SobolevParams(5.0, 1, DERIVATIVE_SUM)
    f = TrigPoly.from_dict({3: 1.2 + 0.4j, -1: 0.7, 0: -0.3})
    v = PiecewisePoly(mesh, rng.standard_normal((8, 3)), smoothness=1)
    u = PiecewisePoly(mesh, rng.standard_normal((8, 3)), smoothness=1)

    xg, wg = np.polynomial.legendre.leggauss(32)

    def quad_inner(a, b):
        total = 0.0j
        for e in range(8):
            x = mesh.breakpoints[e] + 0.5 * mesh.h * (xg + 1.0)
            w = 0.5 * mesh.h * wg
            total += np.sum(w * a.evaluate(x) * np.conj(b.evaluate(x)))
            total += pars.gauge**-2 * np.sum(
                w * a.derivative(1).evaluate(x)
                * np.conj(b.derivative(1).evaluate(x)))
        return total

    assert abs(inner_hk(f, v, pars) - quad_inner(f, v)) <= 1e-11
    assert abs(inner_hk(u, v, pars) - quad_inner(u, v)) <= 1e-11
    assert abs(inner_hk(v, f, pars) - np.conj(inner_hk(f, v, pars))) <= 1e-13
    g = TrigPoly.from_dict({2: 0.5, -3: 1.0j, 0: 1.0})
    assert_allclose(norm_hk(g, pars),
                    math.sqrt(inner_hk(g, g, pars).real), rtol=1e-14)


def test_analytic_mesh_sine_norms_and_pairings():
    mesh = build_counterexample_mesh().mesh_at(1.0)
    # sin pulls back to +-(1 - t^2); project exactly with 3-point Gauss
    signs = [-1.0, 1.0, 1.0, -1.0]
    xg, wg = np.polynomial.legendre.leggauss(3)
    t = 0.5 * (xg + 1.0)
    w = 0.5 * wg
    B = eval_ref_basis(2, 1.0, t)
    coeffs = np.array([B @ (w * (s * (1.0 - t**2))) for s in signs])
    v = PiecewisePoly(mesh, coeffs, smoothness=2)
    xs = np.linspace(-math.pi / 2, 3 * math.pi / 2, 2001, endpoint=False)
    assert np.max(np.abs(v.evaluate(xs) - np.sin(xs))) <= 1e-12
    assert_allclose(v.l2_norm(), math.sqrt(math.pi), rtol=1e-12)
    assert_allclose(v.deriv_l2_norm2(1), math.pi, rtol=1e-11)
    assert_allclose(v.deriv_l2_norm2(2), math.pi, rtol=1e-11)
    got = wave_pairings(v, np.array([-2, -1, 0, 1, 2, 5]))
    want = np.array([0, 1j * math.pi, 0, -1j * math.pi, 0, 0])
    assert np.max(np.abs(got - want)) <= 1e-12
    tp, tail = fourier_of_spline(v, 6)
    assert abs(tp.coeff(1) + 0.5j) <= 1e-13
    assert abs(tp.coeff(-1) - 0.5j) <= 1e-13
    assert abs(tail) <= 1e-12


def test_flavor_and_validation_errors():
    mesh = uniform_mesh(4)
    v = PiecewisePoly(mesh, np.ones((4, 2)))
    with pytest.raises(NormFlavorError):
        norm_hk(v, SobolevParams(4.0, 1.0, SPECTRAL))
    with pytest.raises(TruncationError):
        norm_hk(v, SobolevParams(4.0, -1.0, SPECTRAL))
    with pytest.raises(SmoothnessError):
        norm_hk(v, SobolevParams(4.0, 1, DERIVATIVE_SUM))
    with pytest.raises(NormFlavorError):
        SobolevParams(4.0, 1.5, DERIVATIVE_SUM)
    with pytest.raises(NormFlavorError):
        SobolevParams(4.0, -1, DERIVATIVE_SUM)
    with pytest.raises(ValueError):
        SobolevParams(0.0, 1)
    with pytest.raises(NormFlavorError):
        inner_hk(TrigPoly.single_mode(1), v, SobolevParams(4.0, 1.0, SPECTRAL))
    # spectral order 0 with a spline degrades to L^2 and works
    val = inner_hk(TrigPoly.single_mode(0), v, SobolevParams(4.0, 0.0, SPECTRAL))
    assert np.isfinite(abs(val))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 20), st.integers(1, 4),
       st.lists(st.floats(-2, 2), min_size=3, max_size=9))
def test_flavor_norms_are_comparable(k, ell, vals):
    # weights obey w_deriv <= w_spec <= 4^l w_deriv for k >= 1, so the two
    # flavors at equal integer order differ by at most 2^l in norm
    m = len(vals) if len(vals) % 2 == 1 else len(vals) - 1
    u = TrigPoly(np.array(vals[:m], dtype=complex))
    if u.l2_norm() == 0:
        return
    nd = norm_hk(u, SobolevParams(float(k), ell, DERIVATIVE_SUM))
    ns = norm_hk(u, SobolevParams(float(k), float(ell), SPECTRAL))
    assert nd <= ns * (1.0 + 1e-12)
    assert ns <= 2.0**ell * nd * (1.0 + 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_parseval_for_padded_truncated(seed):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(9) + 1j * rng.standard_normal(9)
    u = TrigPoly(c)
    assert_allclose(u.padded(12).l2_norm(), u.l2_norm(), rtol=1e-14)
    # truncation only removes mass
    assert u.truncated(2).l2_norm() <= u.l2_norm() + 1e-14


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 10), st.integers(0, 3))
def test_tail_mass_never_significantly_negative(seed, n_elem, degree):
    rng = np.random.default_rng(seed)
    mesh = uniform_mesh(n_elem)
    v = PiecewisePoly(mesh, rng.standard_normal((n_elem, degree + 1)))
    _, tail = fourier_of_spline(v, 40)
    assert tail >= -1e-12 * max(1.0, v.l2_norm() ** 2)
