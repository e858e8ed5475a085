"""Measured constants for the inequalities behind the approximation rates.

Every public operation here evaluates both sides of one inequality on
concrete inputs and reports the fitted constant, so sharpness claims can be
checked numerically instead of trusted:

* `trace_constant_report` compares endpoint values of a function on an
  interval against the scaled interior norms that bound them.
* `moment_match_poly` builds the unique degree-m polynomial whose
  derivative averages match those of a given function.
* `derivative_energy_sum` accumulates the element-by-element top-derivative
  energy of a pulled-back function and relates it to k^{2(p+1)} times its
  mass.
* `energy_split_report` splits that energy against a small multiple of the
  weighted mass plus a scaled projection residual.
* `duality_check` compares an operator norm of I - P against the companion
  norm with shifted indices that duality predicts to be equivalent.
* `decomposition_check` verifies the elementwise energy decomposition and
  the polynomial-insertion identity on a mesh.

All constants are plain ratios; nothing here asserts pass or fail.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .funcspace import (
    PiecewisePoly,
    SobolevParams,
    TrigPoly,
    wave_pairings,
)
from .mesh import MapCapabilityError, forward_compose_weights
from .projector import operator_norm, residual_error
from .quadrature import _gl_rule, adaptive_quad


class AccuracyError(ValueError):
    """Quadrature could not certify the requested accuracy."""


class HypothesisError(ValueError):
    """The inputs violate a hypothesis of the inequality being measured."""


@dataclass(frozen=True)
class TraceReport:
    h: float
    eps: float
    lhs: float        # sqrt(|u(0)|^2 + |u(h)|^2)
    rhs_core: float   # h^{-1/2} (eps^{-1} ||u|| + eps ||h u'||)
    fitted_c: float


@dataclass(frozen=True)
class EnergySplitReport:
    h: float
    k: float
    ell: int
    m_eval: int
    eps: float
    lhs: float
    term_mass: float
    term_residual: float
    fitted_c: float
    degenerate: bool


@dataclass(frozen=True)
class DualityReport:
    ell: int
    s: float
    lhs_norm: float   # ||I - P||: order ell -> order -s
    rhs_norm: float   # ||I - P||: order 2 ell + s -> order ell
    fitted_c: float
    verified: bool    # both finite sections stabilized


@dataclass(frozen=True)
class IdentityReport:
    elementwise: float     # sum over elements of the top-derivative energy
    global_sum: float      # same quantity from the coefficient sum
    insertion: float       # elementwise pairing against u minus a spline
    annihilation: float    # largest coefficient of the spline's derivative
    rel_defect: float


def _integrate(f, a, b):
    """Panel-doubling quadrature; disagreement above 1e-8 is an error."""
    try:
        return adaptive_quad(f, a, b, tol=1e-12, max_doublings=14)[0]
    except RuntimeError:
        try:
            return adaptive_quad(f, a, b, tol=1e-8, max_doublings=14)[0]
        except RuntimeError as exc:
            raise AccuracyError(str(exc)) from exc


# ---------------------------------------------------------------------------
# trace inequality on a single interval


def trace_constant_report(u, h, eps):
    """Measure endpoint values against scaled interior norms on (0, h).

    `u(t, order)` must evaluate the function (order 0) and its first
    derivative (order 1) at arrays of points.  The comparison reads

        sqrt(|u(0)|^2 + |u(h)|^2)
            <= C h^{-1/2} (eps^{-1} ||u||_{L2} + eps ||h u'||_{L2})

    and the report carries both sides together with C = lhs / rhs_core.
    """
    h = float(h)
    eps = float(eps)
    if h <= 0.0:
        raise ValueError("interval length must be positive")
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    ends = np.asarray(u(np.array([0.0, h]), 0))
    lhs = math.sqrt(float(np.sum(np.abs(ends) ** 2)))
    l2 = math.sqrt(_integrate(lambda t: np.abs(u(t, 0)) ** 2, 0.0, h).real)
    dl2 = math.sqrt(_integrate(lambda t: np.abs(u(t, 1)) ** 2, 0.0, h).real)
    rhs_core = (l2 / eps + eps * h * dl2) / math.sqrt(h)
    return TraceReport(h, eps, lhs, rhs_core, lhs / rhs_core)


# ---------------------------------------------------------------------------
# moment-matched polynomial


def _average_matrix(m, length):
    # A[j, i] = mean over (0, length) of the j-th derivative of t^i / i!
    A = np.zeros((m + 1, m + 1))
    for j in range(m + 1):
        for i in range(j, m + 1):
            A[j, i] = length ** (i - j) / math.factorial(i - j + 1)
    return A


def moment_match_poly(u, m, length=1.0, direction="down"):
    """Degree-m polynomial sharing all derivative averages with u on (0, L).

    `u(t, order)` must evaluate derivatives up to order m.  The result q
    satisfies mean((u - q)^(j)) = 0 for every j <= m; it is unique, and the
    two construction orders ("down": descending elimination, "up": repeated
    ascending correction sweeps) must agree to rounding.  Returns a
    numpy Polynomial.
    """
    m = int(m)
    if m < 0:
        raise ValueError("polynomial degree must be >= 0")
    L = float(length)
    if L <= 0.0:
        raise ValueError("interval length must be positive")
    means = np.array([_integrate(lambda t: u(t, j), 0.0, L) / L
                      for j in range(m + 1)])
    A = _average_matrix(m, L)
    c = np.zeros(m + 1, dtype=means.dtype)
    if direction == "down":
        for j in range(m, -1, -1):
            c[j] = means[j] - A[j, j + 1:] @ c[j + 1:]
    elif direction == "up":
        # Gauss-Seidel sweeps from the lowest order; the triangular
        # coupling makes one extra coefficient exact per sweep.
        for _ in range(m + 1):
            for j in range(m + 1):
                c[j] += means[j] - A[j] @ c
    else:
        raise ValueError(f"unknown construction direction {direction!r}")
    coef = c / np.array([math.factorial(j) for j in range(m + 1)])
    return np.polynomial.Polynomial(coef)


# ---------------------------------------------------------------------------
# elementwise top-derivative energy


def _pullback_top_deriv_rules(mesh, max_freq, order):
    """Per element: nodes t, plain dt weights, and the chain-rule stack."""
    rules = []
    for gm, arc in zip(mesh.maps, mesh.arc_lengths):
        if gm.kind != "affine" and gm.max_order < order:
            raise MapCapabilityError(
                f"map {gm.label!r} lacks derivatives to order {order}")
        phase = abs(max_freq) * arc
        panels = max(2, int(math.ceil(phase / 8.0)) + 2)
        nodes, base_w = _gl_rule(20)
        edges = np.linspace(0.0, gm.length, panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1] - edges[0])
        t = (mid[:, None] + half * nodes[None, :]).ravel()
        w = np.broadcast_to(half * base_w, (panels, 20)).ravel()
        rules.append((gm, t, w))
    return rules


def derivative_energy_sum(u, mesh, degree, k):
    """Total squared L^2 norm of the order-(degree+1) pullback derivatives.

    Sums ||d^{p+1}(u o gamma_T)/dt^{p+1}||^2 over the elements, p = degree.
    For a trigonometric u on a uniform mesh this telescopes to the exact
    coefficient sum 2 pi sum n^{2(p+1)} |c_n|^2; analytic meshes are
    integrated with chain-rule weights.  Returns (total, ratio) with
    ratio = total / (k^{2(p+1)} ||u||^2).
    """
    p = int(degree)
    r = p + 1
    if isinstance(u, TrigPoly):
        if mesh.kind == "uniform":
            total = 2.0 * math.pi * float(
                np.sum(u.freqs.astype(float) ** (2 * r)
                       * np.abs(u.coeffs) ** 2))
        else:
            total = 0.0
            ders = [u.derivative(j) for j in range(r + 1)]
            for gm, t, w in _pullback_top_deriv_rules(mesh, u.max_freq, r):
                x = gm.value(t)
                vals = np.stack([d.evaluate(x) for d in ders])
                if gm.kind == "affine":
                    top = vals[r] * gm.orientation ** r
                else:
                    gd = [gm.derivative(t, j) for j in range(1, r + 1)]
                    B = forward_compose_weights(gd, r)
                    top = sum(B[r, j] * vals[j] for j in range(r + 1))
                total += float(np.sum(w * np.abs(top) ** 2))
    elif isinstance(u, PiecewisePoly):
        if u.mesh.kind != "uniform":
            raise MapCapabilityError(
                "spline energy sums are only supported on uniform meshes")
        total = u.deriv_l2_norm2(r)
    else:
        raise TypeError(f"unsupported input type {type(u)!r}")
    mass2 = u.l2_norm() ** 2
    ratio = total / (float(k) ** (2 * r) * mass2) if mass2 > 0 else math.inf
    return total, ratio


# ---------------------------------------------------------------------------
# energy split against mass and projection residual


def energy_split_report(u, space, params, m_eval, eps):
    """Split the top-derivative energy of u into mass and residual parts.

    Measures

        lhs  = elementwise top-derivative energy of u (order p+1)
        mass = eps <k>^{2(p+1)} ||u||^2
        res  = h^{-2(p+1-m')} ||u - Pu||^2 in the order-m' norm

    with P the projection in `params` and m' = m_eval, and reports
    C = (lhs - mass) / res.  Requires h k < 1.
    """
    mesh = space.mesh
    k = params.k
    if mesh.h * k >= 1.0:
        raise HypothesisError("the energy split needs h k < 1")
    m_eval = int(m_eval)
    if not 0 <= m_eval <= space.smoothness:
        raise ValueError("evaluation order must satisfy 0 <= m' <= m")
    p = space.degree
    r = p + 1
    lhs, _ = derivative_energy_sum(u, mesh, p, k)
    mass = eps * params.gauge ** (2 * r) * u.l2_norm() ** 2
    res = residual_error(u, space, params,
                         eval_params=SobolevParams(k, m_eval))
    term_res = mesh.h ** (-2 * (r - m_eval)) * res ** 2
    degenerate = lhs == 0.0
    fitted = (lhs - mass) / term_res if term_res > 0.0 else math.nan
    return EnergySplitReport(mesh.h, k, int(params.order), m_eval, float(eps),
                             lhs, mass, term_res, fitted, degenerate)


# ---------------------------------------------------------------------------
# duality comparison of operator norms


def duality_check(space, k, ell, s, N="auto"):
    """Compare ||I-P||: ell -> -s against ||I-P||: 2 ell + s -> ell.

    P is the order-ell projection at wavenumber k.  Duality predicts the
    two norms agree up to a bounded factor whenever s >= -ell; the report
    carries both values and C = lhs / rhs.  If either finite section failed
    to stabilize the report is marked unverified and a warning is issued.
    """
    ell = int(ell)
    s = float(s)
    if s < -ell:
        raise ValueError("duality needs s >= -ell")
    params = SobolevParams(float(k), ell)
    lhs = operator_norm(space, params, ell, -s, N=N)
    rhs = operator_norm(space, params, 2 * ell + s, ell, N=N)
    fitted = lhs.value / rhs.value if rhs.value > 0 else math.inf
    verified = lhs.stabilized and rhs.stabilized
    if not verified:
        warnings.warn("finite sections did not stabilize; duality constant "
                      "is unverified", stacklevel=2)
    return DualityReport(ell, s, lhs.value, rhs.value, fitted, verified)


# ---------------------------------------------------------------------------
# elementwise identities


def _element_integrals(g, nu, mesh):
    """sum_nu g_nu int_T e^{i nu x} dx for every element T, via one ifft."""
    nel = mesh.n_elements
    h = mesh.h
    x0 = mesh.breakpoints[0]
    eta = np.empty(nu.size, dtype=complex)
    zero = nu == 0
    eta[zero] = h
    nz = nu[~zero].astype(float)
    eta[~zero] = (np.exp(1j * nz * h) - 1.0) / (1j * nz)
    z = np.zeros(nel, dtype=complex)
    np.add.at(z, np.mod(nu, nel), g * eta * np.exp(1j * nu * x0))
    return nel * np.fft.ifft(z)


def decomposition_check(u, mesh, degree, spline=None):
    """Check the elementwise energy decomposition and insertion identity.

    For w = u^{(p+1)} the element integrals of |w|^2 must reproduce the
    global coefficient sum 2 pi sum n^{2(p+1)} |c_n|^2, and inserting any
    degree-p spline q leaves the elementwise pairing <w, w - q^{(p+1)}>
    unchanged because the top derivative annihilates q.  The report carries
    both routes of each identity and their worst relative defect.
    """
    if not isinstance(u, TrigPoly):
        raise TypeError("identity checks need a trigonometric input")
    if mesh.kind != "uniform":
        raise ValueError("identity checks need a uniform mesh")
    p = int(degree)
    r = p + 1
    d = (1j * u.freqs.astype(float)) ** r * u.coeffs
    global_sum = 2.0 * math.pi * float(np.sum(np.abs(d) ** 2))
    # |w|^2 has coefficients given by the autocorrelation of d
    g = np.correlate(d, d, mode="full")
    F = u.max_freq
    nu = np.arange(-2 * F, 2 * F + 1)
    per_element = _element_integrals(g, nu, mesh).real
    elementwise = float(np.sum(per_element))
    cross = 0.0
    annihilation = 0.0
    if spline is not None:
        if spline.mesh is not mesh:
            raise ValueError("the spline must live on the checked mesh")
        if spline.degree > p:
            raise ValueError("insertion needs a spline of degree <= p")
        top = spline.derivative(r)
        annihilation = float(np.max(np.abs(top.coeffs)))
        pair = wave_pairings(top, u.freqs)
        cross = float(np.real(np.sum(np.conj(d) * pair)))
    insertion = elementwise - cross
    scale = max(global_sum, 1e-300)
    rel = max(abs(elementwise - global_sum), abs(insertion - global_sum))
    return IdentityReport(elementwise, global_sum, insertion, annihilation,
                          rel / scale)
