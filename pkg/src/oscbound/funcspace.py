"""Function representations and wavenumber-scaled Sobolev norms on the circle.

Two concrete function types: trigonometric polynomials (integer frequencies,
coefficient vector indexed -N..N) and piecewise mapped polynomials over a
`CircleMesh`, stored per element in the L^2-orthonormalized Legendre basis of
the reference interval.

Norms come in two flavors sharing the wavenumber k:

  derivative_sum       ||u||^2 + <k>^(-2l) ||u^(l)||^2   (integer l >= 0,
                       top-derivative seminorm; l = 0 is plain L^2)
  spectral_multiplier  2 pi sum (1 + (n/k)^2)^s |c_n|^2   (any real s)

For negative spectral orders of a spline the exact value is unavailable from
finitely many coefficients; `norm_hk` then returns a `NormBracket` enclosing
the true value using the exact L^2 tail mass above the truncation frequency.

The computational backbone is the closed form

  int_0^L e^{i f t} phi_a(t) dt = sqrt((2a+1) L) i^a e^{i f L/2} j_a(f L / 2)

with j_a the spherical Bessel function, evaluated by scipy away from zero and
by its Taylor series for small arguments.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import spherical_jn

from .mesh import CIRCLE_START, compose_weights
from .quadrature import _gl_rule

DERIVATIVE_SUM = "derivative_sum"
SPECTRAL = "spectral_multiplier"

TWO_PI = 2.0 * math.pi


class NormFlavorError(ValueError):
    pass


class SmoothnessError(ValueError):
    pass


class TruncationError(ValueError):
    pass


@dataclass(frozen=True)
class SobolevParams:
    """Wavenumber-scaled Sobolev norm parameters.

    bracket_N is the truncation frequency used when a negative spectral
    order is evaluated on a spline; 0 means "not provided".
    """

    k: float
    order: float
    flavor: str = DERIVATIVE_SUM
    bracket_N: int = 0

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("wavenumber k must be positive")
        if self.flavor not in (DERIVATIVE_SUM, SPECTRAL):
            raise NormFlavorError(f"unknown norm flavor {self.flavor!r}")
        if self.flavor == DERIVATIVE_SUM:
            if self.order < 0 or self.order != int(self.order):
                raise NormFlavorError(
                    "derivative_sum flavor needs an integer order >= 0")

    @property
    def gauge(self):
        """<k> = sqrt(1 + k^2)."""
        return math.sqrt(1.0 + self.k * self.k)


@dataclass(frozen=True)
class NormBracket:
    """Certified enclosure [lower, upper] of a norm value."""

    lower: float
    upper: float

    def __post_init__(self):
        if not (self.lower <= self.upper):
            raise ValueError("bracket must satisfy lower <= upper")

    @property
    def midpoint(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self):
        return self.upper - self.lower

    @property
    def rel_width(self):
        mid = self.midpoint
        return self.width / mid if mid > 0 else math.inf


# ---------------------------------------------------------------------------
# trigonometric polynomials


class TrigPoly:
    """sum_{|n| <= N} c_n e^{i n x} with complex coefficients."""

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=complex).ravel()
        if c.size % 2 != 1:
            raise ValueError("coefficient vector must have odd length 2N+1")
        self.coeffs = c
        self.max_freq = (c.size - 1) // 2

    @classmethod
    def zero(cls, max_freq=0):
        return cls(np.zeros(2 * max_freq + 1, dtype=complex))

    @classmethod
    def single_mode(cls, n, coeff=1.0):
        N = abs(int(n))
        c = np.zeros(2 * N + 1, dtype=complex)
        c[N + int(n)] = coeff
        return cls(c)

    @classmethod
    def from_dict(cls, modes):
        if not modes:
            return cls.zero()
        N = max(abs(int(n)) for n in modes)
        c = np.zeros(2 * N + 1, dtype=complex)
        for n, v in modes.items():
            c[N + int(n)] = v
        return cls(c)

    @property
    def freqs(self):
        return np.arange(-self.max_freq, self.max_freq + 1)

    def coeff(self, n):
        if abs(n) > self.max_freq:
            return 0.0 + 0.0j
        return self.coeffs[self.max_freq + int(n)]

    def padded(self, max_freq):
        if max_freq < self.max_freq:
            raise ValueError("padding cannot shrink the band")
        c = np.zeros(2 * max_freq + 1, dtype=complex)
        lo = max_freq - self.max_freq
        c[lo:lo + self.coeffs.size] = self.coeffs
        return TrigPoly(c)

    def truncated(self, max_freq):
        if max_freq >= self.max_freq:
            return self
        cut = self.max_freq - max_freq
        return TrigPoly(self.coeffs[cut:-cut])

    def derivative(self, r=1):
        return TrigPoly(self.coeffs * (1j * self.freqs) ** r)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        out = np.empty(flat.size, dtype=complex)
        n = self.freqs
        step = max(1, 2_000_000 // max(1, n.size))
        for lo in range(0, flat.size, step):
            seg = flat[lo:lo + step]
            out[lo:lo + step] = np.exp(1j * np.outer(seg, n)) @ self.coeffs
        return out.reshape(x.shape)

    def l2_norm(self):
        return math.sqrt(TWO_PI * float(np.sum(np.abs(self.coeffs) ** 2)))

    def mass_below(self, a):
        """L^2 mass (squared norm) carried by modes with |n| < a."""
        sel = np.abs(self.freqs) < a
        return TWO_PI * float(np.sum(np.abs(self.coeffs[sel]) ** 2))

    def conjugate_defect(self):
        """max |c_{-n} - conj(c_n)|; zero iff the function is real-valued."""
        return float(np.max(np.abs(self.coeffs[::-1] - np.conj(self.coeffs))))

    def is_real(self, tol=1e-12):
        scale = max(1.0, float(np.max(np.abs(self.coeffs))))
        return self.conjugate_defect() <= tol * scale

    def _binop(self, other, sign):
        N = max(self.max_freq, other.max_freq)
        return TrigPoly(self.padded(N).coeffs + sign * other.padded(N).coeffs)

    def __add__(self, other):
        return self._binop(other, 1.0)

    def __sub__(self, other):
        return self._binop(other, -1.0)

    def __mul__(self, scalar):
        return TrigPoly(self.coeffs * scalar)

    __rmul__ = __mul__


# ---------------------------------------------------------------------------
# reference element: orthonormalized Legendre basis on (0, L)


def ref_deriv_matrix(degree, length):
    """D with (v' coefficients) = D @ (v coefficients) in the orthonormal
    Legendre basis on (0, length)."""
    D = np.zeros((degree + 1, degree + 1))
    for a in range(degree + 1):
        for b in range(a):
            if (a - b) % 2 == 1:
                D[b, a] = 2.0 / length * math.sqrt((2 * a + 1) * (2 * b + 1))
    return D

def ref_endpoint_values(degree, length, order=0):
    """(values at 0, values at length) of phi_a^(order)."""
    scale = np.sqrt((2 * np.arange(degree + 1) + 1) / length)
    v0 = scale * (-1.0) ** np.arange(degree + 1)
    vL = scale.copy()
    if order:
        Dr = np.linalg.matrix_power(ref_deriv_matrix(degree, length), order)
        v0 = Dr.T @ v0
        vL = Dr.T @ vL
    return v0, vL


def ref_stiffness(degree, length, order):
    """Gram of phi_a^(order) on (0, length); identity for order 0."""
    if order == 0:
        return np.eye(degree + 1)
    Dr = np.linalg.matrix_power(ref_deriv_matrix(degree, length), order)
    return Dr.T @ Dr


def eval_ref_basis(degree, length, t, order=0):
    """Values phi_a^(order)(t), shape (degree+1, t.size)."""
    t = np.asarray(t, dtype=float).ravel()
    xi = 2.0 * t / length - 1.0
    scale = np.sqrt((2 * np.arange(degree + 1) + 1) / length)
    out = np.empty((degree + 1, t.size))
    for a in range(degree + 1):
        c = np.zeros(degree + 1)
        c[a] = scale[a]
        out[a] = np.polynomial.legendre.legval(xi, c)
    if order:
        Dr = np.linalg.matrix_power(ref_deriv_matrix(degree, length), order)
        out = Dr.T @ out
    return out


def _spherical_jn_taylor(a, x):
    """j_a(x) by series; accurate near zero (use for |x| < ~0.5)."""
    x = np.asarray(x, dtype=float)
    dfact = 1.0
    for i in range(1, 2 * a + 2, 2):
        dfact *= i
    x2 = x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for m in range(1, 11):
        term = term * (-0.5 * x2) / (m * (2 * a + 2 * m + 1))
        total = total + term
    return x ** a / dfact * total


def osc_moments(degree, length, freqs):
    """M[a, j] = int_0^length e^{i freqs[j] t} phi_a(t) dt.

    Uses the spherical Bessel closed form; the Taylor branch keeps full
    relative accuracy through the |f| L < 1/4 regime where the direct
    recursion would cancel.
    """
    freqs = np.asarray(freqs, dtype=float).ravel()
    z = 0.5 * length * freqs
    az = np.abs(z)
    small = az < 0.5
    out = np.empty((degree + 1, freqs.size), dtype=complex)
    phase = np.exp(1j * z)
    sgn = np.where(z < 0, -1.0, 1.0)
    for a in range(degree + 1):
        j = np.empty_like(az)
        if np.any(~small):
            j[~small] = spherical_jn(a, az[~small])
        if np.any(small):
            j[small] = _spherical_jn_taylor(a, az[small])
        j = j * sgn ** a  # j_a(-x) = (-1)^a j_a(x)
        out[a] = math.sqrt((2 * a + 1) * length) * (1j) ** a * phase * j
    return out


# ---------------------------------------------------------------------------
# piecewise mapped polynomials


class PiecewisePoly:
    """Per-element reference polynomials over a CircleMesh.

    coeffs has shape (n_elements, degree+1) in the orthonormalized Legendre
    basis of (0, mesh.h).  On analytic meshes the function on the circle is
    q_T o gamma_T^{-1}; on uniform meshes q_T(x - x_T).  `smoothness` is the
    certified global order m: derivatives up to m exist in L^2 (continuity
    of orders < m across nodes).
    """

    def __init__(self, mesh, coeffs, smoothness=0):
        coeffs = np.atleast_2d(np.asarray(coeffs))
        if coeffs.shape[0] != mesh.n_elements:
            raise ValueError("coefficient rows must match element count")
        self.mesh = mesh
        self.coeffs = coeffs
        self.degree = coeffs.shape[1] - 1
        self.smoothness = int(smoothness)

    def derivative(self, r=1):
        """Elementwise x-derivative; uniform meshes only (affine pullback)."""
        if self.mesh.kind != "uniform":
            raise NormFlavorError(
                "closed-form differentiation needs a uniform mesh")
        Dr = np.linalg.matrix_power(
            ref_deriv_matrix(self.degree, self.mesh.h), r)
        return PiecewisePoly(self.mesh, self.coeffs @ Dr.T,
                             smoothness=max(0, self.smoothness - r))

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        idx, xm = self.mesh.element_of(x)
        if self.mesh.kind == "uniform":
            t = xm - self.mesh.breakpoints[idx]
        else:
            t = np.empty_like(xm)
            for i, gm in enumerate(self.mesh.maps):
                sel = idx == i
                if np.any(sel):
                    t[sel] = gm.inverse(xm[sel])
        length = self.mesh.h
        xi = 2.0 * t / length - 1.0
        scale = np.sqrt((2 * np.arange(self.degree + 1) + 1) / length)
        c = (self.coeffs[idx] * scale).T  # (degree+1, npts)
        return np.polynomial.legendre.legval(xi, c, tensor=False)

    def l2_norm(self):
        if self.mesh.kind == "uniform":
            return math.sqrt(float(np.sum(np.abs(self.coeffs) ** 2)))
        return math.sqrt(_analytic_deriv_gram_norm2(self, 0))

    def deriv_l2_norm2(self, r):
        """||v^(r)||_{L^2}^2 of the elementwise derivative."""
        if r == 0:
            return self.l2_norm() ** 2
        if self.mesh.kind == "uniform":
            Dr = np.linalg.matrix_power(
                ref_deriv_matrix(self.degree, self.mesh.h), r)
            return float(np.sum(np.abs(self.coeffs @ Dr.T) ** 2))
        return _analytic_deriv_gram_norm2(self, r)


# quadrature helpers for analytic meshes ------------------------------------

_SMOOTH_ORDER = 24
_OSC_ORDER = 20


def _analytic_rule(mesh, max_freq=0.0):
    """Per-element nodes/weights resolving oscillation up to max_freq.

    Returns (t, w) with w = GL weight * |gamma'|; both shaped (nq,) per
    element in a list (elements may share nq but stay listed).
    """
    rules = []
    for gm, arc in zip(mesh.maps, mesh.arc_lengths):
        phase = abs(max_freq) * arc
        panels = max(2, int(math.ceil(phase / 8.0)) + 2)
        order = _OSC_ORDER if max_freq else _SMOOTH_ORDER
        base_x, base_w = _gl_rule(order)
        edges = np.linspace(0.0, gm.length, panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1] - edges[0])
        t = (mid[:, None] + half * base_x[None, :]).ravel()
        w = np.broadcast_to(half * base_w, (panels, order)).ravel()
        slope = np.abs(gm.derivative(t, 1))
        rules.append((t, w * slope))
    return rules


def _analytic_deriv_values(v, r, rules):
    """Values of v^(r) o gamma_T at the rule nodes, one array per element."""
    mesh = v.mesh
    out = []
    for i, (gm, (t, _)) in enumerate(zip(mesh.maps, rules)):
        qv = [eval_ref_basis(v.degree, mesh.h, t, order=rr).T @ v.coeffs[i]
              for rr in range(r + 1)]
        if r == 0:
            out.append(qv[0])
            continue
        if gm.kind == "affine":
            out.append(qv[r] * gm.orientation ** r)
            continue
        gd = [gm.derivative(t, rr) for rr in range(1, r + 1)]
        A = compose_weights(gd, r)
        out.append(sum(A[r, rr] * qv[rr] for rr in range(r + 1)))
    return out


def _analytic_deriv_gram_norm2(v, r):
    rules = _analytic_rule(v.mesh)
    vals = _analytic_deriv_values(v, r, rules)
    return float(sum(np.sum(w * np.abs(val) ** 2)
                     for (val, (_, w)) in zip(vals, rules)))


# ---------------------------------------------------------------------------
# pairings between splines and waves


def wave_pairings(v, freqs, deriv=0):
    """P_n = int v^(deriv)(x) e^{-i n x} dx for each integer n in freqs.

    Uniform meshes use the exact alias structure: the element-index DFT of
    the coefficient columns is read at n mod n_elements and contracted with
    the reference oscillatory moments.  Analytic meshes integrate the mapped
    polynomial against the wave by panel quadrature sized to max |n|.
    """
    freqs = np.asarray(freqs)
    if freqs.dtype.kind not in "iu":
        raise ValueError("wave pairings need integer frequencies")
    mesh = v.mesh
    if mesh.kind == "uniform":
        h = mesh.h
        Q = v.coeffs
        if deriv:
            Dr = np.linalg.matrix_power(ref_deriv_matrix(v.degree, h), deriv)
            Q = Q @ Dr.T
        Fhat = np.fft.fft(Q, axis=0)
        idx = np.mod(freqs, mesh.n_elements)
        M = osc_moments(v.degree, h, -freqs.astype(float))
        contact = np.einsum("ja,aj->j", Fhat[idx], M)
        return np.exp(-1j * freqs * mesh.breakpoints[0]) * contact

    rules = _analytic_rule(mesh, max_freq=float(np.max(np.abs(freqs))) if freqs.size else 0.0)
    vals = _analytic_deriv_values(v, deriv, rules)
    out = np.zeros(freqs.size, dtype=complex)
    for gm, (t, w), val in zip(mesh.maps, rules, vals):
        x = gm.value(t)
        wv = w * val
        step = max(1, 4_000_000 // max(1, t.size))
        for lo in range(0, freqs.size, step):
            f = freqs[lo:lo + step].astype(float)
            out[lo:lo + step] += np.exp(-1j * np.outer(f, x)) @ wv
    return out


def fourier_of_spline(v, N):
    """Coefficients c_n, |n| <= N, of a PiecewisePoly plus the tail mass.

    tail_mass = ||v||_{L^2}^2 - 2 pi sum |c_n|^2 is the exact L^2 mass above
    the truncation frequency (up to rounding; it may come out at -1e-12).
    """
    if N < 0:
        raise TruncationError("truncation frequency must be >= 0")
    freqs = np.arange(-N, N + 1)
    c = wave_pairings(v, freqs) / TWO_PI
    tail = v.l2_norm() ** 2 - TWO_PI * float(np.sum(np.abs(c) ** 2))
    return TrigPoly(c), tail


# ---------------------------------------------------------------------------
# norms and inner products


def _trig_weights(params, freqs):
    n = np.asarray(freqs, dtype=float)
    if params.flavor == SPECTRAL:
        return (1.0 + (n / params.k) ** 2) ** params.order
    ell = int(params.order)
    if ell == 0:
        return np.ones_like(n)
    return 1.0 + params.gauge ** (-2 * ell) * n ** (2 * ell)


def _require_smooth(v, order):
    if order > 0 and v.smoothness < order:
        raise SmoothnessError(
            f"spline carries smoothness certificate {v.smoothness}, "
            f"order {order} norm undefined")


def norm_hk(f, params):
    """H_k norm of a TrigPoly or PiecewisePoly.

    Returns a float except for negative spectral orders on splines, where a
    NormBracket encloses the value (TrigPolys give a zero-width bracket).
    """
    if isinstance(f, TrigPoly):
        w = _trig_weights(params, f.freqs)
        val = math.sqrt(TWO_PI * float(np.sum(w * np.abs(f.coeffs) ** 2)))
        if params.flavor == SPECTRAL and params.order < 0:
            return NormBracket(val, val)
        return val

    if not isinstance(f, PiecewisePoly):
        raise TypeError(f"unsupported function type {type(f)!r}")

    if params.flavor == DERIVATIVE_SUM:
        ell = int(params.order)
        if ell == 0:
            return f.l2_norm()
        _require_smooth(f, ell)
        val2 = f.l2_norm() ** 2 + params.gauge ** (-2 * ell) * f.deriv_l2_norm2(ell)
        return math.sqrt(val2)

    s = params.order
    if s == 0:
        return f.l2_norm()
    if s > 0:
        raise NormFlavorError(
            "positive spectral orders are defined for trigonometric "
            "polynomials only; use the derivative_sum flavor for splines")
    if params.bracket_N < 1:
        raise TruncationError(
            "negative spectral order on a spline needs bracket_N >= 1")
    coeffs, tail = fourier_of_spline(f, params.bracket_N)
    w = _trig_weights(params, coeffs.freqs)
    core = TWO_PI * float(np.sum(w * np.abs(coeffs.coeffs) ** 2))
    tail_weight = (1.0 + (params.bracket_N / params.k) ** 2) ** s
    hi = core + max(tail, 0.0) * tail_weight
    return NormBracket(math.sqrt(core), math.sqrt(hi))


def _inner_trig_trig(f, g, params):
    N = max(f.max_freq, g.max_freq)
    cf, cg = f.padded(N).coeffs, g.padded(N).coeffs
    w = _trig_weights(params, np.arange(-N, N + 1))
    return TWO_PI * complex(np.sum(w * cf * np.conj(cg)))


def _inner_trig_spline(f, v, params):
    """<f, v>_{H_k} with f trigonometric, v a spline (derivative_sum)."""
    ell = int(params.order)
    _require_smooth(v, ell)
    P0 = wave_pairings(v, f.freqs)
    out = complex(np.sum(f.coeffs * np.conj(P0)))
    if ell:
        Pl = wave_pairings(v, f.freqs, deriv=ell)
        dl = f.coeffs * (1j * f.freqs) ** ell
        out += params.gauge ** (-2 * ell) * complex(np.sum(dl * np.conj(Pl)))
    return out


def _inner_spline_spline(u, v, params):
    if u.mesh is not v.mesh:
        raise ValueError("spline inner products need a shared mesh")
    ell = int(params.order)
    _require_smooth(u, ell)
    _require_smooth(v, ell)
    if u.mesh.kind == "uniform":
        out = complex(np.sum(u.coeffs * np.conj(v.coeffs)))
        if ell:
            D = ref_deriv_matrix(u.degree, u.mesh.h)
            Dl = np.linalg.matrix_power(D, ell)
            out += params.gauge ** (-2 * ell) * complex(
                np.sum((u.coeffs @ Dl.T) * np.conj(v.coeffs @ Dl.T)))
        return out
    rules = _analytic_rule(u.mesh)
    total = 0.0 + 0.0j
    for r in ([0] if ell == 0 else [0, ell]):
        uu = _analytic_deriv_values(u, r, rules)
        vv = _analytic_deriv_values(v, r, rules)
        scale = 1.0 if r == 0 else params.gauge ** (-2 * ell)
        total += scale * sum(np.sum(w * a * np.conj(b))
                             for (a, b, (_, w)) in zip(uu, vv, rules))
    return complex(total)


def inner_hk(f, g, params):
    """H_k inner product; integer order >= 0.

    Spectral flavor is exact for two TrigPolys; with a spline argument it is
    only defined at order 0 (where both flavors coincide with L^2).
    """
    if params.order < 0 or params.order != int(params.order):
        raise NormFlavorError("inner products need an integer order >= 0")
    trig_f, trig_g = isinstance(f, TrigPoly), isinstance(g, TrigPoly)
    if params.flavor == SPECTRAL and not (trig_f and trig_g):
        if params.order != 0:
            raise NormFlavorError(
                "spectral inner products with splines exist at order 0 only")
        params = SobolevParams(params.k, 0, DERIVATIVE_SUM)
    if trig_f and trig_g:
        return _inner_trig_trig(f, g, params)
    if trig_f:
        return _inner_trig_spline(f, g, params)
    if trig_g:
        return np.conj(_inner_trig_spline(g, f, params))
    return _inner_spline_spline(f, g, params)
