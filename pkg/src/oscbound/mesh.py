"""Meshes on the circle of circumference 2*pi.

The circle is parametrized by x in [-pi/2, 3*pi/2).  A mesh at scale h is a
cyclic list of elements, each the image of a reference interval (0, L) under
a coordinate map: unit-slope affine maps for uniform meshes (L = h equals the
arc length), or analytic maps onto arcs (the four-element arcsine mesh, with
reference interval (0, 1)).

Coordinate maps expose derivative evaluators so that x-derivatives of mapped
polynomials can be formed exactly through series reversion and composition;
see `compose_weights`.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

CIRCLE_START = -0.5 * math.pi
CIRCUMFERENCE = 2.0 * math.pi

REGULARITY_SAMPLES = 1025


class MeshError(ValueError):
    pass


class MapCapabilityError(ValueError):
    """A coordinate map lacks a required evaluator (derivative order, inverse)."""


# ---------------------------------------------------------------------------
# coordinate maps


class CoordinateMap:
    """Map from a reference interval (0, length) onto one circle arc.

    kind "affine": gamma(t) = offset + orientation * t with orientation +-1.
    kind "analytic": smooth bijection given by a value evaluator, derivative
    evaluators for orders 1..max_order, and optionally an inverse evaluator.
    """

    def __init__(self, kind, length, *, offset=None, orientation=1,
                 value=None, derivs=None, inverse=None, max_order=None,
                 inverse_slope_bound=None, label=""):
        self.kind = kind
        self.length = float(length)
        self.label = label
        if kind == "affine":
            self.offset = float(offset)
            self.orientation = int(orientation)
            if self.orientation not in (-1, 1):
                raise MeshError("affine orientation must be +-1")
            self.max_order = 64 if max_order is None else max_order
            self.inverse_slope_bound = 1.0
        elif kind == "analytic":
            if value is None or derivs is None:
                raise MeshError("analytic map needs value and derivative evaluators")
            if inverse_slope_bound is None:
                raise MeshError("analytic map needs an inverse-slope bound")
            self._value = value
            self._derivs = list(derivs)
            self._inverse = inverse
            self.max_order = len(self._derivs) if max_order is None else max_order
            self.inverse_slope_bound = float(inverse_slope_bound)
        else:
            raise MeshError(f"unknown map kind {kind!r}")

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "affine":
            return self.offset + self.orientation * t
        return self._value(t)

    def derivative(self, t, order=1):
        if order < 1:
            raise ValueError("derivative order must be >= 1")
        t = np.asarray(t, dtype=float)
        if self.kind == "affine":
            if order == 1:
                return np.full(t.shape, float(self.orientation))
            return np.zeros(t.shape)
        if order > self.max_order:
            raise MapCapabilityError(
                f"map {self.label or self.kind} supplies derivatives up to "
                f"order {self.max_order}, requested {order}")
        return np.asarray(self._derivs[order - 1](t), dtype=float)

    def inverse(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "affine":
            return (x - self.offset) * self.orientation
        if self._inverse is None:
            raise MapCapabilityError(
                f"map {self.label or self.kind} has no inverse evaluator")
        return self._inverse(x)


def _arcsine_gamma(sigma_w, sigma_a, shift, label, max_order=8):
    """Arc map gamma(t) = shift + sigma_a * arcsin(sigma_w * (t^2 - 1)).

    gamma'(t) = sigma_a*sigma_w * 2/sqrt(2 - t^2); higher derivatives follow
    the recurrence P_{r+1} = P_r'(t)(2 - t^2) + (2r+1) t P_r on the
    polynomial factor of P_r(t) (2 - t^2)^(-(2r+1)/2).  Exact on [0, 1].
    """
    sigma = sigma_a * sigma_w

    polys = [np.array([1.0])]
    for r in range(max_order):
        pr = polys[-1]
        dp = np.polynomial.polynomial.polyder(pr)
        grown = np.polynomial.polynomial.polymul(dp, np.array([2.0, 0.0, -1.0]))
        tilt = (2 * r + 1) * np.polynomial.polynomial.polymul(np.array([0.0, 1.0]), pr)
        polys.append(np.polynomial.polynomial.polyadd(grown, tilt))

    def value(t):
        t = np.asarray(t, dtype=float)
        return shift + sigma_a * np.arcsin(sigma_w * (t * t - 1.0))

    def make_deriv(r):
        poly = polys[r - 1]
        expo = -(2 * (r - 1) + 1) / 2.0

        def deriv(t):
            t = np.asarray(t, dtype=float)
            return sigma * 2.0 * np.polynomial.polynomial.polyval(t, poly) \
                * (2.0 - t * t) ** expo

        return deriv

    def inverse(x):
        # t^2 = 1 + sigma_w * sin(sigma_a * (x - shift))
        x = np.asarray(x, dtype=float)
        rad = 1.0 + sigma_w * np.sin(sigma_a * (x - shift))
        return np.sqrt(np.clip(rad, 0.0, None))

    return CoordinateMap(
        "analytic", 1.0,
        value=value,
        derivs=[make_deriv(r) for r in range(1, max_order + 1)],
        inverse=inverse,
        max_order=max_order,
        inverse_slope_bound=math.sqrt(2.0) / 2.0,
        label=label,
    )


# ---------------------------------------------------------------------------
# meshes


@dataclass
class CircleMesh:
    """One mesh at one scale: cyclic elements, breakpoints, coordinate maps.

    breakpoints[i] is the left endpoint (circle order) of element i; the
    right endpoint of the last element wraps to breakpoints[0] + 2*pi.
    node_param[i] gives the reference parameters (t at left node, t at right
    node) for map i, which differ for decreasing maps.
    """

    kind: str                      # "uniform" or "analytic"
    h: float                       # reference interval length
    breakpoints: np.ndarray
    maps: list
    node_param: list = field(default_factory=list)

    @property
    def n_elements(self):
        return len(self.breakpoints)

    @property
    def arc_lengths(self):
        ends = np.roll(self.breakpoints, -1).copy()
        ends[-1] += CIRCUMFERENCE
        return ends - self.breakpoints

    def element_of(self, x):
        """Element indices and wrapped coordinates for points x."""
        x = np.asarray(x, dtype=float)
        xm = np.mod(x - CIRCLE_START, CIRCUMFERENCE) + CIRCLE_START
        idx = np.searchsorted(self.breakpoints, xm, side="right") - 1
        return np.clip(idx, 0, self.n_elements - 1), xm

    def validate(self):
        total = float(np.sum(self.arc_lengths))
        if abs(total - CIRCUMFERENCE) > 1e-12 * CIRCUMFERENCE:
            raise MeshError(f"element closures do not cover the circle: {total}")
        if np.any(self.arc_lengths <= 0):
            raise MeshError("breakpoints out of order")
        for i, gm in enumerate(self.maps):
            ts = np.linspace(0.0, gm.length, 257)
            dv = np.diff(gm.value(ts))
            if not (np.all(dv > 0) or np.all(dv < 0)):
                raise MeshError(f"map {i} is not monotonic on its interval")
        return self

    def to_json(self):
        if self.kind == "uniform":
            payload = {"kind": "uniform", "n": self.n_elements}
        else:
            payload = {"kind": "counterexample"}
        payload["h"] = self.h
        payload["breakpoints"] = [float(b) for b in self.breakpoints]
        return json.dumps(payload)


@dataclass
class MeshScale:
    """Family of meshes indexed by the scale h."""

    scales: dict

    @property
    def h_values(self):
        return sorted(self.scales)

    def mesh_at(self, h):
        return self.scales[h]

    def to_json(self):
        return json.dumps(
            {repr(h): json.loads(m.to_json()) for h, m in self.scales.items()})


def uniform_mesh(n):
    """Uniform n-element mesh with unit-slope affine maps, h = 2*pi/n."""
    if n < 2:
        raise MeshError("uniform mesh needs n >= 2")
    h = CIRCUMFERENCE / n
    breaks = CIRCLE_START + h * np.arange(n)
    maps = [CoordinateMap("affine", h, offset=b, orientation=1, label=f"T{i}")
            for i, b in enumerate(breaks)]
    node_param = [(0.0, h)] * n
    return CircleMesh("uniform", h, breaks, maps, node_param).validate()


def build_uniform_circle_scale(n_list):
    meshes = {}
    for n in n_list:
        m = uniform_mesh(int(n))
        meshes[m.h] = m
    return MeshScale(meshes)


def build_counterexample_mesh():
    """The four-arc analytic mesh on which sin is a mapped quadratic.

    Elements (-pi/2,0), (0,pi/2), (pi/2,pi), (pi,3*pi/2) with reference
    interval (0,1): sin pulls back to +-(1 -+ t^2) on every arc (a quadratic)
    while cos pulls back to t*sqrt(2 - t^2) on the first arc (not one).
    """
    g1 = _arcsine_gamma(+1, +1, 0.0, "arc1")        # t: 0->1 maps -pi/2 -> 0
    g2 = _arcsine_gamma(-1, +1, 0.0, "arc2")        # t: 0->1 maps  pi/2 -> 0
    g3 = _arcsine_gamma(-1, -1, math.pi, "arc3")    # t: 0->1 maps  pi/2 -> pi
    g4 = _arcsine_gamma(+1, -1, math.pi, "arc4")    # t: 0->1 maps 3pi/2 -> pi
    breaks = np.array([-0.5 * math.pi, 0.0, 0.5 * math.pi, math.pi])
    node_param = [(0.0, 1.0), (1.0, 0.0), (0.0, 1.0), (1.0, 0.0)]
    mesh = CircleMesh("analytic", 1.0, breaks, [g1, g2, g3, g4], node_param)
    mesh.validate()
    return MeshScale({1.0: mesh})


def mesh_from_json(text):
    payload = json.loads(text)
    if payload["kind"] == "uniform":
        return uniform_mesh(payload["n"])
    if payload["kind"] == "counterexample":
        return build_counterexample_mesh().mesh_at(1.0)
    raise MeshError(f"unknown mesh kind {payload['kind']!r}")


# ---------------------------------------------------------------------------
# regularity


@dataclass(frozen=True)
class RegularityReport:
    order: int
    bound: float
    derivative_sup: dict
    inverse_sup: float
    passed: bool


def check_regularity(mesh, order, bound):
    """Sampled regularity on 1025-point grids per element.

    Measures sup |gamma^(r)| for r = 1..order and sup |1/gamma'|; passes iff
    every measured value is <= bound.
    """
    if order < 1:
        raise ValueError("regularity order must be >= 1")
    sups = {r: 0.0 for r in range(1, order + 1)}
    inv_sup = 0.0
    for gm in mesh.maps:
        ts = np.linspace(0.0, gm.length, REGULARITY_SAMPLES)
        d1 = gm.derivative(ts, 1)
        if np.any(d1 == 0):
            raise MeshError("coordinate map has a vanishing derivative")
        inv_sup = max(inv_sup, float(np.max(1.0 / np.abs(d1))))
        sups[1] = max(sups[1], float(np.max(np.abs(d1))))
        for r in range(2, order + 1):
            sups[r] = max(sups[r], float(np.max(np.abs(gm.derivative(ts, r)))))
    passed = all(v <= bound for v in list(sups.values()) + [inv_sup])
    return RegularityReport(order, float(bound), sups, inv_sup, passed)


# ---------------------------------------------------------------------------
# series reversion and composition


def _series_mul(a, b, trunc):
    """Product of two series with zero constant term, truncated at `trunc`."""
    out = np.zeros_like(a)
    for i in range(1, trunc):
        for j in range(1, trunc + 1 - i):
            out[i + j] = out[i + j] + a[i] * b[j]
    return out


def invert_series(g, order):
    """Reversion of g(xi) = sum_{r>=1} g[r] xi^r with g[1] != 0.

    g has shape (order+1, ...); returns d of the same shape with
    g(d(eta)) = eta + O(eta^{order+1}).  Vectorized over trailing axes.
    """
    g = np.asarray(g, dtype=float)
    d = np.zeros_like(g)
    d[1] = 1.0 / g[1]
    for j in range(2, order + 1):
        # [eta^j] of sum_s g_s d(eta)^s must vanish; d[j] is still zero here
        # and d^s for s >= 2 only uses d[1..j-1] at order j.
        acc = np.zeros_like(g[0])
        power = d
        for s in range(2, j + 1):
            power = _series_mul(power, d, j)
            acc = acc + g[s] * power[j]
        d[j] = -acc * d[1]
    return d


def compose_weights(gamma_derivs, order):
    """Chain-rule weights for x-derivatives through an inverse map.

    Given gamma_derivs[r-1] = gamma^(r)(t) for r = 1..order (scalars or
    arrays over sample points), returns A of shape (order+1, order+1, ...)
    such that for u = q o gamma^{-1},

        d^j u / dx^j  at  x = gamma(t)  =  sum_r A[j, r] q^(r)(t).

    Built from series reversion; linear in the q-derivatives and exact for
    analytic maps.  For a unit-slope affine map A is the identity.
    """
    g = _taylor_series(gamma_derivs, order)
    return _weights_from_series(invert_series(g, order), order)


def forward_compose_weights(gamma_derivs, order):
    """Chain-rule weights for t-derivatives of a composition.

    Given gamma_derivs[r-1] = gamma^(r)(t) for r = 1..order, returns B of
    shape (order+1, order+1, ...) such that

        d^j (u o gamma) / dt^j  =  sum_r B[j, r] u^(r)(gamma(t)).

    Same accumulation as compose_weights but without series reversion.
    """
    g = _taylor_series(gamma_derivs, order)
    return _weights_from_series(g, order)


def _taylor_series(gamma_derivs, order):
    derivs = [np.asarray(dd, dtype=float) for dd in gamma_derivs]
    if len(derivs) < order:
        raise MapCapabilityError(f"need {order} map derivatives, got {len(derivs)}")
    shape = derivs[0].shape if derivs else ()
    g = np.zeros((order + 1,) + shape)
    for r in range(1, order + 1):
        g[r] = derivs[r - 1] / math.factorial(r)
    return g


def _weights_from_series(d, order):
    # W[j, r] = j!/r! * [eta^j] d(eta)^r for the zero-constant series d.
    A = np.zeros((order + 1, order + 1) + d.shape[1:])
    A[0, 0] = 1.0
    power = None
    for r in range(1, order + 1):
        power = d if power is None else _series_mul(power, d, order)
        fr = math.factorial(r)
        for j in range(1, order + 1):
            A[j, r] = math.factorial(j) / fr * power[j]
    return A
