"""Random oscillating inputs and their spectral certificates.

`random_oscillating` draws band-limited trigonometric polynomials whose
frequencies all lie between xi_lo*k and xi_hi*k, the input class of the
rate sweeps.  `approx_oscillating` adds a controlled low-frequency leakage
of prescribed tiny mass, for checking that the rates are insensitive to
superpolynomially small perturbations.  Both return certificates that
restate the defining conditions as exact spectral computations; nothing
here is fitted.
"""

import math
from dataclasses import dataclass

import numpy as np

from .funcspace import TWO_PI, TrigPoly


class BandError(ValueError):
    """The requested frequency band contains no integer mode."""


class LeakProfileError(ValueError):
    """The requested leakage is not small compared to the bulk."""


@dataclass(frozen=True)
class OscillationCert:
    a: float                 # lower band edge
    b: float                 # upper band edge
    orders: tuple            # s values checked
    projection_defect: float # L2 norm of the part below a
    worst_ratio: float       # max_s ||u||_{H^s} / (<b>^s ||u||)
    passed: bool


@dataclass(frozen=True)
class ApproxOscillationCert:
    eps: float
    leak_power: int          # J: leakage L2 norm equals k^{-J}
    leakage: float           # L2 norm of the part below eps*k
    leak_bound: float        # k^{-J}
    norm_ratios: tuple       # ||u||_{H^j} / (<k>^j ||u||) for j = 0..J
    passed: bool


DEFAULT_ORDERS = tuple(range(11))


def _gauge(b):
    return math.sqrt(1.0 + float(b) ** 2)


def validate_oscillation(u, a, b, orders=DEFAULT_ORDERS):
    """Certificate that u oscillates with frequencies between a and b.

    Checks the two defining conditions exactly on the coefficients: no
    spectral mass below a, and ||u||_{H^s} <= <b>^s ||u||_{L^2} for each
    requested order s.
    """
    l2sq = TWO_PI * float(np.sum(np.abs(u.coeffs) ** 2))
    defect = math.sqrt(u.mass_below(a))
    n2 = 1.0 + u.freqs.astype(float) ** 2
    b2 = 1.0 + float(b) ** 2
    worst = 0.0
    for s in orders:
        num = TWO_PI * float(np.sum((n2 / b2) ** s * np.abs(u.coeffs) ** 2))
        worst = max(worst, math.sqrt(num / l2sq))
    passed = defect <= 1e-12 * math.sqrt(l2sq) and worst <= 1.0
    return OscillationCert(float(a), float(b), tuple(orders), defect,
                           worst, passed)


def _band_coeffs(k, xi_lo, xi_hi, rng, real_valued):
    if not 0.0 < xi_lo < xi_hi:
        raise BandError("band fractions must satisfy 0 < xi_lo < xi_hi")
    lo = math.ceil(xi_lo * k)
    hi = math.floor(xi_hi * k)
    if lo > hi:
        raise BandError(
            f"no integer frequencies in [{xi_lo * k}, {xi_hi * k}]")
    c = np.zeros(2 * hi + 1, dtype=complex)
    n = np.arange(-hi, hi + 1)
    if real_valued:
        vals = rng.standard_normal(hi - lo + 1) \
            + 1j * rng.standard_normal(hi - lo + 1)
        c[hi + lo:] = vals
        c[:hi - lo + 1] = np.conj(vals[::-1])
    else:
        mask = np.abs(n) >= lo
        m = int(np.sum(mask))
        c[mask] = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return c, lo, hi


def random_oscillating(k, xi_lo=0.5, xi_hi=1.0, seed=0, real_valued=False):
    """Draw a normalized random function with spectrum in [xi_lo*k, xi_hi*k].

    Coefficients are independent complex Gaussians on the integer band
    (conjugate-symmetrized when real_valued), scaled to ||u||_{L^2} = 1.
    Returns (u, cert); the certificate passes by construction.
    """
    rng = np.random.default_rng(seed)
    c, _, _ = _band_coeffs(float(k), xi_lo, xi_hi, rng, real_valued)
    c /= math.sqrt(TWO_PI * np.sum(np.abs(c) ** 2))
    u = TrigPoly(c)
    cert = validate_oscillation(u, xi_lo * k, xi_hi * k)
    return u, cert


def approx_oscillating(k, eps=0.25, leak_power=8, seed=0,
                       xi_lo=0.5, xi_hi=1.0, real_valued=False):
    """Band-limited bulk plus low-frequency leakage of L2 norm k^{-J}.

    The leakage occupies |n| < eps*k with Gaussian coefficients scaled so
    its L2 norm is exactly k^{-leak_power}; the bulk carries the rest of
    the unit mass.  The certificate records the leakage against the bound
    k^{-j} for each j <= leak_power and the H^j norm ratios against <k>^j.
    """
    k = float(k)
    J = int(leak_power)
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if eps >= xi_lo:
        raise ValueError("leakage band must sit below the bulk band")
    if J < 1:
        raise LeakProfileError("leak power must be a positive integer")
    leak_norm = k ** (-J)
    if leak_norm ** 2 >= 0.5:
        raise LeakProfileError(
            f"leakage mass k^(-2*{J}) is not small against the bulk")
    rng = np.random.default_rng(seed)
    c, _, hi = _band_coeffs(k, xi_lo, xi_hi, rng, real_valued)
    c *= math.sqrt((1.0 - leak_norm ** 2) / (TWO_PI * np.sum(np.abs(c) ** 2)))

    cut = math.ceil(eps * k) - 1      # largest |n| strictly below eps*k
    cut = min(cut, hi)
    m = 2 * cut + 1
    if real_valued:
        vals = rng.standard_normal(cut + 1) \
            + 1j * rng.standard_normal(cut + 1)
        leak = np.concatenate([np.conj(vals[:0:-1]), vals])
        leak[cut] = leak[cut].real
    else:
        leak = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    leak *= leak_norm / math.sqrt(TWO_PI * np.sum(np.abs(leak) ** 2))
    c[hi - cut:hi + cut + 1] += leak
    u = TrigPoly(c)

    l2 = u.l2_norm()
    leakage = math.sqrt(u.mass_below(eps * k))
    n2 = 1.0 + u.freqs.astype(float) ** 2
    k2 = 1.0 + k ** 2
    ratios = tuple(
        math.sqrt(TWO_PI * float(np.sum((n2 / k2) ** j
                                        * np.abs(u.coeffs) ** 2))) / l2
        for j in range(J + 1))
    passed = leakage <= leak_norm * (1.0 + 1e-12) \
        and all(r <= 1.0 for r in ratios)
    cert = ApproxOscillationCert(float(eps), J, leakage, leak_norm,
                                 ratios, passed)
    return u, cert
