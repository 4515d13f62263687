"""The Sato-Tate (semicircle) measure, the p-adic Plancherel measures, and
Gaussian moments.

The substitution t = 2 cos(2 pi theta) maps [0, 1/2] onto [-2, 2] and turns
mu_inf(t) dt into 4 sin^2(2 pi theta) d theta, so interval masses have both a
closed form and a smooth quadrature representation; the two must agree to
1e-10 and the closed form is the one used in normalizations downstream.
"""

import math
from dataclasses import dataclass

from scipy.integrate import quad


@dataclass(frozen=True)
class RealInterval:
    a: float
    b: float

    def __post_init__(self):
        if self.a > self.b:
            raise ValueError(f"interval endpoints out of order: [{self.a}, {self.b}]")

    @property
    def length(self):
        return self.b - self.a


def _require_in_range(interval: RealInterval):
    if interval.a < -2.0 or interval.b > 2.0:
        raise ValueError(f"interval [{interval.a}, {interval.b}] not inside [-2, 2]")


def semicircle_density(t: float) -> float:
    """mu_inf(t) = (1/pi) sqrt(1 - t^2/4) on [-2, 2], else 0."""
    if t < -2.0 or t > 2.0:
        return 0.0
    return math.sqrt(max(1.0 - t * t / 4.0, 0.0)) / math.pi


def semicircle_mass(interval: RealInterval) -> float:
    """mu_inf([a, b]) in closed form.

    With [alpha, beta] the theta-image of [a, b], the mass equals
    2(beta - alpha) - (sin 4 pi beta - sin 4 pi alpha) / (2 pi).
    """
    _require_in_range(interval)
    al = math.acos(interval.b / 2.0) / (2 * math.pi)
    be = math.acos(interval.a / 2.0) / (2 * math.pi)
    return 2.0 * (be - al) - (math.sin(4 * math.pi * be) - math.sin(4 * math.pi * al)) / (
        2 * math.pi
    )


def semicircle_mass_quad(interval: RealInterval) -> float:
    """mu_inf([a, b]) by adaptive quadrature in the theta variable (oracle)."""
    _require_in_range(interval)
    al = math.acos(interval.b / 2.0) / (2 * math.pi)
    be = math.acos(interval.a / 2.0) / (2 * math.pi)
    val, _ = quad(lambda th: 4.0 * math.sin(2 * math.pi * th) ** 2, al, be, epsabs=1e-13)
    return val


def plancherel_density(p: int, t: float) -> float:
    """mu_p(t) = (p+1)/pi * sqrt(1 - t^2/4) / ((p^(1/2) + p^(-1/2))^2 - t^2)."""
    if t < -2.0 or t > 2.0:
        return 0.0
    denom = (math.sqrt(p) + 1.0 / math.sqrt(p)) ** 2 - t * t
    return (p + 1) * math.sqrt(max(1.0 - t * t / 4.0, 0.0)) / (math.pi * denom)


def plancherel_mass(p: int, interval: RealInterval) -> float:
    """integral of mu_p over [a, b], absolute error below 1e-9.

    Quadrature runs in theta, where the endpoint square-root singularity of
    the density disappears.
    """
    _require_in_range(interval)
    if interval.a == interval.b:
        return 0.0
    al = math.acos(interval.b / 2.0) / (2 * math.pi)
    be = math.acos(interval.a / 2.0) / (2 * math.pi)
    s = (math.sqrt(p) + 1.0 / math.sqrt(p)) ** 2

    def integrand(th):
        c = 2.0 * math.cos(2 * math.pi * th)
        return 4.0 * (p + 1) * math.sin(2 * math.pi * th) ** 2 / (s - c * c)

    val, err = quad(integrand, al, be, epsabs=1e-12, limit=200)
    return val


def gaussian_moment(n: int) -> int:
    """Moments of the standard normal: n! / ((n/2)! 2^(n/2)) for even n, 0 odd."""
    if n < 0:
        raise ValueError("moment order must be >= 0")
    if n % 2:
        return 0
    half = n // 2
    return math.factorial(n) // (math.factorial(half) * 2**half)
