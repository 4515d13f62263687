"""Beurling-Selberg majorant/minorant trigonometric polynomials on the torus.

For an interval [alpha, beta] inside [0, 1/2] and a degree M, the pair
S^-, S^+ of real trigonometric polynomials of degree <= M satisfies

  (a)  S^-(x) <= chi_[alpha,beta](x) <= S^+(x) for all real x,
  (b)  integral of S^+- over a period = (beta - alpha) +- 1/(M+1),
  (c)  |Shat^+-(m) - chihat(m)| <= 1/(M+1) for 0 < |m| <= M.

Construction (Vaaler's, via the classical sawtooth machinery): the sawtooth
psi(x) = {x} - 1/2 is approximated by the degree-M polynomial with tapered
Fourier coefficients J(m/(M+1)) * psihat(m), where J(t) = pi t (1-t) cot(pi t)
+ t, and the majorant/minorant add/subtract the Fejer kernel term
(1 - |m|/(M+1)) / (2(M+1)).  Writing chi_[alpha,beta] = beta - alpha +
psi(x - beta) - psi(x - alpha) and majorizing each sawtooth yields closed-form
coefficients, O(1) work per coefficient:

  Shat^+-(m) = J(|m|/(M+1)) chihat(m) +- (1 - |m|/(M+1)) / (2(M+1))
                 * (e(-m beta) + e(-m alpha)),        0 < |m| <= M,
  Shat^+-(0) = beta - alpha +- 1/(M+1).
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TorusInterval:
    """[alpha, beta] inside [0, 1/2]; the image of [a,b] under arccos(t/2)/2pi."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (0.0 <= self.alpha <= self.beta <= 0.5):
            raise ValueError(
                f"torus interval must satisfy 0 <= alpha <= beta <= 1/2, got "
                f"[{self.alpha}, {self.beta}]"
            )

    @property
    def length(self):
        return self.beta - self.alpha


def map_interval(a: float, b: float) -> TorusInterval:
    """Torus interval with theta in I_1 iff 2 cos(2 pi theta) in [a, b].

    Orientation reverses because cosine decreases: alpha = arccos(b/2)/2pi,
    beta = arccos(a/2)/2pi.
    """
    if not (-2.0 <= a <= b <= 2.0):
        raise ValueError(f"interval [{a}, {b}] not inside [-2, 2]")
    return TorusInterval(math.acos(b / 2.0) / (2 * math.pi), math.acos(a / 2.0) / (2 * math.pi))


def indicator_fourier(interval: TorusInterval, m: int) -> complex:
    """chihat(m) = (e(-m alpha) - e(-m beta)) / (2 pi i m); length at m = 0."""
    if m == 0:
        return complex(interval.length)
    al, be = interval.alpha, interval.beta
    return (cmath.exp(-2j * math.pi * m * al) - cmath.exp(-2j * math.pi * m * be)) / (
        2j * math.pi * m
    )


def _vaaler_taper(t: float) -> float:
    """J(t) = pi t (1 - t) cot(pi t) + t on (0, 1); J(0) = 1, J(1) = 0.

    Near 0 the cot singularity cancels: J(t) = 1 - (pi^2/3) t^2 (1 - t) + ...;
    the series is used below t = 1e-4 to dodge the 0/0.
    """
    if t <= 0.0:
        return 1.0
    if t >= 1.0:
        return 0.0
    if t < 1e-4:
        return 1.0 - (math.pi * math.pi / 3.0) * t * t * (1.0 - t)
    return math.pi * t * (1.0 - t) / math.tan(math.pi * t) + t


@dataclass(frozen=True)
class SelbergPair:
    """Fourier coefficients of the minorant/majorant polynomials for one
    interval and degree; coeff arrays are indexed by m = -M..M via m + M."""

    interval: TorusInterval
    M: int
    minus_coeffs: np.ndarray
    plus_coeffs: np.ndarray

    def coeff(self, sign: str, m: int) -> complex:
        if abs(m) > self.M:
            return 0.0 + 0.0j
        arr = self.plus_coeffs if sign == "+" else self.minus_coeffs
        return complex(arr[m + self.M])


def _check_sign(sign):
    if sign not in ("+", "-"):
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def selberg_pair(interval: TorusInterval, M: int) -> SelbergPair:
    """Majorant/minorant pair of degree M >= 3 for the interval's indicator."""
    if M < 3:
        raise ValueError(f"degree must be >= 3, got {M}")
    al, be = interval.alpha, interval.beta
    ms = np.arange(-M, M + 1)
    t = np.abs(ms) / (M + 1.0)
    taper = np.array([_vaaler_taper(x) for x in t])
    chihat = np.array([indicator_fourier(interval, int(m)) for m in ms])
    fejer = (1.0 - t) / (2.0 * (M + 1))
    phases = np.exp(-2j * np.pi * ms * be) + np.exp(-2j * np.pi * ms * al)
    plus = taper * chihat + fejer * phases
    minus = taper * chihat - fejer * phases
    mid = M  # index of m = 0
    plus[mid] = interval.length + 1.0 / (M + 1)
    minus[mid] = interval.length - 1.0 / (M + 1)
    return SelbergPair(interval, M, minus, plus)


def symmetrized_coeff(pair: SelbergPair, sign: str, m: int) -> float:
    """Shat(m) + Shat(-m); real by conjugate symmetry.  Requires 0 <= m <= M."""
    _check_sign(sign)
    if not 0 <= m <= pair.M:
        raise ValueError(f"m must lie in [0, {pair.M}], got {m}")
    val = pair.coeff(sign, m) + pair.coeff(sign, -m)
    return float(val.real)


def u_coeff(pair: SelbergPair, sign: str, m: int) -> float:
    """U(m): the Abel-summed coefficient family driving the S-statistic.

    U(m) = Shat_sym(m) - Shat_sym(m+2) for 1 <= m <= M-2, and Shat_sym(m) for
    m = M-1, M; satisfies |U(m)| <= 2/(pi m) + 2/(M+1).
    """
    _check_sign(sign)
    if not 1 <= m <= pair.M:
        raise ValueError(f"m must lie in [1, {pair.M}], got {m}")
    if m <= pair.M - 2:
        return symmetrized_coeff(pair, sign, m) - symmetrized_coeff(pair, sign, m + 2)
    return symmetrized_coeff(pair, sign, m)


def u_coeffs(pair: SelbergPair, sign: str) -> np.ndarray:
    """U(1..M) as an array (index 0 unused, kept 0)."""
    _check_sign(sign)
    arr = pair.plus_coeffs if sign == "+" else pair.minus_coeffs
    M = pair.M
    sym = 2.0 * arr[M:].real  # Shat_sym(m) = 2 Re Shat(m) for m = 0..M
    out = np.zeros(M + 1)
    out[1 : M - 1] = sym[1 : M - 1] - sym[3 : M + 1]
    out[M - 1] = sym[M - 1]
    out[M] = sym[M]
    return out


def evaluate(pair: SelbergPair, sign: str, x) -> float:
    """S(x) = sum_{|m| <= M} Shat(m) e(mx); the imaginary part must vanish."""
    _check_sign(sign)
    arr = pair.plus_coeffs if sign == "+" else pair.minus_coeffs
    ms = np.arange(-pair.M, pair.M + 1)
    val = np.sum(arr * np.exp(2j * np.pi * ms * x))
    if abs(val.imag) > 1e-10:
        raise ArithmeticError(
            f"trigonometric polynomial evaluation has imaginary part {val.imag}"
        )
    return float(val.real)


def evaluate_grid(pair: SelbergPair, sign: str, n: int) -> np.ndarray:
    """S on the uniform grid x = j/n, j = 0..n-1, via one FFT."""
    _check_sign(sign)
    arr = pair.plus_coeffs if sign == "+" else pair.minus_coeffs
    if n <= 2 * pair.M:
        raise ValueError("grid must be finer than the polynomial degree")
    spec = np.zeros(n, dtype=complex)
    for m in range(-pair.M, pair.M + 1):
        spec[m % n] = arr[m + pair.M]
    vals = np.fft.ifft(spec) * n
    if np.abs(vals.imag).max() > 1e-9:
        raise ArithmeticError("grid evaluation has non-negligible imaginary part")
    return vals.real
