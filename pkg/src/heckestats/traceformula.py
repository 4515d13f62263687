"""Exact traces of Hecke operators on level-1 cusp forms.

The trace of T_n on S_k is evaluated as a sum of four exact rational terms:
the identity contribution (squares only), the elliptic term built from
Hurwitz class numbers H(4n - t^2) weighted by an integer Lucas-type
recurrence, the hyperbolic divisor term, and a weight-2 correction.  The
total is always an integer and must match the trace of the integer Hecke
matrix, which is the package's strongest cross-check.

Also provides the expansion coefficients D(t) of products of prime-power
eigenvalues and exactly-averaged products over the eigenform family.
"""

from dataclasses import dataclass
from fractions import Fraction
from math import isqrt

from mpmath import mp, mpf

from .primes import divisors_from_factorization, factorize, is_prime

# Above this n the elliptic term's Hurwitz sum (about 4*sqrt(n) class numbers
# of size up to 4n) is no longer worth enumerating; the trace is then obtained
# from exact integer Hecke-matrix products at the prime factorization of n.
B2_DIRECT_LIMIT = 20_000

_hurwitz_cache: dict = {}


@dataclass(frozen=True)
class HurwitzValue:
    n: int
    value: Fraction


def _hurwitz_raw(n: int) -> Fraction:
    """H(n) by enumeration of reduced forms ax^2 + bxy + cy^2, b^2 - 4ac = -n.

    Reduced means |b| <= a <= c with b >= 0 when |b| = a or a = c; the classes
    of m(x^2 + y^2) and m(x^2 + xy + y^2) weigh 1/2 and 1/3.
    """
    r = n % 4
    if r in (1, 2):
        return Fraction(0)
    total = Fraction(0)
    for b in range(n & 1, isqrt(n // 3) + 1, 2):
        ac4 = n + b * b
        if ac4 % 4:
            continue
        ac = ac4 // 4
        for a in range(max(b, 1), isqrt(ac) + 1):
            if ac % a:
                continue
            c = ac // a
            if b == 0 and a == c:
                total += Fraction(1, 2)
            elif a == b == c:
                total += Fraction(1, 3)
            elif b == 0 or a == b or a == c:
                total += 1
            else:
                total += 2  # both (a, b, c) and (a, -b, c) are reduced
    return total


def hurwitz_class_number(n: int) -> HurwitzValue:
    """Hurwitz class number H(n) for n >= 1, exact rational (cached)."""
    if n < 1:
        raise ValueError("hurwitz_class_number expects n >= 1")
    try:
        return _hurwitz_cache[n]
    except KeyError:
        hv = HurwitzValue(n, _hurwitz_raw(n))
        _hurwitz_cache[n] = hv
        return hv


def lucas_term(t: int, n: int, k: int) -> int:
    """(rho^(k-1) - rhobar^(k-1)) / (rho - rhobar) for x^2 - tx + n = 0.

    Integer value of the recurrence G_0 = 1, G_1 = t,
    G_j = t G_{j-1} - n G_{j-2}, evaluated at j = k - 2.
    """
    if t * t >= 4 * n:
        raise ValueError(f"lucas_term requires t^2 < 4n, got t={t}, n={n}")
    if k < 2:
        raise ValueError("lucas_term requires k >= 2")
    g_prev, g = 1, t
    if k == 2:
        return 1
    for _ in range(k - 3):
        g_prev, g = g, t * g - n * g_prev
    return g


@dataclass(frozen=True)
class TraceValue:
    """Unnormalized trace of T_n on S_k with its four formula terms."""

    weight: int
    n: int
    total: int
    b1: Fraction
    b2: Fraction
    b3: Fraction
    b4: Fraction


class ResourceGuardError(RuntimeError):
    """The requested exact computation would exceed the configured budget."""


def _b2_elliptic(k: int, n: int) -> Fraction:
    """-1/2 * sum_{t^2 < 4n} G_{k-2}(t, n) H(4n - t^2), exact."""
    total = Fraction(0)
    h = hurwitz_class_number(4 * n).value
    total += lucas_term(0, n, k) * h
    tmax = isqrt(4 * n - 1)
    for t in range(1, tmax + 1):
        h = hurwitz_class_number(4 * n - t * t).value
        # G_{k-2}(-t, n) = G_{k-2}(t, n) for even k
        total += 2 * lucas_term(t, n, k) * h
    return -total / 2


def _trace_by_matrix_products(k: int, n: int, fac: dict) -> int:
    """Trace of T_n from exact integer matrices of T_p at the primes p | n.

    Uses T_{p^(j+1)} = T_p T_{p^j} - p^(k-1) T_{p^(j-1)} and multiplicativity
    across distinct primes; all arithmetic exact.
    """
    from .hecke import hecke_matrix
    from .qexp import dim_cusp_forms, miller_basis

    d = dim_cusp_forms(k)
    if d == 0:
        return 0
    worst = max(p * (d + 1) + 1 for p in fac)
    if worst > 50_000 or d > 40:
        raise ResourceGuardError(
            f"trace of T_{n} on weight {k} needs basis precision {worst} at "
            f"dimension {d}; reduce n or weight"
        )
    total = None  # product matrix over prime powers
    for p, e in fac.items():
        basis = miller_basis(k, p * (d + 1) + 1)
        tp = hecke_matrix(k, p, basis).entries
        scale = p ** (k - 1)
        prev = _identity(d)
        cur = tp
        for _ in range(e - 1):
            nxt = _mat_sub(_mat_mul(tp, cur), _mat_scale(prev, scale))
            prev, cur = cur, nxt
        if e == 0:
            cur = _identity(d)
        total = cur if total is None else _mat_mul(total, cur)
    return sum(total[i][i] for i in range(d))


def _identity(d):
    return [[1 if i == j else 0 for j in range(d)] for i in range(d)]


def _mat_mul(a, b):
    d = len(a)
    bt = list(zip(*b))
    return [[sum(map(lambda x, y: x * y, row, col)) for col in bt] for row in a]


def _mat_sub(a, b):
    return [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def _mat_scale(a, s):
    return [[x * s for x in row] for row in a]


def trace_unnormalized(k: int, n: int, method: str = "auto") -> TraceValue:
    """Sum over eigenforms of the unnormalized eigenvalue lambda_f(n) on S_k.

    Terms (all scaled by n^((k-1)/2) relative to the normalized statement):
      b1 = (k-1)/12 * n^(k/2-1)          if n is a perfect square, else 0
      b2 = -1/2 sum_{t^2<4n} G_{k-2}(t,n) H(4n-t^2)
      b3 = -sum_{d|n, d<=sqrt(n)} d^(k-1), the d = sqrt(n) term halved
      b4 = sigma_1(n)                    if k = 2, else 0

    method: "auto" picks the direct Hurwitz evaluation for n up to
    B2_DIRECT_LIMIT and exact matrix products beyond; "formula" and "matrix"
    force one route (used for dual-path testing).
    """
    if k < 2 or k % 2:
        raise ValueError(f"weight must be an even integer >= 2, got {k}")
    if n < 1:
        raise ValueError(f"operator index must be >= 1, got {n}")
    if method not in ("auto", "formula", "matrix"):
        raise ValueError(f"unknown method {method!r}")

    fac = factorize(n)
    root = isqrt(n)
    is_square = root * root == n

    b1 = Fraction(k - 1, 12) * root ** (k - 2) if is_square else Fraction(0)

    b3 = Fraction(0)
    for d in divisors_from_factorization(fac):
        if d * d < n:
            b3 -= d ** (k - 1)
        elif d * d == n:
            b3 -= Fraction(d ** (k - 1), 2)

    b4 = Fraction(sum(divisors_from_factorization(fac))) if k == 2 else Fraction(0)

    if method == "formula" or (method == "auto" and n <= B2_DIRECT_LIMIT):
        b2 = _b2_elliptic(k, n)
    else:
        matrix_trace = _trace_by_matrix_products(k, n, fac)
        b2 = Fraction(matrix_trace) - b1 - b3 - b4

    total = b1 + b2 + b3 + b4
    if total.denominator != 1:
        raise ArithmeticError(
            f"trace formula total not an integer for k={k}, n={n}: {total}"
        )
    return TraceValue(k, n, int(total), b1, b2, b3, b4)


def hecke_product_expansion(ms) -> dict:
    """Coefficients D(t) with prod_i a(p^(m_i)) = sum_t D(t) a(p^t).

    Obtained by iterating a(p^i) a(p^j) = sum_{l=0}^{min(i,j)} a(p^(i+j-2l));
    exact integers, support within {sum m, sum m - 2, ...} down to the parity
    floor.
    """
    ms = list(ms)
    if not ms:
        raise ValueError("hecke_product_expansion needs at least one exponent")
    if any(m < 1 for m in ms):
        raise ValueError("exponents must be >= 1")
    cur = {ms[0]: 1}
    for m in ms[1:]:
        nxt: dict = {}
        for t, c in cur.items():
            lo, hi = min(t, m), t + m
            for s in range(hi - 2 * lo, hi + 1, 2):
                nxt[s] = nxt.get(s, 0) + c
        cur = nxt
    return dict(sorted(cur.items()))


@dataclass(frozen=True)
class AveragedProduct:
    """Exact family average of a product of prime-power eigenvalues.

    value = trace / (dim * prod_i p_i^(m_i (k-1)/2)) evaluated as a
    high-precision real; trace and the normalization exponents are exact.
    """

    weight: int
    trace: int
    dim: int
    exponents: dict
    value: mpf


def averaged_product(k: int, factors) -> AveragedProduct:
    """(1/s_k) sum_f prod_i a_f(p_i^(m_i)) for distinct primes p_i.

    The eigenvalue product is multiplicative, so the average is the trace of
    T_n at n = prod p_i^(m_i), divided by s_k and the normalization.
    """
    from .qexp import dim_cusp_forms

    d = dim_cusp_forms(k)
    if d == 0:
        raise ValueError(f"weight {k} has no cusp forms")
    seen = set()
    n = 1
    exponents = {}
    for p, m in factors:
        if p in seen:
            raise ValueError(f"repeated prime {p}; merge exponents first")
        if not is_prime(p):
            raise ValueError(f"{p} is not prime")
        if m < 1:
            raise ValueError("exponents must be >= 1")
        seen.add(p)
        exponents[p] = m
        n *= p**m
    if n == 1:
        return AveragedProduct(k, d, d, {}, mpf(1))
    trace = trace_unnormalized(k, n).total
    old = mp.prec
    try:
        mp.prec = max(128, trace.bit_length() + 16)
        denom = mpf(d)
        for p, m in exponents.items():
            denom *= mpf(p) ** (m * (k - 1) / mpf(2))
        value = mpf(trace) / denom
    finally:
        mp.prec = old
    return AveragedProduct(k, trace, d, exponents, value)
