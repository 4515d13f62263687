"""Fluctuation statistics of eigenvalue counts in an interval.

For each eigenform f the count N_I(f, x) = #{p <= x : a_f(p) in I} is
compared with its Beurling-Selberg proxies

    S(M, f)(x) = sum_{m=1}^M U(m) sum_{p <= x} a_f(p^m),

whose family moments admit a second, fully exact evaluation through the
trace formula.  The normalized fluctuation is

    Z = (N - pi(x) mu(I)) / sqrt(pi(x) (mu(I) - mu(I)^2)),

with mu(I) always the closed-form semicircle mass.

Eigenvalues are clamped to [-2, 2] on ingestion (stored table values may
exceed by the Deligne tolerance 1e-6); counting and the Chebyshev recurrences
then see the same angle theta, which keeps the sandwich inequalities exact
real-number facts.
"""

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np
from mpmath import mp

from .hecke import EigenvalueTable, prime_power_eigenvalue
from .measures import RealInterval, gaussian_moment, semicircle_mass
from .primes import primes_upto
from .qexp import dim_cusp_forms
from .selberg import SelbergPair, map_interval, selberg_pair, symmetrized_coeff, u_coeffs
from .traceformula import ResourceGuardError, averaged_product, hecke_product_expansion

PER_FACTOR_BOUND = 10**18
TERM_BUDGET = 10**8


@dataclass(frozen=True)
class FormRecord:
    count: int
    s_plus: float
    s_minus: float
    z: float


@dataclass(frozen=True)
class FluctuationSample:
    weight: int
    x: float
    interval: RealInterval
    per_form: tuple

    @property
    def counts(self):
        return np.array([r.count for r in self.per_form])

    @property
    def z_values(self):
        return np.array([r.z for r in self.per_form])


@dataclass(frozen=True)
class StatsReport:
    moments: tuple
    variance: float
    gaussian_targets: tuple
    ks_gaussian: float
    metadata: dict


def _clamped(table: EigenvalueTable, form_index: int):
    return np.clip(table.values[form_index], -2.0, 2.0)


def _require_primes(table: EigenvalueTable, x: float):
    ps = primes_upto(x)
    if not ps:
        return []
    if not table.primes or table.primes[-1] < ps[-1]:
        largest = table.primes[-1] if table.primes else None
        raise ValueError(
            f"table holds primes up to {largest}, need all primes <= {x}"
        )
    return ps


def count_in_interval(
    table: EigenvalueTable, form_index: int, interval: RealInterval, x: float
) -> int:
    """N_I(f, x) = #{p <= x : a_f(p) in [a, b]}, closed at both endpoints."""
    ps = _require_primes(table, x)
    vals = _clamped(table, form_index)
    count = 0
    for p in ps:
        a = vals[table.primes.index(p)]
        if interval.a <= a <= interval.b:
            count += 1
    return count


def s_statistic(
    table: EigenvalueTable,
    form_index: int,
    pair: SelbergPair,
    sign: str,
    x: float,
) -> float:
    """S(M, f)(x), computed in its two equivalent forms and cross-checked.

    Shat-form:  sum_{m=1}^2 Shat(m) A_m + sum_{m=3}^M Shat(m) (A_m - A_{m-2})
    U-form:     sum_{m=1}^M U(m) A_m
    with A_m = sum_{p <= x} a_f(p^m); the Abel-summation identity makes them
    equal and both are evaluated (difference must stay below 1e-9).
    """
    ps = _require_primes(table, x)
    M = pair.M
    vals = _clamped(table, form_index)
    a_pm = np.zeros(M + 1)  # A_m for m = 0..M
    for p in ps:
        a = vals[table.primes.index(p)]
        x_prev, x_cur = 1.0, float(a)
        a_pm[0] += 1.0
        if M >= 1:
            a_pm[1] += x_cur
        for m in range(2, M + 1):
            x_prev, x_cur = x_cur, a * x_cur - x_prev
            a_pm[m] += x_cur
    u = u_coeffs(pair, sign)
    s_u = float(np.dot(u[1:], a_pm[1:]))
    sym = np.array([symmetrized_coeff(pair, sign, m) for m in range(M + 1)])
    s_direct = sym[1] * a_pm[1] + sym[2] * a_pm[2]
    for m in range(3, M + 1):
        s_direct += sym[m] * (a_pm[m] - a_pm[m - 2])
    if abs(s_u - s_direct) > 1e-9 * max(1.0, abs(s_u)):
        raise ArithmeticError(
            f"S-statistic forms disagree: {s_u} vs {s_direct}"
        )
    return s_u


def default_M(x: float) -> int:
    """M = floor(sqrt(pi(x)) log log x), clamped below at 3; requires x >= 16."""
    if x < 16:
        raise ValueError(f"default_M needs x >= 16 (log log x > 1), got {x}")
    pix = len(primes_upto(x))
    return max(3, int(math.floor(math.sqrt(pix) * math.log(math.log(x)))))


def fluctuation_sample(
    table: EigenvalueTable, interval: RealInterval, x: float, M: int
) -> FluctuationSample:
    """Per-form counts, S-proxies and normalized fluctuations Z."""
    mu = semicircle_mass(interval)
    pix = len(_require_primes(table, x))
    pair = selberg_pair(map_interval(interval.a, interval.b), M)
    var = pix * (mu - mu * mu)
    records = []
    for f in range(table.dim):
        n_f = count_in_interval(table, f, interval, x)
        sp = s_statistic(table, f, pair, "+", x)
        sm = s_statistic(table, f, pair, "-", x)
        z = (n_f - pix * mu) / math.sqrt(var) if var > 0 else 0.0
        records.append(FormRecord(n_f, sp, sm, z))
    return FluctuationSample(table.weight, x, interval, tuple(records))


def empirical_moments(samples, n_max: int):
    """moments[n] = mean(sample^n) for n = 0..n_max (moments[0] = 1)."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("empirical_moments needs a nonempty sample")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    return [float(np.mean(arr**n)) for n in range(n_max + 1)]


def ks_distance(samples, cdf) -> float:
    """sup-norm distance between the empirical CDF of sorted samples and cdf."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("ks_distance needs a nonempty sample")
    if np.any(np.diff(arr) < 0):
        raise ValueError("samples must be sorted ascending")
    n = arr.size
    worst = 0.0
    for i, t in enumerate(arr):
        c = cdf(t)
        worst = max(worst, abs((i + 1) / n - c), abs(i / n - c))
    return worst


@dataclass(frozen=True)
class VerticalReport:
    weight: int
    prime: int
    dim: int
    ks: float
    measure: str


def vertical_distribution(table: EigenvalueTable, p: int, measure: str = "plancherel") -> VerticalReport:
    """KS distance of {a_f(p) : f} against the mu_p (or mu_inf) CDF."""
    from .measures import plancherel_mass, semicircle_mass as _sc_mass

    if table.dim == 0:
        raise ValueError("vertical distribution needs at least one form")
    col = np.sort(np.clip(table.column(p), -2.0, 2.0))
    if measure == "plancherel":
        cdf = lambda t: plancherel_mass(p, RealInterval(-2.0, float(t)))
    elif measure == "semicircle":
        cdf = lambda t: _sc_mass(RealInterval(-2.0, float(t)))
    else:
        raise ValueError(f"unknown measure {measure!r}")
    return VerticalReport(table.weight, p, table.dim, ks_distance(col, cdf), measure)


@dataclass(frozen=True)
class VarianceReport:
    empirical: float
    predicted: float


def variance_report(
    table: EigenvalueTable, interval: RealInterval, x: float
) -> VarianceReport:
    """Empirical variance of N_I(f, x) against pi(x) (mu - mu^2)."""
    if table.dim < 2:
        raise ValueError("variance needs at least two forms")
    counts = np.array(
        [count_in_interval(table, f, interval, x) for f in range(table.dim)],
        dtype=np.float64,
    )
    mu = semicircle_mass(interval)
    pix = len(_require_primes(table, x))
    emp = float(np.mean((counts - counts.mean()) ** 2))
    return VarianceReport(emp, pix * (mu - mu * mu))


def mean_square_proxy_gap(
    table: EigenvalueTable, interval: RealInterval, x: float, M: int, sign: str
) -> float:
    """<|N - pi(x) mu - S|^2> / (pi(x)(mu - mu^2)) for the given branch."""
    sample = fluctuation_sample(table, interval, x, M)
    mu = semicircle_mass(interval)
    pix = len(primes_upto(x))
    var = pix * (mu - mu * mu)
    if var == 0:
        return 0.0
    gaps = []
    for rec in sample.per_form:
        s = rec.s_plus if sign == "+" else rec.s_minus
        gaps.append((rec.count - pix * mu - s) ** 2)
    return float(np.mean(gaps)) / var


# ---------------------------------------------------------------------------
# exact moments of the S-statistic through the trace formula
# ---------------------------------------------------------------------------


def _compositions(n, u):
    """Ordered tuples of u positive integers summing to n."""
    if u == 1:
        yield (n,)
        return
    for first in range(1, n - u + 2):
        for rest in _compositions(n - first, u - 1):
            yield (first,) + rest


def _y_power_expansion(u_vals, r, M):
    """Coefficient map t -> sum over m-tuples of U(m_1)...U(m_r) D(t).

    Expands Y(p)^r = (sum_m U(m) a(p^m))^r into sum_t coeff[t] a(p^t);
    independent of the prime p.
    """
    out: dict = {}
    idx = [1] * r
    while True:
        w = 1.0
        for m in idx:
            w *= u_vals[m]
        if w != 0.0:
            for t, c in hecke_product_expansion(idx).items():
                out[t] = out.get(t, 0.0) + w * c
        j = r - 1
        while j >= 0 and idx[j] == M:
            idx[j] = 1
            j -= 1
        if j < 0:
            break
        idx[j] += 1
    return out


def theoretical_s_moment(
    k: int, interval: RealInterval, M: int, x: float, n: int, sign: str
) -> mp.mpf:
    """<(S(M, f)(x))^n> evaluated exactly through the trace formula.

    The multinomial expansion runs over partitions of n into u positive parts
    and ordered u-tuples of distinct primes <= x; each factor Y(p_i)^(r_i)
    expands into prime-power eigenvalues by iterated Hecke multiplicativity,
    and every family average <a_f(prod p_i^(t_i))> is an exact trace-formula
    value.  Only the Beurling-Selberg coefficients enter as floats, and they
    are shared bit-for-bit with the empirical path.
    """
    if n < 0:
        raise ValueError("moment order must be >= 0")
    if n == 0:
        return mp.mpf(1)
    d = dim_cusp_forms(k)
    if d == 0:
        raise ValueError(f"weight {k} has no cusp forms")
    ps = primes_upto(x)
    if not ps:
        raise ValueError(f"no primes up to {x}")
    pair = selberg_pair(map_interval(interval.a, interval.b), M)
    u_vals = u_coeffs(pair, sign)

    expansions = {r: _y_power_expansion(u_vals, r, M) for r in range(1, n + 1)}
    for r, exp_map in expansions.items():
        for t in exp_map:
            if max(ps) ** t > PER_FACTOR_BOUND:
                raise ResourceGuardError(
                    f"prime power {max(ps)}^{t} exceeds the configured bound"
                )

    budget = 0
    with mp.workprec(192):
        total = mp.mpf(0)
        fact = math.factorial
        for u in range(1, n + 1):
            if u > len(ps):
                continue
            for comp in _compositions(n, u):
                multinom = fact(n)
                for r in comp:
                    multinom //= fact(r)
                weight = mp.mpf(multinom) / fact(u)
                for ptuple in permutations(ps, u):
                    term = _prime_tuple_sum(k, ptuple, comp, expansions)
                    total += weight * term
                    budget += 1
                    if budget > TERM_BUDGET:
                        raise ResourceGuardError("combinatorial term budget exceeded")
        return total


def _prime_tuple_sum(k, ptuple, comp, expansions):
    """sum over (t_1..t_u) of prod coeff_i(t_i) * <a_f(prod p_i^t_i)>."""
    u = len(ptuple)
    maps = [expansions[r] for r in comp]
    total = mp.mpf(0)

    def rec(i, factors, coeff):
        nonlocal total
        if coeff == 0.0:
            return
        if i == u:
            avg = averaged_product(k, factors)
            total += mp.mpf(coeff) * avg.value
            return
        for t, c in maps[i].items():
            if t == 0:
                rec(i + 1, factors, coeff * c)
            else:
                rec(i + 1, factors + [(ptuple[i], t)], coeff * c)

    rec(0, [], 1.0)
    return total


def clt_report(
    table: EigenvalueTable, interval: RealInterval, x: float, M: int, n_max: int = 4
) -> StatsReport:
    """Moments of the normalized fluctuation Z against the Gaussian targets."""
    sample = fluctuation_sample(table, interval, x, M)
    z = sample.z_values
    mu = semicircle_mass(interval)
    degenerate = mu * (1 - mu) == 0.0
    moments = empirical_moments(z, n_max) if z.size else []
    targets = tuple(gaussian_moment(i) for i in range(n_max + 1))
    var = float(np.mean((z - z.mean()) ** 2)) if z.size else 0.0
    phi = lambda t: 0.5 * (1 + math.erf(t / math.sqrt(2)))
    ks = ks_distance(np.sort(z), phi) if z.size else 1.0
    meta = {
        "weight": table.weight,
        "x": x,
        "M": M,
        "interval": (interval.a, interval.b),
        "dim": table.dim,
        "degenerate_interval": degenerate,
    }
    return StatsReport(tuple(moments), var, targets, ks, meta)
