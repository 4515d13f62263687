"""Hecke operators on the Miller basis and consistently-indexed eigenvalue tables.

The operator T_n acts on q-expansions by
    (T_n f)[m] = sum_{e | gcd(m, n)} e^(k-1) f[m n / e^2],
an exact integer operation on the integral echelon basis.  Eigenvalue tables
are produced by diagonalizing a separating operator (T_2, falling back to
T_2 + c T_3) in extended precision and hold the normalized values
a_f(p) = lambda_f(p) / p^((k-1)/2), which Deligne's bound confines to [-2, 2].

Two routes recover lambda_f(p) from an eigenvector v:
  * for p <= dim (the heavy regime) the echelon coordinates of v *are* the
    eigenform coefficients, so lambda_f(p) is read off directly;
  * otherwise T_p is built explicitly and lambda_f(p) is the Rayleigh
    quotient, with the residual ||T_p v - lambda v|| / ||v|| recorded.
Every table is cross-checked against the exact Eichler-Selberg trace.
"""

from dataclasses import dataclass, field
from math import gcd

import numpy as np
from mpmath import mp

from ._refine import EigenRefinementError, balance_bits, refine_eigensystem
from .primes import primes_upto
from .qexp import CuspBasis, PrecisionError, dim_cusp_forms, miller_basis

DELIGNE_TOL = 1e-6
RESIDUAL_TOL = 1e-6
TRACE_GAP_TOL = 0.01


class DegeneracyError(RuntimeError):
    """No separating operator T_2 + c T_3 with c <= 16 was found."""


@dataclass(frozen=True)
class HeckeMatrix:
    """Integer matrix of T_n on the Miller basis; entry [j][i] is the
    g_j-coordinate of T_n g_i."""

    weight: int
    n: int
    entries: tuple

    @property
    def dim(self):
        return len(self.entries)

    def trace(self) -> int:
        return sum(self.entries[i][i] for i in range(self.dim))


def _divisors(n):
    out = [d for d in range(1, n + 1) if n % d == 0]
    return out


def hecke_action(coeffs, k: int, n: int, out_len: int) -> list:
    """Coefficients 0..out_len of T_n f for a cusp form f given by coeffs."""
    kk = k - 1
    out = [0] * (out_len + 1)
    for m in range(1, out_len + 1):
        acc = 0
        for e in _divisors(gcd(m, n)):
            acc += e**kk * coeffs[m * n // (e * e)]
        out[m] = acc
    return out


def hecke_matrix(k: int, n: int, basis: CuspBasis) -> HeckeMatrix:
    """Matrix of T_n on the echelon basis, exact integers.

    Requires basis precision >= n*(dim+1) + 1 so that the action and the
    coordinate read-off are both available.
    """
    if basis.weight != k:
        raise ValueError(f"basis has weight {basis.weight}, expected {k}")
    if n < 1:
        raise ValueError("operator index must be >= 1")
    d = len(basis)
    required = n * (d + 1) + 1
    if d and basis.prec < required:
        raise PrecisionError(
            f"hecke_matrix(k={k}, n={n}) needs basis precision >= {required}, "
            f"got {basis.prec}"
        )
    cols = []
    for i in range(d):
        acted = hecke_action(basis.forms[i].coeffs, k, n, d)
        cols.append(acted[1 : d + 1])
    entries = tuple(tuple(cols[i][j] for i in range(d)) for j in range(d))
    return HeckeMatrix(k, n, entries)


def prime_power_eigenvalue(a_p, m: int):
    """a_f(p^m) from a_f(p) by the Chebyshev recurrence X_0 = 1, X_1 = x,
    X_m = x X_{m-1} - X_{m-2}.  Works on floats, mpf and Fractions alike."""
    if m < 0:
        raise ValueError("exponent must be >= 0")
    if m == 0:
        return 1
    x_prev, x = 1, a_p
    for _ in range(m - 1):
        x_prev, x = x, a_p * x - x_prev
    return x


def cosine_transform(a_p, m: int):
    """2 cos(m theta) where a_p = 2 cos(theta), via the Chebyshev recurrence.

    Equals a_p for |m| = 1 and a_f(p^|m|) - a_f(p^(|m|-2)) for |m| >= 2.
    """
    if m == 0:
        raise ValueError("m must be nonzero")
    m = abs(m)
    if m == 1:
        return a_p
    return prime_power_eigenvalue(a_p, m) - prime_power_eigenvalue(a_p, m - 2)


@dataclass
class EigenvalueTable:
    """Normalized eigenvalues a_f(p), rows = eigenforms, columns = primes.

    Rows are ordered by (a_f(2), a_f(3)) ascending and are coherent across
    primes: row f always refers to the same simultaneous eigenform.  values
    are float64; values_hp keeps the extended-precision originals for
    exact-regime cross-checks.  residuals hold the certified eigen-equation
    residuals (dimensionless, on the normalized operator).
    """

    weight: int
    primes: list
    values: np.ndarray
    residuals: np.ndarray
    values_hp: list = field(repr=False, default_factory=list)

    @property
    def dim(self):
        return self.values.shape[0]

    def column(self, p):
        return self.values[:, self.primes.index(p)]


def _empty_table(k, primes):
    z = np.zeros((0, len(primes)))
    return EigenvalueTable(k, list(primes), z, z.copy(), [])


def _mp_inv_scale(p: int, k: int):
    """p^(-(k-1)/2) at the current working precision."""
    return mp.power(mp.mpf(p), -mp.mpf(k - 1) / 2)


def _validate_table(k, primes, rows_hp):
    """Deligne bound and exact-trace consistency checks; raises on failure."""
    from .traceformula import trace_unnormalized

    d = len(rows_hp)
    for f in range(d):
        for a in rows_hp[f]:
            if abs(a) > 2 + DELIGNE_TOL:
                raise ArithmeticError(
                    f"Deligne bound violated at weight {k}: |a| = {float(abs(a))}"
                )
    for idx, p in enumerate(primes):
        tr = trace_unnormalized(k, p).total
        inv_scale = _mp_inv_scale(p, k)
        total = mp.fsum(rows_hp[f][idx] for f in range(d))
        gap = abs(total - tr * inv_scale)
        if gap >= TRACE_GAP_TOL:
            raise ArithmeticError(
                f"trace consistency failed at weight {k}, p={p}: gap {float(gap)}"
            )
        # when the unnormalized sum is representable, it must round to the
        # exact integer trace
        bits_needed = int((k - 1) / 2 * mp.log(p, 2)) + d.bit_length() + 8
        if bits_needed < mp.prec - 8 and d > 0:
            unnorm = mp.fsum(rows_hp[f][idx] for f in range(d)) / inv_scale
            if int(mp.nint(unnorm)) != tr:
                raise ArithmeticError(
                    f"rounded trace mismatch at weight {k}, p={p}"
                )


def _solve_small(k, pmax, prec, combo_c=0):
    """Spec-literal route for pmax > dim: explicit T_p and Rayleigh quotients.

    All matrices are conjugated by the exact radix-2 balancing of T_2 before
    any floating-point work; eigenvalues and Rayleigh quotients are invariant
    under that similarity.
    """
    d = dim_cusp_forms(k)
    primes = primes_upto(pmax)
    basis_n = max(pmax, 3 if combo_c else 2)
    basis = miller_basis(k, basis_n * (d + 1) + 1)
    mats = {p: hecke_matrix(k, p, basis) for p in primes}
    if combo_c and 3 not in mats:
        mats[3] = hecke_matrix(k, 3, basis)
    t2 = mats[2]
    shifts = balance_bits([list(r) for r in t2.entries])

    with mp.workprec(prec + 64):

        def balanced(tp, inv_scale):
            return [
                [
                    mp.ldexp(mp.mpf(tp.entries[i][j]), shifts[j] - shifts[i]) * inv_scale
                    for j in range(d)
                ]
                for i in range(d)
            ]

        inv2 = _mp_inv_scale(2, k)
        bal = {p: balanced(mats[p], _mp_inv_scale(p, k)) for p in primes}
        rows_a = bal[2]
        if combo_c:
            b3 = bal.get(3) or balanced(mats[3], _mp_inv_scale(3, k))
            rows_a = [
                [rows_a[i][j] + combo_c * b3[i][j] for j in range(d)] for i in range(d)
            ]
        A = mp.matrix(rows_a)
        E, ER = mp.eig(A)
        vecs = []
        seps = []
        for j in range(d):
            if abs(mp.im(E[j])) > mp.mpf(2) ** (-prec // 2):
                raise EigenRefinementError(
                    f"complex eigenvalue from separating operator at weight {k}"
                )
            seps.append(mp.re(E[j]))
            v = [mp.re(ER[i, j]) for i in range(d)]
            vecs.append(v)
        if _has_duplicates(seps):
            raise DegeneracyError(
                f"separating operator (c={combo_c}) has non-distinct eigenvalues "
                f"at weight {k}"
            )
        rows = []
        for j in range(d):
            v = vecs[j]
            vnorm2 = mp.fsum(x * x for x in v)
            arow, rrow = [], []
            for p in primes:
                tp = bal[p]
                w = [mp.fsum(tp[i][t] * v[t] for t in range(d)) for i in range(d)]
                a = mp.fsum(w[i] * v[i] for i in range(d)) / vnorm2
                res = mp.sqrt(
                    mp.fsum((w[i] - a * v[i]) ** 2 for i in range(d)) / vnorm2
                )
                arow.append(a)
                rrow.append(res)
            rows.append((arow, rrow))
        rows.sort(key=lambda r: (r[0][0], r[0][1] if len(primes) > 1 else 0))
        rows_hp = [r[0] for r in rows]
        resid = [r[1] for r in rows]
        return primes, rows_hp, resid


def _has_duplicates(vals, tol=1e-9):
    s = sorted(vals)
    return any(abs(float(s[i + 1] - s[i])) < tol for i in range(len(s) - 1))


def _matrix_mantissas(entries, half_shift, keep):
    """(mantissa, exponent) pairs of T * 2^-half_shift, mantissas cut to keep bits."""
    d = len(entries)
    mant = [[0] * d for _ in range(d)]
    exps = [[0] * d for _ in range(d)]
    for i in range(d):
        for j in range(d):
            x = entries[i][j]
            if not x:
                continue
            b = x.bit_length()
            e = 0
            if b > keep:
                x = x >> (b - keep) if x > 0 else -((-x) >> (b - keep))
                e = b - keep
            mant[i][j] = x
            exps[i][j] = e - half_shift
    return mant, exps


def _solve_big(k, pmax, prec, combo_c=0):
    """Coordinate route for pmax <= dim: one separating operator, eigenform
    coefficients read off the echelon coordinates of each eigenvector.

    Exact certificates guard the numerics: the integer traces of T_2 (and
    T_2^2) must match the trace formula / the computed spectrum, and each
    eigenvector must satisfy Hecke multiplicativity across its coordinates.
    """
    from .traceformula import trace_unnormalized

    d = dim_cusp_forms(k)
    primes = primes_upto(pmax)
    basis_n = 3 if combo_c else 2
    basis = miller_basis(k, basis_n * (d + 1) + 1)
    t2 = hecke_matrix(k, 2, basis)
    # free exact oracle: the integer trace must match the trace formula
    if t2.trace() != trace_unnormalized(k, 2).total:
        raise ArithmeticError(f"exact T_2 trace mismatch at weight {k}")
    # exact second moment of the spectrum: Tr(T_2^2) costs only d^2 products
    tr2_sq = sum(
        t2.entries[i][j] * t2.entries[j][i] for i in range(d) for j in range(d)
    )

    keep = prec + 80
    with mp.workprec(prec + 96):
        if not combo_c:
            mant, exps = _matrix_mantissas(t2.entries, (k - 2) // 2, keep)
            lam, V, res, _, shifts = refine_eigensystem(mant, exps, prec=prec)
            # separating eigenvalues are a_f(2) * sqrt(2)
            sep = [x / mp.sqrt(2) for x in lam]
        else:
            t3 = hecke_matrix(k, 3, basis)
            if t3.trace() != trace_unnormalized(k, 3).total:
                raise ArithmeticError(f"exact T_3 trace mismatch at weight {k}")
            inv2 = _mp_inv_scale(2, k)
            inv3 = _mp_inv_scale(3, k)
            mant = [[0] * d for _ in range(d)]
            exps = [[0] * d for _ in range(d)]
            for i in range(d):
                for j in range(d):
                    x = t2.entries[i][j] * inv2 + combo_c * t3.entries[i][j] * inv3
                    if x == 0:
                        continue
                    m_, e_ = mp.frexp(x)
                    mant[i][j] = int(mp.ldexp(m_, keep))
                    exps[i][j] = int(e_) - keep
            lam, V, res, _, shifts = refine_eigensystem(mant, exps, prec=prec)
            sep = lam
        if _has_duplicates(sep):
            raise DegeneracyError(
                f"separating operator (c={combo_c}) has non-distinct eigenvalues "
                f"at weight {k}"
            )
        a2_list = [x / mp.sqrt(2) for x in lam] if not combo_c else None
        if not combo_c:
            # spectrum certificate: sum a_f(2)^2 against the exact Tr(T_2^2)
            gap = abs(
                mp.fsum(a * a for a in a2_list)
                - mp.ldexp(mp.mpf(tr2_sq), -(k - 1))
            )
            if gap >= TRACE_GAP_TOL:
                raise EigenRefinementError(
                    f"second spectral moment off by {float(gap)} at weight {k}"
                )
        inv_scales = {p: _mp_inv_scale(p, k) for p in primes}
        rows = []
        for f in range(d):
            vb = V.column_mpf(f)
            # undo the balancing: true coordinate m is vb[m] * 2^shifts[m]
            lead = mp.ldexp(vb[0], shifts[0])
            coord = lambda m: mp.ldexp(vb[m - 1], shifts[m - 1]) / lead
            arow = [coord(p) * inv_scales[p] for p in primes]
            # per-form multiplicativity certificate: the coordinate at q^4
            # must equal X_2 of the coordinate at q^2 (normalized)
            if d >= 4:
                a2c = coord(2) * inv_scales[2]
                a4c = coord(4) * mp.power(mp.mpf(4), -mp.mpf(k - 1) / 2)
                mult_gap = abs(a4c - (a2c * a2c - 1))
                if mult_gap > 1e-3:
                    raise EigenRefinementError(
                        f"eigenvector fails Hecke multiplicativity by "
                        f"{float(mult_gap)} at weight {k}"
                    )
            rows.append((arow, [res[f]] * len(primes)))
        rows.sort(key=lambda r: (r[0][0], r[0][1] if len(primes) > 1 else 0))
        rows_hp = [r[0] for r in rows]
        resid = [r[1] for r in rows]
        return primes, rows_hp, resid


_eigen_cache: dict = {}


def clear_cache():
    _eigen_cache.clear()


def eigen_system(k: int, pmax: int, prec: int = 128, use_cache: bool = True) -> EigenvalueTable:
    """Eigenvalue table for weight k and all primes p <= pmax.

    Diagonalizes T_2 at 128-bit working precision (256-bit on residual
    escalation), then recovers per-prime eigenvalues by echelon-coordinate
    read-off (pmax <= dim) or by Rayleigh quotients against explicit T_p
    matrices (pmax > dim).  Falls back to T_2 + c T_3, c <= 16, if T_2 fails
    to separate; raises DegeneracyError if no combination separates.
    """
    if k % 2 or k < 0:
        raise ValueError(f"weight must be a nonnegative even integer, got {k}")
    if pmax < 2:
        raise ValueError("pmax must be >= 2")
    d = dim_cusp_forms(k)
    primes = primes_upto(pmax)
    if d == 0:
        return _empty_table(k, primes)

    if use_cache:
        hit = _eigen_cache.get(k)
        if hit is not None and hit.primes[-1] >= primes[-1]:
            cols = [hit.primes.index(p) for p in primes]
            return EigenvalueTable(
                k,
                primes,
                hit.values[:, cols].copy(),
                hit.residuals[:, cols].copy(),
                [[row[c] for c in cols] for row in hit.values_hp],
            )

    table = _eigen_system_uncached(k, pmax, prec)
    if use_cache:
        _eigen_cache[k] = table
    return table


def _eigen_system_uncached(k, pmax, prec, _force_combo=None):
    d = dim_cusp_forms(k)
    solver = _solve_big if pmax <= d else _solve_small

    def attempt(combo_c):
        """One separating operator, with precision escalation on residuals."""
        last = None
        for p in (prec, 2 * prec):
            try:
                primes, rows_hp, resid = solver(k, pmax, p, combo_c=combo_c)
            except EigenRefinementError as err:
                last = err
                continue
            worst = max((float(r) for row in resid for r in row), default=0.0)
            if worst > RESIDUAL_TOL:
                last = EigenRefinementError(
                    f"residual {worst:.3e} above {RESIDUAL_TOL} at weight {k}"
                )
                continue
            return primes, rows_hp, resid
        raise ArithmeticError(
            f"eigen residuals still above {RESIDUAL_TOL} after escalation to "
            f"{2 * prec}-bit at weight {k}"
        ) from last

    combo_list = [_force_combo] if _force_combo is not None else [0] + list(range(1, 17))
    deg_err = None
    result = None
    for combo_c in combo_list:
        try:
            result = attempt(combo_c)
            break
        except DegeneracyError as err:
            deg_err = err
    if result is None:
        raise DegeneracyError(
            f"no separating operator T_2 + c*T_3 with c <= 16 at weight {k}"
        ) from deg_err
    primes, rows_hp, resid = result

    with mp.workprec(prec + 96):
        _validate_table(k, primes, rows_hp)
    values = np.array([[float(a) for a in row] for row in rows_hp], dtype=np.float64)
    residuals = np.array([[float(r) for r in row] for row in resid], dtype=np.float64)
    if values.size == 0:
        values = values.reshape(0, len(primes))
        residuals = residuals.reshape(0, len(primes))
    return EigenvalueTable(k, primes, values, residuals, rows_hp)
