"""Exact q-expansion arithmetic and the echelonized basis of level-1 cusp forms.

A truncated series f = sum_{n < prec} c_n q^n is stored with exact integer
coefficients.  Arithmetic never extends precision: the product of two series
known modulo q^a and q^b is known modulo q^min(a,b) and is truncated there.

The cusp-form basis for SL2(Z) in weight k is built from monomials
Delta^j * E4^a * E6^b (4a + 6b = k - 12j, minimal b) and then row-reduced to
the integral echelon (Victor Miller) form: form i equals q^(i+1) + O(q^(d+1)).
"""

from math import isqrt

from gmpy2 import mpz

# Direct convolution below this many coefficient products; Kronecker
# substitution (pack into one big integer, single GMP multiply) above.
_KRON_CUTOFF = 4096


def _series_mul_direct(a, b, prec):
    out = [0] * prec
    for i, ai in enumerate(a):
        if i >= prec:
            break
        if not ai:
            continue
        top = min(len(b), prec - i)
        for j in range(top):
            bj = b[j]
            if bj:
                out[i + j] += ai * bj
    return out


def _pack_nonneg(vals, stride_bytes):
    buf = bytearray(len(vals) * stride_bytes)
    for i, v in enumerate(vals):
        if v:
            off = i * stride_bytes
            chunk = int(v).to_bytes((v.bit_length() + 7) // 8, "little")
            buf[off : off + len(chunk)] = chunk
    return int.from_bytes(buf, "little")


def _series_mul_kronecker(a, b, prec):
    """Truncated integer series product via signed Kronecker substitution.

    Each series is packed as sum_i c_i * 2^(S*i) (positive and negative parts
    packed separately), the two big integers are multiplied once by GMP, and
    the balanced digits of the product are read back with a borrow loop.
    """
    amax = max((abs(x) for x in a), default=0)
    bmax = max((abs(x) for x in b), default=0)
    if amax == 0 or bmax == 0:
        return [0] * prec
    overlap = min(len(a), len(b))
    bits = amax.bit_length() + bmax.bit_length() + overlap.bit_length() + 2
    stride_bytes = (bits + 7) // 8 + 1
    S = 8 * stride_bytes

    za = _pack_nonneg([x if x > 0 else 0 for x in a], stride_bytes) - _pack_nonneg(
        [-x if x < 0 else 0 for x in a], stride_bytes
    )
    zb = _pack_nonneg([x if x > 0 else 0 for x in b], stride_bytes) - _pack_nonneg(
        [-x if x < 0 else 0 for x in b], stride_bytes
    )
    zp = mpz(za) * mpz(zb)

    neg = zp < 0
    if neg:
        zp = -zp
    nbytes = prec * stride_bytes
    raw = int(zp & ((1 << (8 * nbytes)) - 1)).to_bytes(nbytes, "little")

    half = 1 << (S - 1)
    full = 1 << S
    out = [0] * prec
    carry = 0
    for i in range(prec):
        d = int.from_bytes(raw[i * stride_bytes : (i + 1) * stride_bytes], "little") + carry
        if d >= half:
            d -= full
            carry = 1
        else:
            carry = 0
        out[i] = -d if neg else d
    return out


def series_mul(a, b, prec):
    """coefficients of (a*b) mod q^prec, exact integers."""
    if prec <= 0:
        return []
    a = a[:prec]
    b = b[:prec]
    if len(a) * len(b) < _KRON_CUTOFF:
        return _series_mul_direct(a, b, prec)
    return _series_mul_kronecker(a, b, prec)


def series_invert(a, prec):
    """Inverse of a series with a[0] = 1, to prec coefficients (Newton lifting)."""
    if not a or a[0] != 1:
        raise ValueError("series_invert requires constant term 1")
    g = [1]
    known = 1
    while known < prec:
        known = min(2 * known, prec)
        ag = series_mul(a[:known], g, known)
        # g <- g*(2 - a*g)
        corr = [-c for c in ag]
        corr[0] += 2
        g = series_mul(g, corr, known)
    return g[:prec]


class QExpansion:
    """Truncated power series with exact integer coefficients.

    weight is the modular weight (0 for generic series); prec is the number of
    known coefficients, i.e. the series is known modulo q^prec.
    """

    __slots__ = ("weight", "coeffs", "prec")

    def __init__(self, weight, coeffs, prec=None):
        coeffs = list(coeffs)
        if prec is None:
            prec = len(coeffs)
        if len(coeffs) != prec:
            raise ValueError("coeffs length must equal prec")
        self.weight = weight
        self.coeffs = coeffs
        self.prec = prec

    def __repr__(self):
        head = ", ".join(str(c) for c in self.coeffs[:6])
        tail = ", ..." if self.prec > 6 else ""
        return f"QExpansion(weight={self.weight}, prec={self.prec}, [{head}{tail}])"

    def __eq__(self, other):
        return (
            isinstance(other, QExpansion)
            and self.weight == other.weight
            and self.prec == other.prec
            and self.coeffs == other.coeffs
        )

    def __getitem__(self, n):
        if not 0 <= n < self.prec:
            raise IndexError(f"coefficient {n} outside known precision {self.prec}")
        return self.coeffs[n]

    def truncate(self, prec):
        if prec > self.prec:
            raise ValueError(f"cannot extend precision {self.prec} to {prec}")
        return QExpansion(self.weight, self.coeffs[:prec], prec)

    def _combine_weight(self, other, add):
        if add:
            if self.weight != other.weight:
                raise ValueError("cannot add series of different weights")
            return self.weight
        return self.weight + other.weight

    def __add__(self, other):
        prec = min(self.prec, other.prec)
        w = self._combine_weight(other, add=True)
        return QExpansion(w, [self.coeffs[i] + other.coeffs[i] for i in range(prec)], prec)

    def __sub__(self, other):
        prec = min(self.prec, other.prec)
        w = self._combine_weight(other, add=True)
        return QExpansion(w, [self.coeffs[i] - other.coeffs[i] for i in range(prec)], prec)

    def __mul__(self, other):
        if isinstance(other, int):
            return QExpansion(self.weight, [c * other for c in self.coeffs], self.prec)
        prec = min(self.prec, other.prec)
        w = self._combine_weight(other, add=False)
        return QExpansion(w, series_mul(self.coeffs, other.coeffs, prec), prec)

    __rmul__ = __mul__

    def __pow__(self, e):
        if not isinstance(e, int) or e < 0:
            raise ValueError("only nonnegative integer powers")
        result = QExpansion(0, [1] + [0] * (self.prec - 1), self.prec)
        base = self
        w = self.weight * e
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return QExpansion(w, result.coeffs, result.prec)

    def exact_divide(self, divisor: int):
        """Divide every coefficient by an integer; raises if not exact."""
        out = []
        for c in self.coeffs:
            q, r = divmod(c, divisor)
            if r:
                raise ValueError(f"coefficient {c} not divisible by {divisor}")
            out.append(q)
        return QExpansion(self.weight, out, self.prec)


def _divisor_power_sums(power: int, prec: int) -> list:
    """sigma_power(n) for 0 <= n < prec (index 0 unused, set to 0)."""
    sig = [0] * prec
    for d in range(1, prec):
        dp = d**power
        for m in range(d, prec, d):
            sig[m] += dp
    return sig


def eisenstein_series(weight: int, prec: int) -> QExpansion:
    """Normalized E4 or E6 to prec coefficients.

    E4 = 1 + 240 sum sigma_3(n) q^n,  E6 = 1 - 504 sum sigma_5(n) q^n.
    """
    if weight not in (4, 6):
        raise ValueError(f"eisenstein_series supports weight 4 or 6, got {weight}")
    if prec < 1:
        raise ValueError("prec must be >= 1")
    if weight == 4:
        mult, power = 240, 3
    else:
        mult, power = -504, 5
    sig = _divisor_power_sums(power, prec)
    coeffs = [mult * s for s in sig]
    coeffs[0] = 1
    return QExpansion(weight, coeffs, prec)


def delta(prec: int) -> QExpansion:
    """The discriminant cusp form Delta = (E4^3 - E6^2)/1728, exact division."""
    if prec < 1:
        raise ValueError("prec must be >= 1")
    e4 = eisenstein_series(4, prec)
    e6 = eisenstein_series(6, prec)
    num = e4**3 - e6**2
    return QExpansion(12, num.exact_divide(1728).coeffs, prec)


def delta_product_expansion(prec: int) -> QExpansion:
    """Delta via q * prod_{n>=1} (1 - q^n)^24.  Independent oracle for delta()."""
    if prec < 1:
        raise ValueError("prec must be >= 1")
    length = prec - 1  # coefficients of prod (1-q^n)^24
    prod = [1] + [0] * max(length - 1, 0)
    for n in range(1, length):
        for _ in range(24):
            # multiply by (1 - q^n): c[m] -= c[m-n], from the top down
            for m in range(length - 1, n - 1, -1):
                prod[m] -= prod[m - n]
    return QExpansion(12, [0] + prod[:length], prec)


def dim_cusp_forms(k: int) -> int:
    """dim S_k(SL2(Z)) by the classical formula; k must be even and >= 0."""
    if k % 2 != 0 or k < 0:
        raise ValueError(f"weight must be a nonnegative even integer, got {k}")
    if k < 12:
        return 0
    if k % 12 == 2:
        return k // 12 - 1
    return k // 12


class CuspBasis:
    """Echelonized integral basis of S_k: forms[i] = q^(i+1) + O(q^(d+1))."""

    __slots__ = ("weight", "prec", "forms")

    def __init__(self, weight, prec, forms):
        self.weight = weight
        self.prec = prec
        self.forms = list(forms)

    def __len__(self):
        return len(self.forms)

    def __repr__(self):
        return f"CuspBasis(weight={self.weight}, dim={len(self.forms)}, prec={self.prec})"


class PrecisionError(ValueError):
    """Requested operation needs more series coefficients than are available."""


def _monomial_exponents(k: int, j: int):
    """(a, b) with 4a + 6b = k - 12j and minimal b (b in {0, 1})."""
    w = k - 12 * j
    if w < 0:
        raise ValueError("internal: negative Eisenstein weight")
    b = 0 if w % 4 == 0 else 1
    a = (w - 6 * b) // 4
    return a, b


def miller_basis(k: int, prec: int) -> CuspBasis:
    """Victor Miller basis of S_k to prec coefficients.

    Deterministic construction: the triangular monomials Delta^j E4^a E6^b
    (j = 1..d, minimal b) are produced by one descending chain
    b_{j+1} = b_j * (Delta / E4^3), then reduced to echelon form by exact
    integer row operations.
    """
    d = dim_cusp_forms(k)
    if d == 0:
        return CuspBasis(k, prec, [])
    if prec < d + 1:
        raise PrecisionError(
            f"miller_basis(k={k}) needs prec >= dim + 1 = {d + 1}, got {prec}"
        )
    e4 = eisenstein_series(4, prec)
    dl = delta(prec)
    a1, b1 = _monomial_exponents(k, 1)
    form = dl * (e4**a1)
    if b1:
        form = form * eisenstein_series(6, prec)
    rows = [form.coeffs]
    if d > 1:
        # V = Delta / E4^3: integral series (E4 has constant term 1)
        e4inv3 = series_invert((e4**3).coeffs, prec)
        v = series_mul(dl.coeffs, e4inv3, prec)
        for _ in range(d - 1):
            rows.append(series_mul(rows[-1], v, prec))
    # exact echelon reduction: clear entries above each pivot q^(j+1)
    for j in range(1, d):
        piv = rows[j]
        assert piv[j + 1] == 1
        for jp in range(j):
            m = rows[jp][j + 1]
            if m:
                row = rows[jp]
                row[j + 1 :] = list(map(lambda x, y: x - m * y, row[j + 1 :], piv[j + 1 :]))
    forms = [QExpansion(k, row, prec) for row in rows]
    return CuspBasis(k, prec, forms)
