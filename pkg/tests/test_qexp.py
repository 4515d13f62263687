"""Tests for exact q-expansion arithmetic and the Miller basis."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heckestats.qexp import (
    CuspBasis,
    PrecisionError,
    QExpansion,
    delta,
    delta_product_expansion,
    dim_cusp_forms,
    eisenstein_series,
    miller_basis,
    series_invert,
    series_mul,
    _series_mul_direct,
    _series_mul_kronecker,
)


def sigma(power, n):
    return sum(d**power for d in range(1, n + 1) if n % d == 0)


def test_eisenstein_values():
    assert eisenstein_series(4, 1).coeffs == [1]
    assert eisenstein_series(4, 3).coeffs == [1, 240, 240 * sigma(3, 2)]
    assert eisenstein_series(4, 3).coeffs == [1, 240, 2160]
    assert eisenstein_series(6, 2).coeffs == [1, -504]
    e6 = eisenstein_series(6, 8)
    for n in range(1, 8):
        assert e6[n] == -504 * sigma(5, n)


def test_eisenstein_bad_args():
    with pytest.raises(ValueError):
        eisenstein_series(8, 5)
    with pytest.raises(ValueError):
        eisenstein_series(4, 0)


def test_delta_known_coefficients():
    d = delta(8)
    # Ramanujan tau values
    assert d.coeffs == [0, 1, -24, 252, -1472, 4830, -6048, -16744]


def test_delta_matches_product_expansion():
    a = delta(60)
    b = delta_product_expansion(60)
    assert a.coeffs == b.coeffs


def test_delta_divisibility_by_1728():
    e4 = eisenstein_series(4, 40)
    e6 = eisenstein_series(6, 40)
    num = e4**3 - e6**2
    assert all(c % 1728 == 0 for c in num.coeffs)


def test_dim_cusp_forms_small():
    known = {0: 0, 2: 0, 4: 0, 6: 0, 8: 0, 10: 0, 12: 1, 14: 0, 16: 1, 18: 1,
             20: 1, 22: 1, 24: 2, 26: 1, 28: 2, 36: 3, 68: 5}
    for k, d in known.items():
        assert dim_cusp_forms(k) == d
    with pytest.raises(ValueError):
        dim_cusp_forms(13)


def dim_by_monomial_count(k):
    """Oracle: number of j >= 1 with 12j <= k and 4a+6b = k-12j solvable."""
    count = 0
    for j in range(1, k // 12 + 1):
        w = k - 12 * j
        if w != 2:
            count += 1
    return count


def test_dim_cusp_forms_against_monomial_oracle():
    for k in range(0, 400, 2):
        assert dim_cusp_forms(k) == dim_by_monomial_count(k)


def test_dim_cusp_forms_asymptotic_band():
    for k in range(4, 2000, 2):
        assert abs(dim_cusp_forms(k) - (k - 1) / 12) <= 2


def test_min_precision_rule():
    a = QExpansion(0, [1, 2, 3, 4], 4)
    b = QExpansion(0, [5, 6], 2)
    assert (a * b).prec == 2
    assert (a + b.truncate(2) * 0).prec == 2
    assert (a * b).coeffs == [5, 16]


def test_series_pow_truncates():
    a = QExpansion(0, [1, 1, 1], 3)
    p = a**5
    # (1+q+q^2)^5 = 1 + 5q + 15q^2 + ...
    assert p.coeffs == [1, 5, 15]
    assert p.prec == 3


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.integers(-10**6, 10**6), min_size=1, max_size=12),
    st.lists(st.integers(-10**6, 10**6), min_size=1, max_size=12),
    st.lists(st.integers(-10**6, 10**6), min_size=1, max_size=12),
)
def test_mul_associative_on_truncations(xs, ys, zs):
    prec = min(len(xs), len(ys), len(zs))
    a = QExpansion(0, xs[:prec], prec)
    b = QExpansion(0, ys[:prec], prec)
    c = QExpansion(0, zs[:prec], prec)
    assert ((a * b) * c).coeffs == (a * (b * c)).coeffs
    assert (a * b).coeffs == (b * a).coeffs


def test_kronecker_matches_direct():
    rng = random.Random(7)
    for trial in range(20):
        n = rng.randrange(1, 120)
        bits = rng.choice([8, 40, 300, 2000])
        a = [rng.getrandbits(bits) - (1 << (bits - 1)) for _ in range(n)]
        b = [rng.getrandbits(bits) - (1 << (bits - 1)) for _ in range(n)]
        prec = rng.randrange(1, n + 1)
        assert _series_mul_kronecker(a, b, prec) == _series_mul_direct(a, b, prec)


def test_series_invert():
    rng = random.Random(3)
    a = [1] + [rng.randrange(-50, 50) for _ in range(49)]
    inv = series_invert(a, 50)
    prod = series_mul(a, inv, 50)
    assert prod == [1] + [0] * 49


def test_miller_basis_weight_12_is_delta():
    basis = miller_basis(12, 5)
    assert len(basis) == 1
    assert basis.forms[0].coeffs == delta(5).coeffs


def test_miller_basis_dim_zero():
    basis = miller_basis(10, 5)
    assert len(basis) == 0


def test_miller_basis_weight_24_echelon():
    basis = miller_basis(24, 8)
    assert len(basis) == 2
    g1, g2 = basis.forms
    assert g1[0] == 0 and g1[1] == 1 and g1[2] == 0
    assert g2[0] == 0 and g2[1] == 0 and g2[2] == 1
    # row-reduction oracle: reduce the raw monomials by hand
    from heckestats.qexp import eisenstein_series as eis

    e4 = eis(4, 8)
    b1 = delta(8) * e4**3
    b2 = delta(8) ** 2
    m = b1[2]
    g1_oracle = [b1[i] - m * b2[i] for i in range(8)]
    assert g1.coeffs == g1_oracle
    assert g2.coeffs == b2.coeffs


@pytest.mark.parametrize("k", list(range(12, 120, 2)))
def test_miller_basis_matches_dimension_and_echelon(k):
    d = dim_cusp_forms(k)
    basis = miller_basis(k, d + 4)
    assert len(basis) == d
    for i, f in enumerate(basis.forms):
        for j in range(min(d + 1, basis.prec)):
            expected = 1 if j == i + 1 else 0
            if j <= d:
                assert f[j] == expected


def test_miller_basis_precision_error():
    with pytest.raises(PrecisionError):
        miller_basis(24, 2)
