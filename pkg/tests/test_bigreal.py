from decimal import Decimal
from fractions import Fraction

import gmpy2
import pytest

from stieltjes_lab.bigreal import BigReal, exponent10, fraction_to_decimal, guard_digits


def test_parse_counts_significant_digits():
    x = BigReal.parse("-0.0072815845483676724861")
    assert x.acc_digits == 20
    assert x.exponent == -3
    assert x.places == 22


def test_truncate_vs_round():
    x = BigReal.parse("1.6449340668482264364724151666460251892")
    assert x.truncated(30) == "1.64493406684822643647241516664"
    assert x.rounded(30) == "1.64493406684822643647241516665"
    assert BigReal.parse("-2.71828").truncated(3) == "-2.71"


def test_exact_rational():
    x = BigReal.exact(Fraction(1, 3), 25)
    assert x.truncated(25) == "0." + "3" * 25
    assert BigReal.exact(7).value == 7


def test_acc_bounds_enforced():
    with pytest.raises(ValueError):
        BigReal(Decimal("1.5"), 10, 5)
    with pytest.raises(ValueError):
        BigReal(Decimal("1.5"), 1, 0)


def test_interval_contains_value():
    x = BigReal.parse("3.14159")
    lo, hi = x.interval()
    assert lo < Fraction(314159, 100000) < hi
    assert hi - lo == Fraction(2, 10**5)


def test_exponent10_exact_near_powers():
    assert exponent10(Fraction(10**50)) == 50
    assert exponent10(Fraction(10**50 - 1)) == 49
    assert exponent10(Fraction(1, 10**30)) == -30
    assert exponent10(Fraction(1, 10**30 + 1)) == -31


def test_fraction_to_decimal_truncates():
    assert fraction_to_decimal(Fraction(2, 3), 5) == Decimal("0.66666")
    assert fraction_to_decimal(Fraction(-2, 3), 5) == Decimal("-0.66666")


def test_long_values_convert():
    # well past the default int/str conversion cap
    x = fraction_to_decimal(Fraction(1, 7), 9000)
    assert len(x.as_tuple().digits) == 9000


def test_mpfr_roundtrip():
    with gmpy2.context(gmpy2.get_context(), precision=400):
        pi = gmpy2.const_pi()
        x = BigReal.from_mpfr(pi, 100, 110)
    assert x.truncated(30) == "3.14159265358979323846264338327"
    assert abs(x.to_mpfr() - pi) < gmpy2.mpfr(10) ** -105


def test_guard_digits_grow():
    assert guard_digits(10) == 10
    assert guard_digits(5000) == 500
