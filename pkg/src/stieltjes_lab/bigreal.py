"""Arbitrary-precision decimal values with a tracked count of trusted digits."""

from __future__ import annotations

import decimal
import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction

import gmpy2

LOG2_10 = math.log2(10)


def decimal_context(prec: int) -> decimal.Context:
    return decimal.Context(
        prec=max(1, prec),
        Emax=decimal.MAX_EMAX,
        Emin=decimal.MIN_EMIN,
        rounding=decimal.ROUND_HALF_EVEN,
    )


def guard_digits(target_digits: int) -> int:
    """Extra working digits carried on top of a requested accuracy."""
    return max(10, math.ceil(0.1 * target_digits))


def digits_to_bits(digits: int) -> int:
    return math.ceil(digits * LOG2_10) + 8


def exponent10(x) -> int:
    """floor(log10 |x|) for a non-zero Decimal, Fraction or int, computed exactly."""
    if isinstance(x, Decimal):
        return x.adjusted()
    x = abs(Fraction(x))
    if x == 0:
        raise ValueError("exponent10 of zero")
    e = math.floor(math.log10(x.numerator) - math.log10(x.denominator))
    # float log10 can be off by one near powers of ten
    while Fraction(10) ** e > x:
        e -= 1
    while Fraction(10) ** (e + 1) <= x:
        e += 1
    return e


def fraction_to_decimal(x: Fraction, sig_digits: int) -> Decimal:
    """Truncate (toward zero) an exact rational to ``sig_digits`` significant digits."""
    x = Fraction(x)
    if x == 0:
        return Decimal(0)
    e = exponent10(x)
    shift = sig_digits - 1 - e
    scaled = abs(x) * Fraction(10) ** shift
    mant = scaled.numerator // scaled.denominator
    sign = "-" if x < 0 else ""
    return Decimal(f"{sign}{mant}E{-shift}")


def mpfr_to_decimal(x, sig_digits: int) -> Decimal:
    if x == 0:
        return Decimal(0)
    mant, exp, _ = x.digits(10, sig_digits)
    sign = ""
    if mant.startswith("-"):
        sign, mant = "-", mant[1:]
    # gmpy2 reports value = 0.mant * 10**exp
    return Decimal(f"{sign}{mant}E{exp - len(mant)}")


@dataclass(frozen=True)
class BigReal:
    """A decimal value plus how many of its leading significant digits are trusted.

    ``work_digits`` is the precision the value was produced at; ``acc_digits``
    never exceeds it.
    """

    value: Decimal
    acc_digits: int
    work_digits: int

    def __post_init__(self):
        if not isinstance(self.value, Decimal):
            object.__setattr__(self, "value", Decimal(self.value))
        if self.work_digits < 1:
            raise ValueError("work_digits must be >= 1")
        if not 0 <= self.acc_digits <= self.work_digits:
            raise ValueError(
                f"acc_digits={self.acc_digits} outside [0, work_digits={self.work_digits}]"
            )

    @classmethod
    def exact(cls, x, digits: int | None = None) -> "BigReal":
        """Wrap an exactly known number (int, str, Fraction with finite decimal expansion)."""
        if isinstance(x, Fraction):
            if x.denominator != 1:
                d = digits or 50
                val = fraction_to_decimal(x, d)
            else:
                val = Decimal(x.numerator)
        else:
            val = Decimal(str(x)) if not isinstance(x, Decimal) else x
        n = max(1, len(val.as_tuple().digits))
        if digits is not None:
            n = max(n, digits)
        return cls(val, n, n)

    @classmethod
    def from_mpfr(cls, x, acc_digits: int, work_digits: int) -> "BigReal":
        return cls(mpfr_to_decimal(x, work_digits), acc_digits, work_digits)

    @classmethod
    def parse(cls, text: str, acc_digits: int | None = None) -> "BigReal":
        """Build from a decimal string, trusting every significant digit by default."""
        val = Decimal(text.strip())
        n = max(1, len(val.as_tuple().digits))
        return cls(val, n if acc_digits is None else acc_digits, n)

    @property
    def is_zero(self) -> bool:
        return self.value == 0

    @property
    def exponent(self) -> int:
        """Decimal position of the leading digit, floor(log10|value|)."""
        return self.value.adjusted()

    @property
    def places(self) -> int:
        """Number of trusted digits after the decimal point (may be negative)."""
        return self.acc_digits - self.exponent - 1

    def to_fraction(self) -> Fraction:
        return Fraction(self.value)

    def to_mpfr(self, bits: int | None = None):
        bits = bits or digits_to_bits(self.work_digits)
        with gmpy2.context(gmpy2.get_context(), precision=bits):
            return gmpy2.mpfr(str(self.value))

    def interval(self) -> tuple[Fraction, Fraction]:
        """Exact enclosure: value +/- one unit in the last trusted place."""
        v = self.to_fraction()
        radius = Fraction(10) ** (-self.places)
        return v - radius, v + radius

    def truncated(self, digits: int | None = None) -> str:
        """Sign-magnitude truncation to ``digits`` significant digits, fixed-point text."""
        digits = self.acc_digits if digits is None else digits
        return _format_fixed(self.value, digits, decimal.ROUND_DOWN)

    def rounded(self, digits: int | None = None) -> str:
        digits = self.acc_digits if digits is None else digits
        return _format_fixed(self.value, digits, decimal.ROUND_HALF_EVEN)

    def __str__(self) -> str:
        return self.rounded()

    def __float__(self) -> float:
        return float(self.value)


def _format_fixed(value: Decimal, digits: int, rounding) -> str:
    if value == 0:
        return "0"
    if digits < 1:
        raise ValueError("need at least one significant digit")
    ctx = decimal_context(digits + 5)
    quantum = Decimal(f"1E{value.adjusted() - digits + 1}")
    q = value.quantize(quantum, rounding=rounding, context=ctx)
    return format(q, "f")
