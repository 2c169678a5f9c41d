"""Digit and k-gram frequencies of decimal (or base-b) expansions."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from itertools import product

from .bigreal import BigReal
from .errors import InvalidSymbolError

SYMBOLS = "0123456789abcdefghijklmnopqrstuvwxyz"
MAX_ENUMERATED = 10**6


@dataclass(frozen=True)
class DigitStats:
    base: int
    n_digits: int
    freq1: tuple
    k: int = 1
    freqK: dict = field(default_factory=dict)
    label: object = None

    def deviation(self, pattern: str) -> Fraction:
        return abs(self.freqK.get(pattern, Fraction(0)) - Fraction(1, self.base**self.k))

    def max_digit_deviation(self) -> Fraction:
        p = Fraction(1, self.base)
        return max(abs(h - p) for h in self.freq1)

    def max_kgram_deviation(self) -> Fraction:
        return max(self.deviation(pat) for pat in all_patterns(self.base, self.k))


def all_patterns(base: int, k: int) -> list[str]:
    return ["".join(t) for t in product(SYMBOLS[:base], repeat=k)]


def _check(digits: str, base: int) -> str:
    if not 2 <= base <= len(SYMBOLS):
        raise ValueError(f"base must be in [2, {len(SYMBOLS)}]")
    digits = digits.lower()
    allowed = set(SYMBOLS[:base])
    bad = set(digits) - allowed
    if bad:
        raise InvalidSymbolError(f"symbols {sorted(bad)} not valid in base {base}")
    if not digits:
        raise ValueError("empty digit string")
    return digits


def digit_freq(digits: str, base: int = 10, label=None) -> DigitStats:
    """Exact frequencies h(a) of each symbol."""
    digits = _check(digits, base)
    c = Counter(digits)
    n = len(digits)
    freq = tuple(Fraction(c.get(s, 0), n) for s in SYMBOLS[:base])
    return DigitStats(base, n, freq, 1, {s: f for s, f in zip(SYMBOLS[:base], freq)}, label)


def kgram_freq(digits: str, k: int, base: int = 10, label=None) -> DigitStats:
    """Frequencies over all overlapping length-k windows, count / (len - k + 1)."""
    digits = _check(digits, base)
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(digits) < k:
        raise ValueError("digit string shorter than k")
    windows = len(digits) - k + 1
    c = Counter(digits[i : i + k] for i in range(windows))
    if base**k <= MAX_ENUMERATED:
        freqK = {pat: Fraction(c.get(pat, 0), windows) for pat in all_patterns(base, k)}
    else:
        freqK = {pat: Fraction(v, windows) for pat, v in sorted(c.items())}
    n = len(digits)
    c1 = Counter(digits)
    freq1 = tuple(Fraction(c1.get(s, 0), n) for s in SYMBOLS[:base])
    return DigitStats(base, n, freq1, k, freqK, label)


def expansion_digits(x: BigReal, include_integer_zero: bool = True, digits: int | None = None) -> str:
    """Certified digits of |x|: integer part (no sign) followed by the fractional digits.

    For |x| < 1 the integer part contributes one '0' unless ``include_integer_zero`` is off.
    """
    text = x.truncated(x.acc_digits if digits is None else digits).lstrip("-")
    whole, _, frac = text.partition(".")
    if whole == "0" and not include_integer_zero:
        whole = ""
    return whole + frac


def deviation_report(collection, k: int) -> list[tuple]:
    """(pattern, max |freq - b^-k|, label of the constant attaining it), patterns in order.

    Ties go to the earliest constant in the collection.
    """
    if not collection:
        raise ValueError("empty collection")
    base = collection[0].base
    for s in collection:
        if s.base != base or s.k != k:
            raise ValueError("collection mixes bases or k")
    rows = []
    for pat in all_patterns(base, k):
        best = None
        for i, s in enumerate(collection):
            d = s.deviation(pat)
            if best is None or d > best[0]:
                best = (d, s.label if s.label is not None else i)
        rows.append((pat, best[0], best[1]))
    return rows


def digit_deviation_rows(stats: DigitStats) -> list[tuple]:
    """(a, h(a), offset) with offset = a/b + (1/b - h(a)), the shape used to plot many constants side by side."""
    b = stats.base
    return [(a, h, Fraction(a, b) + (Fraction(1, b) - h)) for a, h in enumerate(stats.freq1)]


def reference_kgram_table() -> list[tuple[str, float]]:
    """Full-scale two-digit maximal deviations shipped with the package."""
    text = resources.files("stieltjes_lab").joinpath("data/kgram_reference.tsv").read_text()
    out = []
    for line in text.splitlines():
        if not line or line.startswith("#") or line.startswith("pattern"):
            continue
        pat, dev = line.split("\t")
        out.append((pat, float(dev)))
    return out
