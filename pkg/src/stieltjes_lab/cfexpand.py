"""Regular continued fractions of reals known to finitely many digits."""

from __future__ import annotations

import decimal
import json
import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

from gmpy2 import mpz

from .bigreal import BigReal, decimal_context

TERMINATIONS = ("accuracy-limit", "nmax-limit", "exact-rational")


@dataclass(frozen=True)
class ContinuedFraction:
    a0: int
    quotients: tuple
    source_acc: int
    terminated_by: str
    label: object = None

    def __post_init__(self):
        if self.terminated_by not in TERMINATIONS:
            raise ValueError(f"unknown termination {self.terminated_by!r}")
        if any(a < 1 for a in self.quotients):
            raise ValueError("partial quotients after a0 must be >= 1")
        if self.terminated_by == "exact-rational" and self.quotients and self.quotients[-1] < 2:
            raise ValueError("exact expansion must end in a quotient >= 2")

    @property
    def length(self) -> int:
        return len(self.quotients)

    @property
    def terms(self) -> list[int]:
        return [self.a0, *self.quotients]

    def to_record(self) -> dict:
        return {
            "n": self.label,
            "acc": self.source_acc,
            "a": [int(a) for a in self.terms],
            "terminated_by": self.terminated_by,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), separators=(",", ":")) + "\n"

    @classmethod
    def from_record(cls, rec: dict) -> "ContinuedFraction":
        a = [int(x) for x in rec["a"]]
        return cls(a[0], tuple(a[1:]), int(rec["acc"]), rec.get("terminated_by", "accuracy-limit"), rec.get("n"))

    @classmethod
    def from_json(cls, text: str) -> "ContinuedFraction":
        return cls.from_record(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "ContinuedFraction":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class ConvergentSeq:
    """(P_k, Q_k) for k = 0..l."""

    pairs: tuple = field(default_factory=tuple)

    @property
    def P(self) -> list[int]:
        return [p for p, _ in self.pairs]

    @property
    def Q(self) -> list[int]:
        return [q for _, q in self.pairs]

    def last(self) -> Fraction:
        p, q = self.pairs[-1]
        return Fraction(p, q)


def frac_part(r: BigReal) -> BigReal:
    """r - floor(r), keeping the same absolute number of trusted decimal places."""
    v = r.value
    ctx = decimal_context(max(1, v.adjusted() + 2))
    f = v - v.to_integral_value(rounding=decimal.ROUND_FLOOR, context=ctx)
    work_places = r.work_digits - r.exponent - 1
    if f == 0:
        return BigReal(Decimal(0), 0, max(1, work_places))
    acc = max(0, r.places + f.adjusted() + 1)
    work = max(1, acc, work_places + f.adjusted() + 1)
    return BigReal(f, acc, work)


def contfrac(r, nmax: int | None = None, label=None) -> ContinuedFraction:
    """Expand r = [a0; a1, a2, ...].

    For a BigReal, quotients are extracted in parallel from both ends of
    r +/- 10^-places and only emitted while the two agree; expansion also
    stops once Q_k^2 exceeds 10^places.  ``nmax`` caps the quotients after a0.
    Ints and Fractions expand exactly.
    """
    if nmax is not None and nmax < 0:
        raise ValueError("nmax must be >= 0")
    if isinstance(r, (int, Fraction)) and not isinstance(r, bool):
        return _contfrac_exact(Fraction(r), nmax, label)
    if not isinstance(r, BigReal):
        raise TypeError("contfrac expects int, Fraction or BigReal")
    if r.acc_digits < 1:
        raise ValueError("input carries no trusted digit")
    lo, hi = r.interval()
    places = r.places
    a0 = math.floor(r.to_fraction())
    n1, d1 = mpz(lo.numerator), mpz(lo.denominator)
    n2, d2 = mpz(hi.numerator), mpz(hi.denominator)
    if n1 // d1 != n2 // d2:
        return ContinuedFraction(a0, (), r.acc_digits, "accuracy-limit", label)
    n1, d1 = d1, n1 - a0 * d1
    n2, d2 = d2, n2 - a0 * d2
    q_limit = mpz(10) ** max(0, places)
    out = []
    q_prev, q = mpz(0), mpz(1)
    reason = "accuracy-limit"
    while True:
        if nmax is not None and len(out) >= nmax:
            reason = "nmax-limit"
            break
        if d1 == 0 or d2 == 0:
            break
        a = n1 // d1
        if a != n2 // d2 or a < 1:
            break
        out.append(int(a))
        q_prev, q = q, a * q + q_prev
        n1, d1 = d1, n1 - a * d1
        n2, d2 = d2, n2 - a * d2
        if q * q > q_limit:
            break
    return ContinuedFraction(int(a0), tuple(out), r.acc_digits, reason, label)


def _contfrac_exact(x: Fraction, nmax, label) -> ContinuedFraction:
    n, d = mpz(x.numerator), mpz(x.denominator)
    a0 = n // d
    n, d = d, n - a0 * d
    out = []
    reason = "exact-rational"
    while d != 0:
        if nmax is not None and len(out) >= nmax:
            reason = "nmax-limit"
            break
        a = n // d
        out.append(int(a))
        n, d = d, n - a * d
    digits = max(1, len(str(abs(x.numerator))) + len(str(x.denominator)))
    return ContinuedFraction(int(a0), tuple(out), digits, reason, label)


def convergents(cf: ContinuedFraction) -> ConvergentSeq:
    """P_k/Q_k by the standard recurrence seeded P_-1 = 1, Q_-1 = 0, P_0 = a0, Q_0 = 1."""
    p_prev, q_prev = mpz(1), mpz(0)
    p, q = mpz(cf.a0), mpz(1)
    pairs = [(int(p), int(q))]
    for a in cf.quotients:
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        pairs.append((int(p), int(q)))
    return ConvergentSeq(tuple(pairs))
