"""Khinchin, Levy and Gauss-Kuzmin statistics of continued-fraction expansions."""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .bigreal import BigReal, digits_to_bits, guard_digits
from .cfexpand import ContinuedFraction, ConvergentSeq, convergents
from .mpzeta import zeta_real


@lru_cache(maxsize=None)
def khinchin_constant(target_digits: int) -> BigReal:
    """K0 from ln2 ln K0 = sum_n (zeta(2n) - 1)/n * (1 - 1/2 + ... - 1/(2n-2) + 1/(2n-1)).

    zeta(2n) - 1 < 3 * 4^-n, so the tail after n terms is below 4^-n.
    """
    if target_digits < 1:
        raise ValueError("target_digits must be >= 1")
    W = target_digits + guard_digits(target_digits)
    bits = digits_to_bits(W + 5)
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        total = mpfr(0)
        alt = mpfr(0)  # alternating harmonic partial sum up to 2n-1
        n = 0
        while True:
            n += 1
            if n > 1:
                alt += mpfr(-1) / (2 * n - 2)
            alt += mpfr(1) / (2 * n - 1)
            z = zeta_real(2 * n, W + 2).to_mpfr(bits) - 1
            total += z / n * alt
            if 2 * n * math.log10(2) > W + 3:
                break
        K = gmpy2.exp(total / gmpy2.log(mpfr(2)))
        return BigReal.from_mpfr(K, target_digits, W)


def khinchin_raw_product(terms: int = 10**6) -> tuple[float, float]:
    """log-summed prod_k (1 + 1/(k(k+2)))^log2(k) over k <= terms, plus a bound on the omitted factor.

    Returns (value, tail) with K0 in [value, value * exp(tail)].
    """
    k = np.arange(2, terms + 1, dtype=np.float64)
    logs = np.log2(k) * np.log1p(1.0 / (k * (k + 2.0)))
    total = math.fsum(logs.tolist())
    # sum_{k>T} log2(k) / k^2 <= (log2(T) + 1/ln 2) / T
    tail = (math.log2(terms) + 1 / math.log(2)) / terms
    return math.exp(total), tail


@lru_cache(maxsize=None)
def levy_constant(target_digits: int) -> BigReal:
    """exp(pi^2 / (12 ln 2))."""
    if target_digits < 1:
        raise ValueError("target_digits must be >= 1")
    W = target_digits + guard_digits(target_digits)
    with gmpy2.context(gmpy2.get_context(), precision=digits_to_bits(W + 5)):
        pi = gmpy2.const_pi()
        L = gmpy2.exp(pi * pi / (12 * gmpy2.log(mpfr(2))))
        return BigReal.from_mpfr(L, target_digits, W)


@dataclass(frozen=True)
class RunningSeries:
    """values[i] is X(m) for m = i + 1."""

    values: tuple
    m_start: int = 100

    @property
    def length(self) -> int:
        return len(self.values)

    def at(self, m: int) -> float:
        return self.values[m - 1]

    @property
    def final(self) -> float:
        return self.values[-1]

    def window(self) -> range:
        return range(self.m_start, self.length + 1)

    def mapped(self, fn) -> "RunningSeries":
        return RunningSeries(tuple(fn(v) for v in self.values), self.m_start)


def _running_mean_of(logs, m_start: int) -> RunningSeries:
    out = []
    s = 0.0
    c = 0.0  # Neumaier compensation
    for m, x in enumerate(logs, start=1):
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
        out.append(math.exp((s + c) / m))
    return RunningSeries(tuple(out), m_start)


def running_geomean(cf: ContinuedFraction, m_start: int = 100) -> RunningSeries:
    """K(m) = (a_1 ... a_m)^(1/m), a0 excluded."""
    if cf.length < 1:
        raise ValueError("need at least one partial quotient")
    return _running_mean_of((math.log(a) for a in cf.quotients), m_start)


def running_levy(conv: ConvergentSeq, m_start: int = 100) -> RunningSeries:
    """L(m) = Q_m^(1/m) from exact denominators."""
    Q = conv.Q
    if len(Q) < 2:
        raise ValueError("need at least one convergent past Q_0")
    return RunningSeries(tuple(math.exp(math.log(Q[m]) / m) for m in range(1, len(Q))), m_start)


def _as_float(x) -> float:
    return float(x.value) if isinstance(x, BigReal) else float(x)


def sign_changes(series: RunningSeries, target) -> int:
    """Number of m in [m_start, l-1] with (X(m+1) - t)(X(m) - t) < 0; touching t is not a change."""
    t = _as_float(target)
    count = 0
    for m in range(max(1, series.m_start), series.length):
        a = series.at(m) - t
        b = series.at(m + 1) - t
        if (a < 0 < b) or (b < 0 < a):
            count += 1
    return count


def closest_approach(series: RunningSeries, target) -> tuple[int, float]:
    """(m, X(m)) minimising |X(m) - target| over m >= m_start, earliest m on ties."""
    t = _as_float(target)
    best = None
    for m in series.window():
        d = abs(series.at(m) - t)
        if best is None or d < best[0]:
            best = (d, m)
    if best is None:
        raise ValueError(f"series has no entries at m >= {series.m_start}")
    return best[1], series.at(best[1])


def gauss_kuzmin_density(k: int) -> float:
    """d(k) = log2((1 + 1/k) / (1 + 1/(k+1)))."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return math.log2((k + 1) ** 2 / (k * (k + 2)))


def gauss_kuzmin_tail(k_max: int) -> float:
    """sum_{k > k_max} d(k) = log2((k_max + 2) / (k_max + 1))."""
    return math.log2((k_max + 2) / (k_max + 1))


@dataclass(frozen=True)
class GKHistogram:
    """Counts of a_m = k for k = 1..k_max plus the k > k_max tail."""

    counts: tuple
    tail: int
    total: int

    @property
    def k_max(self) -> int:
        return len(self.counts)

    def rows(self) -> list[tuple]:
        """(k, empirical, theoretical); k = None marks the tail bucket."""
        out = [
            (k, Fraction(c, self.total), gauss_kuzmin_density(k))
            for k, c in enumerate(self.counts, start=1)
        ]
        out.append((None, Fraction(self.tail, self.total), gauss_kuzmin_tail(self.k_max)))
        return out

    def density(self, k: int) -> Fraction:
        return Fraction(self.counts[k - 1], self.total)

    def __add__(self, other: "GKHistogram") -> "GKHistogram":
        if self.k_max != other.k_max:
            raise ValueError("histograms with different k_max")
        counts = tuple(a + b for a, b in zip(self.counts, other.counts))
        return GKHistogram(counts, self.tail + other.tail, self.total + other.total)


def gauss_kuzmin_hist(cf: ContinuedFraction, k_max: int = 10) -> GKHistogram:
    if cf.length < 1:
        raise ValueError("need at least one partial quotient")
    counts = [0] * k_max
    tail = 0
    for a in cf.quotients:
        if a <= k_max:
            counts[a - 1] += 1
        else:
            tail += 1
    return GKHistogram(tuple(counts), tail, cf.length)


def pooled_hist(cfs, k_max: int = 10) -> GKHistogram:
    hists = [gauss_kuzmin_hist(cf, k_max) for cf in cfs]
    total = hists[0]
    for h in hists[1:]:
        total = total + h
    return total


@dataclass(frozen=True)
class CFStatsReport:
    label: object
    length: int
    K_final: float
    S_K: int
    K_closest: tuple
    L_final: float
    S_L: int
    L_closest: tuple
    gk_hist: GKHistogram
    log10_product: float
    max_quotient: int
    extra: dict = field(default_factory=dict, compare=False)

    def to_record(self) -> dict:
        return {
            "n": self.label,
            "length": self.length,
            "K_final": repr(self.K_final),
            "S_K": self.S_K,
            "K_closest": [self.K_closest[0], repr(self.K_closest[1])],
            "L_final": repr(self.L_final),
            "S_L": self.S_L,
            "L_closest": [self.L_closest[0], repr(self.L_closest[1])],
            "gk_counts": list(self.gk_hist.counts),
            "gk_tail": self.gk_hist.tail,
            "log10_product": repr(self.log10_product),
            "max_quotient": str(self.max_quotient),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "CFStatsReport":
        hist = GKHistogram(tuple(rec["gk_counts"]), rec["gk_tail"], rec["length"])
        return cls(
            rec["n"],
            rec["length"],
            float(rec["K_final"]),
            rec["S_K"],
            (rec["K_closest"][0], float(rec["K_closest"][1])),
            float(rec["L_final"]),
            rec["S_L"],
            (rec["L_closest"][0], float(rec["L_closest"][1])),
            hist,
            float(rec["log10_product"]),
            int(rec["max_quotient"]),
        )


def cf_stats(cf: ContinuedFraction, m_start: int = 100, k_max: int = 10) -> CFStatsReport:
    """Full diagnostic record for one expansion, with K0 and L0 at 20 digits as targets."""
    K0 = float(khinchin_constant(20).value)
    L0 = float(levy_constant(20).value)
    K = running_geomean(cf, m_start)
    L = running_levy(convergents(cf), m_start)
    # short expansions have no m >= m_start; fall back to the whole series
    if K.length < m_start:
        K = RunningSeries(K.values, 1)
        L = RunningSeries(L.values, 1)
    return CFStatsReport(
        label=cf.label,
        length=cf.length,
        K_final=K.final,
        S_K=sign_changes(K, K0),
        K_closest=closest_approach(K, K0),
        L_final=L.final,
        S_L=sign_changes(L, L0),
        L_closest=closest_approach(L, L0),
        gk_hist=gauss_kuzmin_hist(cf, k_max),
        log10_product=math.fsum(math.log10(a) for a in cf.quotients),
        max_quotient=max(cf.quotients),
    )
