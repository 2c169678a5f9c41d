"""Real-axis zeta and phi(s) = (s - 1) zeta(s) at arbitrary precision.

Everything here is Euler-Maclaurin summation with the remainder bounded by
the first omitted correction term, which is a rigorous bound for real s > 0
(and, by Rademacher's estimate, for real s > -(2M + 1)).

Two evaluation paths exist:

* :func:`zeta_real` / :func:`phi` evaluate one argument with gmpy2 ``mpfr``.
* :func:`tabulate_phi_nodes` evaluates phi on the equidistant grid
  ``1 + j*eps`` with a fixed-point integer engine.  All partial sums are
  exact integer additions, so the table does not depend on how the work is
  split between worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

import gmpy2
from gmpy2 import mpfr, mpz

from .bigreal import LOG2_10, BigReal, digits_to_bits, guard_digits
from .errors import PoleError

# Bernoulli numbers ---------------------------------------------------------

_TANGENT: list = [mpz(0)]


def tangent_numbers(m: int) -> list:
    """Tangent numbers T_1..T_m (tan x = sum T_k x^(2k-1)/(2k-1)!), index 0 unused.

    Integer-only recurrence (Brent & Harvey), O(m^2) additions.
    """
    global _TANGENT
    if m < len(_TANGENT):
        return _TANGENT
    # grow geometrically so repeated small extensions stay cheap
    m = max(m, int(1.25 * (len(_TANGENT) - 1)))
    T = [mpz(0)] * (m + 1)
    T[1] = mpz(1)
    for k in range(2, m + 1):
        T[k] = (k - 1) * T[k - 1]
    for k in range(2, m + 1):
        for j in range(k, m + 1):
            T[j] = (j - k) * T[j - 1] + (j - k + 2) * T[j]
    _TANGENT = T
    return T


class BernoulliCache:
    """Exact Bernoulli numbers, convention B_1 = -1/2.

    Only B_0, B_1 and even-index values are stored; odd B_n with n >= 3 are zero.
    """

    def __init__(self):
        self.values: dict[int, Fraction] = {0: Fraction(1), 1: Fraction(-1, 2)}
        self._max_even = 0

    def _extend(self, n: int):
        m = n // 2
        T = tangent_numbers(m)
        for k in range(self._max_even // 2 + 1, m + 1):
            four_k = 1 << (2 * k)
            sign = 1 if k % 2 == 1 else -1
            self.values[2 * k] = Fraction(sign * 2 * k * int(T[k]), four_k * (four_k - 1))
        self._max_even = max(self._max_even, 2 * m)

    def get(self, n: int) -> Fraction:
        if n < 0:
            raise ValueError("Bernoulli index must be >= 0")
        if n in self.values:
            return self.values[n]
        if n % 2 == 1:
            return Fraction(0)
        self._extend(n)
        return self.values[n]


DEFAULT_BERNOULLI = BernoulliCache()


def bernoulli(n: int, cache: BernoulliCache | None = None) -> Fraction:
    """Exact B_n with B_1 = -1/2."""
    return (cache or DEFAULT_BERNOULLI).get(n)


def _em_coefficients_fixed(m: int, bits: int) -> list:
    """floor(2^bits * B_2k / (2k)!) for k = 1..m, from the tangent numbers."""
    T = tangent_numbers(m)
    out = []
    fact = mpz(1)  # (2k - 1)!
    for k in range(1, m + 1):
        if k > 1:
            fact *= (2 * k - 2) * (2 * k - 1)
        four_k = mpz(1) << (2 * k)
        den = fact * four_k * (four_k - 1)
        c = (T[k] << bits) // den
        out.append(c if k % 2 == 1 else -c)
    return out


# Euler-Maclaurin planning --------------------------------------------------

_LOG10_2PI = math.log10(2 * math.pi)


def _log10_abs_poch(s: float, length: int) -> float:
    """log10 |s (s+1) ... (s+length-1)|, -inf if a factor vanishes."""
    if s > 0:
        return (math.lgamma(s + length) - math.lgamma(s)) / math.log(10)
    total = 0.0
    for i in range(length):
        f = abs(s + i)
        if f == 0:
            return -math.inf
        total += math.log10(f)
    return total


def em_log10_remainder(s: float, N: int, M: int) -> float:
    """log10 of the first omitted term after M corrections, split point N."""
    m2 = 2 * M + 2
    # |B_2m| / (2m)! = 2 zeta(2m) / (2 pi)^(2m) <= 2 zeta(2) / (2 pi)^(2m)
    log_b = math.log10(2 * math.pi**2 / 6) - m2 * _LOG10_2PI
    return log_b + _log10_abs_poch(s, 2 * M + 1) - (s + 2 * M + 1) * math.log10(N)


def em_plan(abs_digits: float, s: float = 1.0, mult_ratio: float = 3.0) -> tuple[int, int]:
    """Choose (N, M) with remainder < 10^-abs_digits, minimising N + M/mult_ratio.

    Correction terms get cheaper as they shrink, hence the discount on M.
    """
    best = None
    lo_M = max(1, math.ceil(-s / 2))  # s + 2M + 1 > 0 for negative s
    M = lo_M
    stale = 0
    while stale < 40:
        expo = s + 2 * M + 1
        log_b = math.log10(2 * math.pi**2 / 6) - (2 * M + 2) * _LOG10_2PI
        need = (log_b + _log10_abs_poch(s, 2 * M + 1) + abs_digits) / expo
        if need > 15:
            # split point beyond any sane direct sum; more corrections needed
            M += 1 if M < 64 else max(1, M // 32)
            continue
        N = max(2, math.ceil(10**need), math.ceil(abs(s)) + 2)
        while em_log10_remainder(s, N, M) > -abs_digits:
            N += 1
        cost = N + M / mult_ratio
        if best is None or cost < best[0]:
            best = (cost, N, M)
            stale = 0
        else:
            stale += 1
        M += 1 if M < 64 else max(1, M // 32)
    return best[1], best[2]


# single-argument evaluation ------------------------------------------------


def _as_mpfr(s, bits):
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        if isinstance(s, BigReal):
            return mpfr(str(s.value))
        if isinstance(s, Fraction):
            return mpfr(gmpy2.mpq(s.numerator, s.denominator))
        if isinstance(s, Decimal):
            return mpfr(str(s))
        return mpfr(s)


def _as_fraction(s) -> Fraction:
    if isinstance(s, BigReal):
        return s.to_fraction()
    if isinstance(s, float):
        return Fraction(s)
    return Fraction(Decimal(s)) if isinstance(s, (str, Decimal)) else Fraction(s)


def _em_parts(s, abs_digits: int):
    """Return (R, N^(1-s), bits) with zeta(s) = R + N^(1-s)/(s-1) and phi = (s-1) R + N^(1-s)."""
    s_exact = _as_fraction(s)
    s_f = float(s_exact)
    N, M = em_plan(abs_digits + 2, s_f)
    growth = max(0.0, -s_f) * math.log2(N)
    bits = digits_to_bits(abs_digits + 4) + int(growth) + N.bit_length() + 16
    cache = DEFAULT_BERNOULLI
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        sm = _as_mpfr(s, bits)
        neg = -sm
        terms = [mpfr(n) ** neg for n in range(1, N)]
        S = gmpy2.fsum(terms)
        A = mpfr(N) ** neg
        tail = mpfr(0)
        u = sm * A / N
        N2 = mpfr(N) * N
        for k in range(1, M + 1):
            b = cache.get(2 * k)
            c = mpfr(gmpy2.mpq(b.numerator, b.denominator)) / gmpy2.fac(2 * k)
            tail += c * u
            u = u * (sm + 2 * k - 1) * (sm + 2 * k) / N2
        R = S + A / 2 + tail
        return R, A * N, bits


def _nonpositive_integer(s: Fraction):
    if s.denominator == 1 and s <= 0:
        return int(-s)
    return None


def zeta_real(s, target_digits: int) -> BigReal:
    """zeta(s) for real s != 1 with at least ``target_digits`` certified digits."""
    if target_digits < 1:
        raise ValueError("target_digits must be >= 1")
    W = target_digits + guard_digits(target_digits)
    s_exact = _as_fraction(s)
    if abs(s_exact - 1) < Fraction(1, 10**W):
        raise PoleError("zeta has a pole at s = 1")
    m = _nonpositive_integer(s_exact)
    if m is not None:
        # zeta(-m) = (-1)^m B_{m+1} / (m+1), exact
        val = Fraction((-1) ** m) * bernoulli(m + 1) / (m + 1)
        return _exact_bigreal(val, W)
    digits = W
    for _ in range(6):
        R, NA, bits = _em_parts(s, digits)
        with gmpy2.context(gmpy2.get_context(), precision=bits):
            z = R + NA / (_as_mpfr(s, bits) - 1)
        if z == 0:
            digits += W
            continue
        e = math.floor(math.log10(abs(z)))
        certified = digits + e
        if certified >= W:
            return BigReal.from_mpfr(z, W, W)
        digits += W - certified + 2
    raise PoleError("could not certify zeta(s); argument too close to a zero or the pole")


def phi(s, target_digits: int) -> BigReal:
    """phi(s) = (s - 1) zeta(s), with phi(1) = 1 exactly."""
    if target_digits < 1:
        raise ValueError("target_digits must be >= 1")
    W = target_digits + guard_digits(target_digits)
    s_exact = _as_fraction(s)
    if s_exact == 1:
        return _exact_bigreal(Fraction(1), W)
    m = _nonpositive_integer(s_exact)
    if m is not None:
        val = (s_exact - 1) * Fraction((-1) ** m) * bernoulli(m + 1) / (m + 1)
        return _exact_bigreal(val, W)
    digits = W
    for _ in range(6):
        R, NA, bits = _em_parts(s, digits)
        with gmpy2.context(gmpy2.get_context(), precision=bits):
            v = (_as_mpfr(s, bits) - 1) * R + NA
        if v == 0:
            digits += W
            continue
        certified = digits + math.floor(math.log10(abs(v))) - 1
        if certified >= W:
            return BigReal.from_mpfr(v, W, W)
        digits += W - certified + 2
    raise ArithmeticError("could not certify phi(s)")


def _exact_bigreal(val: Fraction, W: int) -> BigReal:
    if val == 0:
        return BigReal(Decimal(0), W, W)
    from .bigreal import fraction_to_decimal

    return BigReal(fraction_to_decimal(val, W), W, W)


# equidistant node tabulation -----------------------------------------------

_CHUNK = 64


def _fixmul(x, y, P: int, g: int = 8):
    """(x * y) >> P for P-bit fixed point, dropping bits that cannot reach the result.

    Absolute error is below 1 + 2^(1-g) units of 2^-P.
    """
    bx = x.bit_length()
    by = y.bit_length()
    keep = bx + by - P + g
    if keep <= 0:
        return mpz(0)
    a = bx - keep if bx > keep else 0
    b = by - keep if by > keep else 0
    sh = P - a - b
    prod = (x >> a) * (y >> b)
    return prod >> sh if sh >= 0 else prod << -sh


def _neg_eps_powers_fixed(N: int, eps: Fraction, P: int) -> list:
    """R[n] ~ n^(-eps) * 2^P for n = 0..N (R[0] unused); primes exactly, composites by products."""
    spf = list(range(N + 1))
    for i in range(2, math.isqrt(N) + 1):
        if spf[i] == i:
            for k in range(i * i, N + 1, i):
                if spf[k] == k:
                    spf[k] = i
    R = [mpz(0)] * (N + 1)
    R[1] = mpz(1) << P
    with gmpy2.context(gmpy2.get_context(), precision=P + 64):
        e = mpfr(gmpy2.mpq(eps.numerator, eps.denominator))
        for n in range(2, N + 1):
            p = spf[n]
            if p == n:
                R[n] = mpz(gmpy2.floor(gmpy2.mul_2exp(gmpy2.exp(-e * gmpy2.log(mpfr(n))), P)))
            else:
                R[n] = (R[p] * R[n // p]) >> P
    return R


def _power_sum_chunk(task):
    """Sum_{n in [lo, hi)} n^(-1 - j eps) for j = 1..J, as fixed-point integers."""
    lo, hi, Rs, J, P = task
    acc = [mpz(0)] * J
    one = mpz(1) << P
    for idx, n in enumerate(range(lo, hi)):
        r = Rs[idx]
        p = _fixmul(one // n, r, P)
        for j in range(J):
            acc[j] += p
            p = _fixmul(p, r, P)
    return acc


def _assemble_chunk(task):
    """Euler-Maclaurin tail and phi assembly for a run of nodes; returns decimal-scaled ints."""
    (js, S, A, p, q, N, P, C, thr_bits, scale) = task
    out = []
    thr = mpz(1) << thr_bits
    N2q2 = mpz(N) * N * q * q
    ten = mpz(10) ** scale
    half = mpz(1) << (P - 1)
    for j, S_j, A_j in zip(js, S, A):
        sn = q + j * p  # s = sn / q
        u = (A_j * sn) // (q * N)  # s * N^(-s-1)
        tail = mpz(0)
        for k in range(1, len(C) + 1):
            term = _fixmul(C[k - 1], u, P)
            tail += term
            if abs(term) < thr:
                break
            u = (u * ((sn + (2 * k - 1) * q) * (sn + 2 * k * q))) // N2q2
        else:
            raise ArithmeticError("Euler-Maclaurin correction series did not converge")
        X = S_j + (A_j >> 1) + tail
        v = (X * (j * p)) // q + N * A_j
        out.append(int((v * ten + half) >> P))
    return out


def _pmap(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


@dataclass(frozen=True)
class PhiTable:
    """phi(1 + j*eps) for j = 0..count-1 as integers scaled by 10^node_acc.

    Every node shares the same absolute accuracy: error below one unit in the
    ``node_acc``-th decimal place.
    """

    eps: Fraction
    values: tuple
    node_acc: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if not self.values or self.values[0] != 10**self.node_acc:
            raise ValueError("node 0 must be phi(1) = 1 exactly")

    @property
    def count(self) -> int:
        return len(self.values)

    def node(self, j: int) -> BigReal:
        v = self.values[j]
        val = Decimal(f"{v}E-{self.node_acc}")
        sig = self.node_acc + val.adjusted() + 1
        return BigReal(val, sig, sig)

    @property
    def nodes(self) -> list[BigReal]:
        return [self.node(j) for j in range(self.count)]

    def max_abs(self) -> int:
        return max(self.values)

    def to_text(self) -> str:
        e = self.eps
        lines = [f"# phi eps={e.numerator}/{e.denominator} count={self.count} acc={self.node_acc}"]
        d = self.node_acc
        for v in self.values:
            s = str(v).rjust(d + 1, "0")
            lines.append(f"{s[:-d]}.{s[-d:]}" if d > 0 else s)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PhiTable":
        lines = text.splitlines()
        header = lines[0].split()
        if header[:2] != ["#", "phi"]:
            raise ValueError("not a phi table file")
        fields = dict(item.split("=", 1) for item in header[2:])
        p, q = fields["eps"].split("/")
        eps = Fraction(int(p), int(q))
        count = int(fields["count"])
        acc = int(fields["acc"])
        values = []
        for line in lines[1 : count + 1]:
            whole, _, frac = line.strip().partition(".")
            if len(frac) != acc:
                raise ValueError("node line does not carry acc decimals")
            values.append(int(whole + frac))
        if len(values) != count:
            raise ValueError("phi table truncated")
        return cls(eps, tuple(values), acc)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "PhiTable":
        return cls.from_text(Path(path).read_text())


def tabulate_phi_nodes(eps, count: int, target_digits: int, workers: int = 1) -> PhiTable:
    """Tabulate phi(1 + j*eps), j = 0..count-1, each node good to target+guard decimals.

    The output is bit-identical for any ``workers >= 1``.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if count < 1:
        raise ValueError("count must be >= 1")
    W = target_digits + guard_digits(target_digits)
    if count == 1:
        return PhiTable(eps, (10**W,), W)
    p, q = eps.numerator, eps.denominator
    s_max = 1 + (count - 1) * eps
    W_int = W + 3 + max(0, math.ceil(math.log10(max(1.0, float(s_max - 1)))))
    N, M = em_plan(W_int + 1, 1.0)
    # larger s needs more corrections at the same split point
    M_cap = M
    while em_log10_remainder(float(s_max), N, M_cap) > -(W_int + 1):
        M_cap += 1
        if 2 * math.pi * N < float(s_max) + 2 * M_cap:
            N += N // 8 + 1
            M_cap = M
    M_cap += 4
    guard_bits = math.ceil(math.log2(N * count)) + 16
    P = math.ceil(W_int * LOG2_10) + guard_bits
    C = _em_coefficients_fixed(M_cap, P)
    R = _neg_eps_powers_fixed(N, eps, P)
    J = count - 1
    tasks = [(lo, min(lo + _CHUNK, N), R[lo : min(lo + _CHUNK, N)], J, P) for lo in range(1, N, _CHUNK)]
    S = [mpz(0)] * J
    for part in _pmap(_power_sum_chunk, tasks, workers):
        for j in range(J):
            S[j] += part[j]
    # N^(-s_j) = N^-1 * R[N]^j, same recurrence as the chunks
    A = []
    a = _fixmul((mpz(1) << P) // N, R[N], P)
    for _ in range(J):
        A.append(a)
        a = _fixmul(a, R[N], P)
    step = max(1, math.ceil(J / max(1, 4 * workers)))
    jobs = []
    for lo in range(0, J, step):
        hi = min(J, lo + step)
        js = list(range(lo + 1, hi + 1))
        jobs.append((js, S[lo:hi], A[lo:hi], p, q, N, P, C, guard_bits, W))
    values = [10**W]
    for part in _pmap(_assemble_chunk, jobs, workers):
        values.extend(part)
    return PhiTable(eps, tuple(values), W, meta={"N": N, "M": M, "bits": P})
