"""Stieltjes constants from finite differences of phi(s) = (s - 1) zeta(s).

With alpha_k = sum_j (-1)^j C(k, j) phi(1 + j eps) the constants are

    gamma_n = sum_{k > n} beta_nk alpha_k,
    beta_nk = (-1)^(n+k) n! S(k, n+1) / (k! eps^(n+1)),

S being the signed Stirling numbers of the first kind.  The alphas come
from an exact integer difference table, the weights are exact rationals, so
the only errors are node rounding (amplified by at most 2^k) and truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

import gmpy2
from gmpy2 import mpfr, mpz

from .bigreal import BigReal, digits_to_bits, exponent10, fraction_to_decimal, guard_digits
from .errors import InsufficientNodesError, InsufficientPrecisionError
from .mpzeta import PhiTable, bernoulli, zeta_real

LOG10_2 = math.log10(2)


@dataclass(frozen=True)
class StirlingTriangle:
    """Signed Stirling numbers of the first kind, x(x-1)...(x-k+1) = sum_i S(k,i) x^i.

    ``rows[k]`` holds S(k, 0..min(k, max_col)).
    """

    rows: tuple
    max_col: int

    @property
    def k_max(self) -> int:
        return len(self.rows) - 1

    def __call__(self, k: int, i: int) -> int:
        if i > k or i < 0:
            return 0
        if i > self.max_col:
            raise IndexError(f"column {i} not stored (max_col={self.max_col})")
        return int(self.rows[k][i])


def stirling_triangle(k_max: int, max_col: int | None = None) -> StirlingTriangle:
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    max_col = k_max if max_col is None else min(max_col, k_max)
    rows = [(mpz(1),)]
    prev = [mpz(1)]
    for k in range(k_max):
        width = min(k + 1, max_col) + 1
        cur = [mpz(0)] * width
        for i in range(width):
            lower = prev[i - 1] if 1 <= i <= len(prev) else 0
            same = prev[i] if i < len(prev) else 0
            cur[i] = lower - k * same
        rows.append(tuple(cur))
        prev = cur
    return StirlingTriangle(tuple(rows), max_col)


@dataclass(frozen=True)
class AlphaSeries:
    """alpha_k as integers scaled by 10^scale; alpha_acc[k] is the absolute-places estimate."""

    eps: Fraction
    ints: tuple
    scale: int
    alpha_acc: tuple

    @property
    def k_max(self) -> int:
        return len(self.ints) - 1

    def alpha(self, k: int) -> BigReal:
        v = self.ints[k]
        val = Decimal(f"{v}E-{self.scale}")
        if v == 0:
            return BigReal(val, 0, max(1, self.scale))
        work = max(1, self.scale + val.adjusted() + 1)
        acc = max(0, min(work, self.alpha_acc[k] + val.adjusted() + 1))
        return BigReal(val, acc, work)

    @property
    def alphas(self) -> list[BigReal]:
        return [self.alpha(k) for k in range(len(self.ints))]


def alpha_coeffs(table: PhiTable, k_max: int) -> AlphaSeries:
    """alpha_k for k = 0..k_max from the exact integer difference table of the nodes."""
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    if k_max >= table.count:
        raise InsufficientNodesError(
            f"alpha_{k_max} needs {k_max + 1} nodes, table has {table.count}"
        )
    row = [mpz(v) for v in table.values[: k_max + 1]]
    out = [row[0]]
    # row holds Delta^k phi(1 + j eps); alpha_k = (-1)^k Delta^k phi(1)
    for k in range(1, k_max + 1):
        row = [row[i + 1] - row[i] for i in range(len(row) - 1)]
        out.append(row[0] if k % 2 == 0 else -row[0])
    acc = tuple(table.node_acc - math.ceil(k * LOG10_2) - 1 for k in range(k_max + 1))
    return AlphaSeries(table.eps, tuple(int(a) for a in out), table.node_acc, acc)


def beta(n: int, k: int, eps: Fraction, stirling: StirlingTriangle | None = None) -> Fraction:
    """Exact weight beta_nk; zero for k <= n."""
    if k <= n:
        return Fraction(0)
    eps = Fraction(eps)
    S = stirling(k, n + 1) if stirling is not None else stirling_triangle(k, n + 1)(k, n + 1)
    sign = -1 if (n + k) % 2 else 1
    return Fraction(sign * math.factorial(n) * S, math.factorial(k)) / eps ** (n + 1)


@dataclass(frozen=True)
class StieltjesValue:
    n: int
    gamma: BigReal
    eps_used: Fraction
    k0_used: int
    claimed_acc: int
    stop_reason: str = "converged"
    error_bound: float = 0.0

    def __post_init__(self):
        if self.claimed_acc > self.gamma.acc_digits:
            raise ValueError("claimed_acc exceeds the value's trusted digits")

    @property
    def digits(self) -> str:
        """The claimed digits, truncated, as fixed-point text."""
        return self.gamma.truncated(self.claimed_acc)

    def to_text(self) -> str:
        e = self.eps_used
        return (
            f"# stieltjes n={self.n} eps={e.numerator}/{e.denominator} "
            f"k0={self.k0_used} acc={self.claimed_acc}\n{self.digits}\n"
        )

    @classmethod
    def from_text(cls, text: str) -> "StieltjesValue":
        lines = text.strip().splitlines()
        head = lines[0].split()
        if head[:2] != ["#", "stieltjes"]:
            raise ValueError("not a stieltjes value file")
        f = dict(item.split("=", 1) for item in head[2:])
        p, q = f["eps"].split("/")
        acc = int(f["acc"])
        gamma = BigReal(Decimal(lines[1].strip()), acc, acc)
        return cls(int(f["n"]), gamma, Fraction(int(p), int(q)), int(f["k0"]), acc)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "StieltjesValue":
        return cls.from_text(Path(path).read_text())


def _log_abs(x) -> float:
    """Natural log of |x| for a huge integer or Fraction, -inf for zero."""
    if x == 0:
        return -math.inf
    if isinstance(x, Fraction):
        return _log_abs(x.numerator) - _log_abs(x.denominator)
    x = abs(int(x))
    b = x.bit_length()
    if b < 1000:
        return math.log(x)
    return math.log(x >> (b - 64)) + (b - 64) * math.log(2)


def _certified_digits(value: Fraction, err: Fraction, cap: int) -> int:
    """Largest d <= cap such that every point of value +/- err truncates to the same d digits."""
    if value == 0:
        return 0
    lo, hi = abs(value) - err, abs(value) + err
    if lo <= 0:
        return 0
    e_hi = exponent10(hi)
    if exponent10(lo) != e_hi:
        return 0

    def same(d):
        scale = Fraction(10) ** (d - 1 - e_hi)
        a, b = lo * scale, hi * scale
        return a.numerator // a.denominator == b.numerator // b.denominator

    # agreement is monotone in d; binary search
    guess = int(math.floor((_log_abs(value) - _log_abs(err)) / math.log(10))) if err else cap
    left, right = 0, max(0, min(cap, guess + 2))
    while left < right:
        mid = (left + right + 1) // 2
        if same(mid):
            left = mid
        else:
            right = mid - 1
    return left




def gamma_n(
    n: int,
    alphas: AlphaSeries,
    stirling: StirlingTriangle,
    work_digits: int | None = None,
    extra_terms: int = 10,
    k_stop: int | None = None,
) -> StieltjesValue:
    """gamma_n by the truncated beta-alpha sum, with an error bound on the claimed digits.

    A term counts as trusted while |alpha_k| exceeds ten times its worst-case
    rounding error 2^k units.  Summation stops after two consecutive terms
    below 10^-work_digits of the running sum ("converged") or when alpha
    runs into noise ("noise").  ``extra_terms`` further terms must exist; their
    size enters the error bound.  ``k_stop`` forces the last summed index.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    eps = alphas.eps
    K_avail = min(alphas.k_max, stirling.k_max)
    if stirling.max_col < n + 1:
        raise ValueError("Stirling triangle does not hold column n+1")
    W = work_digits if work_digits is not None else alphas.scale
    ln10 = math.log(10)
    ln_beta_base = math.lgamma(n + 1) - (n + 1) * math.log(float(eps))
    ln_unit = -alphas.scale * ln10

    def ln_beta(k):
        return ln_beta_base + _log_abs(stirling(k, n + 1)) - math.lgamma(k + 1)

    def ln_term(k):
        return ln_beta(k) + _log_abs(alphas.ints[k]) + ln_unit

    def ln_noise(k):
        return ln_beta(k) + k * math.log(2) + ln_unit

    # pass 1: locate the cutoff using float logs only
    ln_run = -math.inf
    small = 0
    k0 = None
    reason = "converged"
    for k in range(n + 1, K_avail + 1):
        A = alphas.ints[k]
        if k_stop is None and _log_abs(A) < math.log(10) + k * math.log(2):
            k0, reason = k - 1, "noise"
            break
        lt = ln_term(k)
        ln_run = max(ln_run, lt)
        if k_stop is not None:
            if k == k_stop:
                k0 = k
                break
            continue
        if lt < ln_run - W * ln10:
            small += 1
            if small >= 2:
                k0 = k
                break
        else:
            small = 0
    if k0 is None or k0 < n + 1:
        raise InsufficientNodesError(
            f"gamma_{n}: cutoff not reached within {K_avail} alpha coefficients"
        )
    if k0 + extra_terms > K_avail:
        raise InsufficientNodesError(
            f"gamma_{n}: cutoff k0={k0} leaves fewer than {extra_terms} check terms"
        )

    K = k0
    gamma = gamma_exact(n, alphas, stirling, K)

    # error bound: rounding noise of every summed alpha plus the truncation tail
    ln_noise_list = [ln_noise(k) for k in range(n + 1, K + 1)]
    ln_tail = [ln_term(k) for k in range(K + 1, K + 1 + extra_terms)]
    ln_tail += [ln_noise(k) for k in range(K + 1, K + 1 + extra_terms)]
    ln_last = [ln_term(k) + math.log(10) for k in (K - 1, K) if k > n]
    parts = ln_noise_list + ln_tail + ln_last
    if reason == "noise":
        parts.append(ln_noise(K + 1) + math.log(30))
    ln_err = _logsumexp(parts)
    err = _fraction_from_ln(ln_err)

    ln_gamma = _log_abs(gamma)
    if gamma == 0 or ln_err >= ln_gamma:
        raise InsufficientPrecisionError(f"gamma_{n}: error bound exceeds the value")
    if work_digits is None:
        work = max(1, alphas.scale + math.floor(ln_gamma / ln10) + 1)
    else:
        work = work_digits
    value = fraction_to_decimal(gamma, work + 5)
    claimed = _certified_digits(gamma, err, work)
    if claimed < 1:
        raise InsufficientPrecisionError(f"gamma_{n}: no digit could be certified")
    big = BigReal(value, claimed, work + 5)
    return StieltjesValue(n, big, eps, K, claimed, reason, float(ln_err / ln10))


def gamma_exact(n: int, alphas: AlphaSeries, stirling: StirlingTriangle, k_last: int) -> Fraction:
    """Exact sum_{k=n+1}^{k_last} beta_nk alpha_k for the stored (rounded) alphas."""
    p, q = alphas.eps.numerator, alphas.eps.denominator
    # sum_k (-1)^(n+k) S(k,n+1) (K!/k!) A_k over one common denominator
    total = mpz(0)
    ratio = mpz(1)  # K!/k!, built downward from k = K
    for k in range(k_last, n, -1):
        t = stirling.rows[k][n + 1] * ratio * alphas.ints[k]
        total += t if (n + k) % 2 == 0 else -t
        ratio *= k
    den = mpz(p) ** (n + 1) * math.factorial(k_last) * mpz(10) ** alphas.scale
    num = math.factorial(n) * mpz(q) ** (n + 1) * total
    return Fraction(int(num), int(den))


def _logsumexp(xs):
    xs = [x for x in xs if x != -math.inf]
    if not xs:
        return -math.inf
    m = max(xs)
    return m + math.log(sum(math.exp(x - m) for x in xs))


def _fraction_from_ln(ln_x: float) -> Fraction:
    """A rational upper bound for exp(ln_x), padded by a factor of 2."""
    d = math.floor(ln_x / math.log(10))
    mant = math.exp(ln_x - d * math.log(10))
    return Fraction(math.ceil(2 * mant * 1000), 1000) * Fraction(10) ** d


def gamma_partial_sum(n: int, alphas: AlphaSeries, stirling: StirlingTriangle, k_last: int) -> Fraction:
    """Exact value of sum_{k=n+1}^{k_last} beta_nk alpha_k."""
    total = Fraction(0)
    for k in range(n + 1, k_last + 1):
        total += beta(n, k, alphas.eps, stirling) * Fraction(alphas.ints[k], 10**alphas.scale)
    return total


def gamma_direct_oracle(n: int, m: int, target_digits: int) -> BigReal:
    """Partial expression sum_{k<=m} (ln k)^n / k - (ln m)^(n+1)/(n+1).

    This converges like (ln m)^n / m, so acc_digits reflects that distance
    from the limit rather than the evaluation precision.
    """
    if n < 0 or m < 1:
        raise ValueError("need n >= 0 and m >= 1")
    bits = digits_to_bits(target_digits + guard_digits(target_digits) + len(str(m)))
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        total = mpfr(0)
        for k in range(1, m + 1):
            lk = gmpy2.log(mpfr(k))
            total += (lk**n if n else mpfr(1)) / k
        lm = gmpy2.log(mpfr(m))
        val = total - lm ** (n + 1) / (n + 1)
        if val == 0:
            return BigReal(Decimal(0), 0, target_digits)
        e = math.floor(math.log10(abs(val)))
        lmf = max(float(lm), 1.0)
        dist = n * math.log10(lmf) - math.log10(2 * m) if m > 1 else 0.0
        acc = int(max(0, min(target_digits, e - math.floor(dist))))
        return BigReal.from_mpfr(val, acc, target_digits)


def A_k_crosscheck(k: int, target_digits: int) -> tuple[BigReal, BigReal]:
    """A_k = sum_j (-1)^j C(k,j) (2j+1) zeta(2j+2), in its zeta form and its Bernoulli form."""
    if k < 0:
        raise ValueError("k must be >= 0")
    # the alternating sum cancels about k*log10(2) + log10(k+1) digits
    extra = math.ceil(k * LOG10_2 + math.log10(2 * k + 1)) + 5
    shift = 0
    while True:
        d = target_digits + extra + shift
        z_form, b_form, bits = _a_k_forms(k, d)
        e = math.floor(math.log10(abs(z_form)))
        if e >= -shift:
            break
        shift = -e + 2
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        return (
            BigReal.from_mpfr(z_form, target_digits, target_digits + 5),
            BigReal.from_mpfr(b_form, target_digits, target_digits + 5),
        )


def _a_k_forms(k: int, d: int):
    bits = digits_to_bits(d + guard_digits(d))
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        z_form = mpfr(0)
        b_form = mpfr(0)
        two_pi = 2 * gmpy2.const_pi()
        for j in range(k + 1):
            c = math.comb(k, j) * (2 * j + 1)
            z = zeta_real(2 * j + 2, d).to_mpfr(bits)
            z_form += -c * z if j % 2 else c * z
            b = bernoulli(2 * j + 2)
            b_form += c * two_pi ** (2 * j + 2) * gmpy2.mpq(b.numerator, b.denominator) / gmpy2.fac(2 * j + 2)
        return z_form, b_form / 2, bits


def _decay_step(k: int, log10_eps: float) -> float:
    """Rough digits gained by the k-th difference: log10(1/eps) - log10(ln(k)/2)."""
    h = 0.5 * math.log(k) if k >= 2 else 0.0
    return max(0.05, -log10_eps - math.log10(h)) if h > 0 else -log10_eps


def plan_nodes(
    n_max: int, target_digits: int, eps, magnitude_floor: int = -6, extra_terms: int = 10
) -> tuple[int, int]:
    """Initial (node digits, node count) guess for gamma_0..gamma_n_max at target_digits.

    ``magnitude_floor`` is the assumed smallest log10|gamma_n|; the pipeline
    retries with more nodes or digits when the guess falls short.
    """
    eps = Fraction(eps)
    le = math.log10(float(eps))
    places = target_digits + guard_digits(target_digits) - magnitude_floor
    ln10 = math.log(10)
    # |S(k, i)| for i <= n_max+1 as floats rescaled each row; shift holds log10 of the scale
    row = [1.0] + [0.0] * (n_max + 1)
    shift = 0.0
    log_fact = 0.0
    alpha_log = 0.0
    worst_noise = -math.inf
    k = 0
    while k < 200000:
        row = [(row[i - 1] if i else 0.0) + k * row[i] for i in range(n_max + 2)]
        k += 1
        top = max(row)
        row = [x / top for x in row]
        shift += math.log10(top)
        log_fact += math.log10(k)
        alpha_log -= _decay_step(k, le)
        done = k > n_max + 1
        for n in range(min(n_max, k - 1) + 1):
            if row[n + 1] <= 0:
                continue
            log_beta = (
                math.log10(row[n + 1]) + shift + math.lgamma(n + 1) / ln10 - log_fact - (n + 1) * le
            )
            worst_noise = max(worst_noise, log_beta + k * LOG10_2)
            if log_beta + alpha_log > -places - 1:
                done = False
        if done:
            break
    count = k + extra_terms + max(4, k // 20) + 1
    noise_digits = worst_noise + 2 + math.log10(count)
    node_digits = math.ceil(places + noise_digits + LOG10_2 * extra_terms)
    return max(node_digits, target_digits), count
