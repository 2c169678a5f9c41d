from fractions import Fraction

import mpmath
import pytest
import sympy

from stieltjes_lab.bigreal import BigReal, fraction_to_decimal
from stieltjes_lab.errors import InsufficientNodesError, InsufficientPrecisionError
from stieltjes_lab.mpzeta import phi, tabulate_phi_nodes
from stieltjes_lab.stieltjes import (
    A_k_crosscheck,
    StieltjesValue,
    alpha_coeffs,
    beta,
    gamma_direct_oracle,
    gamma_exact,
    gamma_n,
    gamma_partial_sum,
    plan_nodes,
    stirling_triangle,
)


@pytest.fixture(scope="module")
def tenth_run():
    eps = Fraction(1, 10)
    D, J = plan_nodes(20, 60, eps)
    table = tabulate_phi_nodes(eps, J, D)
    alphas = alpha_coeffs(table, J - 1)
    stir = stirling_triangle(J - 1, 22)
    return table, alphas, stir


def _mp_stieltjes(n, dps=80):
    mpmath.mp.dps = dps
    return mpmath.stieltjes(n)


def test_stirling_small_values():
    S = stirling_triangle(6)
    assert S(2, 1) == -1
    assert S(3, 2) == -3 and S(3, 1) == 2
    for k in range(7):
        assert S(k, k) == 1
    for k in range(1, 7):
        assert S(k, 0) == 0


def test_stirling_matches_rising_factorial():
    x = sympy.symbols("x")
    S = stirling_triangle(6)
    for k in range(7):
        rising = sympy.expand(sympy.prod([x + i for i in range(k)]))
        conv = sympy.expand((-1) ** k * sum((-1) ** i * S(k, i) * x**i for i in range(k + 1)))
        assert sympy.simplify(rising - conv) == 0, k


def test_stirling_column_truncation_agrees():
    full = stirling_triangle(40)
    cut = stirling_triangle(40, 5)
    for k in range(41):
        for i in range(min(k, 5) + 1):
            assert full(k, i) == cut(k, i)


def test_beta_zero_below_diagonal():
    eps = Fraction(1, 4)
    for n in range(5):
        for k in range(n + 1):
            assert beta(n, k, eps) == 0


def test_beta_first_column():
    # beta_0k = -1 / (k eps)
    eps = Fraction(1, 3)
    for k in range(1, 10):
        assert beta(0, k, eps) == Fraction(-1, k) / eps


def test_alpha_small_cases():
    eps = Fraction(1, 2)
    table = tabulate_phi_nodes(eps, 3, 30)
    A = alpha_coeffs(table, 2)
    assert A.ints[0] == 10**A.scale
    p15 = phi(Fraction(3, 2), 30).to_fraction()
    p2 = phi(2, 30).to_fraction()
    a1 = A.alpha(1).to_fraction()
    assert abs(a1 - (1 - p15)) < Fraction(1, 10**29)
    assert A.alpha(1).truncated(17) == "-0.30618767434274417"
    a2 = A.alpha(2).to_fraction()
    assert abs(a2 - (1 - 2 * p15 + p2)) < Fraction(1, 10**29)


def test_alpha_acc_non_increasing(tenth_run):
    _, A, _ = tenth_run
    acc = A.alpha_acc
    assert all(acc[i] >= acc[i + 1] for i in range(len(acc) - 1))
    assert A.alpha(0).value == 1


def test_alpha_insufficient_nodes():
    table = tabulate_phi_nodes(Fraction(1, 2), 4, 20)
    with pytest.raises(InsufficientNodesError):
        alpha_coeffs(table, 4)


def test_gamma_against_mpmath(tenth_run):
    _, A, S = tenth_run
    for n in (0, 1, 2, 5, 10, 20):
        v = gamma_n(n, A, S, work_digits=70)
        assert v.claimed_acc >= 60
        ref = _mp_stieltjes(n)
        mpmath.mp.dps = 80
        got = mpmath.mpf(v.digits)
        assert abs(got - ref) <= abs(ref) * mpmath.mpf(10) ** (1 - v.claimed_acc), n


def test_gamma_exact_sum_matches_beta_form(tenth_run):
    _, A, S = tenth_run
    for n in (0, 3):
        k = n + 25
        assert gamma_exact(n, A, S, k) == gamma_partial_sum(n, A, S, k)


def test_gamma_never_reads_low_alphas(tenth_run):
    _, A, S = tenth_run
    n = 4
    poisoned = type(A)(A.eps, tuple(7 if k <= n else a for k, a in enumerate(A.ints)), A.scale, A.alpha_acc)
    assert gamma_n(n, A, S, work_digits=70).digits == gamma_n(n, poisoned, S, work_digits=70).digits


def test_cutoff_saturation(tenth_run):
    _, A, S = tenth_run
    for n in (0, 7, 15):
        v = gamma_n(n, A, S, work_digits=70)
        longer = gamma_exact(n, A, S, v.k0_used + 10)
        ext = BigReal(fraction_to_decimal(longer, v.claimed_acc + 5), v.claimed_acc, v.claimed_acc + 5)
        assert ext.truncated(v.claimed_acc) == v.digits


def test_gamma_too_few_nodes():
    eps = Fraction(1, 10)
    table = tabulate_phi_nodes(eps, 30, 60)
    A = alpha_coeffs(table, 29)
    S = stirling_triangle(29, 5)
    with pytest.raises(InsufficientNodesError):
        gamma_n(0, A, S, work_digits=70)


def test_gamma_low_precision_nodes_raise():
    # nodes carry too few digits to certify anything for a large index
    eps = Fraction(1, 10)
    table = tabulate_phi_nodes(eps, 200, 5)
    A = alpha_coeffs(table, 199)
    S = stirling_triangle(199, 41)
    with pytest.raises((InsufficientPrecisionError, InsufficientNodesError)):
        gamma_n(40, A, S, work_digits=15)


def test_gamma_eps_independence_small():
    out = {}
    for eps in (Fraction(1, 4), Fraction(1, 2)):
        D, J = plan_nodes(1, 30, eps)
        t = tabulate_phi_nodes(eps, J, D)
        out[eps] = gamma_n(1, alpha_coeffs(t, J - 1), stirling_triangle(J - 1, 3), work_digits=40)
    a, b = out.values()
    d = min(a.claimed_acc, b.claimed_acc)
    assert d >= 30
    assert a.gamma.truncated(d) == b.gamma.truncated(d)


def test_stieltjes_value_roundtrip(tmp_path, tenth_run):
    _, A, S = tenth_run
    v = gamma_n(3, A, S, work_digits=70)
    p = tmp_path / "g.txt"
    v.save(p)
    head = p.read_text().splitlines()[0]
    assert head == f"# stieltjes n=3 eps=1/10 k0={v.k0_used} acc={v.claimed_acc}"
    back = StieltjesValue.load(p)
    assert back.digits == v.digits and back.claimed_acc == v.claimed_acc


def test_direct_oracle_basic():
    assert gamma_direct_oracle(0, 1, 20).value == 1
    g = gamma_direct_oracle(1, 20000, 30)
    assert str(g.value).startswith("-0.072")


def test_direct_oracle_sign_and_digits_match_main(tenth_run):
    _, A, S = tenth_run
    for n in (0, 1, 2):
        o = gamma_direct_oracle(n, 30000, 20)
        v = gamma_n(n, A, S, work_digits=70)
        assert (o.value < 0) == (v.gamma.value < 0)
        d = o.acc_digits
        if n < 2:
            assert d >= 2
        assert abs(o.to_fraction() - v.gamma.to_fraction()) < Fraction(10) ** (o.exponent - d + 2)


def test_a_k_forms():
    for k in range(11):
        a, b = A_k_crosscheck(k, 30)
        assert a.truncated(30) == b.truncated(30) or a.rounded(29) == b.rounded(29), k
    mpmath.mp.dps = 50
    a0, _ = A_k_crosscheck(0, 30)
    assert abs(mpmath.mpf(str(a0.value)) - mpmath.pi**2 / 6) < mpmath.mpf(10) ** -30
    a1, _ = A_k_crosscheck(1, 30)
    assert abs(mpmath.mpf(str(a1.value)) - (mpmath.zeta(2) - 3 * mpmath.zeta(4))) < mpmath.mpf(10) ** -30


def test_gamma_61_and_62_digits():
    eps = Fraction(1, 10)
    D, J = plan_nodes(62, 200, eps)
    t = tabulate_phi_nodes(eps, J, D)
    A = alpha_coeffs(t, J - 1)
    S = stirling_triangle(J - 1, 63)
    g61 = gamma_n(61, A, S, work_digits=220)
    g62 = gamma_n(62, A, S, work_digits=220)
    assert g61.digits.startswith("111670.9578149410793387893")
    mpmath.mp.dps = 40
    assert g62.digits.startswith(mpmath.nstr(mpmath.stieltjes(62), 25, strip_zeros=False)[:20])
    assert g62.digits.startswith("5333.665210500764343")
