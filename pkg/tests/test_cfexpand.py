import math
import random
from fractions import Fraction

import gmpy2
import pytest
from hypothesis import given, settings, strategies as st

from stieltjes_lab.bigreal import BigReal
from stieltjes_lab.cfexpand import ContinuedFraction, contfrac, convergents, frac_part


def _pi(digits):
    with gmpy2.context(gmpy2.get_context(), precision=int(digits * 3.33) + 40):
        return BigReal.from_mpfr(gmpy2.const_pi(), digits, digits + 5)


def _sqrt2(digits):
    with gmpy2.context(gmpy2.get_context(), precision=int(digits * 3.33) + 40):
        return BigReal.from_mpfr(gmpy2.sqrt(gmpy2.mpfr(2)), digits, digits + 5)


def test_small_rational():
    cf = contfrac(Fraction(7, 3))
    assert cf.terms == [2, 3]
    assert cf.terminated_by == "exact-rational"
    assert contfrac(5).terms == [5]
    assert contfrac(Fraction(-7, 3)).terms == [-3, 1, 2]


def test_pi_prefix():
    cf = contfrac(_pi(20))
    assert cf.terms[:5] == [3, 7, 15, 1, 292]


def test_sqrt2_all_twos():
    cf = contfrac(_sqrt2(500))
    assert cf.a0 == 1
    assert cf.length > 500
    assert set(cf.quotients) == {2}


def test_frac_part_floor():
    f = frac_part(BigReal.parse("-1.25"))
    assert f.value == BigReal.parse("0.75").value
    assert frac_part(BigReal.parse("2.5")).value == BigReal.parse("0.5").value


def test_nmax_cap():
    cf = contfrac(_pi(200), nmax=10)
    assert cf.length == 10 and cf.terminated_by == "nmax-limit"


def test_rejects_untrusted_input():
    with pytest.raises(ValueError):
        contfrac(BigReal(BigReal.parse("1.5").value, 0, 2))


def _check_identities(cf):
    conv = convergents(cf)
    P, Q = conv.P, conv.Q
    for k in range(1, len(P)):
        assert P[k] * Q[k - 1] - P[k - 1] * Q[k] == (-1) ** (k + 1)
        assert math.gcd(P[k], Q[k]) == 1
        assert Q[k] > Q[k - 1] or k == 1


def test_determinant_identity_pi():
    _check_identities(contfrac(_pi(300)))


def test_shifted_seed_equivalence():
    # seeding P_0 = 1, Q_0 = a1 for the fractional part gives our Q shifted by one
    cf = contfrac(_pi(200))
    Q = convergents(cf).Q
    a = cf.quotients
    p_prev, p = 0, 1
    q_prev, q = 1, a[0]
    alt_q = [q]
    for ak in a[1:]:
        p_prev, p = p, ak * p + p_prev
        q_prev, q = q, ak * q + q_prev
        alt_q.append(q)
    assert alt_q == Q[1:]


def test_convergents_approximate_input():
    x = _pi(300)
    cf = contfrac(x)
    conv = convergents(cf)
    err = abs(conv.last() - x.to_fraction())
    q = conv.Q[-1]
    assert err < Fraction(1, q * q)


@settings(max_examples=40, deadline=None)
@given(st.fractions(min_value=-1000, max_value=1000, max_denominator=10**12))
def test_rational_roundtrip(x):
    cf = contfrac(x)
    assert convergents(cf).last() == x
    _check_identities(cf)


def test_perturbation_keeps_prefix():
    rng = random.Random(7)
    digits = "".join(rng.choice("0123456789") for _ in range(400))
    x = BigReal.parse("0." + digits)
    # bump the last trusted digit by at most one unit
    last = int(digits[-1])
    bumped = digits[:-1] + str((last + 1) % 10 if last < 9 else 8)
    y = BigReal.parse("0." + bumped)
    a, b = contfrac(x), contfrac(y)
    n = min(a.length, b.length)
    assert n > 300
    assert a.quotients[: n - 5] == b.quotients[: n - 5]


def test_json_roundtrip(tmp_path):
    cf = contfrac(_pi(100), label=3)
    rec = cf.to_record()
    assert set(rec) == {"n", "acc", "a", "terminated_by"}
    p = tmp_path / "cf.json"
    cf.save(p)
    assert ContinuedFraction.load(p) == cf


def test_invalid_records_rejected():
    with pytest.raises(ValueError):
        ContinuedFraction(1, (0, 2), 5, "accuracy-limit")
    with pytest.raises(ValueError):
        ContinuedFraction(1, (2,), 5, "ran-out")
