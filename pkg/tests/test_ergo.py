import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncdev import ergo
from ncdev.errors import NotMeanZero, WindowOverflow

seeds = st.integers(0, 2**32 - 1)
SYS = ergo.ShiftSystem(site_dim=2, W=8)


def _rand(seed, start, width, mean_zero=True):
    return SYS.random_element(np.random.default_rng(seed), start, width, mean_zero)


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(-4, 3), st.integers(1, 3), st.integers(-5, 5))
def test_shift_commutes_with_expectation(seed, start, width, j):
    x = _rand(seed, start, width, mean_zero=False)
    lhs = SYS.E(SYS.shift(x, 1), j)
    rhs = SYS.shift(SYS.E(x, j - 1), 1)
    assert lhs.dist(rhs) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(-4, 2), st.integers(1, 3))
def test_difference_telescoping_and_orthogonality(seed, start, width):
    x = _rand(seed, start, width, mean_zero=False)
    ds = [SYS.d(x, j) for j in range(-SYS.W, SYS.W + 1)]
    total = ergo.LocalOp.scalar(2, x.trace())
    for dj in ds:
        total = total + dj
    assert total.dist(x) <= 1e-12
    # d_j x lies in A_j and is killed by E_{j-1}
    for j, dj in zip(range(-SYS.W, SYS.W + 1), ds):
        assert SYS.E(dj, j).dist(dj) <= 1e-12
        assert SYS.E(dj, j - 1).norm2() <= 1e-12
    # pythagoras for the orthogonal differences
    energy = abs(x.trace()) ** 2 + sum(dj.norm2() ** 2 for dj in ds)
    assert energy == pytest.approx(x.norm2() ** 2, rel=1e-10)


def test_single_site_closed_form():
    f = _rand(1, 0, 1)
    pair = ergo.gordin_decompose(SYS, f)
    assert pair.m.dist(SYS.shift(f, -1)) <= 1e-14
    assert pair.g.dist(-SYS.shift(f, -1)) <= 1e-14
    assert pair.residual <= 1e-14


def test_coboundary_has_no_martingale_part():
    h = _rand(2, -1, 2)
    f = h - SYS.shift(h, 1)
    pair = ergo.gordin_decompose(SYS, f)
    assert pair.m.is_zero(1e-12)
    assert pair.residual <= 1e-12


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(-3, 2), st.integers(1, 3))
def test_gordin_identities(seed, start, width):
    f = _rand(seed, start, width)
    pair = ergo.gordin_decompose(SYS, f)
    assert pair.residual <= 1e-10 * max(1.0, f.norm2())
    assert pair.difference_violation(SYS) <= 1e-10 * max(1.0, f.norm2())
    # m lives in A_{-1} and has zero conditional expectation onto A_{-2}
    assert SYS.E(pair.m, -1).dist(pair.m) <= 1e-10
    assert SYS.E(pair.m, -2).norm2() <= 1e-10


def test_partial_sum_l2_growth():
    f = _rand(3, 0, 1)
    for n in (0, 1, 3, 6):
        sn = ergo.partial_sum(SYS, f, n)
        assert sn.norm2() ** 2 == pytest.approx((n + 1) * f.norm2() ** 2, rel=1e-12)


def test_local_martingale_matches_partial_sum():
    f = _rand(4, 0, 2)
    pair = ergo.gordin_decompose(SYS, f)
    mart = ergo.local_martingale(SYS, pair.m, 3)
    mart.validate()
    direct = ergo.partial_sum(SYS, pair.m, 3)
    assert np.linalg.norm(mart.last.mat - direct.extend(pair.m.support[0], pair.m.support[1] + 3)) <= 1e-12


def test_errors():
    with pytest.raises(WindowOverflow):
        SYS.shift(_rand(0, 7, 2), 1)
    with pytest.raises(WindowOverflow):
        SYS.element(np.eye(4), 8)
    with pytest.raises(NotMeanZero):
        ergo.gordin_decompose(SYS, SYS.element(np.eye(2), 0))
    with pytest.raises(ValueError):
        ergo.partial_sum(SYS, _rand(0, 0, 1), -1)


@pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
def test_ergodic_rate_holds(p):
    f = _rand(5, 0, 2)
    f = (f + f.adj) * 0.5
    reps = ergo.verify_ergodic_rate(SYS, f, p, [1, 2, 4])
    for rep in reps:
        assert rep.inequality_id == "ERGODIC_RATE"
        assert rep.holds, rep.failed_checks
