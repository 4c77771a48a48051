import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncdev import specalg as sa
from ncdev.condexp import Filtration, Martingale, SubalgebraSpec
from ncdev.ensembles import EnsembleSpec, generate
from ncdev.errors import NotMartingale, NotSelfAdjoint
from ncdev.mart import (
    bg_ratio,
    column_ratio,
    cuculescu,
    cuculescu_lp_bound,
    dilate,
    dilate_martingale,
    large_part_second_moment,
    square_functions,
    truncate,
)
from ncdev.specalg import TracialAlgebra

from conftest import op, rand_matrix

seeds = st.integers(0, 2**32 - 1)


def _sa_martingale(seed, d=8, n=4):
    return generate(EnsembleSpec("BOUNDED_SELF_ADJOINT", {"d": d, "n": n}), seed)


@settings(max_examples=20, deadline=None)
@given(seeds, st.sampled_from([0.5, 1.0, 2.0, 4.0]))
def test_cuculescu_properties(seed, frac):
    m = _sa_martingale(seed)
    lam = frac * sa.op_norm(m.last)
    fam = cuculescu(m, lam)
    for name, v in fam.violations().items():
        assert v <= 1e-9, (name, v)
    for p in (1.0, 2.0, 3.0):
        assert cuculescu_lp_bound(fam, p)["holds"]


def test_cuculescu_below_level_is_identity():
    m = _sa_martingale(3)
    lam = max(sa.op_norm(x) for x in m.elements) * 1.01
    fam = cuculescu(m, lam)
    assert np.allclose(fam.q_last.mat, np.eye(m.alg.dim))


def test_cuculescu_needs_self_adjoint():
    m = generate(EnsembleSpec("SITE_TENSOR", {"n": 2, "site_dim": 2, "self_adjoint": False}), 1)
    with pytest.raises(NotSelfAdjoint):
        cuculescu(m, 1.0)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 8))
def test_dilation_preserves_distribution(seed, d):
    rng = np.random.default_rng(seed)
    x = op(rand_matrix(rng, d))
    j = dilate(x)
    assert j.is_self_adjoint
    s = sa.singular_values(x)
    for r in np.concatenate([s, s * 0.999, [0.0]]):
        assert sa.distribution(j, r) == sa.distribution(x, r)
    assert abs(sa.op_norm(j) - sa.op_norm(x)) <= 1e-10 * max(1, sa.op_norm(x))
    sq = j.mat @ j.mat
    assert np.allclose(sq[:d, :d], x.mat @ x.mat.conj().T)
    assert np.allclose(sq[d:, d:], x.mat.conj().T @ x.mat)


def test_dilated_martingale_is_martingale():
    m = generate(EnsembleSpec("SITE_TENSOR", {"n": 3, "site_dim": 2, "self_adjoint": False}), 2)
    jm = dilate_martingale(m)
    jm.validate()
    assert jm.is_self_adjoint


@settings(max_examples=15, deadline=None)
@given(seeds, st.floats(0.05, 2.0))
def test_truncation_pair(seed, u):
    m = _sa_martingale(seed)
    pair = truncate(m, u)
    for name, v in pair.violations().items():
        assert v <= 1e-10, (name, v)
    pair.y().validate()
    pair.z().validate()


def test_truncation_needs_centered_start():
    alg = TracialAlgebra.flat(2)
    filt = Filtration(alg, (SubalgebraSpec.block_diagonal([[0], [1]]),))
    m = Martingale(filt, (op(np.diag([2.0, 1.0])),))
    with pytest.raises(NotMartingale):
        truncate(m, 1.0)


def test_large_part_second_moment():
    x = op(np.diag([3.0, -1.0, 0.5, 0.0]))
    assert large_part_second_moment(x, 0.9) == pytest.approx((9 + 1) / 4)
    assert large_part_second_moment(x, 1.0) == pytest.approx(9 / 4)


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_bg_ratio_is_one_at_p2(seed):
    m = _sa_martingale(seed)
    assert abs(bg_ratio(m, 2.0) - 1.0) <= 1e-10
    r4 = bg_ratio(m, 4.0)
    assert np.isfinite(r4) and r4 > 0
    assert column_ratio(m, 1.5) > 0


def test_square_function_commuting_case():
    m = generate(EnsembleSpec("DIAGONAL_CLASSICAL", {"n": 4}), 0)
    col, row = square_functions(m)
    assert np.allclose(col.mat, 2.0 * np.eye(16))
    assert np.allclose(row.mat, col.mat)
    with pytest.raises(ValueError):
        bg_ratio(m, 1.5)
