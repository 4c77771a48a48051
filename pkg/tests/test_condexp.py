from collections import defaultdict
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncdev import specalg as sa
from ncdev.condexp import (
    Filtration,
    Martingale,
    SubalgebraSpec,
    check_ce_properties,
    classical_conditional_expectation,
    conditional_expectation,
    is_independent,
    martingale_from_element,
    martingale_from_independent,
    site_support,
)
from ncdev.errors import NotIndependent, NotMartingale, NotMeanZero, SpecMismatch
from ncdev.mart import dilate
from ncdev.specalg import Operator, TracialAlgebra

from conftest import op, rand_matrix

seeds = st.integers(0, 2**32 - 1)


def test_pinching_keeps_blocks():
    x = op(np.arange(16.0).reshape(4, 4))
    e = conditional_expectation(x, SubalgebraSpec.block_diagonal([[0, 2], [1, 3]]))
    want = np.zeros((4, 4))
    for b in ([0, 2], [1, 3]):
        want[np.ix_(b, b)] = x.mat[np.ix_(b, b)].real
    assert np.allclose(e.mat, want)


def test_trivial_and_full(rng):
    x = op(rand_matrix(rng, 4))
    assert np.allclose(conditional_expectation(x, SubalgebraSpec.trivial()).mat, sa.trace(x) * np.eye(4))
    assert conditional_expectation(x, SubalgebraSpec.full()) is x


def test_tensor_prefix_on_product_operator(rng):
    a, b = rand_matrix(rng, 2), rand_matrix(rng, 3)
    x = op(np.kron(a, b), (2, 3))
    e = conditional_expectation(x, SubalgebraSpec.tensor_prefix(1))
    assert np.allclose(e.mat, np.kron(a, np.eye(3)) * np.trace(b) / 3)


def test_bad_specs_rejected():
    alg = TracialAlgebra((2, 2))
    with pytest.raises(SpecMismatch):
        SubalgebraSpec.block_diagonal([[0, 1], [1, 2, 3]]).validate(alg)
    with pytest.raises(SpecMismatch):
        SubalgebraSpec.tensor_prefix(3).validate(alg)


@settings(max_examples=25, deadline=None)
@given(seeds, st.sampled_from(["pinch", "prefix0", "prefix1", "prefix2"]))
def test_conditional_expectation_properties(seed, kind):
    rng = np.random.default_rng(seed)
    alg = TracialAlgebra((2, 3))
    if kind == "pinch":
        perm = rng.permutation(6)
        s = SubalgebraSpec.block_diagonal([perm[:2].tolist(), perm[2:].tolist()])
    else:
        s = SubalgebraSpec.tensor_prefix(int(kind[-1]))
    xs = [Operator(alg, rand_matrix(rng, 6)) for _ in range(3)]
    rep = check_ce_properties(s, xs)
    assert rep.ok, rep
    for x in xs:
        assert sa.trace(conditional_expectation(x, s)) == pytest.approx(sa.trace(x))


def test_classical_oracle_by_enumeration(rng):
    dims = (2, 3, 2)
    vals = rng.standard_normal(12)
    for k in range(4):
        sums, counts = defaultdict(float), defaultdict(int)
        for idx, w in enumerate(product(*[range(s) for s in dims])):
            sums[w[:k]] += vals[idx]
            counts[w[:k]] += 1
        want = np.array([sums[w[:k]] / counts[w[:k]] for w in product(*[range(s) for s in dims])])
        x = op(np.diag(vals), dims)
        got = conditional_expectation(x, SubalgebraSpec.tensor_prefix(k)).mat.diagonal().real
        assert np.max(np.abs(got - want)) <= 1e-12
        assert np.allclose(classical_conditional_expectation(vals, dims, k), want, atol=1e-12)


def test_filtration_nesting_direction():
    alg = TracialAlgebra.flat(4)
    fine = SubalgebraSpec.block_diagonal([[0], [1], [2], [3]])
    coarse = SubalgebraSpec.block_diagonal([[0, 1], [2, 3]])
    Filtration(alg, (fine, coarse))
    with pytest.raises(SpecMismatch):
        Filtration(alg, (coarse, fine))
    tf = Filtration.tensor(TracialAlgebra.tensor_power(2, 3))
    assert [s.k for s in tf.levels] == [1, 2, 3]


def test_martingale_validation(rng):
    filt = Filtration.tensor(TracialAlgebra.tensor_power(2, 2))
    f = Operator(filt.alg, rand_matrix(rng, 4))
    f = f - sa.trace(f)
    m = martingale_from_element(f, filt)
    m.validate()
    assert m.last.dist(f) < 1e-12
    diffs = m.differences
    assert (diffs[0] + diffs[1]).dist(f) < 1e-12
    with pytest.raises(NotMartingale):
        Martingale(filt, (f, f)).validate()


def test_dilation_commutes_with_amplified_expectation(rng):
    alg = TracialAlgebra((2, 2))
    x = Operator(alg, rand_matrix(rng, 4))
    for s in (SubalgebraSpec.tensor_prefix(1), SubalgebraSpec.trivial(),
              SubalgebraSpec.block_diagonal([[0, 3], [1, 2]])):
        lhs = conditional_expectation(dilate(x), s.amplified(alg))
        rhs = dilate(conditional_expectation(x, s))
        assert lhs.dist(rhs) < 1e-12


def test_site_local_operators_are_independent(rng):
    alg = TracialAlgebra.tensor_power(2, 3)
    ds = []
    for j in range(3):
        a = rand_matrix(rng, 2)
        a = a - np.trace(a) / 2 * np.eye(2)
        ds.append(sa.embed_site(alg, j, a))
    ok, worst = is_independent(ds)
    assert ok and worst < 1e-10
    m = martingale_from_independent(ds)
    assert [s.k for s in m.filtration.levels] == [1, 2, 3]


def test_dependent_operators_detected(rng):
    alg = TracialAlgebra.tensor_power(2, 2)
    z = np.diag([1.0, -1.0])
    d1 = sa.embed_site(alg, 0, z)
    d2 = Operator(alg, d1.mat @ d1.mat - np.eye(4) + np.kron(z, z))
    ok, _ = is_independent([d1, Operator(alg, np.kron(z, z) + np.kron(z, np.eye(2)))])
    assert not ok
    with pytest.raises(NotIndependent):
        martingale_from_independent([d1, Operator(alg, np.kron(z, z) + np.kron(z, np.eye(2)))])
    with pytest.raises(NotMeanZero):
        martingale_from_independent([d1, alg.identity()])
    assert d2.is_self_adjoint


def test_site_support():
    alg = TracialAlgebra.tensor_power(2, 4)
    a = np.array([[0, 1], [1, 0]], dtype=complex)
    x = sa.embed_site(alg, 2, a)
    assert site_support(x) == (2, 2)
    assert site_support(alg.scalar(3.0)) is None
    y = Operator(alg, x.mat @ sa.embed_site(alg, 0, a).mat)
    assert site_support(y) == (0, 2)
