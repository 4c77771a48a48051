import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, linalg

from ncdev import specalg as sa
from ncdev.errors import NotPositive, NotSelfAdjoint
from ncdev.specalg import Indicator, Operator, TracialAlgebra

from conftest import op, rand_hermitian, rand_matrix

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 12)


def test_algebra_basics():
    alg = TracialAlgebra.tensor_power(2, 3)
    assert alg.dim == 8 and alg.structure == "tensor_power"
    assert TracialAlgebra.flat(5).structure == "flat"
    assert alg.dilated().factors == (2, 2, 2, 2)
    assert sa.trace(alg.identity()) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        TracialAlgebra((0,))
    with pytest.raises(ValueError):
        Operator(alg, np.eye(3))


def test_trace_is_normalized_and_tracial(rng):
    a, b = rand_matrix(rng, 6), rand_matrix(rng, 6)
    x, y = op(a), op(b)
    assert sa.trace(x) == pytest.approx(np.trace(a) / 6)
    assert sa.trace(x @ y) == pytest.approx(sa.trace(y @ x))


@settings(max_examples=40, deadline=None)
@given(seeds, dims)
def test_spectral_decomposition_reconstructs(seed, d):
    rng = np.random.default_rng(seed)
    x = op(rand_hermitian(rng, d))
    dec = sa.spectral_decompose(x)
    assert dec.reconstruct().dist(x) <= 1e-10 * max(1.0, x.fro())
    total = sum((p.mat for p in dec.projections), np.zeros((d, d)))
    assert np.allclose(total, np.eye(d), atol=1e-10)
    for i, p in enumerate(dec.projections):
        assert p.is_projection
        for q in dec.projections[i + 1:]:
            assert np.abs(p.mat @ q.mat).max() < 1e-10


def test_repeated_eigenvalues_cluster_into_one_projection():
    x = op(np.diag([1.0, 1.0, 1.0 + 1e-13, -2.0]))
    dec = sa.spectral_decompose(x)
    assert len(dec.eigenvalues) == 2
    assert sorted(np.trace(p.mat).real for p in dec.projections) == pytest.approx([1.0, 3.0])


def test_spectral_decompose_needs_self_adjoint(rng):
    with pytest.raises(NotSelfAdjoint):
        sa.spectral_decompose(op(rand_matrix(rng, 3)))


def test_indicator_endpoints_use_tolerance():
    p = op(np.diag([1.0, 1.0, 0.0, 0.0]))
    assert sa.distribution(p, 1.0) == 0.0
    assert sa.distribution(p, 1.0 - 1e-12) == 0.0
    assert sa.distribution(p, 0.999) == 0.5
    assert sa.distribution(p, 0.0) == 0.5
    closed = sa.spectral_projection(p, Indicator.closed(1.0, 2.0))
    assert np.allclose(closed.mat, p.mat)
    above = sa.spectral_projection(p, Indicator.above(1.0))
    assert np.allclose(above.mat, 0)


@settings(max_examples=40, deadline=None)
@given(seeds, dims)
def test_singular_values_match_svd(seed, d):
    rng = np.random.default_rng(seed)
    a = rand_matrix(rng, d)
    s = sa.singular_values(op(a))
    assert np.allclose(s, np.linalg.svd(a, compute_uv=False), atol=1e-9 * max(1, np.abs(a).max()))
    assert np.all(np.diff(s) <= 1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds, dims, st.sampled_from([1.0, 1.5, 2.0, 3.0, 4.0, np.inf]))
def test_lp_norm_is_normalized_schatten_norm(seed, d, p):
    rng = np.random.default_rng(seed)
    a = rand_matrix(rng, d)
    s = np.linalg.svd(a, compute_uv=False)
    want = s.max() if np.isinf(p) else (np.sum(s ** p) / d) ** (1 / p)
    assert sa.lp_norm(op(a), p) == pytest.approx(want, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(seeds, dims)
def test_distribution_and_singular_value_are_dual(seed, d):
    rng = np.random.default_rng(seed)
    x = op(rand_matrix(rng, d))
    s = sa.singular_values(x)
    for t in np.linspace(0, 1, 17, endpoint=False):
        mu = sa.singular_value(x, t)
        # mu(t) = inf{r : F(r) <= t}
        assert sa.distribution(x, mu) <= t + 1e-12
        if mu > 0:
            assert sa.distribution(x, mu * (1 - 1e-6)) > t
    assert sa.singular_value(x, 0.0) == pytest.approx(s[0])


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 8), st.sampled_from([1.0, 1.5, 2.0, 3.0, 4.0]))
def test_moment_equals_tail_integral(seed, d, p):
    rng = np.random.default_rng(seed)
    x = op(rand_matrix(rng, d))
    s = sa.singular_values(x)
    val, _ = integrate.quad(lambda lam: p * lam ** (p - 1) * sa.distribution(x, lam), 0, s[0],
                            points=list(s), limit=200, epsabs=1e-13)
    assert val == pytest.approx(sa.lp_norm(x, p) ** p, rel=1e-6)


def test_functional_calculus_matches_scipy(rng):
    h = rand_hermitian(rng, 7)
    x = op(h)
    assert np.allclose(sa.expm_sa(x).mat, linalg.expm(h), atol=1e-10)
    assert np.allclose(sa.modulus(op(h)).mat, linalg.sqrtm(h @ h), atol=1e-8)
    sq = sa.functional_calculus(op(h @ h), np.sqrt)
    assert np.allclose(sq.mat @ sq.mat, h @ h, atol=1e-9)


def test_modulus_of_non_normal(rng):
    a = rand_matrix(rng, 5)
    m = sa.modulus(op(a))
    assert np.allclose(m.mat @ m.mat, a.conj().T @ a, atol=1e-9)
    assert sa.is_positive(m)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 8), st.sampled_from([1.0, 2.0, 3.0]))
def test_stieltjes_spectral_and_jump_forms_agree(seed, d, p):
    rng = np.random.default_rng(seed)
    a = rand_matrix(rng, d)
    x = op(a.conj().T @ a)
    u = float(np.median(np.linalg.eigvalsh(x.mat)))
    assert sa.stieltjes_tail_moment(x, p, u) == pytest.approx(sa.stieltjes_jump_sum(x, p, u), rel=1e-9, abs=1e-12)


def test_stieltjes_needs_positive():
    with pytest.raises(NotPositive):
        sa.stieltjes_tail_moment(op(np.diag([1.0, -1.0])), 2, 0.0)


def test_stieltjes_projection_example():
    p = op(np.diag([1.0, 1.0, 0.0, 0.0]))
    assert sa.stieltjes_tail_moment(p, 2, 0.5) == pytest.approx(0.5)
    assert sa.stieltjes_tail_moment(p, 2, 1.0) == 0.0


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 6))
def test_golden_thompson_gap_nonnegative(seed, d):
    rng = np.random.default_rng(seed)
    x, y = op(rand_hermitian(rng, d)), op(rand_hermitian(rng, d))
    assert sa.golden_thompson_gap(x, y) >= -1e-10


def test_golden_thompson_equality_when_commuting(rng):
    u = np.linalg.qr(rand_matrix(rng, 5))[0]
    x = op(u @ np.diag(rng.standard_normal(5)) @ u.conj().T)
    y = op(u @ np.diag(rng.standard_normal(5)) @ u.conj().T)
    assert abs(sa.golden_thompson_gap(x, y)) <= 1e-10


def test_kron_and_embed_site():
    a = np.array([[0, 1], [1, 0]], dtype=complex)
    alg = TracialAlgebra.tensor_power(2, 3)
    e = sa.embed_site(alg, 1, a)
    assert np.allclose(e.mat, np.kron(np.kron(np.eye(2), a), np.eye(2)))
    k = sa.kron(op(a), op(np.eye(2)))
    assert k.alg.factors == (2, 2)


def test_diagonal_fast_path_agrees(rng):
    v = rng.standard_normal(9) + 1j * rng.standard_normal(9)
    x = op(np.diag(v))
    assert x.is_diagonal
    assert np.allclose(sa.singular_values(x), np.sort(np.abs(v))[::-1])
