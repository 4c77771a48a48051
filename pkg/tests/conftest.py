import numpy as np
import pytest

from ncdev.specalg import Operator, TracialAlgebra


def rand_matrix(rng, d):
    return rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))


def rand_hermitian(rng, d):
    g = rand_matrix(rng, d)
    return 0.5 * (g + g.conj().T)


def op(mat, factors=None):
    mat = np.asarray(mat, dtype=complex)
    alg = TracialAlgebra(tuple(factors) if factors else (mat.shape[0],))
    return Operator(alg, mat)


@pytest.fixture
def rng():
    return np.random.default_rng(20241014)
