"""Finite-dimensional tracial algebras and spectral calculus.

An algebra is ``M_{d_1} (x) ... (x) M_{d_k}`` realized as ``d x d`` complex
matrices with ``d = d_1 * ... * d_k`` and the normalized trace ``Tr / d``.
Tensor factors are ordered left to right, so factor 0 is the outermost
Kronecker factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import NotPositive, NotSelfAdjoint, SpecMismatch

DEFAULT_TOL = 1e-10
CLUSTER_REL = 1e-9


@dataclass(frozen=True)
class TracialAlgebra:
    """Matrix algebra with normalized trace.

    Parameters
    ----------
    factors : tuple of int
        Dimensions of the tensor factors. ``(d,)`` is a flat ``M_d``.
    tol : float
        Absolute tolerance used by checks on elements of this algebra.
    """

    factors: tuple[int, ...]
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if not self.factors or any(int(f) < 1 for f in self.factors):
            raise ValueError(f"invalid tensor factors {self.factors!r}")
        object.__setattr__(self, "factors", tuple(int(f) for f in self.factors))

    @classmethod
    def flat(cls, d: int, tol: float = DEFAULT_TOL) -> "TracialAlgebra":
        return cls((d,), tol)

    @classmethod
    def tensor_power(cls, site_dim: int, num_sites: int, tol: float = DEFAULT_TOL) -> "TracialAlgebra":
        if num_sites < 1:
            raise ValueError("num_sites must be >= 1")
        return cls((site_dim,) * num_sites, tol)

    @property
    def dim(self) -> int:
        return int(np.prod(self.factors))

    @property
    def num_factors(self) -> int:
        return len(self.factors)

    @property
    def structure(self) -> str:
        if len(self.factors) == 1:
            return "flat"
        if len(set(self.factors)) == 1:
            return "tensor_power"
        return "tensor"

    def dilated(self) -> "TracialAlgebra":
        """The algebra ``M_2 (x) self`` hosting Hermitian dilations."""
        return TracialAlgebra((2,) + self.factors, self.tol)

    def identity(self) -> "Operator":
        return Operator(self, np.eye(self.dim, dtype=complex))

    def zero(self) -> "Operator":
        return Operator(self, np.zeros((self.dim, self.dim), dtype=complex))

    def scalar(self, c: complex) -> "Operator":
        return Operator(self, c * np.eye(self.dim, dtype=complex))

    def op(self, entries) -> "Operator":
        return Operator(self, entries)


@dataclass(frozen=True, eq=False)
class Operator:
    """An element of a :class:`TracialAlgebra`."""

    alg: TracialAlgebra
    mat: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.mat, dtype=complex)
        d = self.alg.dim
        if m.shape != (d, d):
            raise SpecMismatch(f"entries of shape {m.shape} do not match algebra dim {d}")
        object.__setattr__(self, "mat", m)

    def _wrap(self, m) -> "Operator":
        return Operator(self.alg, m)

    def _coerce(self, other):
        if isinstance(other, Operator):
            if other.alg.factors != self.alg.factors:
                raise SpecMismatch("operators live in different algebras")
            return other.mat
        return other * np.eye(self.alg.dim)

    def __add__(self, other):
        return self._wrap(self.mat + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.mat - self._coerce(other))

    def __rsub__(self, other):
        return self._wrap(self._coerce(other) - self.mat)

    def __neg__(self):
        return self._wrap(-self.mat)

    def __mul__(self, c):
        if isinstance(c, Operator):
            return self @ c
        return self._wrap(c * self.mat)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self._wrap(self.mat / c)

    def __matmul__(self, other: "Operator") -> "Operator":
        return self._wrap(self.mat @ self._coerce(other))

    @property
    def adj(self) -> "Operator":
        return self._wrap(self.mat.conj().T)

    @property
    def dim(self) -> int:
        return self.alg.dim

    def fro(self) -> float:
        return float(np.linalg.norm(self.mat))

    def dist(self, other: "Operator") -> float:
        """Frobenius distance to ``other``."""
        return float(np.linalg.norm(self.mat - self._coerce(other)))

    @cached_property
    def is_diagonal(self) -> bool:
        m = self.mat
        return not np.any(m - np.diag(np.diag(m)))

    @cached_property
    def is_self_adjoint(self) -> bool:
        return float(np.linalg.norm(self.mat - self.mat.conj().T)) <= self.alg.tol * max(1.0, self.fro())

    @cached_property
    def is_projection(self) -> bool:
        tol = self.alg.tol * max(1.0, self.fro())
        m = self.mat
        return (
            float(np.linalg.norm(m - m.conj().T)) <= tol
            and float(np.linalg.norm(m @ m - m)) <= tol
        )

    def hermitian_part(self) -> np.ndarray:
        return 0.5 * (self.mat + self.mat.conj().T)


def cluster_tol(values: np.ndarray) -> float:
    """Merge radius for eigenvalues: ``1e-9 * (spectral diameter + 1)``."""
    if values.size == 0:
        return CLUSTER_REL
    return CLUSTER_REL * (float(np.max(values) - np.min(values)) + 1.0)


def _require_sa(x: Operator) -> None:
    if not x.is_self_adjoint:
        raise NotSelfAdjoint(
            f"operator is not self-adjoint (|x - x*|_F = {np.linalg.norm(x.mat - x.mat.conj().T):.3e})"
        )


def _eigh(x: Operator) -> tuple[np.ndarray, np.ndarray]:
    if x.is_diagonal:
        vals = np.real(np.diag(x.mat))
        order = np.argsort(vals, kind="stable")
        vecs = np.eye(x.dim, dtype=complex)[:, order]
        return vals[order], vecs
    return np.linalg.eigh(x.hermitian_part())


def trace(x: Operator) -> complex:
    """Normalized trace ``Tr(x) / d``."""
    return complex(np.trace(x.mat)) / x.dim


def eigenvalues(x: Operator) -> np.ndarray:
    """Ascending eigenvalues of a self-adjoint operator."""
    _require_sa(x)
    if x.is_diagonal:
        return np.sort(np.real(np.diag(x.mat)))
    return np.linalg.eigvalsh(x.hermitian_part())


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    projections: list[Operator]

    def reconstruct(self) -> Operator:
        alg = self.projections[0].alg
        out = np.zeros((alg.dim, alg.dim), dtype=complex)
        for lam, p in zip(self.eigenvalues, self.projections):
            out += lam * p.mat
        return Operator(alg, out)


def _clusters(vals: np.ndarray) -> list[np.ndarray]:
    """Index groups of sorted ``vals`` whose consecutive gaps are within the cluster radius."""
    if vals.size == 0:
        return []
    ctol = cluster_tol(vals)
    breaks = np.nonzero(np.diff(vals) > ctol)[0] + 1
    return np.split(np.arange(vals.size), breaks)


def spectral_decompose(x: Operator) -> SpectralDecomposition:
    """Eigenvalues (ascending, clustered) with their spectral projections."""
    _require_sa(x)
    vals, vecs = _eigh(x)
    lams, projs = [], []
    for idx in _clusters(vals):
        v = vecs[:, idx]
        lams.append(float(np.mean(vals[idx])))
        projs.append(Operator(x.alg, v @ v.conj().T))
    return SpectralDecomposition(np.array(lams), projs)


@dataclass(frozen=True)
class Interval:
    lo: float = -np.inf
    hi: float = np.inf
    lo_closed: bool = False
    hi_closed: bool = False

    def contains(self, vals: np.ndarray, tol: float = 0.0) -> np.ndarray:
        # an endpoint within tol counts as equal to it
        if self.lo_closed:
            above = vals >= self.lo - tol
        else:
            above = vals > self.lo + tol
        if self.hi_closed:
            below = vals <= self.hi + tol
        else:
            below = vals < self.hi - tol
        return above & below


class Indicator:
    """Indicator function of a finite union of intervals."""

    def __init__(self, *intervals: Interval):
        self.intervals = intervals

    def __call__(self, vals: np.ndarray, tol: float = 0.0) -> np.ndarray:
        vals = np.asarray(vals, dtype=float)
        hit = np.zeros(vals.shape, dtype=bool)
        for iv in self.intervals:
            hit |= iv.contains(vals, tol)
        return hit.astype(float)

    @classmethod
    def above(cls, r: float) -> "Indicator":
        """``1_{(r, inf)}``."""
        return cls(Interval(r, np.inf))

    @classmethod
    def closed(cls, lo: float, hi: float) -> "Indicator":
        """``1_{[lo, hi]}``."""
        return cls(Interval(lo, hi, True, True))


def power(p: float) -> Callable[[np.ndarray], np.ndarray]:
    """``t -> t^p``; non-integer powers are taken on the positive part."""
    if float(p).is_integer():
        return lambda v: np.power(v, int(p))
    return lambda v: np.power(np.clip(v, 0.0, None), p)


def _apply(vals: np.ndarray, vecs: np.ndarray, f, alg: TracialAlgebra) -> Operator:
    fv = np.empty_like(vals)
    if isinstance(f, Indicator):
        ctol = cluster_tol(vals)
        for idx in _clusters(vals):
            fv[idx] = f(np.array([np.mean(vals[idx])]), tol=ctol)[0]
    else:
        for idx in _clusters(vals):
            fv[idx] = float(np.real(f(np.array([np.mean(vals[idx])]))[0]))
    return Operator(alg, (vecs * fv) @ vecs.conj().T)


def functional_calculus(x: Operator, f) -> Operator:
    """``f(x) = sum_i f(lambda_i) p_i`` for self-adjoint ``x``.

    ``f`` is a vectorized real function or an :class:`Indicator`; indicators
    use the cluster radius of the spectrum of ``x`` for endpoint decisions.
    """
    _require_sa(x)
    vals, vecs = _eigh(x)
    return _apply(vals, vecs, f, x.alg)


def spectral_projection(x: Operator, ind: Indicator) -> Operator:
    return functional_calculus(x, ind)


def _gram_eigh(x: Operator) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of ``x* x`` with eigenvalues converted to singular values."""
    if x.is_diagonal:
        s = np.abs(np.diag(x.mat))
        order = np.argsort(s, kind="stable")
        return s[order], np.eye(x.dim, dtype=complex)[:, order]
    g = x.mat.conj().T @ x.mat
    vals, vecs = np.linalg.eigh(0.5 * (g + g.conj().T))
    return np.sqrt(np.clip(vals, 0.0, None)), vecs


def modulus(x: Operator) -> Operator:
    """``|x| = (x* x)^{1/2}``."""
    s, vecs = _gram_eigh(x)
    return Operator(x.alg, (vecs * s) @ vecs.conj().T)


def modulus_projection(x: Operator, ind: Indicator) -> Operator:
    """Spectral projection ``ind(|x|)`` without forming ``|x|`` explicitly."""
    s, vecs = _gram_eigh(x)
    return _apply(s, vecs, ind, x.alg)


def singular_values(x: Operator) -> np.ndarray:
    """Descending singular values, i.e. the spectrum of ``|x|``."""
    s, _ = _gram_eigh(x)
    return s[::-1].copy()


def distribution(x: Operator, r: float) -> float:
    """``tau(1_{(r, inf)}(|x|))``: fraction of singular values strictly above ``r``."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    return distribution_from_values(singular_values(x), r)


def distribution_from_values(s: np.ndarray, r: float, weights: np.ndarray | None = None) -> float:
    s = np.asarray(s, dtype=float)
    if s.size == 0:
        return 0.0
    ctol = cluster_tol(np.append(s, 0.0))
    hit = s > r + ctol
    if weights is None:
        return float(np.count_nonzero(hit)) / s.size
    return float(np.sum(np.asarray(weights)[hit]))


def singular_value(x: Operator, t: float) -> float:
    """Generalized singular value ``mu(t, x)`` for ``0 <= t < 1``."""
    if not 0.0 <= t < 1.0:
        raise ValueError("t must lie in [0, 1)")
    s = singular_values(x)
    return float(s[int(np.floor(t * s.size))])


def lp_norm(x: Operator, p: float) -> float:
    """Noncommutative ``L_p`` norm ``tau(|x|^p)^{1/p}``; ``p = inf`` is the operator norm."""
    return lp_norm_from_values(singular_values(x), p)


def lp_norm_from_values(s: np.ndarray, p: float, weights: np.ndarray | None = None) -> float:
    s = np.asarray(s, dtype=float)
    if np.isinf(p):
        return float(np.max(s)) if s.size else 0.0
    if p < 1:
        raise ValueError("p must be >= 1")
    if weights is None:
        weights = np.full(s.size, 1.0 / s.size)
    smax = float(np.max(s)) if s.size else 0.0
    if smax == 0.0:
        return 0.0
    # scale out the maximum to avoid overflow at large p
    return smax * float(np.sum(weights * (s / smax) ** p)) ** (1.0 / p)


def op_norm(x: Operator) -> float:
    return lp_norm(x, np.inf)


def is_positive(x: Operator) -> bool:
    if not x.is_self_adjoint:
        return False
    vals = eigenvalues(x)
    return bool(vals[0] >= -x.alg.tol * max(1.0, abs(vals[-1])))


def stieltjes_tail_moment(a: Operator, p: float, u: float) -> float:
    """``tau(a^p 1_{(u, inf)}(a))`` for positive ``a``, evaluated spectrally."""
    if not is_positive(a):
        raise NotPositive("stieltjes_tail_moment needs a positive operator")
    vals = np.clip(eigenvalues(a), 0.0, None)
    ctol = cluster_tol(np.append(vals, 0.0))
    keep = vals > u + ctol
    return float(np.sum(vals[keep] ** p)) / a.dim


def stieltjes_jump_sum(a: Operator, p: float, u: float) -> float:
    """The same quantity as ``-int_u^inf t^p dF_a(t)``, summed over the jumps of ``F_a``.

    ``F_a(t) = tau(1_{(t, inf)}(a))`` is evaluated through :func:`distribution`
    on either side of each atom, independent of the eigenvalue weights.
    """
    if not is_positive(a):
        raise NotPositive("stieltjes_jump_sum needs a positive operator")
    dec = spectral_decompose(a)
    atoms = np.clip(dec.eigenvalues, 0.0, None)
    total = 0.0
    ctol = cluster_tol(np.append(atoms, 0.0))
    for i, t in enumerate(atoms):
        if t <= u + ctol:
            continue
        before = 1.0 if i == 0 else distribution(a, 0.5 * (atoms[i - 1] + t))
        total += t ** p * (before - distribution(a, t))
    return total


def expm_sa(x: Operator) -> Operator:
    return functional_calculus(x, np.exp)


def golden_thompson_gap(x: Operator, y: Operator) -> float:
    """``tau(e^x e^y) - tau(e^{x+y})``, nonnegative for self-adjoint ``x, y``."""
    _require_sa(x)
    _require_sa(y)
    lhs = trace(expm_sa(x) @ expm_sa(y)).real
    rhs = trace(expm_sa(Operator(x.alg, x.hermitian_part() + y.hermitian_part()))).real
    return float(lhs - rhs)


def kron(*ops: Operator) -> Operator:
    """Tensor product; the factor lists are concatenated in order."""
    factors: tuple[int, ...] = ()
    m = np.ones((1, 1), dtype=complex)
    tol = ops[0].alg.tol
    for o in ops:
        factors += o.alg.factors
        m = np.kron(m, o.mat)
    return Operator(TracialAlgebra(factors, tol), m)


def embed_site(alg: TracialAlgebra, site: int, block: np.ndarray) -> Operator:
    """``1 (x) ... (x) block (x) ... (x) 1`` with ``block`` on tensor factor ``site``."""
    m = np.ones((1, 1), dtype=complex)
    for i, f in enumerate(alg.factors):
        m = np.kron(m, block if i == site else np.eye(f))
    return Operator(alg, m)


def hermitian(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    return 0.5 * (m + m.conj().T)


def as_operators(alg: TracialAlgebra, mats: Sequence[np.ndarray]) -> list[Operator]:
    return [Operator(alg, m) for m in mats]
