"""Independent site-localized families without materializing the tensor power.

A family ``d_j = 1 (x) ... (x) a_j (x) ... (x) 1`` with ``a_j`` on site ``j``
is stored through its blocks ``a_j``. When every block is self-adjoint the
terms commute, so the spectrum of ``S_n = d_1 + ... + d_n`` under the
product trace is the law of a sum of independent classical variables, each
uniform over the eigenvalues of its block. That law is computed exactly by
repeated convolution of discrete measures.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import specalg as sa
from .specalg import Operator, TracialAlgebra

# atoms closer than this (relative to the running spread) are merged
_MERGE_REL = 1e-12


@dataclass(frozen=True)
class DiscreteLaw:
    """Finitely supported probability measure on the real line."""

    values: np.ndarray
    weights: np.ndarray

    @classmethod
    def uniform(cls, values: Sequence[float]) -> "DiscreteLaw":
        v = np.asarray(values, dtype=float)
        return cls(v, np.full(v.size, 1.0 / v.size)).merged()

    def merged(self) -> "DiscreteLaw":
        order = np.argsort(self.values, kind="stable")
        v, w = self.values[order], self.weights[order]
        if v.size == 0:
            return self
        scale = max(1.0, float(np.max(np.abs(v))))
        starts = np.concatenate([[0], np.nonzero(np.diff(v) > _MERGE_REL * scale)[0] + 1])
        nw = np.add.reduceat(w, starts)
        vw = np.add.reduceat(v * w, starts)
        nv = v[starts].copy()
        pos = nw > 0
        nv[pos] = vw[pos] / nw[pos]  # weighted mean of each group; first atom if weightless
        return DiscreteLaw(nv, nw)

    def convolve(self, other: "DiscreteLaw") -> "DiscreteLaw":
        v = (self.values[:, None] + other.values[None, :]).ravel()
        w = (self.weights[:, None] * other.weights[None, :]).ravel()
        return DiscreteLaw(v, w).merged()

    def abs(self) -> "DiscreteLaw":
        return DiscreteLaw(np.abs(self.values), self.weights).merged()

    def map(self, f) -> "DiscreteLaw":
        return DiscreteLaw(np.asarray(f(self.values), dtype=float), self.weights).merged()

    def tail(self, r: float) -> float:
        """``P(|X| > r)`` with the same endpoint convention as :func:`specalg.distribution`."""
        a = np.abs(self.values)
        return sa.distribution_from_values(a, r, self.weights)

    def lp(self, p: float) -> float:
        return sa.lp_norm_from_values(np.abs(self.values), p, self.weights)

    def expect(self, f) -> float:
        return float(np.sum(self.weights * f(self.values)))


@dataclass(frozen=True)
class SiteLocalFamily:
    """Blocks ``a_1..a_n`` acting on distinct sites of ``M_s^{(x) n}``."""

    blocks: tuple[np.ndarray, ...]
    tol: float = sa.DEFAULT_TOL

    def __post_init__(self):
        bl = tuple(np.asarray(b, dtype=complex) for b in self.blocks)
        if not bl:
            raise ValueError("empty family")
        s = bl[0].shape[0]
        if any(b.shape != (s, s) for b in bl):
            raise ValueError("all blocks must share one site dimension")
        object.__setattr__(self, "blocks", bl)

    @property
    def n(self) -> int:
        return len(self.blocks)

    @property
    def site_dim(self) -> int:
        return self.blocks[0].shape[0]

    @property
    def is_self_adjoint(self) -> bool:
        return all(np.linalg.norm(b - b.conj().T) <= self.tol * max(1.0, np.linalg.norm(b)) for b in self.blocks)

    def block_op(self, j: int) -> Operator:
        """Block ``j`` (0-based) as an element of ``M_s``; it has the same law as ``d_{j+1}``."""
        return Operator(TracialAlgebra.flat(self.site_dim, self.tol), self.blocks[j])

    def means(self) -> np.ndarray:
        return np.array([np.trace(b) / self.site_dim for b in self.blocks])

    def scaled(self, c: float) -> "SiteLocalFamily":
        return SiteLocalFamily(tuple(c * b for b in self.blocks), self.tol)

    def algebra(self, n: int | None = None) -> TracialAlgebra:
        return TracialAlgebra.tensor_power(self.site_dim, self.n if n is None else n, self.tol)

    def dense(self, n: int | None = None) -> list[Operator]:
        """Materialize ``d_1..d_n`` on the first ``n`` sites."""
        n = self.n if n is None else n
        alg = self.algebra(n)
        return [sa.embed_site(alg, j, self.blocks[j]) for j in range(n)]

    def block_law(self, j: int) -> DiscreteLaw:
        return DiscreteLaw.uniform(sa.eigenvalues(self.block_op(j)))

    def partial_sum_laws(self) -> list[DiscreteLaw]:
        """Spectral laws of ``S_1..S_n``; needs self-adjoint blocks."""
        if not self.is_self_adjoint:
            raise sa.NotSelfAdjoint("commuting-sum spectra need self-adjoint blocks")
        laws, acc = [], None
        for j in range(self.n):
            lj = self.block_law(j)
            acc = lj if acc is None else acc.convolve(lj)
            laws.append(acc)
        return laws

    def square_function_law(self, n: int | None = None) -> DiscreteLaw:
        """Spectral law of ``(sum_k d_k^2)^{1/2}`` over the first ``n`` sites."""
        n = self.n if n is None else n
        acc = None
        for j in range(n):
            lj = self.block_law(j).map(np.square)
            acc = lj if acc is None else acc.convolve(lj)
        return acc.map(lambda v: np.sqrt(np.clip(v, 0.0, None)))


def rademacher_family(n: int) -> SiteLocalFamily:
    """The classical symmetric random walk embedded as ``diag(1, -1)`` on each site."""
    return SiteLocalFamily(tuple(np.diag([1.0, -1.0]) for _ in range(n)))
