"""Subalgebras, trace-preserving conditional expectations, filtrations and martingales."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

from . import specalg as sa
from .errors import NotIndependent, NotMartingale, NotMeanZero, SpecMismatch
from .specalg import Operator, TracialAlgebra

MEAN_ZERO_TOL = 1e-10


@dataclass(frozen=True)
class SubalgebraSpec:
    """A von Neumann subalgebra with an explicit conditional expectation.

    ``kind`` is one of ``"block_diagonal"`` (pinching onto ``blocks``),
    ``"tensor_prefix"`` (the first ``k`` tensor factors, tensored with the
    identity), ``"trivial"`` (scalars) or ``"full"``.
    """

    kind: str
    blocks: tuple[tuple[int, ...], ...] = ()
    k: int = 0

    @classmethod
    def block_diagonal(cls, blocks: Sequence[Sequence[int]]) -> "SubalgebraSpec":
        return cls("block_diagonal", blocks=tuple(tuple(sorted(int(i) for i in b)) for b in blocks))

    @classmethod
    def tensor_prefix(cls, k: int) -> "SubalgebraSpec":
        return cls("tensor_prefix", k=int(k))

    @classmethod
    def trivial(cls) -> "SubalgebraSpec":
        return cls("trivial")

    @classmethod
    def full(cls) -> "SubalgebraSpec":
        return cls("full")

    def validate(self, alg: TracialAlgebra) -> None:
        if self.kind == "block_diagonal":
            flat = sorted(i for b in self.blocks for i in b)
            if flat != list(range(alg.dim)) or any(len(b) == 0 for b in self.blocks):
                raise SpecMismatch("block partition must cover 0..d-1 disjointly")
        elif self.kind == "tensor_prefix":
            if not 0 <= self.k <= alg.num_factors:
                raise SpecMismatch(f"tensor prefix k={self.k} outside 0..{alg.num_factors}")
        elif self.kind not in ("trivial", "full"):
            raise SpecMismatch(f"unknown subalgebra kind {self.kind!r}")

    def amplified(self, alg: TracialAlgebra) -> "SubalgebraSpec":
        """The subalgebra ``M_2 (x) self`` of ``alg.dilated()``."""
        if self.kind == "full":
            return self
        if self.kind == "trivial":
            return SubalgebraSpec.tensor_prefix(1)
        if self.kind == "tensor_prefix":
            return SubalgebraSpec.tensor_prefix(self.k + 1)
        d = alg.dim
        return SubalgebraSpec.block_diagonal([b + tuple(i + d for i in b) for b in self.blocks])


def conditional_expectation(x: Operator, s: SubalgebraSpec) -> Operator:
    """Trace-preserving conditional expectation of ``x`` onto ``s``."""
    s.validate(x.alg)
    m = x.mat
    if s.kind == "full":
        return x
    if s.kind == "trivial":
        return x.alg.scalar(sa.trace(x))
    if s.kind == "block_diagonal":
        out = np.zeros_like(m)
        for b in s.blocks:
            ix = np.ix_(b, b)
            out[ix] = m[ix]
        return Operator(x.alg, out)
    k = s.k
    if k == x.alg.num_factors:
        return x
    left = int(np.prod(x.alg.factors[:k]))
    right = int(np.prod(x.alg.factors[k:]))
    t = m.reshape(left, right, left, right)
    reduced = np.einsum("ajbj->ab", t) / right
    return Operator(x.alg, np.kron(reduced, np.eye(right)))


def reduced_prefix(x: Operator, k: int) -> np.ndarray:
    """Normalized partial trace of ``x`` onto its first ``k`` tensor factors."""
    left = int(np.prod(x.alg.factors[:k]))
    right = int(np.prod(x.alg.factors[k:]))
    return np.einsum("ajbj->ab", x.mat.reshape(left, right, left, right)) / right


def contains(alg: TracialAlgebra, inner: SubalgebraSpec, outer: SubalgebraSpec, seed: int = 0) -> bool:
    """Whether ``inner`` is a subalgebra of ``outer``, tested on a generic element."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((alg.dim, alg.dim)) + 1j * rng.standard_normal((alg.dim, alg.dim))
    y = conditional_expectation(Operator(alg, g), inner)
    z = conditional_expectation(y, outer)
    return z.dist(y) <= 1e-9 * max(1.0, y.fro())


@dataclass(frozen=True)
class Filtration:
    """Increasing subalgebras ``M_1 <= ... <= M_n`` with a base level ``M_0``.

    ``base`` is used for ``E_0`` wherever a difference ``dx_1`` needs
    centering; it defaults to the scalars.
    """

    alg: TracialAlgebra
    levels: tuple[SubalgebraSpec, ...]
    base: SubalgebraSpec = field(default_factory=SubalgebraSpec.trivial)

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        chain = (self.base,) + self.levels
        for s in chain:
            s.validate(self.alg)
        for a, b in zip(chain, chain[1:]):
            if not _structurally_nested(a, b) and not contains(self.alg, a, b):
                raise SpecMismatch(f"filtration not increasing: {a} is not contained in {b}")

    def __len__(self) -> int:
        return len(self.levels)

    def level(self, k: int) -> SubalgebraSpec:
        """Level ``k`` with 1-based indexing; ``k = 0`` is the base."""
        return self.base if k == 0 else self.levels[k - 1]

    def E(self, x: Operator, k: int) -> Operator:
        return conditional_expectation(x, self.level(k))

    def dilated(self) -> "Filtration":
        return Filtration(
            self.alg.dilated(),
            tuple(s.amplified(self.alg) for s in self.levels),
            self.base.amplified(self.alg),
        )

    @classmethod
    def tensor(cls, alg: TracialAlgebra, ks: Sequence[int] | None = None) -> "Filtration":
        """Tensor-prefix filtration; defaults to ``k = 1..N`` over all factors."""
        ks = range(1, alg.num_factors + 1) if ks is None else ks
        return cls(alg, tuple(SubalgebraSpec.tensor_prefix(k) for k in ks))


def _structurally_nested(a: SubalgebraSpec, b: SubalgebraSpec) -> bool:
    if a.kind == "trivial" or b.kind == "full":
        return True
    if a.kind == "tensor_prefix" and b.kind == "tensor_prefix":
        return a.k <= b.k
    if a.kind == "block_diagonal" and b.kind == "block_diagonal":
        # a finer partition pinches onto a smaller algebra
        owner = {i: j for j, blk in enumerate(b.blocks) for i in blk}
        return all(len({owner[i] for i in blk}) == 1 for blk in a.blocks)
    return False


@dataclass(frozen=True, eq=False)
class Martingale:
    """An adapted sequence ``x_1..x_n`` with ``E_k(x_{k+1}) = x_k``."""

    filtration: Filtration
    elements: tuple[Operator, ...]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if len(self.elements) != len(self.filtration):
            raise NotMartingale(
                f"{len(self.elements)} elements for {len(self.filtration)} filtration levels"
            )

    @classmethod
    def from_differences(cls, filtration: Filtration, diffs: Sequence[Operator], check: bool = True) -> "Martingale":
        elems, acc = [], filtration.alg.zero()
        for d in diffs:
            acc = acc + d
            elems.append(acc)
        m = cls(filtration, tuple(elems))
        if check:
            m.validate()
        return m

    @property
    def alg(self) -> TracialAlgebra:
        return self.filtration.alg

    @property
    def n(self) -> int:
        return len(self.elements)

    @property
    def last(self) -> Operator:
        return self.elements[-1]

    @property
    def differences(self) -> list[Operator]:
        out, prev = [], None
        for x in self.elements:
            out.append(x if prev is None else x - prev)
            prev = x
        return out

    @property
    def is_self_adjoint(self) -> bool:
        return all(x.is_self_adjoint for x in self.elements)

    def violations(self) -> dict[str, float]:
        """Worst Frobenius residuals of adaptedness and the martingale property."""
        adapted = mart = 0.0
        for k, x in enumerate(self.elements, start=1):
            adapted = max(adapted, self.filtration.E(x, k).dist(x))
            if k < self.n:
                mart = max(mart, self.filtration.E(self.elements[k], k).dist(x))
        return {"adapted": adapted, "martingale": mart}

    def validate(self, tol: float | None = None) -> None:
        scale = max([1.0] + [x.fro() for x in self.elements])
        tol = (self.alg.tol if tol is None else tol) * scale
        v = self.violations()
        bad = {k: val for k, val in v.items() if val > tol}
        if bad:
            raise NotMartingale(f"martingale invariants violated: {bad}")

    def scaled(self, c: float) -> "Martingale":
        return Martingale(self.filtration, tuple(c * x for x in self.elements))


@dataclass
class CEReport:
    idempotence: float
    positivity: float
    module: float
    contraction: dict[float, float]
    tol: float

    @property
    def ok(self) -> bool:
        worst = max([self.idempotence, self.positivity, self.module] + list(self.contraction.values()))
        return worst <= self.tol


def check_ce_properties(
    s: SubalgebraSpec,
    samples: Sequence[Operator],
    module_pairs: Sequence[tuple[Operator, Operator]] | None = None,
    tol: float = 1e-9,
) -> CEReport:
    """Measure the defining properties of ``E_s`` on sample operators.

    ``module_pairs`` supplies ``(a, b)`` for the bimodule property; by
    default they are the conditional expectations of the neighbouring
    samples, which lie in the subalgebra.
    """
    idem = pos = mod = 0.0
    contr = {1.0: 0.0, 2.0: 0.0, np.inf: 0.0}
    n = len(samples)
    for i, x in enumerate(samples):
        ex = conditional_expectation(x, s)
        idem = max(idem, conditional_expectation(ex, s).dist(ex))
        xx = x.adj @ x
        ev = sa.eigenvalues(Operator(x.alg, conditional_expectation(xx, s).hermitian_part()))
        pos = max(pos, -float(ev[0]))
        if module_pairs is not None:
            a, b = module_pairs[i]
        else:
            a = conditional_expectation(samples[(i + 1) % n], s)
            b = conditional_expectation(samples[(i + 2) % n], s)
        mod = max(mod, conditional_expectation(a @ x @ b, s).dist(a @ ex @ b))
        for p in contr:
            contr[p] = max(contr[p], sa.lp_norm(ex, p) - sa.lp_norm(x, p))
    return CEReport(idem, pos, mod, contr, tol)


def _words(ops: Sequence[Operator], max_len: int):
    """All products of length 1..max_len over ``ops``, built incrementally."""
    frontier = [o.mat for o in ops]
    for _ in range(max_len):
        yield from frontier
        if _ + 1 == max_len:
            break
        frontier = [w @ o.mat for w in frontier for o in ops]


def is_independent(
    xs: Sequence[Operator],
    conditioning: SubalgebraSpec | None = None,
    max_degree: int = 4,
    tol: float = 1e-10,
) -> tuple[bool, float]:
    """Finite-degree test of independence with respect to ``E_N``.

    Checks ``E_N(x_k^m y) = E_N(x_k^m) E_N(y)`` for ``1 <= m <= max_degree``
    and every word ``y`` of length at most ``max_degree`` in the remaining
    variables. Non-self-adjoint inputs are replaced by their Hermitian
    dilations. This is a necessary condition only.
    """
    if max_degree < 2:
        raise ValueError("max_degree must be >= 2")
    conditioning = SubalgebraSpec.trivial() if conditioning is None else conditioning
    xs = list(xs)
    if not xs:
        return True, 0.0
    if not all(x.is_self_adjoint for x in xs):
        from .mart import dilate

        conditioning = conditioning.amplified(xs[0].alg)
        xs = [dilate(x) for x in xs]
    alg = xs[0].alg
    worst = 0.0
    for k, xk in enumerate(xs):
        others = [x for j, x in enumerate(xs) if j != k]
        if not others:
            continue
        powers, pm = [], np.eye(alg.dim, dtype=complex)
        for _ in range(max_degree):
            pm = pm @ xk.mat
            powers.append(Operator(alg, pm))
        e_pow = [conditional_expectation(p, conditioning) for p in powers]
        for w in _words(others, max_degree):
            y = Operator(alg, w)
            ey = conditional_expectation(y, conditioning)
            for p, ep in zip(powers, e_pow):
                lhs = conditional_expectation(p @ y, conditioning)
                scale = max(1.0, p.fro() * y.fro() / alg.dim)
                worst = max(worst, lhs.dist(ep @ ey) / np.sqrt(alg.dim) / scale)
    return worst <= tol, worst


def martingale_from_element(f: Operator, filt: Filtration) -> Martingale:
    """The martingale ``x_k = E_k(f)``."""
    if f.alg.factors != filt.alg.factors:
        raise SpecMismatch("element and filtration live in different algebras")
    return Martingale(filt, tuple(filt.E(f, k) for k in range(1, len(filt) + 1)))


def site_support(x: Operator, tol: float = 1e-12) -> tuple[int, int] | None:
    """Smallest factor interval ``[a, b]`` outside which ``x`` acts as a scalar.

    Returns ``None`` for scalar operators.
    """
    alg = x.alg
    n = alg.num_factors
    fac = alg.factors

    def acts_trivially_outside(a: int, b: int) -> bool:
        left = int(np.prod(fac[:a]))
        mid = int(np.prod(fac[a : b + 1]))
        right = int(np.prod(fac[b + 1 :]))
        t = x.mat.reshape(left, mid, right, left, mid, right)
        block = np.einsum("aibajb->ij", t) / (left * right)
        rebuilt = np.kron(np.kron(np.eye(left), block), np.eye(right))
        return float(np.linalg.norm(rebuilt - x.mat)) <= tol * max(1.0, x.fro())

    if float(np.linalg.norm(x.mat - sa.trace(x) * np.eye(alg.dim))) <= tol * max(1.0, x.fro()):
        return None
    best = (0, n - 1)
    for a in range(n):
        for b in range(a, n):
            if b - a < best[1] - best[0] and acts_trivially_outside(a, b):
                best = (a, b)
    return best


def martingale_from_independent(ds: Sequence[Operator], tol: float = MEAN_ZERO_TOL, max_degree: int = 4) -> Martingale:
    """Partial sums of independent mean-zero, site-localized operators.

    The generated filtration is realized as tensor prefixes: step ``k`` uses
    the prefix ending at the last factor touched by ``d_1..d_k``.
    """
    ds = list(ds)
    if not ds:
        raise ValueError("need at least one difference")
    for j, d in enumerate(ds):
        if abs(sa.trace(d)) > tol:
            raise NotMeanZero(f"tau(d_{j + 1}) = {sa.trace(d):.3e}")
    ok, worst = is_independent(ds, max_degree=max_degree)
    if not ok:
        raise NotIndependent(f"moment factorization violated by {worst:.3e}")
    alg = ds[0].alg
    ks, reach = [], 0
    for d in ds:
        supp = site_support(d)
        if supp is not None:
            reach = max(reach, supp[1] + 1)
        ks.append(reach)
    filt = Filtration(alg, tuple(SubalgebraSpec.tensor_prefix(k) for k in ks))
    try:
        return Martingale.from_differences(filt, ds)
    except NotMartingale as exc:
        raise SpecMismatch("differences are not representable over a tensor-prefix filtration") from exc


def classical_conditional_expectation(values: np.ndarray, site_dims: Sequence[int], k: int) -> np.ndarray:
    """Average a function on a uniform product space over coordinates ``k..N-1``."""
    shape = tuple(site_dims)
    t = np.asarray(values).reshape(shape)
    axes = tuple(range(k, len(shape)))
    avg = t.mean(axis=axes, keepdims=True) if axes else t
    return np.broadcast_to(avg, shape).reshape(-1)


def product_points(site_dims: Sequence[int]):
    return product(*[range(s) for s in site_dims])
