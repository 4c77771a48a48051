"""Shift systems on a finite window of tensor sites and the martingale-coboundary split.

Sites are labelled ``-W..W``; each carries ``M_s``. An operator is stored
by its support interval ``[a, b]`` and the block acting on those sites, the
identity elsewhere. The global ``s^(2W+1)``-dimensional matrix is never
formed. The shift ``T`` moves site ``j`` to ``j + 1``; ``A_j`` is the algebra
of sites ``<= j`` and ``E_j`` the trace-preserving conditional expectation
onto it (a partial trace over sites ``> j``). Below the window, ``A_j`` is
the scalars.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import specalg as sa
from .condexp import Filtration, Martingale, SubalgebraSpec
from .errors import NotMeanZero, WindowOverflow
from .reports import VerificationReport
from .specalg import Operator, TracialAlgebra

TRIM_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class LocalOp:
    """``block`` on sites ``support = (a, b)`` tensored with the identity elsewhere.

    ``support is None`` marks a scalar, stored as a ``1 x 1`` block.
    """

    site_dim: int
    support: tuple[int, int] | None
    block: np.ndarray

    def __post_init__(self):
        blk = np.asarray(self.block, dtype=complex)
        size = 1 if self.support is None else self.site_dim ** (self.support[1] - self.support[0] + 1)
        if blk.shape != (size, size):
            raise ValueError(f"block shape {blk.shape} does not fit support {self.support}")
        object.__setattr__(self, "block", blk)

    @classmethod
    def scalar(cls, site_dim: int, c: complex) -> "LocalOp":
        return cls(site_dim, None, np.array([[c]], dtype=complex))

    @property
    def width(self) -> int:
        return 0 if self.support is None else self.support[1] - self.support[0] + 1

    def trace(self) -> complex:
        return complex(np.trace(self.block) / self.block.shape[0])

    def extend(self, a: int, b: int) -> np.ndarray:
        """The block on the larger interval ``[a, b]``."""
        s = self.site_dim
        if self.support is None:
            return self.block[0, 0] * np.eye(s ** (b - a + 1), dtype=complex)
        lo, hi = self.support
        if lo < a or hi > b:
            raise ValueError("target interval must contain the support")
        return np.kron(np.kron(np.eye(s ** (lo - a)), self.block), np.eye(s ** (b - hi)))

    def _binary(self, other, fn) -> "LocalOp":
        if not isinstance(other, LocalOp):
            other = LocalOp.scalar(self.site_dim, complex(other))
        sups = [x.support for x in (self, other) if x.support is not None]
        if not sups:
            return LocalOp(self.site_dim, None, fn(self.block, other.block))
        a = min(u[0] for u in sups)
        b = max(u[1] for u in sups)
        return LocalOp(self.site_dim, (a, b), fn(self.extend(a, b), other.extend(a, b)))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __neg__(self):
        return LocalOp(self.site_dim, self.support, -self.block)

    def __mul__(self, c):
        return LocalOp(self.site_dim, self.support, self.block * c)

    __rmul__ = __mul__

    def __matmul__(self, other: "LocalOp") -> "LocalOp":
        return self._binary(other, np.matmul)

    @property
    def adj(self) -> "LocalOp":
        return LocalOp(self.site_dim, self.support, self.block.conj().T)

    def singular_values(self) -> np.ndarray:
        return sa.singular_values(self.as_operator())

    def as_operator(self) -> Operator:
        """``block`` as an element of the tensor power over its support.

        Tensoring with identities does not change the normalized spectral
        distribution, so tails and norms may be read off this operator.
        """
        alg = TracialAlgebra.tensor_power(self.site_dim, max(self.width, 1))
        blk = self.block if self.support is not None else self.block[0, 0] * np.eye(self.site_dim)
        return Operator(alg, blk)

    def norm2(self) -> float:
        return float(np.linalg.norm(self.block) / np.sqrt(self.block.shape[0]))

    def dist(self, other: "LocalOp") -> float:
        """``||self - other||_2``."""
        return (self - other).norm2()

    def trimmed(self, tol: float = TRIM_TOL) -> "LocalOp":
        """Shrink the support to the smallest interval outside which the operator is scalar."""
        op = self
        while op.support is not None:
            a, b = op.support
            s = self.site_dim
            rest = s ** (b - a)
            scale = max(1.0, float(np.linalg.norm(op.block)))
            t = op.block.reshape(s, rest, s, rest)
            left = np.einsum("iaib->ab", t) / s
            if np.linalg.norm(np.kron(np.eye(s), left) - op.block) <= tol * scale:
                op = LocalOp(s, None if a == b else (a + 1, b), left if a < b else left.reshape(1, 1))
                continue
            t = op.block.reshape(rest, s, rest, s)
            right = np.einsum("aibi->ab", t) / s
            if np.linalg.norm(np.kron(right, np.eye(s)) - op.block) <= tol * scale:
                op = LocalOp(s, None if a == b else (a, b - 1), right if a < b else right.reshape(1, 1))
                continue
            break
        return op

    def is_zero(self, tol: float = 0.0) -> bool:
        return float(np.max(np.abs(self.block))) <= tol


# elements of a shift system are local operators; the alias names their role
LocalizedElement = LocalOp


@dataclass(frozen=True)
class ShiftSystem:
    """Sites ``-W..W`` with ``M_s`` each, the index shift and the past filtration."""

    site_dim: int = 2
    W: int = 8
    tol: float = 1e-10

    @property
    def sites(self) -> range:
        return range(-self.W, self.W + 1)

    @property
    def num_sites(self) -> int:
        return 2 * self.W + 1

    def element(self, block: np.ndarray, start: int) -> LocalOp:
        blk = np.asarray(block, dtype=complex)
        width = int(round(np.log(blk.shape[0]) / np.log(self.site_dim)))
        op = LocalOp(self.site_dim, (start, start + width - 1), blk)
        self._check(op)
        return op

    def zero(self) -> LocalOp:
        return LocalOp.scalar(self.site_dim, 0.0)

    def random_element(self, rng: np.random.Generator, start: int, width: int, mean_zero: bool = True) -> LocalOp:
        d = self.site_dim ** width
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        if mean_zero:
            g = g - np.trace(g) / d * np.eye(d)
        return self.element(g, start)

    def _check(self, op: LocalOp) -> None:
        if op.support is not None and (op.support[0] < -self.W or op.support[1] > self.W):
            raise WindowOverflow(f"support {op.support} leaves the window [-{self.W}, {self.W}]")

    def shift(self, x: LocalOp, k: int = 1) -> LocalOp:
        """``T^k x``: the site content moved by ``k``."""
        if x.support is None or k == 0:
            return x
        out = LocalOp(x.site_dim, (x.support[0] + k, x.support[1] + k), x.block)
        self._check(out)
        return out

    def E(self, x: LocalOp, j: int) -> LocalOp:
        """Conditional expectation onto ``A_j``, the sites ``<= j``."""
        if x.support is None:
            return x
        a, b = x.support
        if b <= j:
            return x
        if a > j or j < -self.W:
            return LocalOp.scalar(x.site_dim, x.trace())
        s = x.site_dim
        keep = s ** (j - a + 1)
        drop = s ** (b - j)
        red = np.einsum("iaja->ij", x.block.reshape(keep, drop, keep, drop)) / drop
        return LocalOp(s, (a, j), red)

    def d(self, x: LocalOp, j: int) -> LocalOp:
        """``d_j(x) = E_j(x) - E_{j-1}(x)``."""
        return self.E(x, j) - self.E(x, j - 1)


def shift_apply(sys: ShiftSystem, f: LocalOp, k: int) -> LocalOp:
    return sys.shift(f, k)


def mart_diff_op(sys: ShiftSystem, f: LocalOp, j: int) -> LocalOp:
    if not -sys.W <= j <= sys.W:
        raise WindowOverflow(f"d_{j} is outside the window")
    return sys.d(f, j)


def partial_sum(sys: ShiftSystem, f: LocalOp, n: int) -> LocalOp:
    """``S_n(f) = sum_{k=0}^n T^k f``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    acc = f
    for k in range(1, n + 1):
        acc = acc + sys.shift(f, k)
    return acc


@dataclass(frozen=True, eq=False)
class GordinPair:
    """``f = m + g - T g`` with ``m`` a martingale difference for the shifted filtration."""

    f: LocalOp
    m: LocalOp
    g: LocalOp
    residual: float
    forward_series: LocalOp = field(default=None)
    backward_series: LocalOp = field(default=None)

    def difference_violation(self, sys: ShiftSystem) -> float:
        """``max_j ||E_{j-2}(T^j m)||_2`` over the shifts that stay inside the window."""
        worst = 0.0
        for j in range(-2 * sys.W, 2 * sys.W + 1):
            try:
                tm = sys.shift(self.m, j)
            except WindowOverflow:
                continue
            if -sys.W <= j - 2 <= sys.W:
                worst = max(worst, sys.E(tm, j - 2).norm2())
        return worst


def gordin_decompose(sys: ShiftSystem, f: LocalOp) -> GordinPair:
    """Martingale-coboundary decomposition of a localized mean-zero ``f``.

    With ``d_j`` the martingale differences of the past filtration,

    * ``g_j = sum_{k>=0} d_j T^k f`` for ``j <= -2``,
    * ``g_j = -sum_{k>=1} d_j T^{-k} f`` for ``j >= -1``,
    * ``m = sum_j d_{-1} T^j f``, ``g = sum_j g_j``.

    For ``f`` supported on ``[a, b]``, ``d_j T^k f`` vanishes unless
    ``a + k <= j <= b + k``, so every sum is finite. A term that would need
    sites outside the window raises :class:`WindowOverflow`.
    """
    if abs(f.trace()) > sys.tol * max(1.0, f.norm2()):
        raise NotMeanZero(f"tau(f) = {f.trace():.3e}")
    sys._check(f)
    zero = sys.zero()
    if f.support is None or f.is_zero():
        return GordinPair(f, zero, zero, 0.0, zero, zero)
    a, b = f.support
    g = zero
    for j in range(a, -1):
        for k in range(max(0, j - b), j - a + 1):
            g = g + sys.d(sys.shift(f, k), j)
    for j in range(-1, b):
        for k in range(max(1, a - j), b - j + 1):
            g = g - sys.d(sys.shift(f, -k), j)
    m = zero
    for j in range(-1 - b, -a):
        m = m + sys.d(sys.shift(f, j), -1)
    g, m = g.trimmed(), m.trimmed()
    residual = f.dist(m + g - sys.shift(g, 1))
    # the two series of the equivalent summability condition, both finite here
    fwd = zero
    for k in range(0, max(0, -a) + 1):
        fwd = fwd + sys.E(sys.shift(f, k), 0)
    bwd = zero
    for k in range(0, max(0, b) + 1):
        tk = sys.shift(f, -k)
        bwd = bwd + (tk - sys.E(tk, 0))
    return GordinPair(f, m, g, residual, fwd.trimmed(), bwd.trimmed())


def local_martingale(sys: ShiftSystem, m: LocalOp, n: int) -> Martingale:
    """The martingale ``sum_{k<=i} T^k m``, ``i = 0..n``, as dense matrices on its support hull.

    ``T^k m`` lies in ``A_{k-1}`` with ``E_{k-2}(T^k m) = 0``, so level ``i``
    is the prefix of sites ``<= i - 1`` and the base is the prefix ``<= -2``.
    """
    if m.support is None:
        raise ValueError("m must be non-scalar")
    terms = [sys.shift(m, k) for k in range(n + 1)]
    lo = min(t.support[0] for t in terms)
    hi = max(t.support[1] for t in terms)
    alg = TracialAlgebra.tensor_power(sys.site_dim, hi - lo + 1)

    def prefix(j):
        k = j - lo + 1
        if k <= 0:
            return SubalgebraSpec.trivial()
        return SubalgebraSpec.tensor_prefix(min(k, hi - lo + 1))

    levels = tuple(prefix(i - 1) for i in range(n + 1))
    filt = Filtration(alg, levels, base=prefix(-2))
    diffs = [Operator(alg, t.extend(lo, hi)) for t in terms]
    return Martingale.from_differences(filt, diffs)


def verify_ergodic_rate(
    sys: ShiftSystem,
    f: LocalOp,
    p: float,
    n_grid,
    audited: float | None = None,
    seed: int | None = None,
) -> list[VerificationReport]:
    """Deviation rate of ``S_n(f)`` through its martingale-coboundary split.

    ``S_n(f) = S_n(m) + g - T^{n+1} g``, so
    ``tau(1_{(n, inf)}(|S_n f|)) <= tau(1_{(n/3, inf)}(|S_n m|)) + 2 tau(1_{(n/3, inf)}(|g|))``.
    The martingale term is bounded by :func:`~ncdev.devine.verify_lp_ldi` and
    the coboundary term by Chebyshev on ``||g||_p``.
    """
    from .devine import verify_lp_ldi

    pair = gordin_decompose(sys, f)
    reps = []
    for n in n_grid:
        n = int(n)
        sn = partial_sum(sys, f, n)
        lhs = sa.distribution(sn.as_operator(), float(n))
        g_tail = sa.distribution(pair.g.as_operator(), n / 3.0)
        g_cheb = (sa.lp_norm(pair.g.as_operator(), p) / (n / 3.0)) ** p
        g_shift = sys.shift(pair.g, n + 1)
        if pair.m.support is None or pair.m.is_zero():
            m_tail, m_rhs, mrep = 0.0, 0.0, None
        else:
            mart = local_martingale(sys, pair.m, n)
            mrep = verify_lp_ldi(mart, n / (3.0 * (n + 1)), p, audited=audited)
            m_tail, m_rhs = mrep.lhs, mrep.rhs
        split = m_tail + 2.0 * g_tail
        bound = m_rhs + 2.0 * g_cheb
        rep = VerificationReport(
            "ERGODIC_RATE",
            {"n": n, "p": float(p)},
            lhs,
            bound,
            {"split": split, "residual": pair.residual, "m_bound": m_rhs, "g_chebyshev": g_cheb,
             "C_p": None if mrep is None else mrep.constants_used["C_p"]},
            seed=seed,
        )
        exact = sn - (partial_sum(sys, pair.m, n) + pair.g - g_shift)
        rep.add_check("split_identity", exact.norm2(), 0.0, tol=1e-8 * max(1.0, sn.norm2()))
        rep.add_check("split", lhs, split)
        rep.add_check("g_chebyshev", g_tail, g_cheb)
        if mrep is not None:
            rep.add_check("martingale_rate", m_tail, m_rhs)
            for name in mrep.failed_checks:
                rep.add_check(f"martingale_{name}", 1.0, 0.0)
        reps.append(rep)
    return reps
