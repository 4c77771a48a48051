"""Cuculescu projections, Hermitian dilation, truncation and square functions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import specalg as sa
from .condexp import Martingale
from .errors import NotMartingale, NotSelfAdjoint
from .specalg import Indicator, Operator


def _clean_projection(m: np.ndarray) -> np.ndarray:
    """Nearest orthogonal projection to an almost-projection."""
    h = 0.5 * (m + m.conj().T)
    vals, vecs = np.linalg.eigh(h)
    v = vecs[:, vals > 0.5]
    return v @ v.conj().T


@dataclass(frozen=True, eq=False)
class CuculescuFamily:
    lam: float
    projections: tuple[Operator, ...]  # q_0 = 1, q_1, ..., q_N
    martingale: Martingale

    @property
    def q_last(self) -> Operator:
        return self.projections[-1]

    def violations(self) -> dict[str, float]:
        """Worst residual of each defining property; all should be ~0."""
        m = self.martingale
        filt = m.filtration
        one = m.alg.identity()
        out = dict.fromkeys(
            ["projection", "adapted", "decreasing", "commutation", "cutoff", "weak_type"], 0.0
        )
        for n in range(1, m.n + 1):
            q, qp, x = self.projections[n], self.projections[n - 1], m.elements[n - 1]
            out["projection"] = max(out["projection"], (q @ q).dist(q), q.adj.dist(q))
            out["adapted"] = max(out["adapted"], filt.E(q, n).dist(q))
            out["decreasing"] = max(out["decreasing"], (q @ qp).dist(q))
            c = qp @ x @ qp
            out["commutation"] = max(out["commutation"], (q @ c).dist(c @ q))
            out["cutoff"] = max(out["cutoff"], sa.op_norm(q @ x @ q) - self.lam)
            lhs = self.lam * sa.trace(one - q).real
            rhs = sa.trace((one - q) @ sa.modulus(x)).real
            out["weak_type"] = max(out["weak_type"], lhs - rhs)
        return out


def cuculescu(m: Martingale, lam: float) -> CuculescuFamily:
    """``q_n = q_{n-1} 1_{[-lam, lam]}(q_{n-1} x_n q_{n-1})`` with ``q_0 = 1``."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if not m.is_self_adjoint:
        raise NotSelfAdjoint("Cuculescu projections need a self-adjoint martingale")
    q = m.alg.identity()
    qs = [q]
    window = Indicator.closed(-lam, lam)
    for x in m.elements:
        c = q @ x @ q
        c = Operator(m.alg, c.hermitian_part())
        e = sa.functional_calculus(c, window)
        q = Operator(m.alg, _clean_projection(q.mat @ e.mat))
        qs.append(q)
    return CuculescuFamily(float(lam), tuple(qs), m)


def cuculescu_lp_bound(fam: CuculescuFamily, p: float) -> dict:
    """``lam * tau(1 - q_N)^{1/p} <= ||x_N||_p``."""
    one = fam.martingale.alg.identity()
    mass = max(sa.trace(one - fam.q_last).real, 0.0)
    lhs = fam.lam * mass ** (1.0 / p)
    rhs = sa.lp_norm(fam.martingale.last, p)
    return {"lhs": lhs, "rhs": rhs, "holds": lhs <= rhs + 1e-9, "margin": rhs - lhs}


def dilate(x: Operator) -> Operator:
    """``J(x) = [[0, x], [x*, 0]]`` in ``M_2 (x) alg``."""
    d = x.dim
    z = np.zeros((d, d), dtype=complex)
    return Operator(x.alg.dilated(), np.block([[z, x.mat], [x.mat.conj().T, z]]))


def dilate_martingale(m: Martingale) -> Martingale:
    filt = m.filtration.dilated()
    return Martingale(filt, tuple(dilate(x) for x in m.elements))


@dataclass(frozen=True, eq=False)
class TruncationPair:
    u: float
    y_diffs: tuple[Operator, ...]
    z_diffs: tuple[Operator, ...]
    martingale: Martingale

    def y(self) -> Martingale:
        return Martingale.from_differences(self.martingale.filtration, self.y_diffs, check=False)

    def z(self) -> Martingale:
        return Martingale.from_differences(self.martingale.filtration, self.z_diffs, check=False)

    def violations(self) -> dict[str, float]:
        filt = self.martingale.filtration
        out = dict.fromkeys(["reconstruction", "y_centered", "z_centered", "y_bound", "z_variance"], 0.0)
        for k, (dx, dy, dz) in enumerate(zip(self.martingale.differences, self.y_diffs, self.z_diffs), start=1):
            out["reconstruction"] = max(out["reconstruction"], (dy + dz).dist(dx))
            out["y_centered"] = max(out["y_centered"], filt.E(dy, k - 1).fro())
            out["z_centered"] = max(out["z_centered"], filt.E(dz, k - 1).fro())
            out["y_bound"] = max(out["y_bound"], sa.op_norm(dy) - 2 * self.u)
            out["z_variance"] = max(out["z_variance"], sa.lp_norm(dz, 2) ** 2 - large_part_second_moment(dx, self.u))
        return out


def large_part_second_moment(dx: Operator, u: float) -> float:
    """``tau(|dx|^2 1_{(u, inf)}(|dx|))``."""
    s = sa.singular_values(dx)
    ctol = sa.cluster_tol(np.append(s, 0.0))
    return float(np.sum(s[s > u + ctol] ** 2)) / dx.dim


def truncate(m: Martingale, u: float) -> TruncationPair:
    """Split ``dx_k`` at level ``u`` of ``|dx_k|`` and re-center each piece with ``E_{k-1}``.

    ``dx_1`` is centered with the filtration's base level, so ``E_0(x_1)``
    must vanish for ``dy + dz = dx`` to hold.
    """
    if u <= 0:
        raise ValueError("u must be positive")
    filt = m.filtration
    if filt.E(m.elements[0], 0).fro() > 1e-9 * max(1.0, m.elements[0].fro()):
        raise NotMartingale("truncation needs E_0(x_1) = 0")
    small = Indicator.closed(-np.inf, u)
    ys, zs = [], []
    for k, dx in enumerate(m.differences, start=1):
        p_small = sa.modulus_projection(dx, small)
        lo = dx @ p_small
        hi = dx - lo
        ys.append(lo - filt.E(lo, k - 1))
        zs.append(hi - filt.E(hi, k - 1))
    return TruncationPair(float(u), tuple(ys), tuple(zs), m)


def square_functions(m: Martingale) -> tuple[Operator, Operator]:
    """Column and row square functions ``(sum |dx_k|^2)^{1/2}``, ``(sum |dx_k*|^2)^{1/2}``."""
    col = m.alg.zero()
    row = m.alg.zero()
    for d in m.differences:
        col = col + d.adj @ d
        row = row + d @ d.adj
    sqrt = lambda v: np.sqrt(np.clip(v, 0.0, None))
    col = sa.functional_calculus(Operator(m.alg, col.hermitian_part()), sqrt)
    row = sa.functional_calculus(Operator(m.alg, row.hermitian_part()), sqrt)
    return col, row


def bg_ratio(m: Martingale, p: float) -> float:
    """``||x_n||_p / max(||S_col||_p, ||S_row||_p)``; 1 by convention when both vanish."""
    if p < 2:
        raise ValueError("bg_ratio is defined for p >= 2")
    col, row = square_functions(m)
    denom = max(sa.lp_norm(col, p), sa.lp_norm(row, p))
    num = sa.lp_norm(m.last, p)
    if denom == 0.0:
        return 1.0
    return num / denom


def column_ratio(m: Martingale, p: float) -> float:
    """``||x_n||_p^p / ||S_col||_p^p``, the one-sided estimate used for ``1 < p < 2``."""
    col, _ = square_functions(m)
    denom = sa.lp_norm(col, p) ** p
    if denom == 0.0:
        return 1.0
    return sa.lp_norm(m.last, p) ** p / denom
