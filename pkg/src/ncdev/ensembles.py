"""Deterministic random martingale ensembles."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import specalg as sa
from .condexp import Filtration, Martingale, SubalgebraSpec
from .errors import BadSpec
from .factorized import SiteLocalFamily
from .specalg import Operator, TracialAlgebra

MODELS = ("BOUNDED_SELF_ADJOINT", "DIAGONAL_CLASSICAL", "SITE_TENSOR", "HAAR_CONJUGATED")


def child_rng(seed: int, suite_id: str = "", index: int = 0) -> np.random.Generator:
    """Independent stream for trial ``index`` of ``suite_id``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(suite_id.encode()), int(index)])
    return np.random.default_rng(ss)


def random_hermitian(rng: np.random.Generator, d: int) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (g + g.conj().T)


def random_matrix(rng: np.random.Generator, d: int) -> np.ndarray:
    return rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))


def haar_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(random_matrix(rng, d))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def pinching_chain(d: int, n: int, rng: np.random.Generator) -> Filtration:
    """Filtration of ``n`` pinchings: diagonal first, then random block merges."""
    if not 1 <= n <= d:
        raise BadSpec(f"a pinching chain of {n} strictly increasing levels needs d >= n (d={d})")
    blocks = [[i] for i in range(d)]
    levels = [SubalgebraSpec.block_diagonal(blocks)]
    for _ in range(n - 1):
        i, j = sorted(rng.choice(len(blocks), size=2, replace=False))
        merged = blocks[i] + blocks[j]
        blocks = [b for t, b in enumerate(blocks) if t not in (i, j)] + [merged]
        levels.append(SubalgebraSpec.block_diagonal(blocks))
    return Filtration(TracialAlgebra.flat(d), tuple(levels))


def tensor_chain(site_dim: int, n: int) -> Filtration:
    alg = TracialAlgebra.tensor_power(site_dim, n)
    return Filtration.tensor(alg)


@dataclass(frozen=True)
class EnsembleSpec:
    """Model name plus parameters.

    BOUNDED_SELF_ADJOINT: ``d``, ``n``, ``cap``, ``filtration`` ("pinching" or "tensor"), ``site_dim``.
    DIAGONAL_CLASSICAL: ``n``, ``steps`` ("rademacher" or "predictable").
    SITE_TENSOR: ``n``, ``site_dim``, ``cap``, ``self_adjoint``.
    HAAR_CONJUGATED: ``d``, ``n``, ``cap``, ``spectrum``.
    """

    model: str
    params: dict[str, Any] = field(default_factory=dict)

    def get(self, key: str, default=None):
        return self.params.get(key, default)


def _differences_from_noise(filt: Filtration, noise, rng, cap: float) -> list[Operator]:
    diffs = []
    for k in range(1, len(filt) + 1):
        y = filt.E(Operator(filt.alg, noise(k)), k)
        d = y - filt.E(y, k - 1)
        nrm = sa.op_norm(d)
        if nrm > 0:
            d = d * (cap * rng.uniform(0.5, 1.0) / nrm)
        diffs.append(Operator(filt.alg, d.hermitian_part()))
    return diffs


def _bounded_self_adjoint(spec: EnsembleSpec, rng) -> Martingale:
    n = int(spec.get("n", 4))
    cap = float(spec.get("cap", 1.0))
    if spec.get("filtration", "pinching") == "tensor":
        filt = tensor_chain(int(spec.get("site_dim", 2)), n)
    else:
        filt = pinching_chain(int(spec.get("d", max(n, 4))), n, rng)
    d = filt.alg.dim
    diffs = _differences_from_noise(filt, lambda k: random_hermitian(rng, d), rng, cap)
    return Martingale.from_differences(filt, diffs)


def _haar_conjugated(spec: EnsembleSpec, rng) -> Martingale:
    n = int(spec.get("n", 4))
    d = int(spec.get("d", max(n, 4)))
    cap = float(spec.get("cap", 1.0))
    spectrum = np.asarray(spec.get("spectrum", np.linspace(-1.0, 1.0, d)), dtype=float)
    if spectrum.size != d:
        raise BadSpec("spectrum length must equal d")
    filt = pinching_chain(d, n, rng)

    def noise(k):
        u = haar_unitary(rng, d)
        return (u * spectrum) @ u.conj().T

    return Martingale.from_differences(filt, _differences_from_noise(filt, noise, rng, cap))


def _diagonal_classical(spec: EnsembleSpec, rng) -> Martingale:
    n = int(spec.get("n", 4))
    if n > 12:
        raise BadSpec("dense diagonal embedding limited to 12 sites")
    filt = tensor_chain(2, n)
    pts = ((np.arange(2 ** n)[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1)
    eps = 1.0 - 2.0 * pts  # eps[w, j] = +-1 on coordinate j
    steps = spec.get("steps", "rademacher")
    mult = np.ones((2 ** n, n))
    if steps == "predictable":
        for j in range(1, n):
            # a random function of the first j coordinates
            table = rng.uniform(0.5, 1.5, size=2 ** j)
            past = pts[:, :j] @ (1 << np.arange(j - 1, -1, -1))
            mult[:, j] = table[past]
    elif steps != "rademacher":
        raise BadSpec(f"unknown steps {steps!r}")
    diffs = [Operator(filt.alg, np.diag(mult[:, j] * eps[:, j]).astype(complex)) for j in range(n)]
    return Martingale.from_differences(filt, diffs)


def site_family(spec: EnsembleSpec, rng) -> SiteLocalFamily:
    """Independent mean-zero single-site blocks with ``||a_j|| <= cap``."""
    n = int(spec.get("n", 4))
    s = int(spec.get("site_dim", 2))
    cap = float(spec.get("cap", 1.0))
    herm = bool(spec.get("self_adjoint", True))
    blocks = []
    for _ in range(n):
        a = random_hermitian(rng, s) if herm else random_matrix(rng, s)
        a = a - np.trace(a) / s * np.eye(s)
        nrm = np.linalg.norm(a, 2)
        blocks.append(a * (cap * rng.uniform(0.5, 1.0) / nrm) if nrm > 0 else a)
    return SiteLocalFamily(tuple(blocks))


def _site_tensor(spec: EnsembleSpec, rng) -> Martingale:
    fam = site_family(spec, rng)
    if fam.site_dim ** fam.n > 4096:
        raise BadSpec("dense site-tensor martingale too large; use site_family")
    filt = Filtration.tensor(fam.algebra())
    return Martingale.from_differences(filt, fam.dense())


_BUILDERS = {
    "BOUNDED_SELF_ADJOINT": _bounded_self_adjoint,
    "DIAGONAL_CLASSICAL": _diagonal_classical,
    "SITE_TENSOR": _site_tensor,
    "HAAR_CONJUGATED": _haar_conjugated,
}


def generate(spec: EnsembleSpec, seed: int | np.random.Generator) -> Martingale:
    """Build one martingale; the same ``(spec, seed)`` gives a bit-identical instance."""
    if spec.model not in _BUILDERS:
        raise BadSpec(f"unknown model {spec.model!r}; expected one of {MODELS}")
    rng = seed if isinstance(seed, np.random.Generator) else child_rng(seed, spec.model)
    return _BUILDERS[spec.model](spec, rng)
