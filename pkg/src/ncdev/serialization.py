"""Text exchange formats for operators, filtrations, martingales and shift systems.

All documents are JSON. Matrix entries are written row-major as
``[re, im]`` pairs with 17 significant digits, which round-trips every
IEEE double exactly.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .condexp import Filtration, Martingale, SubalgebraSpec
from .ergo import LocalOp, ShiftSystem
from .errors import ConfigInvalid
from .specalg import Operator, TracialAlgebra


def _num(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError("non-finite matrix entry")
    return format(float(x), ".17g")


def _entries_text(mat: np.ndarray) -> str:
    flat = np.asarray(mat, dtype=complex).ravel()
    return "[" + ", ".join(f"[{_num(z.real)}, {_num(z.imag)}]" for z in flat) + "]"


def _entries(doc_entries, d: int) -> np.ndarray:
    arr = np.asarray(doc_entries, dtype=float)
    if arr.shape != (d * d, 2):
        raise ConfigInvalid(f"expected {d * d} [re, im] pairs, got shape {arr.shape}")
    return (arr[:, 0] + 1j * arr[:, 1]).reshape(d, d)


def operator_to_text(x: Operator) -> str:
    head = json.dumps({"dim": x.dim, "structure": x.alg.structure, "factors": list(x.alg.factors)}, sort_keys=True)
    return head[:-1] + ', "entries": ' + _entries_text(x.mat) + "}"


def operator_to_doc(x: Operator) -> dict:
    return json.loads(operator_to_text(x))


def operator_from_doc(doc: dict) -> Operator:
    try:
        d = int(doc["dim"])
        factors = tuple(doc.get("factors", (d,)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad matrix document: {exc}") from exc
    alg = TracialAlgebra(factors)
    if alg.dim != d:
        raise ConfigInvalid("factors do not multiply to dim")
    return Operator(alg, _entries(doc["entries"], d))


def operator_from_text(text: str) -> Operator:
    return operator_from_doc(json.loads(text))


def subalgebra_to_doc(s: SubalgebraSpec) -> dict:
    if s.kind == "block_diagonal":
        return {"kind": s.kind, "blocks": [list(b) for b in s.blocks]}
    if s.kind == "tensor_prefix":
        return {"kind": s.kind, "k": s.k}
    return {"kind": s.kind}


def subalgebra_from_doc(doc: dict) -> SubalgebraSpec:
    kind = doc.get("kind")
    if kind == "block_diagonal":
        return SubalgebraSpec.block_diagonal(doc["blocks"])
    if kind == "tensor_prefix":
        return SubalgebraSpec.tensor_prefix(doc["k"])
    if kind == "trivial":
        return SubalgebraSpec.trivial()
    if kind == "full":
        return SubalgebraSpec.full()
    raise ConfigInvalid(f"unknown subalgebra kind {kind!r}")


def filtration_to_doc(f: Filtration) -> dict:
    return {
        "factors": list(f.alg.factors),
        "base": subalgebra_to_doc(f.base),
        "levels": [subalgebra_to_doc(s) for s in f.levels],
    }


def filtration_from_doc(doc: dict) -> Filtration:
    alg = TracialAlgebra(tuple(doc["factors"]))
    return Filtration(
        alg,
        tuple(subalgebra_from_doc(s) for s in doc["levels"]),
        base=subalgebra_from_doc(doc.get("base", {"kind": "trivial"})),
    )


def martingale_to_text(m: Martingale) -> str:
    filt = json.dumps(filtration_to_doc(m.filtration), sort_keys=True)
    elems = ", ".join(operator_to_text(x) for x in m.elements)
    return '{"filtration": ' + filt + ', "elements": [' + elems + "]}"


def martingale_from_text(text: str, check: bool = True) -> Martingale:
    doc = json.loads(text)
    filt = filtration_from_doc(doc["filtration"])
    m = Martingale(filt, tuple(operator_from_doc(e) for e in doc["elements"]))
    if check:
        m.validate()
    return m


def shift_system_to_doc(sys: ShiftSystem, seed: int | None = None) -> dict:
    return {"site_dim": sys.site_dim, "W": sys.W, "seed": seed}


def shift_system_from_doc(doc: dict) -> ShiftSystem:
    return ShiftSystem(site_dim=int(doc.get("site_dim", 2)), W=int(doc.get("W", 8)))


def local_to_text(x: LocalOp) -> str:
    head = json.dumps({"site_dim": x.site_dim, "support": None if x.support is None else list(x.support)})
    return head[:-1] + ', "block": ' + _entries_text(x.block) + "}"


def local_from_text(text: str) -> LocalOp:
    doc = json.loads(text)
    sup = None if doc["support"] is None else tuple(int(v) for v in doc["support"])
    s = int(doc["site_dim"])
    d = 1 if sup is None else s ** (sup[1] - sup[0] + 1)
    return LocalOp(s, sup, _entries(doc["block"], d))
