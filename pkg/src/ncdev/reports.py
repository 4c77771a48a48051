"""Verification reports and their text/tabular emission."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

INEQUALITY_IDS = (
    "AZUMA",
    "MAX_AZUMA",
    "IND_LDI",
    "CRAMER_LDI",
    "MOD_CRAMER_LDI",
    "LP_LDI",
    "LPSI_EQUIV",
    "GT",
    # property checks emitted by the harness alongside the bounds
    "ERGODIC_RATE",
    "CUCULESCU",
    "DILATION",
    "CE_PROPERTIES",
)

REPORT_TOL = 1e-9


def _clean(v):
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in sorted(v.items(), key=lambda kv: str(kv[0]))}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if hasattr(v, "item"):
        return _clean(v.item())
    return v


@dataclass
class VerificationReport:
    """One inequality check ``lhs <= rhs``.

    ``checks`` holds named internal steps, each ``{"lhs", "rhs", "holds"}``;
    the report holds only if the main bound and every internal step hold.
    A report with ``skipped`` set was not evaluated because a hypothesis of
    the bound failed on the instance.
    """

    inequality_id: str
    params: dict
    lhs: float
    rhs: float
    constants_used: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    seed: int | None = None
    skipped: str | None = None
    tol: float = REPORT_TOL

    def __post_init__(self):
        if self.inequality_id not in INEQUALITY_IDS:
            raise ValueError(f"unknown inequality id {self.inequality_id!r}")

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def main_holds(self) -> bool:
        return self.lhs <= self.rhs + self.tol

    @property
    def holds(self) -> bool:
        return self.skipped is None and self.main_holds and all(c["holds"] for c in self.checks.values())

    @property
    def failed_checks(self) -> list[str]:
        return [k for k, c in self.checks.items() if not c["holds"]]

    def add_check(self, name: str, lhs: float, rhs: float, tol: float | None = None) -> bool:
        tol = self.tol if tol is None else tol
        ok = bool(lhs <= rhs + tol)
        self.checks[name] = {"lhs": float(lhs), "rhs": float(rhs), "holds": ok}
        return ok

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("tol")
        d["holds"] = self.holds
        d["margin"] = self.margin
        return _clean(d)

    def sort_key(self):
        return (self.inequality_id, -1 if self.seed is None else self.seed, json.dumps(_clean(self.params), sort_keys=True))


def check(lhs: float, rhs: float, tol: float = REPORT_TOL) -> dict:
    return {"lhs": float(lhs), "rhs": float(rhs), "holds": bool(lhs <= rhs + tol)}


def write_jsonl(reports: Iterable[VerificationReport], path: str | Path) -> None:
    reps = sorted(reports, key=lambda r: r.sort_key())
    with open(path, "w") as fh:
        for r in reps:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


TABLE_HEADER = ("inequality_id", "seed", "params", "lhs", "rhs", "margin", "holds", "skipped")


def write_table(reports: Sequence[VerificationReport], path: str | Path) -> None:
    reps = sorted(reports, key=lambda r: r.sort_key())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TABLE_HEADER)
        for r in reps:
            w.writerow([
                r.inequality_id,
                "" if r.seed is None else r.seed,
                json.dumps(_clean(r.params), sort_keys=True),
                repr(float(r.lhs)),
                repr(float(r.rhs)),
                repr(float(r.margin)),
                int(r.holds),
                r.skipped or "",
            ])
