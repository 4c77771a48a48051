"""Seeded verification suites, configuration and report files."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import devine as dv
from . import specalg as sa
from .condexp import SubalgebraSpec, check_ce_properties
from .ensembles import EnsembleSpec, child_rng, generate, random_hermitian, random_matrix, site_family
from .ergo import ShiftSystem, verify_ergodic_rate
from .errors import ConfigInvalid, NcDevError
from .mart import cuculescu, dilate
from .reports import VerificationReport, write_jsonl, write_table
from .specalg import Operator, TracialAlgebra

SUITES = ("specalg", "condexp", "mart", "devine", "ergo")


@dataclass
class SuiteConfig:
    seed: int = 0
    dims: list = field(default_factory=lambda: [4, 8])
    n_steps: list = field(default_factory=lambda: [2, 4])
    p_grid: list = field(default_factory=lambda: [1.0, 1.5, 2.0, 3.0, 4.0])
    r_grid: list = field(default_factory=lambda: list(dv.DEFAULT_R_GRID))
    alpha_grid: list = field(default_factory=lambda: [0.25, 1.0 / 3.0, 0.5, 0.75])
    lambda_grid: list = field(default_factory=lambda: [0.5, 1.0, 2.0, 4.0])
    trials: int = 2
    tol: float = 1e-9
    output_dir: str = "ncdev-out"
    suites: list = field(default_factory=lambda: list(SUITES))

    def validate(self) -> "SuiteConfig":
        for name in ("dims", "n_steps", "p_grid", "r_grid", "alpha_grid", "lambda_grid"):
            if not getattr(self, name):
                raise ConfigInvalid(f"{name} must be nonempty")
        if int(self.trials) < 1:
            raise ConfigInvalid("trials must be >= 1")
        if not float(self.tol) > 0:
            raise ConfigInvalid("tol must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigInvalid("seed must be a 64-bit unsigned integer")
        bad = [s for s in self.suites if s not in SUITES]
        if bad:
            raise ConfigInvalid(f"unknown suites {bad}; choose from {SUITES}")
        if any(int(d) < 1 for d in self.dims) or any(int(n) < 1 for n in self.n_steps):
            raise ConfigInvalid("dims and n_steps must be positive")
        if any(float(r) <= 0 for r in self.r_grid) or any(float(x) <= 0 for x in self.lambda_grid):
            raise ConfigInvalid("r_grid and lambda_grid must be positive")
        if any(not 0 < float(a) < 1 for a in self.alpha_grid):
            raise ConfigInvalid("alpha_grid must lie in (0, 1)")
        if any(float(p) < 1 for p in self.p_grid):
            raise ConfigInvalid("p_grid must be >= 1")
        return self

    @classmethod
    def from_dict(cls, doc: dict) -> "SuiteConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise ConfigInvalid(f"unknown config fields {sorted(extra)}")
        try:
            return cls(**doc).validate()
        except TypeError as exc:
            raise ConfigInvalid(str(exc)) from exc

    @classmethod
    def from_file(cls, path: str | Path) -> "SuiteConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigInvalid("config must be a JSON object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return asdict(self)


def _gated(make: Callable[[], VerificationReport], inequality_id: str, params: dict, seed) -> VerificationReport:
    """Run one verifier; a failed hypothesis becomes a skipped report."""
    try:
        return make()
    except NcDevError as exc:
        return VerificationReport(inequality_id, params, float("nan"), float("nan"), seed=seed,
                                  skipped=f"{type(exc).__name__}: {exc}")


# --------------------------------------------------------------------------
# per-suite trial bodies


def _specalg_trials(cfg: SuiteConfig):
    for i in range(cfg.trials):
        for d in cfg.dims:
            rng = child_rng(cfg.seed, f"specalg/{d}", i)
            x = Operator(TracialAlgebra.flat(int(d)), random_matrix(rng, int(d)))
            h = Operator(x.alg, random_hermitian(rng, int(d)))
            k = Operator(x.alg, random_hermitian(rng, int(d)))
            lhs = sa.trace(sa.expm_sa(h + k)).real
            rhs = sa.trace(sa.expm_sa(h) @ sa.expm_sa(k)).real
            rep = VerificationReport("GT", {"d": int(d)}, lhs, rhs, seed=i, tol=cfg.tol * max(1.0, abs(rhs)))
            dec = sa.spectral_decompose(h)
            rep.add_check("reconstruction", dec.reconstruct().dist(h), 0.0, tol=1e-8)
            s = sa.singular_values(x)
            for p in cfg.p_grid:
                ident = sa.lp_norm(x, p) ** p
                integral = float(p * _tail_integral(s, p))
                rep.add_check(f"moment_identity_p{p:g}", abs(ident - integral), 0.0, tol=1e-6 * max(1.0, ident))
            yield rep


def _tail_integral(s: np.ndarray, p: float) -> float:
    """``int_0^inf lam^{p-1} tau(1_{(lam, inf)}(|x|)) dlam`` summed exactly over the steps."""
    pts = np.concatenate([[0.0], np.sort(s)])
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi > lo:
            mid = 0.5 * (lo + hi)
            total += sa.distribution_from_values(s, mid) * (hi ** p - lo ** p) / p
    return total


def _condexp_trials(cfg: SuiteConfig):
    for i in range(cfg.trials):
        for d in cfg.dims:
            rng = child_rng(cfg.seed, f"condexp/{d}", i)
            alg = TracialAlgebra.flat(int(d))
            blocks = np.array_split(rng.permutation(int(d)), max(1, int(d) // 2))
            s = SubalgebraSpec.block_diagonal([b.tolist() for b in blocks])
            xs = [Operator(alg, random_matrix(rng, int(d))) for _ in range(3)]
            rep_ce = check_ce_properties(s, xs)
            lhs = max(rep_ce.contraction.values()) if rep_ce.contraction else 0.0
            rep = VerificationReport("CE_PROPERTIES", {"d": int(d)}, lhs, 0.0, seed=i, tol=cfg.tol)
            for name in ("idempotence", "positivity", "module"):
                rep.add_check(name, getattr(rep_ce, name), 0.0, tol=cfg.tol)
            yield rep


def _mart_trials(cfg: SuiteConfig):
    for i in range(cfg.trials):
        for n in cfg.n_steps:
            d = max(int(n), min(int(max(cfg.dims)), 16))
            rng = child_rng(cfg.seed, f"mart/{n}", i)
            m = generate(EnsembleSpec("BOUNDED_SELF_ADJOINT", {"d": d, "n": int(n)}), rng)
            top = sa.op_norm(m.last) or 1.0
            for lam_frac in cfg.lambda_grid:
                lam = float(lam_frac) * top
                fam = cuculescu(m, lam)
                viol = fam.violations()
                one = m.alg.identity()
                lhs = lam * sa.trace(one - fam.q_last).real
                rhs = sa.trace((one - fam.q_last) @ sa.modulus(m.last)).real
                rep = VerificationReport("CUCULESCU", {"n": int(n), "d": d, "lambda": lam}, lhs, rhs, seed=i,
                                         tol=cfg.tol)
                for name, v in viol.items():
                    rep.add_check(name, v, 0.0, tol=cfg.tol)
                yield rep
            x = Operator(TracialAlgebra.flat(d), random_matrix(rng, d))
            jx = dilate(x)
            gap = max(abs(sa.distribution(jx, r) - sa.distribution(x, r)) for r in sa.singular_values(x))
            rep = VerificationReport("DILATION", {"d": d}, gap, 0.0, seed=i, tol=1e-10)
            rep.add_check("op_norm", abs(sa.op_norm(jx) - sa.op_norm(x)), 0.0, tol=1e-10)
            yield rep


def _devine_trials(cfg: SuiteConfig):
    for i in range(cfg.trials):
        for n in cfg.n_steps:
            n = int(n)
            d = max(n, min(int(max(cfg.dims)), 16))
            rng = child_rng(cfg.seed, f"devine/{n}", i)
            m = generate(EnsembleSpec("BOUNDED_SELF_ADJOINT", {"d": d, "n": n}), rng)
            top = sa.op_norm(m.last) or 1.0
            for r in cfg.r_grid:
                r = float(r)
                yield _gated(lambda: dv.verify_azuma(m, r * top, seed=i), "AZUMA", {"r": r}, i)
                yield _gated(lambda: dv.verify_cramer_ldi(m, r, 0.1, seed=i), "CRAMER_LDI", {"r": r}, i)
                for a in cfg.alpha_grid:
                    yield _gated(lambda: dv.verify_modified_cramer_ldi(m, r, float(a), seed=i),
                                 "MOD_CRAMER_LDI", {"r": r, "alpha": float(a)}, i)
                for p in cfg.p_grid:
                    yield _gated(lambda: dv.verify_lp_ldi(m, r, float(p), seed=i), "LP_LDI", {"r": r, "p": float(p)}, i)
            for lam in cfg.lambda_grid:
                yield _gated(lambda: dv.verify_max_azuma(m, float(lam) * top, seed=i), "MAX_AZUMA",
                             {"lambda": float(lam)}, i)
            fam = site_family(EnsembleSpec("SITE_TENSOR", {"n": n, "site_dim": 2}), rng)
            for r in cfg.r_grid:
                yield _gated(lambda: dv.verify_independent_ldi(fam, float(r), seed=i), "IND_LDI", {"r": float(r)}, i)
            yield _gated(lambda: dv.verify_converse_ldi(fam, 1.0 / 16.0, seed=i), "IND_LDI", {"direction": "converse"}, i)
            x = Operator(TracialAlgebra.flat(d), random_matrix(rng, d))
            for a in (1.0, 2.0):
                yield _gated(lambda: dv.verify_lpsi(x, a, seed=i), "LPSI_EQUIV", {"alpha": a}, i)


def _ergo_trials(cfg: SuiteConfig):
    sys = ShiftSystem()
    for i in range(cfg.trials):
        rng = child_rng(cfg.seed, "ergo", i)
        width = 1 + i % 2
        f = sys.random_element(rng, 0, width)
        f = (f + f.adj) * 0.5
        f = f * (1.0 / max(sa.op_norm(f.as_operator()), 1e-300))
        grid = [n for n in (1, 2, 4, 6) if n + width <= sys.W]
        for p in cfg.p_grid:
            if p < 2:
                continue
            reps = _gated(lambda: verify_ergodic_rate(sys, f, float(p), grid, seed=i), "ERGODIC_RATE", {"p": p}, i)
            yield from (reps if isinstance(reps, list) else [reps])


_RUNNERS = {
    "specalg": _specalg_trials,
    "condexp": _condexp_trials,
    "mart": _mart_trials,
    "devine": _devine_trials,
    "ergo": _ergo_trials,
}


def run_suite(cfg: SuiteConfig, write: bool = True) -> tuple[int, dict, list[VerificationReport]]:
    """Run the selected suites; returns ``(exit_code, summary, reports)``.

    Files written to ``cfg.output_dir``: ``reports.jsonl``, one CSV per
    inequality id and ``summary.json``. The exit code is 1 iff some
    non-skipped report fails.
    """
    cfg.validate()
    reports: list[VerificationReport] = []
    for name in cfg.suites:
        reports.extend(_RUNNERS[name](cfg))
    summary = summarize(reports)
    if write:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_jsonl(reports, out / "reports.jsonl")
        for iid in summary["by_id"]:
            write_table([r for r in reports if r.inequality_id == iid], out / f"{iid}.csv")
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return (1 if summary["violations"] else 0), summary, reports


def summarize(reports) -> dict:
    by_id: dict = {}
    for r in reports:
        row = by_id.setdefault(r.inequality_id, {"total": 0, "holds": 0, "violations": 0, "skipped": 0})
        row["total"] += 1
        if r.skipped is not None:
            row["skipped"] += 1
        elif r.holds:
            row["holds"] += 1
        else:
            row["violations"] += 1
    tot = {k: sum(v[k] for v in by_id.values()) for k in ("total", "holds", "violations", "skipped")}
    return {**tot, "by_id": dict(sorted(by_id.items()))}


TAIL_HEADER = ("r", "lhs", "rhs_azuma", "rhs_cramer", "rhs_mod_cramer", "rhs_lp")


def tail_curve(m, r_grid, p: float = 2.0, alpha: float = 0.5, eps: float = 0.1) -> list[tuple]:
    """Rows ``(r, lhs, rhs...)`` with ``lhs = tau(1_{(r, inf)}(|x_n|))`` at absolute level ``r``.

    Bounds phrased at level ``nr`` are evaluated at ``r / n``.
    """
    laws = dv._Laws.of(m)
    n = laws.n
    c = laws.diff_sup()
    s2 = float(np.sum(c ** 2))
    gamma, beta = dv.modified_cramer_constants(alpha)
    with np.errstate(over="ignore"):
        kk = max(d.expect(lambda v: np.exp(v ** gamma)) for d in laws.diffs)
    big_m = float(np.max(laws.diff_lp(p)))
    cp = dv.lp_constant(p, dv.audited_ratio(laws, p)) if p > 1 else 1.0
    rows = []
    for r in r_grid:
        r = float(r)
        q = r / n
        lhs = laws.final.tail(r)
        az = 2.0 * math.exp(-r * r / (2.0 * s2)) if s2 > 0 else 0.0
        cr = 6.0 * math.exp(-(1 - eps) * q ** (2 / 3) * n ** (1 / 3) / 2.0)
        cst = 2.0 + 15.0 * kk * (1.0 / (q ** (2 * alpha) * 16.0 ** (1 - alpha)) + beta ** 2 / q ** 2)
        mc = cst * math.exp(-(q ** (2 * alpha)) * n ** alpha / 16.0 ** alpha)
        lp = cp * big_m ** p / (q ** p * n ** dv.lp_rate_exponent(p))
        rows.append((r, lhs, az, cr, mc, lp))
    return rows


def emit_tail_curve(m, r_grid, path: str | Path, **kw) -> list[tuple]:
    rows = tail_curve(m, r_grid, **kw)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TAIL_HEADER)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])
    return rows
