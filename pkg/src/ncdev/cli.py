"""Command line entry point: ``ncdev {verify,gen,tail,gordin}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .ensembles import MODELS, EnsembleSpec, generate
from .ergo import ShiftSystem, gordin_decompose, verify_ergodic_rate
from .errors import ConfigInvalid, NcDevError
from .serialization import local_to_text, martingale_to_text, shift_system_to_doc
from .suite import SuiteConfig, emit_tail_curve, run_suite

EXIT_OK, EXIT_VIOLATIONS, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def _config(args) -> SuiteConfig:
    cfg = SuiteConfig.from_file(args.config) if args.config else SuiteConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    if args.suite is not None:
        cfg.suites = [s for s in args.suite.split(",") if s]
    if args.tol is not None:
        cfg.tol = args.tol
    return cfg.validate()


def _params(text: str | None) -> dict:
    if not text:
        return {}
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"--params is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigInvalid("--params must be a JSON object")
    return doc


def cmd_verify(args) -> int:
    cfg = _config(args)
    code, summary, _ = run_suite(cfg)
    print(json.dumps({k: summary[k] for k in ("total", "holds", "violations", "skipped")}))
    return code


def cmd_gen(args) -> int:
    cfg = _config(args)
    spec = EnsembleSpec(args.model, _params(args.params))
    m = generate(spec, cfg.seed)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{args.model.lower()}-{cfg.seed}.json"
    path.write_text(martingale_to_text(m) + "\n")
    print(path)
    return EXIT_OK


def cmd_tail(args) -> int:
    cfg = _config(args)
    m = generate(EnsembleSpec(args.model, _params(args.params)), cfg.seed)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"tail-{args.model.lower()}-{cfg.seed}.csv"
    top = float(np.max(np.abs(np.linalg.eigvalsh(m.last.hermitian_part())))) if m.is_self_adjoint else 1.0
    r_grid = np.linspace(0.05, 1.5, 30) * max(top, 1e-12)
    emit_tail_curve(m, r_grid, path)
    print(path)
    return EXIT_OK


def cmd_gordin(args) -> int:
    cfg = _config(args)
    sys_ = ShiftSystem(site_dim=2, W=8)
    rng = np.random.default_rng(cfg.seed)
    f = sys_.random_element(rng, 0, args.width)
    f = (f + f.adj) * 0.5
    pair = gordin_decompose(sys_, f)
    reps = verify_ergodic_rate(sys_, f, 2.0, [n for n in (1, 2, 4, 6) if n + args.width <= sys_.W], seed=cfg.seed)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "system": shift_system_to_doc(sys_, cfg.seed),
        "f": json.loads(local_to_text(f)),
        "m": json.loads(local_to_text(pair.m)),
        "g": json.loads(local_to_text(pair.g)),
        "residual": pair.residual,
        "difference_violation": pair.difference_violation(sys_),
        "rate": [r.to_dict() for r in reps],
    }
    (out / f"gordin-{cfg.seed}.json").write_text(json.dumps(doc, sort_keys=True) + "\n")
    print(json.dumps({"residual": pair.residual, "holds": all(r.holds for r in reps)}))
    return EXIT_OK if all(r.holds for r in reps) else EXIT_VIOLATIONS


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with SuiteConfig fields")
    common.add_argument("--seed", type=int, help="64-bit seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--suite", help="comma-separated suites: specalg,condexp,mart,devine,ergo")
    common.add_argument("--tol", type=float, help="report tolerance")
    parser = argparse.ArgumentParser(prog="ncdev", description="Deviation inequalities for matrix martingales.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="run verification suites").set_defaults(func=cmd_verify)
    for name, func, helptext in (("gen", cmd_gen, "emit one random martingale"),
                                 ("tail", cmd_tail, "emit a tail curve as CSV")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--model", choices=MODELS, default="BOUNDED_SELF_ADJOINT")
        p.add_argument("--params", help='model parameters as JSON, e.g. \'{"d": 8, "n": 4}\'')
        p.set_defaults(func=func)
    p = sub.add_parser("gordin", parents=[common], help="martingale-coboundary demo on a shift system")
    p.add_argument("--width", type=int, default=1, help="support width of the random element")
    p.set_defaults(func=cmd_gordin)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NcDevError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
