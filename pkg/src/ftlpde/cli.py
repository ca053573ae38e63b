"""Command-line entry point: ``ftlpde run|converge|riemann|check``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness
from .model import VelocityModel
from .reference import UnsupportedModelError, solve_riemann


def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _ints(text):
    return [int(v) for v in text.replace(",", " ").split()]


def _common(p):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--model", help="lwr | glwr:<gamma> | table:<csv>")
    p.add_argument("--datum", help="ic-paper or a density CSV (x_left,x_right,value)")
    p.add_argument("--mode", choices=["anchored", "phantom"])
    p.add_argument("--n", type=int)
    p.add_argument("--n-list", type=_ints, dest="n_list")
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--snapshots", type=_floats)
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--delta-rho", type=float, dest="delta_rho")
    p.add_argument("--window", type=_floats)
    p.add_argument("--out")
    p.add_argument("--jobs", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ftlpde", description="Follow-the-leader particle solver for scalar conservation laws")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("run", help="integrate one configuration and write its outputs"))
    _common(sub.add_parser("converge", help="L1 convergence study against a front-tracking reference"))
    chk = sub.add_parser("check", help="evaluate the discrete invariants")
    _common(chk)
    chk.add_argument("--trajectory", help="check an existing trajectory CSV instead of integrating")
    rp = sub.add_parser("riemann", help="print the entropy solution of a Riemann problem as JSON")
    rp.add_argument("rho_l", type=float)
    rp.add_argument("rho_r", type=float)
    rp.add_argument("--model", default="lwr")
    return parser


def resolve_config(args) -> harness.ExperimentConfig:
    base = {}
    if args.config:
        base = harness.asdict(harness.ExperimentConfig.from_json(args.config))
    for f in harness.fields(harness.ExperimentConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            base[f.name] = val
    return harness.ExperimentConfig.from_dict(base).validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "riemann":
            wave = solve_riemann(args.rho_l, args.rho_r, VelocityModel.from_spec(args.model))
            sys.stdout.write(harness.dumps(wave.as_dict()))
            return 0
        config = resolve_config(args)
        if args.command == "run":
            out = harness.run(config)
            print(f"wrote {out}")
            return 0
        if args.command == "converge":
            rows, order = harness.converge(config)
            harness.write_convergence(rows, order, config, config.out)
            print(f"{'N':>6} {'L1 error':>12} {'runtime':>9}")
            for r in rows:
                print(f"{r.n:>6} {r.l1_error:>12.4e} {r.runtime:>8.2f}s")
            print(f"observed order: {order:.3f}")
            return 0
        results = harness.check(config, trajectory=args.trajectory)
        for r in results:
            print(f"{r.status:>8}  {r.name:<15} margin={r.margin:.3e}  {r.detail}")
        report = {"results": [r.as_dict() for r in results]}
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "check.json").write_text(harness.dumps(report))
        return 1 if any(r.hard_failure for r in results) else 0
    except (harness.ConfigError, UnsupportedModelError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
