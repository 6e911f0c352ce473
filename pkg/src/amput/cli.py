"""Command line interface: ``amput price | oracle | premium | study ...``."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import report as rep
from .lattice import LatticeSpec, Scheme, extract_boundary, price_american, price_european_on_lattice
from .model import MarketModel
from .pde import CertificationError, OracleBoundary, reference_price, solve_vi
from .premium import PremiumInput, american_from_premium
from .study import (DEFAULT_SCHEDULE, STOPPING_SCHEDULE, boundary_checks, oracle_for_study,
                    run_boundary_asymptotics, run_convergence, run_stopping_study)


def _schedule(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad schedule {text!r}")


def cmd_price(args):
    model = MarketModel.load(args.model)
    spec = LatticeSpec(args.n, Scheme(args.scheme))
    res = price_american(model, spec)
    out = {"price": res.price, "european_lattice": price_european_on_lattice(model, spec),
           "n": spec.n, "scheme": spec.scheme.value, "h": res.h}
    if args.boundary_out:
        curve = extract_boundary(model, spec, res)
        rows = zip(curve.step, curve.t_years, curve.x_walk, curve.stock_price)
        rep.write_csv(args.boundary_out, ("step", "t_years", "x_walk", "stock_price"), rows)
    sys.stdout.write(rep.dumps(out))
    return 0


def cmd_oracle(args):
    model = MarketModel.load(args.model)
    keep = bool(args.surface_out)
    sol = solve_vi(model, args.m, args.nt, method=args.method, keep_surface=keep)
    if args.surface_out:
        rows = ((float(s), float(x), float(u)) for i, s in enumerate(sol.s)
                for x, u in zip(sol.x, sol.surface[i]))
        rep.write_csv(args.surface_out, ("time_to_maturity", "x_log", "value"), rows)
    if args.boundary_out:
        write_oracle_boundary(args.boundary_out, sol.s, sol.btilde)
    out = {"price": sol.price(), "m": args.m, "nt": args.nt, "method": args.method,
           "max_residual": sol.meta["max_residual"], "dx": sol.dx, "ds": sol.ds}
    sys.stdout.write(rep.dumps(out))
    return 0


def write_oracle_boundary(path, s, btilde):
    rows = ((float(t), float(b), math.exp(b) if np.isfinite(b) else math.nan) for t, b in zip(s, btilde))
    rep.write_csv(path, ("time_to_maturity", "btilde_log", "b_stock"), rows)


def read_oracle_boundary(path) -> OracleBoundary:
    header, rows = rep.read_csv(path)
    if header[:2] != ["time_to_maturity", "btilde_log"]:
        raise ValueError(f"{path}: not an oracle boundary CSV (header {header})")
    data = np.array(rows, dtype=np.float64).reshape(-1, len(header))
    return OracleBoundary(data[:, 0], data[:, 1])


def cmd_premium(args):
    model = MarketModel.load(args.model)
    inp = PremiumInput(model, read_oracle_boundary(args.boundary), panels=args.resolution)
    chk = american_from_premium(inp)
    ref = reference_price(model)
    out = {"premium": chk.premium, "european": chk.european, "american": chk.american,
           "reference": ref.price, "reference_certified": ref.certified,
           "gap_vs_reference": chk.american - ref.price}
    sys.stdout.write(rep.dumps(out))
    return 0 if ref.certified else 1


def _failures(checks: dict):
    return sorted(name for name, c in checks.items() if not c.get("ok", False))


def _finish(out_dir: Path, name: str, report, extra_checks=None):
    out_dir.mkdir(parents=True, exist_ok=True)
    for fmt in ("csv", "json", "svg"):
        rep.emit_report(report, fmt, out_dir / f"{name}.{fmt}")
    checks = dict(report.checks)
    if extra_checks:
        checks.update(extra_checks)
    failures = _failures(checks)
    sys.stdout.write(rep.dumps({"ok": not failures, "failures": failures, "out": str(out_dir)}))
    return 0 if not failures else 2


def cmd_study(args):
    model = MarketModel.load(args.model)
    out = Path(args.out)
    if args.kind == "converge":
        try:
            report = run_convergence(model, args.schedule or DEFAULT_SCHEDULE)
        except CertificationError as exc:
            sys.stdout.write(rep.dumps({"ok": False, "failures": ["reference_certification"],
                                        "reference": exc.reference.to_dict()}))
            return 2
        return _finish(out, "convergence", report)
    sol = oracle_for_study(model)
    if args.kind == "stopping":
        study = run_stopping_study(model, args.schedule or STOPPING_SCHEDULE, sol.boundary())
        return _finish(out, "stopping", study)
    fit = run_boundary_asymptotics(model, sol)
    fit.checks = boundary_checks(fit, sol)
    out.mkdir(parents=True, exist_ok=True)
    write_oracle_boundary(out / "oracle_boundary.csv", sol.s, sol.btilde)
    return _finish(out, "boundary", fit)


def build_parser():
    p = argparse.ArgumentParser(prog="amput", description="Binomial approximation of the American put")
    sub = p.add_subparsers(dest="cmd", required=True)

    pp = sub.add_parser("price", help="lattice price and exercise boundary")
    pp.add_argument("--model", required=True)
    pp.add_argument("--n", type=int, required=True)
    pp.add_argument("--scheme", choices=["paper", "rn"], default="paper")
    pp.add_argument("--boundary-out")
    pp.set_defaults(func=cmd_price)

    po = sub.add_parser("oracle", help="finite-difference variational-inequality solve")
    po.add_argument("--model", required=True)
    po.add_argument("--m", type=int, default=2000)
    po.add_argument("--nt", type=int, default=2000)
    po.add_argument("--method", choices=["bs", "psor"], default="bs")
    po.add_argument("--surface-out")
    po.add_argument("--boundary-out")
    po.set_defaults(func=cmd_oracle)

    pr = sub.add_parser("premium", help="early exercise premium from an oracle boundary")
    pr.add_argument("--model", required=True)
    pr.add_argument("--boundary", required=True)
    pr.add_argument("--resolution", type=int, default=64, help="Gauss-Legendre panels")
    pr.set_defaults(func=cmd_premium)

    ps = sub.add_parser("study", help="convergence / stopping-rule / boundary studies")
    ps.add_argument("kind", choices=["converge", "stopping", "boundary"])
    ps.add_argument("--model", required=True)
    ps.add_argument("--out", required=True)
    ps.add_argument("--schedule", type=_schedule)
    ps.set_defaults(func=cmd_study)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
