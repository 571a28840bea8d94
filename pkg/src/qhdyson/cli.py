"""``qh``: run scenarios, sweep parameters, verify the bundled suite.

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
3 numerical breakdown.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import parse_config
from .errors import ConfigInvalid, NumericalBreakdown, QHError
from .scenario import (
    EXIT_BREAKDOWN,
    EXIT_CONFIG,
    EXIT_FAIL,
    EXIT_OK,
    bundled_names,
    output_dir,
    resolve,
    run_scenario,
    sweep,
    with_parameter,
)


def _values(text: str) -> list:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            out.append(json.loads(item))
        except json.JSONDecodeError:
            out.append(item)
    if not out:
        raise ConfigInvalid("values", "expected a comma-separated list")
    return out


def _load(source: str, dt: float | None):
    cfg = resolve(source)
    if dt is not None:
        cfg = parse_config(with_parameter(cfg.raw, "dt", dt), cfg.name)
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args.scenario, args.dt)
    report = run_scenario(cfg, out_dir=args.out)
    for c in report.checks:
        value = "-" if c.value is None else f"{c.value:.3e}"
        print(f"{c.verdict.upper():7s} {c.name:22s} {value:>10s}  tol {c.tolerance:.1e}")
    if report.error:
        print(f"breakdown: {report.error}", file=sys.stderr)
    print(f"{cfg.name}: {report.verdict} -> {output_dir(cfg, args.out) / cfg.name}")
    return report.exit_code


def cmd_sweep(args) -> int:
    cfg = resolve(args.scenario)
    rows = sweep(cfg, args.param, _values(args.values), workers=args.workers, out_dir=args.out)
    for row in rows:
        print(f"{args.param}={row[args.param]!s:12s} {row['verdict']}")
    verdicts = {row["verdict"] for row in rows}
    if "breakdown" in verdicts or "error" in verdicts:
        return EXIT_BREAKDOWN
    return EXIT_OK if verdicts == {"pass"} else EXIT_FAIL


def cmd_verify(args) -> int:
    from .verify import summary, verify_paper

    report = verify_paper(tolerance_override=args.tol, out_dir=args.out)
    print(summary(report))
    return report.exit_code


def cmd_list(args) -> int:
    for name in bundled_names():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qh", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario (file path or bundled name)")
    p.add_argument("scenario")
    p.add_argument("--out", help="output directory (default: $QH_OUT or ./qh-out)")
    p.add_argument("--dt", type=float, help="override the grid step")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="rerun a scenario over a list of parameter values")
    p.add_argument("scenario")
    p.add_argument("--param", required=True, help="params key, or dt / steps / t0 / t1")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run every bundled scenario and the global checks")
    p.add_argument("--out")
    p.add_argument("--tol", type=float, help="replace every upper-bound tolerance")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("list", help="list bundled scenarios")
    p.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalBreakdown as exc:
        print(f"breakdown: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN
    except QHError as exc:
        # bad inputs that only show up once the model is built (gates, truncation)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
