"""Command-line entry point ``qbound``.

Exit codes: 0 success, 1 contract violation or failed cross-check, 2 config error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, QboundError
from .experiments import (
    ScenarioConfig,
    dump_json,
    magfield_preset,
    result_to_json,
    rows_to_csv,
    run_scenario,
    scaling_rows,
    scaling_sweep,
)

SUBCOMMAND_COMPUTE = {
    "qfim": {"jq_exact", "jq_rdm"},
    "cq": {"cq", "cq_rdm"},
    "fim": {"fim_fd", "fim_limit"},
    "saturate": {"saturation", "holevo"},
}


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}") from exc


def _parse_range(text: str) -> list[int]:
    """``"2:8"`` is inclusive; comma lists are also accepted."""
    try:
        if ":" in text:
            lo, hi = (int(x) for x in text.split(":"))
            return list(range(lo, hi + 1))
        return [int(x) for x in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"cannot parse n range {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qbound", description="Quantum Fisher information and channel bounds.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--seed", type=int, default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("qfim", "quantum Fisher matrix, exact and from marginals"),
        ("cq", "Kraus-channel upper bound"),
        ("fim", "classical Fisher matrix of the saturating measurement"),
        ("saturate", "saturation residuals and Holevo witness"),
        ("scaling", "log-log slope of the bound against N"),
    ):
        sub.add_parser(name, parents=[common], help=text)
    mag = sub.add_parser("magfield", parents=[common], help="magnetic-field reference experiment")
    mag.add_argument("--lambda", dest="lam", type=float, default=0.3)
    mag.add_argument("--theta", default="0.3,0.2,0.1")
    mag.add_argument("--n", default="2:8")
    chk = sub.add_parser("check", parents=[common], help="run the invariant suite")
    chk.add_argument("--trials", type=int, default=3)
    return parser


def _write(out_dir: str | None, name: str, text: str) -> None:
    if out_dir is None:
        sys.stdout.write(text)
        return
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    (path / name).write_text(text)


def _run(args) -> int:
    if args.command == "check":
        from .checks import run_suite

        results = run_suite(args.seed, args.trials)
        width = max(len(r.name) for r in results)
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.value:.3e} (tol {r.tolerance:.0e})")
        if args.out:
            _write(args.out, "check.json", dump_json([r._asdict() for r in results]))
        return 0 if all(r.passed for r in results) else 1

    if args.command == "magfield":
        theta = _parse_floats(args.theta)
        if len(theta) != 3:
            raise ConfigError("--theta needs three comma-separated values")
        if args.lam < 0:
            raise ConfigError("--lambda must be non-negative")
        report, rows, ok = magfield_preset(np.array(theta), args.lam, _parse_range(args.n))
        fmt = args.format
        if fmt in (None, "csv"):
            _write(args.out, "magfield.csv", rows_to_csv(rows))
        if fmt in (None, "json"):
            _write(args.out, "magfield.json", dump_json(report))
        return 0 if ok else 1

    if not args.config:
        raise ConfigError(f"{args.command} needs --config")
    cfg = ScenarioConfig.load(args.config)
    fmt = args.format or cfg.output_format
    out_dir = args.out or cfg.output_dir

    if args.command == "scaling":
        result = scaling_sweep(cfg)
        print(f"slope {result.slope:.6f} residual {result.residual:.3e} ({result.quantity})", file=sys.stderr if out_dir is None else sys.stdout)
        rows = scaling_rows(cfg.scenario_id, result)
        if fmt == "csv":
            _write(out_dir, f"{cfg.scenario_id}_scaling.csv", rows_to_csv(rows))
        else:
            _write(out_dir, f"{cfg.scenario_id}_scaling.json", dump_json({"slope": result.slope, "residual": result.residual, "rows": [r.__dict__ for r in result.rows]}))
        return 1 if result.degenerate else 0

    cfg.compute = set(SUBCOMMAND_COMPUTE[args.command])
    result = run_scenario(cfg)
    if fmt == "csv":
        _write(out_dir, f"{cfg.scenario_id}_{args.command}.csv", rows_to_csv(result.rows))
    else:
        _write(out_dir, f"{cfg.scenario_id}_{args.command}.json", result_to_json(result))
    for c in result.checks:
        if not c["passed"]:
            print(f"FAIL {c['check']} n={c['n']}: {c['value']:.3e} > {c['tolerance']:.0e}", file=sys.stderr)
    return 0 if result.ok else 1


def cli_main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except QboundError as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
