"""Command-line experiment harness.

Subcommands: oracle-check, build, sweep, sample, index-stats.  Every command
is deterministic given the config file and seed; all CSV output is
comma-separated with dot decimals, LF line endings, and a mandatory header
row.  Exit codes: 0 success, 1 check failure, 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config
from .errors import ConfigError, TransportError
from .experiment import make_weights, run_build, run_oracle_check, run_sample, run_sweep
from .indexsets import cardinality_scaling
from .metrics import CSV_HEADER
from .rational import ApproxTransport


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _out_dir(cfg: ExperimentConfig, args) -> Path:
    out = Path(args.out if args.out else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "jobs", None) is not None:
        cfg.jobs = args.jobs
    return cfg


def cmd_oracle_check(cfg: ExperimentConfig, args) -> int:
    rows = run_oracle_check(cfg)
    out = _out_dir(cfg, args) / "oracle_check.csv"
    with open(out, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["check", "statistic", "threshold", "status"])
        for r in rows:
            w.writerow([r.name, format(r.statistic, ".17g"),
                        format(r.threshold, ".17g"), "pass" if r.passed else "fail"])
    for r in rows:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: "
              f"{r.statistic:.3e} (threshold {r.threshold:.3e})")
    print(f"wrote {out}")
    return 0 if all(r.passed for r in rows) else 1


def cmd_build(cfg: ExperimentConfig, args) -> int:
    eps = args.eps if args.eps is not None else min(cfg.eps_list)
    family, transport = run_build(cfg, eps)
    out = _out_dir(cfg, args) / f"transport_eps{eps:g}.txt"
    out.write_text(transport.to_text())
    print(f"N_eps {family.n_eps}")
    print(f"k_max {family.k_max}")
    print(f"wrote {out}")
    return 0


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg, args) / "rate_report.csv"
    with open(out, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(CSV_HEADER)
        fh.flush()

        def flush_row(row):
            w.writerow([
                format(row.eps, ".17g"), row.n_eps,
                format(row.sup_error_sum, ".17g"), format(row.hellinger, ".17g"),
                format(row.tv, ".17g"), format(row.kl, ".17g"),
                format(row.w_bound, ".17g"),
            ])
            fh.flush()
            print(f"eps {row.eps:g}: N_eps {row.n_eps}, sup_error_sum "
                  f"{row.sup_error_sum:.3e}, H {row.hellinger:.3e}, TV {row.tv:.3e}")

        result = run_sweep(cfg, on_row=flush_row)
    report = result.report
    try:
        print(f"fitted slope {report.fitted_slope:.4f} "
              f"(theoretical {report.theoretical_slope:.4f})")
    except TransportError as exc:
        print(f"slope not fitted: {exc}")
    print(f"wrote {out}")
    return 0


def cmd_sample(cfg: ExperimentConfig, args) -> int:
    path = Path(args.transport)
    if not path.exists():
        print(f"error: transport file not found: {path}", file=sys.stderr)
        return 1
    transport = ApproxTransport.from_text(path.read_text())
    samples, _ = run_sample(cfg, transport, args.n, args.s)
    out = _out_dir(cfg, args) / "samples.csv"
    with open(out, "w", newline="") as fh:
        fh.write(f"# seed={cfg.seed} s={args.s} eps="
                 f"{'' if transport.eps is None else format(transport.eps, 'g')}\n")
        w = _writer(fh)
        w.writerow([f"g{i}" for i in range(samples.shape[1])])
        for row in samples:
            w.writerow([format(v, ".17g") for v in row])
    print(f"wrote {out} ({samples.shape[0]} samples)")
    return 0


def cmd_index_stats(cfg: ExperimentConfig, args) -> int:
    weights = make_weights(cfg)
    rows = cardinality_scaling(weights, cfg.eps_list)
    out = _out_dir(cfg, args) / "index_stats.csv"
    with open(out, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["eps", "n_eps", "n_eps_times_eps_p"])
        for eps, n, scaled in rows:
            w.writerow([format(eps, ".17g"), n, format(scaled, ".17g")])
    for eps, n, scaled in rows:
        print(f"eps {eps:g}: N_eps {n}, N_eps*eps^p {scaled:.4f}")
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="krtransport",
        description="Sparse triangular transport maps: build, verify, sweep, sample.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="TOML experiment config")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--jobs", type=int, default=None, help="worker threads")

    p = sub.add_parser("oracle-check", help="verify the exact transport")
    common(p)
    p.set_defaults(fn=cmd_oracle_check)

    p = sub.add_parser("build", help="build and serialize one transport")
    common(p)
    p.add_argument("--eps", type=float, default=None,
                   help="threshold (default: tightest in eps_list)")
    p.set_defaults(fn=cmd_build)

    p = sub.add_parser("sweep", help="epsilon sweep producing the rate report")
    common(p)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("sample", help="function-space samples from a transport file")
    common(p)
    p.add_argument("--transport", required=True, help="serialized transport path")
    p.add_argument("--n", type=int, default=100, help="sample count")
    p.add_argument("--s", type=int, default=8, help="truncation dimension")
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("index-stats", help="cardinality scaling table")
    common(p)
    p.set_defaults(fn=cmd_index_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return args.fn(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
