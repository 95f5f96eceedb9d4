"""Command-line entry point.

Three subcommands mirror the three figure-style experiment views:

* ``convergence``: one layout, total power and potential per game iteration;
* ``metrics-vs-k``: drop-averaged system metrics over a grid of UE counts;
* ``tradeoff``: the EE-SE trade-off table over the alpha grid.

Exit status is 0 on success, 1 when any simultaneous-schedule run failed to
converge (suppress with ``--allow-nonconverged``), 2 for config or I/O errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import harness
from .config import ExperimentConfig, load_config
from .game import write_trace_csv


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="experiment config JSON")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="report file format")
    parser.add_argument("--allow-nonconverged", action="store_true",
                        help="exit 0 even if a run hit the iteration cap")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cellfree-pas",
        description="Uplink power-allocation game experiments for cell-free networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("convergence", "power and potential versus game iteration"),
        ("metrics-vs-k", "system metrics versus number of UEs"),
        ("tradeoff", "EE-SE trade-off over the alpha grid"),
    ):
        _add_common(sub.add_parser(name, help=text))
    return parser


def _prepare(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    cfg.validate()
    return cfg


def _snapshot_config(cfg: ExperimentConfig) -> None:
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, "config_snapshot.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
        fh.write("\n")


def _alpha_tag(alpha: float) -> str:
    return format(alpha, "g").replace(".", "p").replace("-", "m")


def _cmd_convergence(cfg: ExperimentConfig, fmt: str) -> bool:
    result = harness.run_convergence(cfg)
    harness.emit_report(harness.convergence_tables(result), fmt, cfg.output_dir)
    with open(os.path.join(cfg.output_dir, "layout_snapshot.json"),
              "w", encoding="utf-8", newline="\n") as fh:
        json.dump(result.layout_snapshot, fh, indent=2)
        fh.write("\n")
    certs = {}
    for alpha, state, cert in result.runs:
        tag = _alpha_tag(alpha)
        write_trace_csv(state, os.path.join(cfg.output_dir,
                                            f"game_trace_alpha_{tag}.csv"))
        certs[tag] = json.loads(cert.to_json())
        certs[tag]["converged"] = state.converged
    with open(os.path.join(cfg.output_dir, "certificates.json"),
              "w", encoding="utf-8", newline="\n") as fh:
        json.dump(certs, fh, indent=2)
        fh.write("\n")
    return result.any_nonconverged


def _cmd_metrics_vs_k(cfg: ExperimentConfig, fmt: str) -> bool:
    results = harness.run_metrics_vs_k(cfg)
    harness.emit_report(harness.metrics_vs_k_tables(results), fmt, cfg.output_dir)
    return any(res.any_nonconverged for _, res in results)


def _cmd_tradeoff(cfg: ExperimentConfig, fmt: str) -> bool:
    result = harness.run_experiment(cfg)
    rows = [(r.alpha, r.mean_total_se, r.mean_total_ee)
            for r in sorted(result.game_reports(), key=lambda r: r.alpha)]
    harness.emit_report(harness.tradeoff_tables(rows), fmt, cfg.output_dir)
    return result.any_nonconverged


_COMMANDS = {
    "convergence": _cmd_convergence,
    "metrics-vs-k": _cmd_metrics_vs_k,
    "tradeoff": _cmd_tradeoff,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _prepare(args)
        _snapshot_config(cfg)
        nonconverged = _COMMANDS[args.command](cfg, args.format)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if nonconverged and not args.allow_nonconverged:
        print("error: at least one game run did not converge within "
              "max_iterations", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
