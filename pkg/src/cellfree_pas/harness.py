"""Experiment orchestration, metrics and deterministic report emission.

A drop is one independent layout realization: positions, gains, clusters,
one shared channel ensemble, and one game run per grid value of alpha plus
the full-power baseline.  All randomness derives from the experiment seed
through fixed spawn keys, so a config and seed reproduce every emitted byte.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

import numpy as np

from .association import assign_pilots_and_clusters
from .config import ExperimentConfig
from .game import run_game
from .propagation import build_large_scale, large_scale_to_json
from .receiver import evaluate_profiles

__all__ = [
    "MetricsReport",
    "ExperimentResult",
    "ConvergenceResult",
    "greedy_pas",
    "rng_for",
    "run_experiment",
    "run_convergence",
    "run_metrics_vs_k",
    "sweep_alpha",
    "format_value",
    "write_csv",
    "emit_report",
    "convergence_tables",
    "metrics_vs_k_tables",
    "tradeoff_tables",
]

GREEDY = "greedy_pas"
GAME = "game_pas"
METRICS = ("total_se", "min_se", "total_ee")


def rng_for(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for one (seed, purpose-path) combination."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(path)))


def greedy_pas(config: ExperimentConfig) -> np.ndarray:
    """Full-power baseline profile: every UE transmits at p_max."""
    return np.full(config.layout.num_ues, config.game.p_max_w)


@dataclass
class MetricsReport:
    """Per-drop and aggregate metrics of one strategy (and alpha, for the game)."""

    strategy: str
    alpha: float | None
    total_se: np.ndarray        # (D,) bit/s/Hz
    min_se: np.ndarray          # (D,) bit/s/Hz
    total_ee: np.ndarray        # (D,) bit/J
    total_power_w: np.ndarray   # (D,)
    per_ue_se: np.ndarray       # (D, K)
    per_ue_rho: np.ndarray      # (D, K)
    converged: np.ndarray       # (D,) bool

    @property
    def mean_total_se(self) -> float:
        return float(np.mean(self.total_se))

    @property
    def mean_min_se(self) -> float:
        return float(np.mean(self.min_se))

    @property
    def mean_total_ee(self) -> float:
        return float(np.mean(self.total_ee))

    @property
    def mean_total_power_w(self) -> float:
        return float(np.mean(self.total_power_w))


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    reports: list                    # MetricsReport: baseline first, then per alpha
    best_alpha: dict                 # metric -> (alpha, mean value) over the game grid
    any_nonconverged: bool

    def game_reports(self) -> list:
        return [r for r in self.reports if r.strategy == GAME]

    def greedy_report(self) -> MetricsReport:
        return next(r for r in self.reports if r.strategy == GREEDY)


@dataclass
class ConvergenceResult:
    """Single-drop convergence study: one game run per alpha."""

    config: ExperimentConfig
    layout_snapshot: dict
    runs: list                       # (alpha, GameState, NashCertificate)
    any_nonconverged: bool


def _drop_metrics(report, rho, bandwidth_hz):
    se = report.se
    ee = bandwidth_hz * se / rho
    return float(se.sum()), float(se.min()), float(ee.sum()), float(np.sum(rho))


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run all drops and strategies and aggregate the three system metrics.

    Every drop evaluates the baseline and all game profiles on the same
    channel ensemble, so strategy comparisons are paired.  The best alpha
    per metric is the argmax of the drop-averaged value over the grid.
    """
    config.validate()
    keys = [(GREEDY, None)] + [(GAME, a) for a in config.alpha_grid]
    acc = {key: {"total_se": [], "min_se": [], "total_ee": [],
                 "total_power_w": [], "per_ue_se": [], "per_ue_rho": [],
                 "converged": []} for key in keys}

    for drop in range(config.num_drops):
        layout, state = build_large_scale(config.layout,
                                          rng_for(config.seed, drop, 0))
        assignment = assign_pilots_and_clusters(
            state.beta, config.frame.tau_p, config.scenario,
            config.layout.antennas_per_ap,
        )
        profiles = [greedy_pas(config)]
        converged_flags = [True]
        try:
            for alpha in config.alpha_grid:
                game_cfg = dataclasses.replace(config.game, alpha=alpha)
                game_state, _ = run_game(state, assignment, game_cfg)
                profiles.append(game_state.rho)
                converged_flags.append(game_state.converged)
            frozen = profiles[0] if config.freeze_combiner_at_full_power else None
            reports = evaluate_profiles(
                state, assignment, config.frame, profiles, config.combiner,
                config.ensemble_size, config.chunk_size,
                rng_for(config.seed, drop, 1), config.game.p_max_w,
                combiner_powers=frozen,
            )
        except Exception as exc:
            raise RuntimeError(
                f"drop {drop} failed (seed={config.seed}): {exc}"
            ) from exc
        for key, rho, rep, conv in zip(keys, profiles, reports, converged_flags):
            tse, mse, tee, tpw = _drop_metrics(rep, rho, config.bandwidth_hz)
            slot = acc[key]
            slot["total_se"].append(tse)
            slot["min_se"].append(mse)
            slot["total_ee"].append(tee)
            slot["total_power_w"].append(tpw)
            slot["per_ue_se"].append(rep.se)
            slot["per_ue_rho"].append(rho)
            slot["converged"].append(conv)

    out = []
    for strategy, alpha in keys:
        slot = acc[(strategy, alpha)]
        out.append(MetricsReport(
            strategy=strategy,
            alpha=alpha,
            total_se=np.array(slot["total_se"]),
            min_se=np.array(slot["min_se"]),
            total_ee=np.array(slot["total_ee"]),
            total_power_w=np.array(slot["total_power_w"]),
            per_ue_se=np.array(slot["per_ue_se"]),
            per_ue_rho=np.array(slot["per_ue_rho"]),
            converged=np.array(slot["converged"], dtype=bool),
        ))

    game_rows = [r for r in out if r.strategy == GAME]
    best = {}
    for metric in METRICS:
        values = [float(np.mean(getattr(r, metric))) for r in game_rows]
        idx = int(np.argmax(values))
        best[metric] = (game_rows[idx].alpha, values[idx])
    any_nonconv = any(not bool(np.all(r.converged)) for r in out)
    return ExperimentResult(config=config, reports=out, best_alpha=best,
                            any_nonconverged=any_nonconv)


def run_convergence(config: ExperimentConfig) -> ConvergenceResult:
    """Single-layout game traces over the alpha grid (power-vs-iteration view)."""
    config.validate()
    layout, state = build_large_scale(config.layout, rng_for(config.seed, 0, 0))
    assignment = assign_pilots_and_clusters(
        state.beta, config.frame.tau_p, config.scenario,
        config.layout.antennas_per_ap,
    )
    runs = []
    for alpha in config.alpha_grid:
        game_cfg = dataclasses.replace(config.game, alpha=alpha)
        game_state, cert = run_game(state, assignment, game_cfg)
        runs.append((alpha, game_state, cert))
    return ConvergenceResult(
        config=config,
        layout_snapshot=large_scale_to_json(layout, state),
        runs=runs,
        any_nonconverged=any(not st.converged for _, st, _ in runs),
    )


def run_metrics_vs_k(config: ExperimentConfig) -> list:
    """Run the full experiment for each UE count in the config's k_grid."""
    config.validate()
    k_grid = config.k_grid or [config.layout.num_ues]
    results = []
    for k in k_grid:
        sub = dataclasses.replace(
            config, layout=dataclasses.replace(config.layout, num_ues=k),
        )
        results.append((k, run_experiment(sub)))
    return results


def sweep_alpha(config: ExperimentConfig) -> list:
    """EE-SE trade-off table: (alpha, mean total SE, mean total EE) per row."""
    if len(config.alpha_grid) < 3:
        raise ValueError("an alpha sweep needs a grid of at least 3 points")
    result = run_experiment(config)
    rows = [(r.alpha, r.mean_total_se, r.mean_total_ee)
            for r in result.game_reports()]
    rows.sort(key=lambda row: row[0])
    return rows


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

def format_value(value) -> str:
    """Fixed-precision scalar formatting: floats carry 12 significant digits."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".12g")
    if value is None:
        return ""
    return str(value)


def write_csv(path: str, header: list, rows: list) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def _json_value(value):
    if isinstance(value, float):
        return float(format(value, ".12g"))
    return value


def emit_report(tables: list, fmt: str, out_dir: str) -> list:
    """Write one file per table, either CSV or JSON, with stable ordering.

    ``tables`` is a list of ``(name, header, rows)``.  An empty table set is
    an error and produces no files.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    if not tables:
        raise ValueError("no report tables to emit")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, header, rows in tables:
        if fmt == "csv":
            path = os.path.join(out_dir, f"{name}.csv")
            write_csv(path, header, rows)
        else:
            path = os.path.join(out_dir, f"{name}.json")
            payload = [
                {col: _json_value(v) for col, v in zip(header, row)}
                for row in rows
            ]
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(payload, fh, indent=2)
                fh.write("\n")
        paths.append(path)
    return paths


def convergence_tables(result: ConvergenceResult) -> list:
    header = ["alpha", "iteration", "total_power_mW", "u", "accepted", "messages"]
    rows = []
    for alpha, state, _ in result.runs:
        for rec in state.trace:
            rows.append([alpha, rec.iteration, rec.total_power_w * 1e3,
                         rec.potential, rec.accepted, rec.messages])
    return [("convergence_trace", header, rows)]


def metrics_vs_k_tables(results: list) -> list:
    grid_header = ["num_ues", "strategy", "alpha", "mean_total_se",
                   "mean_min_se", "mean_total_ee", "mean_total_power_mW"]
    grid_rows = []
    best_header = ["num_ues", "metric", "best_alpha", "game_pas_value",
                   "greedy_pas_value", "relative_gain"]
    best_rows = []
    for k, res in results:
        for rep in res.reports:
            grid_rows.append([
                k, rep.strategy, rep.alpha, rep.mean_total_se,
                rep.mean_min_se, rep.mean_total_ee,
                rep.mean_total_power_w * 1e3,
            ])
        greedy = res.greedy_report()
        greedy_values = {
            "total_se": greedy.mean_total_se,
            "min_se": greedy.mean_min_se,
            "total_ee": greedy.mean_total_ee,
        }
        for metric in METRICS:
            alpha, value = res.best_alpha[metric]
            ref = greedy_values[metric]
            gain = (value - ref) / ref if ref > 0 else 0.0
            best_rows.append([k, metric, alpha, value, ref, gain])
    return [
        ("metrics_vs_k", grid_header, grid_rows),
        ("best_vs_k", best_header, best_rows),
    ]


def tradeoff_tables(rows: list) -> list:
    header = ["alpha", "mean_total_se", "mean_total_ee"]
    return [("tradeoff", header, [list(r) for r in rows])]
