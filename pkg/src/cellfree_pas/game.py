"""Distributed uplink power-control game and its best-response dynamics.

Each UE k plays a transmit power ``rho_k`` in ``[rho_min, rho_max]``; its
effective gain is ``xi_k = rho_k * Lambda_k^alpha`` with ``Lambda_k`` the
serving-cluster gain.  The payoff every UE minimizes is

    mu_k = (sum_{i != k} xi_i) / xi_k + xi_k * sum_{i != k} 1 / xi_i,

the balance between received relative interference and the interference the
UE inflicts on others.  The game admits the exact potential
``u = (sum_i xi_i) * (sum_i 1/xi_i) - K`` (the sum of all pairwise gain
ratios), so unilateral payoff changes and potential changes coincide and
best-response paths with a strict improvement threshold terminate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .association import ClusterAssignment, cluster_gains
from .config import GameConfig
from .propagation import LargeScaleState

__all__ = [
    "TraceRecord",
    "GameState",
    "NashCertificate",
    "payoff",
    "payoff_all",
    "potential",
    "improvement",
    "best_response_xi",
    "best_response",
    "run_game",
    "certify_epsilon_nash",
    "trace_rows",
    "write_trace_csv",
]


@dataclass
class TraceRecord:
    """State snapshot after one round of updates (iteration 0 = start)."""

    iteration: int
    rho: np.ndarray           # (K,) W
    total_power_w: float
    payoffs: np.ndarray       # (K,)
    potential: float
    accepted: int
    messages: int             # power reports up + effective-gain broadcasts down
    gains: tuple = ()         # payoff improvements of the accepted updates


@dataclass
class GameState:
    """Final profile and full iteration trace of one game run."""

    rho: np.ndarray           # (K,) W
    xi: np.ndarray            # (K,)
    lam_alpha: np.ndarray     # (K,) Lambda_k^alpha, fixed during the run
    alpha: float
    iteration: int
    converged: bool
    trace: list = field(default_factory=list)

    @property
    def num_ues(self) -> int:
        return len(self.rho)


@dataclass
class NashCertificate:
    """Result of probing every UE's unilateral deviations."""

    is_epsilon_nash: bool
    worst_gain: float
    worst_ue: int
    probe_count: int

    def to_json(self) -> str:
        return json.dumps({
            "is_epsilon_nash": self.is_epsilon_nash,
            "worst_gain": self.worst_gain,
            "worst_ue": self.worst_ue,
            "probe_count": self.probe_count,
        }, indent=2)


def _check_xi(xi: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 1 or len(xi) < 2:
        raise ValueError(
            "the game needs at least 2 players; interference sums are empty otherwise"
        )
    if np.any(xi <= 0) or not np.all(np.isfinite(xi)):
        raise ValueError("effective gains must be finite and strictly positive")
    return xi


def _rest_sums(xi: np.ndarray, k: int) -> tuple[float, float]:
    """Exact sums over the other players: (sum xi_i, sum 1/xi_i), i != k."""
    a = float(np.sum(xi[:k]) + np.sum(xi[k + 1:]))
    inv = 1.0 / xi
    b = float(np.sum(inv[:k]) + np.sum(inv[k + 1:]))
    return a, b


def payoff(xi, k: int) -> float:
    """Payoff of UE k as a function of the effective-gain vector."""
    xi = _check_xi(xi)
    a, b = _rest_sums(xi, k)
    return a / xi[k] + xi[k] * b


def payoff_all(xi) -> np.ndarray:
    """Payoffs of all UEs."""
    xi = _check_xi(xi)
    return np.array([payoff(xi, k) for k in range(len(xi))])


def potential(xi) -> float:
    """Exact potential: the sum of xi_i/xi_k over all ordered pairs i != k."""
    xi = _check_xi(xi)
    return float(np.sum(xi) * np.sum(1.0 / xi)) - len(xi)


def improvement(xi, k: int, xi_new: float) -> float:
    """Payoff decrease of UE k when moving from xi[k] to xi_new.

    Positive values mean the move helps.  Evaluated in the factored form
    ``(xi_old - xi_new) * (B - A / (xi_old * xi_new))`` which stays accurate
    when the two points are close, unlike subtracting two payoff values.
    """
    xi = _check_xi(xi)
    if xi_new <= 0 or not math.isfinite(xi_new):
        raise ValueError("candidate effective gain must be finite and > 0")
    a, b = _rest_sums(xi, k)
    old = float(xi[k])
    return (old - xi_new) * (b - a / (old * xi_new))


def best_response_xi(xi, k: int) -> float:
    """Unconstrained payoff minimizer of UE k in effective-gain space."""
    xi = _check_xi(xi)
    a, b = _rest_sums(xi, k)
    return math.sqrt(a / b)


def best_response(k: int, rho, lambda_gains, alpha: float,
                  rho_min: float, rho_max: float) -> float:
    """Clamped best-response power of UE k against the others' powers.

    The unconstrained minimizer is the square root of the ratio between the
    others' summed effective gains and their summed reciprocals, mapped back
    to power through ``Lambda_k^alpha`` and clipped to the strategy set.
    """
    rho = np.asarray(rho, dtype=float)
    lambda_gains = np.asarray(lambda_gains, dtype=float)
    if np.any(rho <= 0) or np.any(lambda_gains <= 0):
        raise ValueError("powers and cluster gains must be strictly positive")
    lam_alpha = lambda_gains ** alpha
    xi = rho * lam_alpha
    xi_star = best_response_xi(xi, k)
    return float(np.clip(xi_star / lam_alpha[k], rho_min, rho_max))


def _initial_powers(config: GameConfig, num_ues: int) -> np.ndarray:
    if config.initial_power_rule == "full_power":
        start = config.p_max_w
    else:
        start = config.p_max_w / config.initial_power_divisor
    return np.full(num_ues, float(np.clip(start, config.rho_min_w, config.rho_max_w)))


def run_game(large_scale: LargeScaleState, assignment: ClusterAssignment,
             config: GameConfig, initial_powers=None):
    """Run best-response dynamics to an equilibrium or the iteration cap.

    An update is accepted only when it improves that UE's payoff by strictly
    more than ``epsilon`` against the profile snapshot it was computed from:
    the current profile under the ``sequential`` round-robin schedule, the
    round-start profile under ``simultaneous``.  The run stops after the
    first round with no accepted update; if ``max_iterations`` rounds pass
    first, the returned state is flagged non-converged (the simultaneous
    schedule can cycle) rather than looping forever.

    Returns ``(GameState, NashCertificate)``.
    """
    config.validate()
    lam = cluster_gains(large_scale.beta, assignment)
    if np.any(lam <= 0) or not np.all(np.isfinite(lam)):
        raise ValueError("cluster gains must be finite and strictly positive")
    K = len(lam)
    if K < 2:
        raise ValueError("the game needs at least 2 players")

    lam_alpha = lam ** config.alpha
    if initial_powers is None:
        rho = _initial_powers(config, K)
    else:
        rho = np.asarray(initial_powers, dtype=float).copy()
        if rho.shape != (K,):
            raise ValueError(f"initial_powers must have shape ({K},)")
        if np.any(rho < config.rho_min_w) or np.any(rho > config.rho_max_w):
            raise ValueError("initial_powers must lie inside the strategy set")
    xi = rho * lam_alpha

    def record(it, accepted, messages, gains, u):
        return TraceRecord(
            iteration=it,
            rho=rho.copy(),
            total_power_w=float(np.sum(rho)),
            payoffs=payoff_all(xi),
            potential=u,
            accepted=accepted,
            messages=messages,
            gains=tuple(gains),
        )

    u_run = potential(xi)
    trace = [record(0, 0, 0, (), u_run)]
    eps = config.epsilon
    sequential = config.schedule == "sequential"
    converged = False
    iteration = 0

    for iteration in range(1, config.max_iterations + 1):
        accepted = 0
        gains = []
        if sequential:
            for k in range(K):
                xi_star = best_response_xi(xi, k)
                rho_cand = float(np.clip(xi_star / lam_alpha[k],
                                         config.rho_min_w, config.rho_max_w))
                xi_cand = rho_cand * lam_alpha[k]
                gain = improvement(xi, k, xi_cand)
                if gain > eps:
                    rho[k] = rho_cand
                    xi[k] = xi_cand
                    accepted += 1
                    gains.append(gain)
                    # exact-potential identity: the deviator's payoff change
                    # is the potential change
                    u_run -= gain
        else:
            snapshot = xi.copy()
            updates = []
            for k in range(K):
                xi_star = best_response_xi(snapshot, k)
                rho_cand = float(np.clip(xi_star / lam_alpha[k],
                                         config.rho_min_w, config.rho_max_w))
                xi_cand = rho_cand * lam_alpha[k]
                gain = improvement(snapshot, k, xi_cand)
                if gain > eps:
                    updates.append((k, rho_cand, xi_cand, gain))
            for k, rho_cand, xi_cand, gain in updates:
                rho[k] = rho_cand
                xi[k] = xi_cand
                accepted += 1
                gains.append(gain)
            # joint moves void the unilateral identity; evaluate directly
            u_run = potential(xi)

        trace.append(record(iteration, accepted, 2 * K, gains, u_run))
        if accepted == 0:
            converged = True
            break

    state = GameState(
        rho=rho,
        xi=xi,
        lam_alpha=lam_alpha,
        alpha=config.alpha,
        iteration=iteration,
        converged=converged,
        trace=trace,
    )
    certificate = certify_epsilon_nash(state, config)
    return state, certificate


def certify_epsilon_nash(state: GameState, config: GameConfig,
                         probe_grid_size: int = 64) -> NashCertificate:
    """Probe every UE's strategy interval for a profitable deviation.

    Each UE's payoff is evaluated on a uniform power grid plus its clamped
    closed-form best response; the certificate holds exactly when the best
    available payoff reduction over all UEs is at most ``epsilon``.
    """
    xi = _check_xi(state.xi)
    K = len(xi)
    grid = np.linspace(config.rho_min_w, config.rho_max_w, probe_grid_size)
    worst_gain = -math.inf
    worst_ue = 0
    probes = 0
    for k in range(K):
        xi_star = best_response_xi(xi, k)
        rho_star = float(np.clip(xi_star / state.lam_alpha[k],
                                 config.rho_min_w, config.rho_max_w))
        for rho_c in list(grid) + [rho_star]:
            gain = improvement(xi, k, rho_c * state.lam_alpha[k])
            probes += 1
            if gain > worst_gain:
                worst_gain = gain
                worst_ue = k
    return NashCertificate(
        is_epsilon_nash=bool(worst_gain <= config.epsilon),
        worst_gain=float(worst_gain),
        worst_ue=int(worst_ue),
        probe_count=probes,
    )


def trace_rows(state: GameState) -> list:
    """Long-format trace: one row per (iteration, UE)."""
    rows = []
    for rec in state.trace:
        xi = rec.rho * state.lam_alpha
        for k in range(state.num_ues):
            rows.append({
                "iteration": rec.iteration,
                "ue_id": k,
                "rho": float(rec.rho[k]),
                "xi": float(xi[k]),
                "mu": float(rec.payoffs[k]),
                "u": rec.potential,
                "total_power_mW": rec.total_power_w * 1e3,
                "messages": rec.messages,
            })
    return rows


def write_trace_csv(state: GameState, path: str) -> None:
    """Write the long-format trace with fixed column order and precision."""
    from .harness import write_csv  # local import to avoid a cycle
    header = ["iteration", "ue_id", "rho", "xi", "mu", "u",
              "total_power_mW", "messages"]
    rows = [[row[c] for c in header] for row in trace_rows(state)]
    write_csv(path, header, rows)
