"""Receive combining and Monte-Carlo evaluation of the achievable-SE bound.

The per-UE SINR is the use-and-then-forget expression: numerator
``rho_k |E{v_k^H h_k}|^2`` against the total received power minus the
coherent part plus noise, with every expectation replaced by an ensemble
average over channel realizations.  Numerator and denominator share one
ensemble, which keeps the ratio estimate stable and makes equal power
profiles produce bit-identical reports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .association import ClusterAssignment
from .channel import (
    ChannelEnsemble,
    _combine_pilot_signal,
    draw_channels,
    estimation_covariances,
    mmse_estimate,
    resolve_pilot_powers,
    standard_complex,
)
from .config import COMBINERS, FrameConfig
from .propagation import LargeScaleState

__all__ = [
    "SinrReport",
    "build_combiner",
    "monte_carlo_sinr",
    "assemble_sinr_report",
    "spectral_efficiency",
    "evaluate_profiles",
]


@dataclass
class SinrReport:
    """Per-UE Monte-Carlo SINR decomposition and spectral efficiency."""

    signal_power: np.ndarray        # (K,) coherent received power, W-scaled
    interference_power: np.ndarray  # (K,) residual interference + self variance
    noise_power: np.ndarray         # (K,) combined noise power
    sinr: np.ndarray                # (K,) dimensionless
    se: np.ndarray                  # (K,) bit/s/Hz
    ensemble_size: int
    clamped_terms: int = 0          # negative variance estimates forced to zero

    def to_rows(self) -> list:
        return [
            {
                "ue_id": k,
                "sinr": float(self.sinr[k]),
                "se": float(self.se[k]),
                "signal_power": float(self.signal_power[k]),
                "interference_power": float(self.interference_power[k]),
                "noise_power": float(self.noise_power[k]),
                "ensemble_size": self.ensemble_size,
            }
            for k in range(len(self.sinr))
        ]

    def to_json(self) -> str:
        return json.dumps(self.to_rows(), indent=2)


def spectral_efficiency(sinr, frame: FrameConfig):
    """Achievable spectral efficiency ``(tau_u / tau_c) log2(1 + sinr)``."""
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0):
        raise ValueError("sinr must be >= 0")
    out = (frame.tau_u / frame.tau_c) * np.log2(1.0 + sinr)
    return float(out) if out.ndim == 0 else out


def _lp_mmse_base(err_cov, served, noise_power, num_aps, n_antennas, data_powers):
    """Per-AP sample-independent part of the local MMSE Gram matrix."""
    base = np.empty((num_aps, n_antennas, n_antennas), dtype=np.complex128)
    eye = np.eye(n_antennas, dtype=np.complex128)
    for l in range(num_aps):
        acc = noise_power * eye.copy()
        for i in served[l]:
            acc += data_powers[i] * err_cov[i, l]
        base[l] = acc
    return base


def build_combiner(combiner_id: str, ensemble: ChannelEnsemble,
                   data_powers: np.ndarray, assignment: ClusterAssignment,
                   noise_power: float) -> np.ndarray:
    """Combining vectors for every serving pair and sample, shape ``(S, P, N)``.

    ``mrc`` copies the channel estimates.  ``lp_mmse`` solves, per AP and
    sample, the local regularized system over that AP's served UEs.
    """
    if combiner_id not in COMBINERS:
        raise ValueError(
            f"unknown combiner {combiner_id!r}, expected one of {COMBINERS}"
        )
    if combiner_id == "mrc":
        return ensemble.estimates.copy()
    data_powers = np.asarray(data_powers, dtype=float)
    num_aps = ensemble.est_cov.shape[1]
    n_antennas = ensemble.estimates.shape[2]
    base = _lp_mmse_base(ensemble.err_cov, assignment.served, noise_power,
                         num_aps, n_antennas, data_powers)
    lorder, lstart = kernels.group_pairs_by_ap(ensemble.pair_l, num_aps)
    rho_pair = data_powers[ensemble.pair_k]
    return kernels.lp_mmse_combine(ensemble.estimates, base, rho_pair,
                                   ensemble.pair_l, lorder, lstart)


def assemble_sinr_report(sum_self, sum_cross, sum_norm, n_samples: int,
                         data_powers, noise_power: float,
                         frame: FrameConfig) -> SinrReport:
    """Turn accumulated expectation terms into a :class:`SinrReport`.

    Negative interference estimates (possible only when numerator and
    denominator come from different ensembles) are clamped to zero and
    counted, never silently dropped.
    """
    if n_samples < 1:
        raise ValueError("cannot assemble a report from an empty ensemble")
    data_powers = np.asarray(data_powers, dtype=float)
    mean_self = sum_self / n_samples
    mean_cross = sum_cross / n_samples
    mean_norm = sum_norm / n_samples
    signal = data_powers * np.abs(mean_self) ** 2
    interference = mean_cross @ data_powers - signal
    clamped = int(np.sum(interference < 0))
    interference = np.maximum(interference, 0.0)
    noise = noise_power * mean_norm
    sinr = signal / (interference + noise)
    return SinrReport(
        signal_power=signal,
        interference_power=interference,
        noise_power=noise,
        sinr=sinr,
        se=spectral_efficiency(sinr, frame),
        ensemble_size=n_samples,
        clamped_terms=clamped,
    )


def monte_carlo_sinr(ensemble: ChannelEnsemble, combiner_id: str,
                     data_powers: np.ndarray, assignment: ClusterAssignment,
                     frame: FrameConfig, combiner_powers=None) -> SinrReport:
    """Evaluate the SINR bound on one ensemble with the chosen combiner.

    ``combiner_powers`` freezes the (power-dependent) combiner at a different
    profile than the transmit powers, isolating power-control effects from
    combiner adaptation; by default combiners track ``data_powers``.
    """
    data_powers = np.asarray(data_powers, dtype=float)
    if np.any(data_powers < 0):
        raise ValueError("data powers must be >= 0")
    if combiner_powers is None:
        combiner_powers = data_powers
    v = build_combiner(combiner_id, ensemble, combiner_powers, assignment,
                       frame.noise_power_w)
    num_aps = ensemble.est_cov.shape[1]
    lorder, lstart = kernels.group_pairs_by_ap(ensemble.pair_l, num_aps)
    sum_self, sum_cross, sum_norm = kernels.sinr_accumulate(
        v, ensemble.realizations, ensemble.pair_k, ensemble.pair_l,
        lorder, lstart,
    )
    return assemble_sinr_report(sum_self, sum_cross, sum_norm,
                                ensemble.sample_count, data_powers,
                                frame.noise_power_w, frame)


def evaluate_profiles(state: LargeScaleState, assignment: ClusterAssignment,
                      frame: FrameConfig, profiles, combiner_id: str,
                      sample_count: int, chunk_size: int, rng,
                      p_max_w: float, combiner_powers=None) -> list:
    """Evaluate several power profiles on one streamed channel ensemble.

    Channels and pilot noise are drawn once per chunk and shared by every
    profile, so profiles differ only through the powers they apply; equal
    profiles therefore yield identical reports.  Chunking bounds memory at
    roughly ``chunk_size * K * L * N`` complex values; the chunk size is part
    of the config because it determines the RNG stream layout.
    ``combiner_powers``, when given, freezes every profile's combiner at that
    one profile instead of tracking the applied powers.
    """
    profiles = [np.asarray(p, dtype=float) for p in profiles]
    if not profiles:
        raise ValueError("need at least one power profile to evaluate")
    K, L = state.beta.shape
    N = state.antennas_per_ap
    T = assignment.num_pilots
    pair_k, pair_l = assignment.pairs()
    lorder, lstart = kernels.group_pairs_by_ap(pair_l, L)
    fixed_pilots = frame.pilot_power_mode == "fixed_pmax"

    if fixed_pilots:
        shared_pp = resolve_pilot_powers(frame, p_max_w, num_ues=K)
        shared_cov = estimation_covariances(state, shared_pp, assignment, frame)
        per_profile = [(shared_pp, shared_cov)] * len(profiles)
    else:
        per_profile = []
        for rho in profiles:
            pp = resolve_pilot_powers(frame, p_max_w, data_powers=rho)
            per_profile.append(
                (pp, estimation_covariances(state, pp, assignment, frame))
            )

    acc = [
        {
            "sum_self": np.zeros(K, dtype=np.complex128),
            "sum_cross": np.zeros((K, K)),
            "sum_norm": np.zeros(K),
            "clamp_probe": 0,
        }
        for _ in profiles
    ]

    done = 0
    while done < sample_count:
        cs = min(chunk_size, sample_count - done)
        h = draw_channels(state, cs, rng)
        noise = np.sqrt(frame.noise_power_w) * standard_complex(rng, (cs, T, L, N))
        shared_hhat = None
        for j, rho in enumerate(profiles):
            pp, (psi, est_cov, err_cov) = per_profile[j]
            if fixed_pilots and shared_hhat is not None:
                hhat = shared_hhat
            else:
                y = _combine_pilot_signal(h, pp, assignment, T, noise)
                hhat = mmse_estimate(y, state, pp, assignment, frame, psi=psi)
                if fixed_pilots:
                    shared_hhat = hhat
            if combiner_id == "mrc":
                v = hhat
            else:
                chunk_ens = ChannelEnsemble(
                    realizations=h, estimates=hhat, pair_k=pair_k, pair_l=pair_l,
                    psi=psi, est_cov=est_cov, err_cov=err_cov, sample_count=cs,
                )
                v = build_combiner(
                    combiner_id, chunk_ens,
                    rho if combiner_powers is None else combiner_powers,
                    assignment, frame.noise_power_w,
                )
            s_self, s_cross, s_norm = kernels.sinr_accumulate(
                v, h, pair_k, pair_l, lorder, lstart
            )
            acc[j]["sum_self"] += s_self
            acc[j]["sum_cross"] += s_cross
            acc[j]["sum_norm"] += s_norm
        done += cs

    return [
        assemble_sinr_report(
            a["sum_self"], a["sum_cross"], a["sum_norm"], sample_count,
            profiles[j], frame.noise_power_w, frame,
        )
        for j, a in enumerate(acc)
    ]
