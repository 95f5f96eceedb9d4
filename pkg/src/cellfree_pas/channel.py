"""Channel realizations, pilot reception and MMSE channel estimation.

Realizations are correlated Rayleigh: ``h_kl = R_kl^{1/2} g`` with ``g``
standard complex Gaussian, independent across links and samples.  Pilot
reception superimposes the co-pilot UEs' channels with processing gain
``sqrt(tau_p * rho_i)`` plus thermal noise, and the estimator is the linear
MMSE filter built from the pilot correlation matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .association import ClusterAssignment
from .config import FrameConfig
from .propagation import LargeScaleState

__all__ = [
    "ChannelEnsemble",
    "standard_complex",
    "draw_channels",
    "pilot_observation",
    "estimation_covariances",
    "mmse_estimate",
    "resolve_pilot_powers",
    "build_ensemble",
]


@dataclass
class ChannelEnsemble:
    """A batch of channel realizations with matching estimates and statistics.

    ``estimates`` is packed over the serving (UE, AP) pairs given by
    ``pair_k``/``pair_l`` (sorted by UE); links outside every serving cluster
    are never estimated.  ``est_cov + err_cov`` equals the correlation
    matrices of the generating state.
    """

    realizations: np.ndarray   # (S, K, L, N) complex: true channels
    estimates: np.ndarray      # (S, P, N) complex: MMSE estimates, packed
    pair_k: np.ndarray         # (P,) int64
    pair_l: np.ndarray         # (P,) int64
    psi: np.ndarray            # (T, L, N, N) complex: pilot correlation matrices
    est_cov: np.ndarray        # (K, L, N, N) complex: estimate covariances
    err_cov: np.ndarray        # (K, L, N, N) complex: error covariances
    sample_count: int

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError(f"ensemble size must be >= 1, got {self.sample_count}")


def standard_complex(rng, shape) -> np.ndarray:
    """Unit-variance circularly-symmetric complex Gaussians.

    Real parts are drawn before imaginary parts so the stream layout is
    reproducible for a fixed generator state.
    """
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def draw_channels(state: LargeScaleState, sample_count: int, rng) -> np.ndarray:
    """Draw ``sample_count`` independent realizations of every link channel."""
    if sample_count < 1:
        raise ValueError(f"sample_count must be >= 1, got {sample_count}")
    root = state.correlation_sqrt()          # (K, L, N, N); raises on non-PSD
    g = standard_complex(rng, (sample_count, state.num_ues, state.num_aps,
                               state.antennas_per_ap))
    return np.einsum("klnm,sklm->skln", root, g)


def _combine_pilot_signal(realizations, pilot_powers, assignment, tau_p, noise):
    S, K, L, N = realizations.shape
    y = noise.copy()
    for t in range(tau_p):
        for i in np.nonzero(assignment.pilot_of == t)[0]:
            y[:, t] += np.sqrt(tau_p * pilot_powers[i]) * realizations[:, i]
    return y


def pilot_observation(realizations: np.ndarray, pilot_powers: np.ndarray,
                      assignment: ClusterAssignment, noise_power: float,
                      rng) -> np.ndarray:
    """Received pilot signal per (pilot, AP), shape ``(S, T, L, N)``.

    Fresh thermal noise of power ``noise_power`` per antenna is drawn for
    every (sample, pilot, AP); pilots with no assigned UE observe noise only.
    """
    pilot_powers = np.asarray(pilot_powers, dtype=float)
    if np.any(pilot_powers < 0):
        raise ValueError("pilot powers must be >= 0")
    S, K, L, N = realizations.shape
    T = assignment.num_pilots
    noise = np.sqrt(noise_power) * standard_complex(rng, (S, T, L, N))
    return _combine_pilot_signal(realizations, pilot_powers, assignment, T, noise)


def estimation_covariances(state: LargeScaleState, pilot_powers: np.ndarray,
                           assignment: ClusterAssignment, frame: FrameConfig):
    """Pilot correlation matrices and estimate/error covariances.

    Returns ``(psi, est_cov, err_cov)`` where ``psi[t, l]`` is the received
    pilot correlation at AP l, ``est_cov[k, l]`` the covariance of the MMSE
    estimate and ``err_cov[k, l] = corr[k, l] - est_cov[k, l]``.  Hermitian
    solves are used throughout and outputs are re-symmetrized to suppress
    round-off asymmetry.
    """
    if frame.noise_power_w <= 0:
        raise ValueError("noise power must be > 0 for an invertible pilot correlation")
    pilot_powers = np.asarray(pilot_powers, dtype=float)
    K, L = state.beta.shape
    N = state.antennas_per_ap
    T = assignment.num_pilots
    tau_p = frame.tau_p
    psi = np.zeros((T, L, N, N), dtype=np.complex128)
    eye = np.eye(N, dtype=np.complex128)
    for t in range(T):
        users = np.nonzero(assignment.pilot_of == t)[0]
        for l in range(L):
            acc = frame.noise_power_w * eye.copy()
            for i in users:
                acc += tau_p * pilot_powers[i] * state.corr[i, l]
            psi[t, l] = acc

    est_cov = np.zeros((K, L, N, N), dtype=np.complex128)
    err_cov = np.zeros((K, L, N, N), dtype=np.complex128)
    for k in range(K):
        t = int(assignment.pilot_of[k])
        for l in range(L):
            r = state.corr[k, l]
            try:
                x = np.linalg.solve(psi[t, l], r)
            except np.linalg.LinAlgError as exc:
                raise ValueError(
                    f"pilot correlation matrix for (pilot={t}, ap={l}) is singular"
                ) from exc
            b = tau_p * pilot_powers[k] * (r @ x)
            b = 0.5 * (b + b.conj().T)
            est_cov[k, l] = b
            c = r - b
            err_cov[k, l] = 0.5 * (c + c.conj().T)
    return psi, est_cov, err_cov


def mmse_estimate(y_pilot: np.ndarray, state: LargeScaleState,
                  pilot_powers: np.ndarray, assignment: ClusterAssignment,
                  frame: FrameConfig, psi: np.ndarray = None) -> np.ndarray:
    """MMSE channel estimates for every serving pair, shape ``(S, P, N)``.

    Applies ``sqrt(tau_p rho_k) R_kl Psi_tl^{-1}`` to the matching pilot
    observation; pairs follow ``assignment.pairs()`` order.
    """
    pilot_powers = np.asarray(pilot_powers, dtype=float)
    S = y_pilot.shape[0]
    K, L = state.beta.shape
    N = state.antennas_per_ap
    T = assignment.num_pilots
    if y_pilot.shape != (S, T, L, N):
        raise ValueError(
            f"pilot observation has shape {y_pilot.shape}, expected {(S, T, L, N)}"
        )
    if psi is None:
        psi, _, _ = estimation_covariances(state, pilot_powers, assignment, frame)
    pair_k, pair_l = assignment.pairs()
    P = pair_k.shape[0]
    weights = np.empty((P, N, N), dtype=np.complex128)
    for p in range(P):
        k, l = int(pair_k[p]), int(pair_l[p])
        t = int(assignment.pilot_of[k])
        # R Psi^{-1} = (Psi^{-1} R)^H because both factors are Hermitian
        weights[p] = np.sqrt(frame.tau_p * pilot_powers[k]) * \
            np.linalg.solve(psi[t, l], state.corr[k, l]).conj().T
    y_pairs = y_pilot[:, assignment.pilot_of[pair_k], pair_l, :]
    return np.einsum("pnm,spm->spn", weights, y_pairs)


def resolve_pilot_powers(frame: FrameConfig, p_max_w: float,
                         data_powers: np.ndarray = None, num_ues: int = None) -> np.ndarray:
    """Per-UE pilot powers for the configured mode.

    ``fixed_pmax`` keeps pilots at full power regardless of the data-power
    game; ``track_data_power`` reuses the current data powers.
    """
    if frame.pilot_power_mode == "fixed_pmax":
        if num_ues is None:
            num_ues = len(data_powers)
        return np.full(num_ues, p_max_w)
    if data_powers is None:
        raise ValueError("track_data_power mode needs the current data powers")
    return np.asarray(data_powers, dtype=float).copy()


def build_ensemble(state: LargeScaleState, assignment: ClusterAssignment,
                   frame: FrameConfig, pilot_powers: np.ndarray,
                   sample_count: int, rng) -> ChannelEnsemble:
    """Draw channels, simulate pilot reception and estimate every serving link."""
    h = draw_channels(state, sample_count, rng)
    y = pilot_observation(h, pilot_powers, assignment, frame.noise_power_w, rng)
    psi, est_cov, err_cov = estimation_covariances(state, pilot_powers,
                                                   assignment, frame)
    hhat = mmse_estimate(y, state, pilot_powers, assignment, frame, psi=psi)
    pair_k, pair_l = assignment.pairs()
    return ChannelEnsemble(
        realizations=h,
        estimates=hhat,
        pair_k=pair_k,
        pair_l=pair_l,
        psi=psi,
        est_cov=est_cov,
        err_cov=err_cov,
        sample_count=sample_count,
    )
