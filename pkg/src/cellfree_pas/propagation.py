"""Network layout and large-scale channel statistics.

Generates AP/UE positions uniformly on a square service area, applies the
wrap-around (torus) distance so the network has no boundary, and maps link
distances to large-scale gains and per-link spatial correlation matrices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import CORRELATION_MODELS, LayoutConfig

__all__ = [
    "Layout",
    "LargeScaleState",
    "generate_layout",
    "wrap_distance",
    "wrap_distance_matrix",
    "large_scale_gain",
    "spatial_correlation",
    "build_large_scale",
    "collective_correlation",
    "large_scale_to_json",
]


@dataclass
class Layout:
    """AP and UE coordinates in meters, all inside ``[0, area_side)^2``."""

    ap_positions: np.ndarray   # (L, 2)
    ue_positions: np.ndarray   # (K, 2)
    area_side_m: float


@dataclass
class LargeScaleState:
    """Per-link large-scale statistics.

    ``beta[k, l]`` is the linear channel gain of the (UE k, AP l) link and
    ``corr[k, l]`` its N x N Hermitian PSD spatial correlation matrix with
    ``trace(corr[k, l]) / N == beta[k, l]``.
    """

    beta: np.ndarray           # (K, L) float
    corr: np.ndarray           # (K, L, N, N) complex
    _sqrt: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def num_ues(self) -> int:
        return self.beta.shape[0]

    @property
    def num_aps(self) -> int:
        return self.beta.shape[1]

    @property
    def antennas_per_ap(self) -> int:
        return self.corr.shape[2]

    def correlation_sqrt(self) -> np.ndarray:
        """Hermitian square roots of all correlation matrices, cached.

        Raises ``ValueError`` if any matrix has an eigenvalue below the
        negative numerical-noise floor (not PSD).
        """
        if self._sqrt is None:
            K, L, N, _ = self.corr.shape
            flat = self.corr.reshape(K * L, N, N)
            vals, vecs = np.linalg.eigh(flat)
            floor = -1e-10 * np.maximum(vals.max(axis=1), np.finfo(float).tiny)
            if np.any(vals < floor[:, None]):
                bad = int(np.argmax(np.any(vals < floor[:, None], axis=1)))
                raise ValueError(
                    f"correlation matrix for link (k={bad // L}, l={bad % L}) "
                    f"is not positive semidefinite (min eigenvalue {vals[bad].min():.3e})"
                )
            vals = np.clip(vals, 0.0, None)
            root = (vecs * np.sqrt(vals)[:, None, :]) @ vecs.conj().swapaxes(1, 2)
            self._sqrt = root.reshape(K, L, N, N)
        return self._sqrt


def generate_layout(config: LayoutConfig, rng=None) -> Layout:
    """Draw i.i.d. uniform AP and UE positions on the square area."""
    config.validate()
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    side = config.area_side_m
    ap = rng.uniform(0.0, side, size=(config.num_aps, 2))
    ue = rng.uniform(0.0, side, size=(config.num_ues, 2))
    return Layout(ap_positions=ap, ue_positions=ue, area_side_m=side)


def wrap_distance(p, q, side: float) -> float:
    """Torus distance: minimum over the nine translated images of ``q``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    delta = np.abs(p - q)
    delta = np.minimum(delta, side - delta)
    return float(np.hypot(delta[..., 0], delta[..., 1]))


def wrap_distance_matrix(points_a: np.ndarray, points_b: np.ndarray, side: float) -> np.ndarray:
    """Pairwise torus distances, shape ``(len(points_a), len(points_b))``."""
    delta = np.abs(points_a[:, None, :] - points_b[None, :, :])
    delta = np.minimum(delta, side - delta)
    return np.hypot(delta[..., 0], delta[..., 1])


def large_scale_gain(distance, config: LayoutConfig, rng=None):
    """Linear large-scale gain for one or many link distances.

    Evaluates ``10^((const - slope * log10(max(d, d_min)) + z) / 10)`` with
    shadowing ``z ~ N(0, shadowing_std_db^2)`` drawn from ``rng`` (zero when
    ``rng`` is None).  Scalar in, scalar out; array in, array out.
    """
    d = np.maximum(np.asarray(distance, dtype=float), config.min_distance_m)
    gain_db = config.pathloss_const_db - config.pathloss_slope_db * np.log10(d)
    if rng is not None:
        gain_db = gain_db + rng.normal(0.0, config.shadowing_std_db, size=d.shape)
    out = 10.0 ** (gain_db / 10.0)
    return float(out) if np.isscalar(distance) else out


def spatial_correlation(beta: float, model: str, n_antennas: int,
                        coeff: float = 0.0) -> np.ndarray:
    """N x N spatial correlation matrix with ``trace/N`` equal to ``beta``.

    ``uncorrelated`` returns ``beta * I``.  ``exponential`` returns the
    Kac-Murdock-Szego form ``beta * coeff^|n - m|``, Hermitian PSD for
    ``0 <= coeff < 1`` with unit diagonal before scaling.
    """
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    if model == "uncorrelated":
        return beta * np.eye(n_antennas, dtype=np.complex128)
    if model == "exponential":
        idx = np.arange(n_antennas)
        return beta * (coeff ** np.abs(idx[:, None] - idx[None, :])).astype(np.complex128)
    raise ValueError(
        f"unknown correlation model {model!r}, expected one of {CORRELATION_MODELS}"
    )


def build_large_scale(config: LayoutConfig, rng=None) -> tuple[Layout, LargeScaleState]:
    """Generate a layout and all per-link large-scale statistics.

    One shadowing realization is drawn per (UE, AP) link in row-major order,
    so the gain matrix is bit-identical across reruns for a fixed seed.
    """
    config.validate()
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    layout = generate_layout(config, rng)
    dist = wrap_distance_matrix(layout.ue_positions, layout.ap_positions,
                                config.area_side_m)
    beta = large_scale_gain(dist, config, rng)
    K, L = beta.shape
    N = config.antennas_per_ap
    corr = np.empty((K, L, N, N), dtype=np.complex128)
    for k in range(K):
        for l in range(L):
            corr[k, l] = spatial_correlation(
                beta[k, l], config.correlation_model, N, config.correlation_coeff
            )
    return layout, LargeScaleState(beta=beta, corr=corr)


def collective_correlation(state: LargeScaleState, k: int) -> np.ndarray:
    """Block-diagonal correlation of UE k's stacked channel to all APs."""
    L, N = state.num_aps, state.antennas_per_ap
    out = np.zeros((L * N, L * N), dtype=np.complex128)
    for l in range(L):
        out[l * N:(l + 1) * N, l * N:(l + 1) * N] = state.corr[k, l]
    return out


def large_scale_to_json(layout: Layout, state: LargeScaleState) -> dict:
    """JSON-ready snapshot of the layout and gain matrix for reproducibility."""
    return {
        "area_side_m": layout.area_side_m,
        "ap_positions_m": layout.ap_positions.tolist(),
        "ue_positions_m": layout.ue_positions.tolist(),
        "beta": state.beta.tolist(),
    }


def save_large_scale_json(path: str, layout: Layout, state: LargeScaleState) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(large_scale_to_json(layout, state), fh, indent=2)
        fh.write("\n")
