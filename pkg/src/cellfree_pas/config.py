"""Configuration objects for the simulator.

Every constant used anywhere in the pipeline lives in one of the dataclasses
below; modules never hard-code model parameters.  An experiment is described
by a single declarative JSON document that maps 1:1 onto
:class:`ExperimentConfig` (see ``configs/`` for examples).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Optional

SCENARIOS = ("cell_free", "small_cell", "massive_mimo")
COMBINERS = ("mrc", "lp_mmse")
CORRELATION_MODELS = ("uncorrelated", "exponential")
PILOT_POWER_MODES = ("fixed_pmax", "track_data_power")
SCHEDULES = ("sequential", "simultaneous")
INITIAL_POWER_RULES = ("full_power", "fraction")


@dataclass
class LayoutConfig:
    """Network geometry plus the large-scale propagation model.

    Path loss follows the 3GPP-style urban model
    ``beta_dB = pathloss_const_db - pathloss_slope_db * log10(d_m)`` with
    i.i.d. log-normal shadowing of ``shadowing_std_db`` dB per link and a
    minimum link distance that avoids the d=0 singularity.
    """

    area_side_m: float = 2000.0
    num_aps: int = 25            # L
    antennas_per_ap: int = 4     # N
    num_ues: int = 15            # K
    rng_seed: int = 0
    pathloss_const_db: float = -30.5
    pathloss_slope_db: float = 36.7
    shadowing_std_db: float = 4.0
    min_distance_m: float = 10.0
    correlation_model: str = "uncorrelated"
    correlation_coeff: float = 0.0   # adjacent-antenna correlation, exponential model only

    def validate(self) -> None:
        if self.area_side_m <= 0:
            raise ValueError(f"area_side_m must be > 0, got {self.area_side_m}")
        if self.num_aps < 1:
            raise ValueError(f"num_aps must be >= 1, got {self.num_aps}")
        if self.antennas_per_ap < 1:
            raise ValueError(f"antennas_per_ap must be >= 1, got {self.antennas_per_ap}")
        if self.num_ues < 2:
            raise ValueError(
                f"num_ues must be >= 2 (the power game needs at least two players), "
                f"got {self.num_ues}"
            )
        if self.min_distance_m <= 0:
            raise ValueError(f"min_distance_m must be > 0, got {self.min_distance_m}")
        if self.shadowing_std_db < 0:
            raise ValueError(f"shadowing_std_db must be >= 0, got {self.shadowing_std_db}")
        if self.correlation_model not in CORRELATION_MODELS:
            raise ValueError(
                f"unknown correlation_model {self.correlation_model!r}, "
                f"expected one of {CORRELATION_MODELS}"
            )
        if not 0.0 <= self.correlation_coeff < 1.0:
            raise ValueError(
                f"correlation_coeff must lie in [0, 1), got {self.correlation_coeff}"
            )


@dataclass
class FrameConfig:
    """TDD frame split and receiver noise floor.

    The default noise power is -94 dBm: thermal noise over a 20 MHz band
    plus a 7 dB noise figure.  ``tau_d`` is carried for completeness but the
    uplink simulator never consumes it.
    """

    tau_c: int = 200
    tau_p: int = 10
    tau_u: int = 190
    tau_d: int = 0
    noise_power_w: float = 3.99e-13
    pilot_power_mode: str = "fixed_pmax"

    def validate(self) -> None:
        for name in ("tau_c", "tau_p", "tau_u", "tau_d"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.tau_c != self.tau_p + self.tau_u + self.tau_d:
            raise ValueError(
                f"frame split inconsistent: tau_c={self.tau_c} but "
                f"tau_p+tau_u+tau_d={self.tau_p + self.tau_u + self.tau_d}"
            )
        if self.tau_p < 1:
            raise ValueError(f"tau_p must be >= 1, got {self.tau_p}")
        if self.noise_power_w <= 0:
            raise ValueError(f"noise_power_w must be > 0, got {self.noise_power_w}")
        if self.pilot_power_mode not in PILOT_POWER_MODES:
            raise ValueError(
                f"unknown pilot_power_mode {self.pilot_power_mode!r}, "
                f"expected one of {PILOT_POWER_MODES}"
            )


@dataclass
class GameConfig:
    """Parameters of the power-control game.

    ``alpha`` weights the serving-cluster gain inside each player's effective
    gain; ``epsilon`` is the strict improvement threshold for accepting a
    best-response update and doubles as the equilibrium certification slack.
    The tight default leaves fixed-point residuals near 1e-10 * p_max_w.
    """

    alpha: float = 0.0
    epsilon: float = 1e-20
    rho_min_w: float = 1e-6
    rho_max_w: float = 0.1
    p_max_w: float = 0.1
    schedule: str = "sequential"
    max_iterations: int = 500
    initial_power_rule: str = "full_power"
    initial_power_divisor: float = 1.0   # n in the p_max/n starting rule

    def validate(self) -> None:
        if not math.isfinite(self.alpha) or self.alpha < 0:
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0 < self.rho_min_w <= self.rho_max_w <= self.p_max_w:
            raise ValueError(
                f"power bounds must satisfy 0 < rho_min_w <= rho_max_w <= p_max_w, "
                f"got ({self.rho_min_w}, {self.rho_max_w}, {self.p_max_w})"
            )
        if self.schedule not in SCHEDULES:
            raise ValueError(
                f"unknown schedule {self.schedule!r}, expected one of {SCHEDULES}"
            )
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.initial_power_rule not in INITIAL_POWER_RULES:
            raise ValueError(
                f"unknown initial_power_rule {self.initial_power_rule!r}, "
                f"expected one of {INITIAL_POWER_RULES}"
            )
        if self.initial_power_divisor <= 0:
            raise ValueError(
                f"initial_power_divisor must be > 0, got {self.initial_power_divisor}"
            )


@dataclass
class ExperimentConfig:
    """Top-level experiment description: scenario, sub-configs and sweep axes."""

    scenario: str = "cell_free"
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    frame: FrameConfig = field(default_factory=FrameConfig)
    game: GameConfig = field(default_factory=GameConfig)
    bandwidth_hz: float = 2e7
    alpha_grid: list[float] = field(default_factory=lambda: [0.0, 0.3, 0.6, 1.0, 2.0])
    num_drops: int = 20
    combiner: str = "lp_mmse"
    freeze_combiner_at_full_power: bool = False   # isolate power-control effects
    ensemble_size: int = 10000
    chunk_size: int = 2500       # Monte-Carlo samples per streaming chunk
    k_grid: Optional[list[int]] = None   # UE counts for the metrics-vs-K sweep
    output_dir: str = "out"
    seed: int = 1

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ValueError(
                f"unknown scenario {self.scenario!r}, expected one of {SCENARIOS}"
            )
        self.layout.validate()
        self.frame.validate()
        self.game.validate()
        if self.bandwidth_hz <= 0:
            raise ValueError(f"bandwidth_hz must be > 0, got {self.bandwidth_hz}")
        if not self.alpha_grid:
            raise ValueError("alpha_grid must be nonempty")
        for a in self.alpha_grid:
            if not math.isfinite(a) or a < 0:
                raise ValueError(f"alpha_grid entries must be finite and >= 0, got {a}")
        if self.num_drops < 1:
            raise ValueError(f"num_drops must be >= 1, got {self.num_drops}")
        if self.combiner not in COMBINERS:
            raise ValueError(
                f"unknown combiner {self.combiner!r}, expected one of {COMBINERS}"
            )
        if self.ensemble_size < 1:
            raise ValueError(f"ensemble_size must be >= 1, got {self.ensemble_size}")
        if self.chunk_size < 1:
            raise ValueError(f"chunk_size must be >= 1, got {self.chunk_size}")
        if self.k_grid is not None:
            if not self.k_grid:
                raise ValueError("k_grid, when given, must be nonempty")
            for k in self.k_grid:
                if k < 2:
                    raise ValueError(f"k_grid entries must be >= 2, got {k}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTION_TYPES = {"layout": LayoutConfig, "frame": FrameConfig, "game": GameConfig}


def _build_section(cls, data: dict, section: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(
            f"unknown keys in config section {section!r}: {sorted(unknown)}"
        )
    return cls(**data)


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build and validate an :class:`ExperimentConfig` from a plain dict."""
    data = dict(data)
    kwargs = {}
    for section, cls in _SECTION_TYPES.items():
        if section in data:
            raw = data.pop(section)
            if not isinstance(raw, dict):
                raise ValueError(f"config section {section!r} must be an object")
            kwargs[section] = _build_section(cls, raw, section)
    top_known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - top_known
    if unknown:
        raise ValueError(f"unknown top-level config keys: {sorted(unknown)}")
    kwargs.update(data)
    cfg = ExperimentConfig(**kwargs)
    cfg.validate()
    return cfg


def load_config(path: str) -> ExperimentConfig:
    """Load an experiment config from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"config file {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValueError(f"config file {path!r} must contain a JSON object")
    return config_from_dict(data)
