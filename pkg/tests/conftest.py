import numpy as np
import pytest

from cellfree_pas import (
    ExperimentConfig,
    FrameConfig,
    LayoutConfig,
    assign_pilots_and_clusters,
    build_large_scale,
    evaluate_profiles,
)
from cellfree_pas.association import ClusterAssignment
from cellfree_pas.harness import rng_for
from cellfree_pas.propagation import LargeScaleState


def make_instance(num_aps=9, num_ues=6, seed=3, tau_p=10, scenario="cell_free",
                  antennas=4, **layout_kwargs):
    """Small layout-backed instance: (layout, state, assignment)."""
    layout_cfg = LayoutConfig(num_aps=num_aps, num_ues=num_ues,
                              antennas_per_ap=antennas, **layout_kwargs)
    layout, state = build_large_scale(layout_cfg, rng_for(seed, 0, 0))
    assignment = assign_pilots_and_clusters(state.beta, tau_p, scenario, antennas)
    return layout, state, assignment


def synthetic_state(beta, antennas=1):
    """LargeScaleState with uncorrelated per-antenna statistics from a gain matrix."""
    beta = np.asarray(beta, dtype=float)
    K, L = beta.shape
    corr = np.zeros((K, L, antennas, antennas), dtype=np.complex128)
    idx = np.arange(antennas)
    corr[:, :, idx, idx] = beta[:, :, None]
    return LargeScaleState(beta=beta, corr=corr)


def manual_assignment(pilot_of, serving, num_aps, num_pilots, antennas=1):
    """Hand-built ClusterAssignment for contrived test instances."""
    pilot_of = np.asarray(pilot_of, dtype=np.int64)
    K = len(pilot_of)
    selection = np.zeros((K, num_aps), dtype=bool)
    for k, aps in enumerate(serving):
        selection[k, aps] = True
    served = [sorted(np.nonzero(selection[:, l])[0].tolist())
              for l in range(num_aps)]
    return ClusterAssignment(
        pilot_of=pilot_of,
        serving=[sorted(aps) for aps in serving],
        served=served,
        selection=selection,
        master_ap=np.array([aps[0] for aps in serving], dtype=np.int64),
        antenna_mask_diag=np.repeat(selection[:, :, None], antennas, axis=2),
        num_pilots=num_pilots,
    )


@pytest.fixture(scope="session")
def warm_kernels():
    """Compile the jitted kernels once so timed tests measure warm runs."""
    _, state, assignment = make_instance(num_aps=3, num_ues=2, seed=9, tau_p=2,
                                         antennas=2)
    frame = FrameConfig()
    profiles = [np.full(2, 0.1)]
    evaluate_profiles(state, assignment, frame, profiles, "lp_mmse",
                      sample_count=4, chunk_size=4, rng=rng_for(0, 0),
                      p_max_w=0.1)
    return True


@pytest.fixture
def desk_config():
    return ExperimentConfig(
        layout=LayoutConfig(num_aps=9, num_ues=6),
        alpha_grid=[0.0, 0.6, 1.0],
        num_drops=2,
        ensemble_size=300,
        chunk_size=150,
        combiner="lp_mmse",
        seed=5,
    )
