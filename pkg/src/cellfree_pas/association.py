"""Pilot assignment and user-centric cluster formation.

The rule is deterministic given the gain matrix:

1. every UE appoints its strongest-gain AP as master;
2. UEs are processed in decreasing order of their best gain, each picking
   the pilot with the least accumulated co-pilot power at its master AP
   (pilots already used by UEs sharing that master are excluded so a master
   never has to serve two UEs on one pilot);
3. ``cell_free``: every AP additionally serves, per pilot, the strongest UE
   it hears among that pilot's users, with mastered UEs keeping their slot;
   ``small_cell`` and ``massive_mimo``: each UE is served by its master only.

Ties anywhere break toward the lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import SCENARIOS

__all__ = [
    "ClusterAssignment",
    "assign_pilots_and_clusters",
    "effective_cluster_gain",
    "cluster_gains",
]


@dataclass
class ClusterAssignment:
    """Pilot indices, serving sets and AP-selection structure for one drop."""

    pilot_of: np.ndarray          # (K,) int
    serving: list                 # M_k: sorted AP indices per UE
    served: list                  # D_l: sorted UE indices per AP
    selection: np.ndarray         # (K, L) bool, the A matrix
    master_ap: np.ndarray         # (K,) int
    antenna_mask_diag: np.ndarray  # (K, L, N) bool, diagonals of the D_kl masks
    num_pilots: int
    _pairs: Optional[tuple] = field(default=None, repr=False, compare=False)

    @property
    def num_ues(self) -> int:
        return self.selection.shape[0]

    @property
    def num_aps(self) -> int:
        return self.selection.shape[1]

    def copilot_sets(self) -> list:
        """UE indices per pilot."""
        return [
            sorted(np.nonzero(self.pilot_of == t)[0].tolist())
            for t in range(self.num_pilots)
        ]

    def antenna_mask(self, k: int, l: int) -> np.ndarray:
        """The N x N binary diagonal selection matrix of link (k, l)."""
        return np.diag(self.antenna_mask_diag[k, l].astype(np.complex128))

    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Serving (UE, AP) pairs as two int64 arrays sorted by (k, l)."""
        if self._pairs is None:
            pk, pl = np.nonzero(self.selection)
            self._pairs = (pk.astype(np.int64), pl.astype(np.int64))
        return self._pairs

    def to_json(self) -> dict:
        return {
            "pilot_of": self.pilot_of.tolist(),
            "master_ap": self.master_ap.tolist(),
            "selection": self.selection.astype(int).tolist(),
            "num_pilots": self.num_pilots,
        }


def assign_pilots_and_clusters(beta: np.ndarray, tau_p: int, scenario: str,
                               n_antennas: int = 1) -> ClusterAssignment:
    """Run the deterministic pilot/cluster rule on a gain matrix.

    Parameters
    ----------
    beta : (K, L) float
        Strictly positive large-scale gains.
    tau_p : int
        Number of orthogonal pilots.
    scenario : str
        ``cell_free``, ``small_cell`` or ``massive_mimo``; only the cluster
        policy differs, all downstream code is scenario-agnostic.
    n_antennas : int
        Antennas per AP, used to materialize the per-antenna masks.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}, expected one of {SCENARIOS}")
    if tau_p < 1:
        raise ValueError(f"tau_p must be >= 1, got {tau_p}")
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 2:
        raise ValueError(f"beta must be a K x L matrix, got shape {beta.shape}")
    if np.any(beta <= 0):
        raise ValueError("beta must be strictly positive for every link")
    K, L = beta.shape

    master = np.argmax(beta, axis=1)

    # decreasing best-gain order, ties toward the lower UE index
    order = np.lexsort((np.arange(K), -beta.max(axis=1)))
    pilot_of = np.full(K, -1, dtype=np.int64)
    for k in order:
        m = master[k]
        blocked = {int(pilot_of[j]) for j in range(K)
                   if pilot_of[j] >= 0 and master[j] == m}
        if len(blocked) >= tau_p:
            raise ValueError(
                f"more than tau_p={tau_p} UEs share master AP {m}; "
                f"pilot assignment cannot keep one UE per pilot at that AP"
            )
        assigned = pilot_of >= 0
        best_t, best_c = -1, np.inf
        for t in range(tau_p):
            if t in blocked:
                continue
            cont = float(beta[assigned & (pilot_of == t), m].sum())
            if cont < best_c:
                best_t, best_c = t, cont
        pilot_of[k] = best_t

    selection = np.zeros((K, L), dtype=bool)
    selection[np.arange(K), master] = True
    if scenario == "cell_free":
        for l in range(L):
            for t in range(tau_p):
                users = np.nonzero(pilot_of == t)[0]
                if users.size == 0 or np.any(master[users] == l):
                    continue
                selection[users[np.argmax(beta[users, l])], l] = True

    serving = [sorted(np.nonzero(selection[k])[0].tolist()) for k in range(K)]
    served = [sorted(np.nonzero(selection[:, l])[0].tolist()) for l in range(L)]
    mask_diag = np.repeat(selection[:, :, None], n_antennas, axis=2)
    return ClusterAssignment(
        pilot_of=pilot_of,
        serving=serving,
        served=served,
        selection=selection,
        master_ap=master.astype(np.int64),
        antenna_mask_diag=mask_diag,
        num_pilots=tau_p,
    )


def effective_cluster_gain(beta: np.ndarray, assignment: ClusterAssignment,
                           k: int) -> float:
    """Summed gain of UE k over its serving cluster."""
    aps = assignment.serving[k]
    if not aps:
        raise ValueError(f"UE {k} has an empty serving cluster")
    return float(beta[k, aps].sum())


def cluster_gains(beta: np.ndarray, assignment: ClusterAssignment) -> np.ndarray:
    """Serving-cluster gains for all UEs as a (K,) vector."""
    return np.array([
        effective_cluster_gain(beta, assignment, k)
        for k in range(assignment.num_ues)
    ])
