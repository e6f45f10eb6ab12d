"""User-centric clustering: sparsify the service graph for large networks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from .beamforming import EquivalentGains
from .config import NetworkConfig


@dataclass
class ClusterAssignment:
    serving_aps: Dict[int, List[int]]   # MS d -> sorted list of serving APs
    served_ms: Dict[int, List[int]]     # AP l -> sorted list of assigned MSs

    def consistent(self) -> bool:
        for d, aps in self.serving_aps.items():
            if any(d not in self.served_ms.get(l, []) for l in aps):
                return False
        for l, mss in self.served_ms.items():
            if any(l not in self.serving_aps.get(d, []) for d in mss):
                return False
        return True


def user_centric_cluster(gains: EquivalentGains, config: NetworkConfig) -> ClusterAssignment:
    """Two-step clustering: master AP per MS, then idle APs join their best MS.

    Step 1 assigns each MS a master AP maximizing its best per-subcarrier DL
    gain. As written, two MSs could claim the same AP, so masters are handed
    out sequentially in descending best-gain order with claimed APs excluded,
    which keeps every single-antenna AP serving at most one MS. Step 2 sends
    each still-idle AP to the MS with the strongest gain. Ties break toward
    the lowest index.
    """
    L, D = config.L, config.D
    if L < D:
        raise ValueError(f"need at least as many APs as MSs for masters, got L={L}, D={D}")
    best_gain = gains.omega.max(axis=2)            # (L, D): best subcarrier per pair

    serving: Dict[int, List[int]] = {d: [] for d in range(D)}
    served: Dict[int, List[int]] = {l: [] for l in range(L)}
    available = np.ones(L, dtype=bool)
    unassigned = set(range(D))
    while unassigned:
        table = np.where(available[:, None], best_gain, -np.inf)
        # next master goes to the MS with the strongest remaining option
        per_ms = np.array([table[:, d].max() if d in unassigned else -np.inf
                           for d in range(D)])
        d = int(per_ms.argmax())
        l = int(table[:, d].argmax())
        serving[d].append(l)
        served[l].append(d)
        available[l] = False
        unassigned.remove(d)

    for l in np.nonzero(available)[0]:
        d = int(best_gain[l].argmax())
        serving[d].append(int(l))
        served[int(l)].append(d)

    return ClusterAssignment(serving_aps={d: sorted(v) for d, v in serving.items()},
                             served_ms={l: sorted(v) for l, v in served.items()})


def assignment_masks(assignment: ClusterAssignment, L: int, D: int):
    """Boolean (L, D) service mask; mask[l, d] is True when AP l serves MS d."""
    mask = np.zeros((L, D), dtype=bool)
    for d, aps in assignment.serving_aps.items():
        mask[aps, d] = True
    return mask


def apply_cluster_mask(graph, assignment: ClusterAssignment):
    """Restrict a heterogeneous graph's service meta-paths to assigned pairs.

    Communication neighbor sets shrink to the assigned pairs and the gain
    features of unserved pairs are zeroed; the interference meta-paths stay
    dense because interference does not care about assignments.
    """
    from .hgnn.graph import masked_graph   # local import: keeps layering one-way

    mask = assignment_masks(assignment, graph.L, graph.D)
    if not assignment.consistent():
        raise ValueError("inconsistent cluster assignment")
    if not all(len(v) >= 1 for v in assignment.serving_aps.values()):
        raise ValueError("every MS needs at least one serving AP")
    return masked_graph(graph, mask)
