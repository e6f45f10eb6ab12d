"""Heterogeneous graph view of a network instance.

Two node types (AP, MS), each with two meta-paths: the communication path
(MS-UL-AP for APs, AP-DL-MS for MSs) and the interference path (AP-IAI-AP,
MS-IMI-MS, both including a zero-weight self loop). Edge attributes are
plain Euclidean distances.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..beamforming import EquivalentGains
from ..config import NetworkConfig
from ..network import Topology


@dataclass
class HetGraph:
    ap_features: np.ndarray   # (L, D*M + 3): per-subcarrier gain blocks, P_l, xi_si, xi_iai
    ms_features: np.ndarray   # (D, L*Mbar + 3): per-subcarrier gain blocks, P_d, xi_si, xi_imi
    edge_dist: np.ndarray     # (L+D, L+D) distances, APs first, zero diagonal
    serve_mask: np.ndarray    # (L, D) bool, communication meta-path structure
    L: int
    D: int
    M: int
    Mbar: int
    area_side: float          # edge normalization scale

    @property
    def dist_ap_ms(self) -> np.ndarray:
        return self.edge_dist[:self.L, self.L:]

    @property
    def dist_ap_ap(self) -> np.ndarray:
        return self.edge_dist[:self.L, :self.L]

    @property
    def dist_ms_ms(self) -> np.ndarray:
        return self.edge_dist[self.L:, self.L:]

    def ap_gain_blocks(self) -> np.ndarray:
        """Per-MS slot contents of the AP features, shape (L, D, M)."""
        blocks = self.ap_features[:, :self.D * self.M].reshape(self.L, self.M, self.D)
        return np.transpose(blocks, (0, 2, 1))

    def ms_gain_blocks(self) -> np.ndarray:
        """Per-AP slot contents of the MS features, shape (D, L, Mbar)."""
        blocks = self.ms_features[:, :self.L * self.Mbar].reshape(self.D, self.Mbar, self.L)
        return np.transpose(blocks, (0, 2, 1))


def build_graph(gains: EquivalentGains, topology: Topology,
                config: NetworkConfig) -> HetGraph:
    """Assemble node features, edge distances and the dense service structure."""
    L, D, M, Mbar = config.L, config.D, config.M, config.Mbar
    ap_feat = np.empty((L, D * M + 3))
    # m-major blocks of D gains each
    ap_feat[:, :D * M] = np.transpose(gains.omega, (0, 2, 1)).reshape(L, M * D)
    ap_feat[:, D * M:] = [config.P_l, config.xi_si_ap, config.xi_iai]

    ms_feat = np.empty((D, L * Mbar + 3))
    ms_feat[:, :L * Mbar] = np.transpose(gains.upsilon, (1, 2, 0)).reshape(D, Mbar * L)
    ms_feat[:, L * Mbar:] = [config.P_d, config.xi_si_ms, config.xi_imi]

    pos = np.vstack([topology.ap_positions, topology.ms_positions])
    diff = pos[:, None, :] - pos[None, :, :]
    edge_dist = np.sqrt((diff**2).sum(axis=-1))
    np.fill_diagonal(edge_dist, 0.0)

    return HetGraph(ap_features=ap_feat, ms_features=ms_feat, edge_dist=edge_dist,
                    serve_mask=np.ones((L, D), dtype=bool), L=L, D=D, M=M, Mbar=Mbar,
                    area_side=config.S_D)


def masked_graph(graph: HetGraph, mask: np.ndarray) -> HetGraph:
    """Sparsified copy: communication meta-paths and gain slots restricted to
    assigned AP-MS pairs; interference meta-paths stay dense."""
    if mask.shape != (graph.L, graph.D):
        raise ValueError(f"mask shape {mask.shape} does not fit graph "
                         f"(L={graph.L}, D={graph.D})")
    ap_feat = graph.ap_features.copy()
    blocks = ap_feat[:, :graph.D * graph.M].reshape(graph.L, graph.M, graph.D)
    blocks *= mask[:, None, :]
    ms_feat = graph.ms_features.copy()
    blocks = ms_feat[:, :graph.L * graph.Mbar].reshape(graph.D, graph.Mbar, graph.L)
    blocks *= mask.T[:, None, :]
    return replace(graph, ap_features=ap_feat, ms_features=ms_feat,
                   serve_mask=mask.copy())


def permute_ms(graph: HetGraph, perm: np.ndarray) -> HetGraph:
    """Relabel MS nodes by perm (new index = perm[old]): feature rows, the
    per-MS slots inside every AP feature, edges and the service mask all move
    together."""
    inv = np.argsort(perm)
    ap_feat = graph.ap_features.copy()
    blocks = ap_feat[:, :graph.D * graph.M].reshape(graph.L, graph.M, graph.D)
    ap_feat[:, :graph.D * graph.M] = blocks[:, :, inv].reshape(graph.L, -1)
    ms_feat = graph.ms_features[inv]
    node_perm = np.concatenate([np.arange(graph.L), graph.L + inv])
    edge = graph.edge_dist[np.ix_(node_perm, node_perm)]
    return replace(graph, ap_features=ap_feat, ms_features=ms_feat, edge_dist=edge,
                   serve_mask=graph.serve_mask[:, inv])


def permute_ap(graph: HetGraph, perm: np.ndarray) -> HetGraph:
    """Relabel AP nodes by perm (new index = perm[old])."""
    inv = np.argsort(perm)
    ap_feat = graph.ap_features[inv]
    ms_feat = graph.ms_features.copy()
    blocks = ms_feat[:, :graph.L * graph.Mbar].reshape(graph.D, graph.Mbar, graph.L)
    ms_feat[:, :graph.L * graph.Mbar] = blocks[:, :, inv].reshape(graph.D, -1)
    node_perm = np.concatenate([inv, graph.L + np.arange(graph.D)])
    edge = graph.edge_dist[np.ix_(node_perm, node_perm)]
    return replace(graph, ap_features=ap_feat, ms_features=ms_feat, edge_dist=edge,
                   serve_mask=graph.serve_mask[inv])
