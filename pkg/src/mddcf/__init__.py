"""MDD cell-free massive-MIMO power allocation: simulator, solvers, GNN."""

from .beamforming import (Beamformers, EquivalentGains, RankDeficientChannel,
                          equivalent_gains, zf_beamformers)
from .config import NetworkConfig, db_to_linear, dbm_to_watt, load_config
from .instances import Instance, generate_instance, instance_beamformers
from .montecarlo import mc_interference_oracle
from .network import (ChannelSet, Topology, draw_channels, generate_topology,
                      large_scale_fading, subcarrier_channels)
from .qtsca import (Infeasible, InnerNonConvergence, QtScaState, SolverOptions,
                    init_feasible, qt_sca_solve, qt_update_z, sca_subproblem,
                    sca_surrogate)
from .rates import (PowerAllocation, qos_margins, sinr_dl, sinr_ul,
                    spectral_efficiency, zero_allocation)
from .clustering import ClusterAssignment, apply_cluster_mask, user_centric_cluster
from .waterfilling import greedy_unfair, waterfill

__all__ = [name for name in dir() if not name.startswith("_")]
