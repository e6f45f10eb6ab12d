"""Network-instance bundle: topology, channels and derived ZF gains."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .beamforming import Beamformers, EquivalentGains, equivalent_gains, zf_beamformers
from .config import NetworkConfig
from .network import ChannelSet, Topology, draw_channels, generate_topology


@dataclass
class Instance:
    """Everything a solver needs for one layout.

    Instances loaded back from a dataset file carry the cached gain/beta
    tables but no small-scale channel realization (``channels is None``); the
    full realization is reproducible from (config, seed).
    """

    config: NetworkConfig
    seed: int
    topology: Topology
    gains: EquivalentGains
    beta_ap_ms: np.ndarray
    beta_ap_ap: np.ndarray
    beta_ms_ms: np.ndarray
    channels: Optional[ChannelSet] = None

    @property
    def L(self) -> int:
        return self.config.L

    @property
    def D(self) -> int:
        return self.config.D


def generate_instance(config: NetworkConfig, seed: int,
                      keep_channels: bool = True) -> Instance:
    """Generate a layout, draw its channels and compute the ZF gains.

    Topology and channels consume independent seeded streams derived from the
    instance seed, so the instance is a pure function of (config, seed).
    """
    config.validate().require_zf()
    topo_seed, chan_seed = _derived_seeds(seed)
    topology = generate_topology(config, topo_seed)
    channels = draw_channels(topology, config, chan_seed)
    bf = zf_beamformers(channels, config)
    gains = equivalent_gains(bf, channels)
    return Instance(config=config, seed=seed, topology=topology, gains=gains,
                    beta_ap_ms=channels.beta_ap_ms, beta_ap_ap=channels.beta_ap_ap,
                    beta_ms_ms=channels.beta_ms_ms,
                    channels=channels if keep_channels else None)


def instance_beamformers(instance: Instance) -> Beamformers:
    if instance.channels is None:
        _, chan_seed = _derived_seeds(instance.seed)
        channels = draw_channels(instance.topology, instance.config, chan_seed)
    else:
        channels = instance.channels
    return zf_beamformers(channels, instance.config)


def _derived_seeds(seed: int):
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(2)
    return children[0], children[1]
