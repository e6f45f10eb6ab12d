"""Zero-forcing beamformers and the equivalent scalar link gains."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import NetworkConfig
from .network import ChannelSet

RANK_TOL = 1e-10  # smallest/largest singular-value ratio below this is rank deficient


class RankDeficientChannel(np.linalg.LinAlgError):
    def __init__(self, ap: int, subcarrier: int):
        self.ap = ap
        self.subcarrier = subcarrier
        super().__init__(f"stacked channel matrix of AP {ap} on subcarrier {subcarrier} "
                         f"is rank deficient")


@dataclass
class Beamformers:
    """Per-AP, per-subcarrier ZF precoders and combiners.

    DL precoders are column-normalized to unit power (the dropped norm becomes
    the equivalent gain omega); UL combiners keep the raw ZF scaling, whose
    squared norm becomes upsilon.
    """

    dl_precoders: np.ndarray  # (L, M, N, D) unit-norm columns
    ul_combiners: np.ndarray  # (L, Mbar, N, D) unnormalized


def _zf_pseudoinverse(stacked: np.ndarray, ap: int, subcarrier: int) -> np.ndarray:
    """Columns of H (H^H H)^{-1} for the N x D stacked channel H."""
    s = np.linalg.svd(stacked, compute_uv=False)
    if s[-1] < RANK_TOL * s[0]:
        raise RankDeficientChannel(ap, subcarrier)
    gram = stacked.conj().T @ stacked
    return stacked @ np.linalg.inv(gram)


def zf_beamformers(channels: ChannelSet, config: NetworkConfig) -> Beamformers:
    """ZF precoders/combiners from the per-subcarrier channel pseudo-inverse."""
    config.validate().require_zf()
    L, D, N = config.L, config.D, config.N
    dl = np.zeros((L, config.M, N, D), dtype=complex)
    ul = np.zeros((L, config.Mbar, N, D), dtype=complex)
    for l in range(L):
        for m in range(config.M):
            stacked = channels.freq[l, :, :, m].T          # (N, D), columns h_{ld}[m]
            raw = _zf_pseudoinverse(stacked, l, m)
            dl[l, m] = raw / np.linalg.norm(raw, axis=0, keepdims=True)
        for k in range(config.Mbar):
            mbar = config.M + k
            stacked = channels.freq[l, :, :, mbar].T
            ul[l, k] = _zf_pseudoinverse(stacked, l, mbar)
    return Beamformers(dl_precoders=dl, ul_combiners=ul)


@dataclass
class EquivalentGains:
    omega: np.ndarray    # (L, D, M)   DL: residual channel gain after precoder normalization
    upsilon: np.ndarray  # (L, D, Mbar) UL: combiner energy


def equivalent_gains(beamformers: Beamformers, channels: ChannelSet) -> EquivalentGains:
    """Scalar gains that fully determine the ZF SINRs.

    omega_{ldm} is the beamformed channel amplitude h^H f of the unit-norm
    precoder, which equals 1/||f_raw||; upsilon_{ld mbar} is ||w_raw||^2.
    """
    L, M, _, D = beamformers.dl_precoders.shape
    Mbar = beamformers.ul_combiners.shape[1]
    # h_{ld}^H[m] f_{ld}[m]: contract the antenna axis per (l, m, d)
    freq_dl = channels.freq[:, :, :, :M]                      # (L, D, N, M)
    prod = np.einsum("ldnm,lmnd->ldm", freq_dl.conj(), beamformers.dl_precoders)
    omega = np.real(prod)
    upsilon = np.sum(np.abs(beamformers.ul_combiners) ** 2, axis=2)   # (L, Mbar, D)
    upsilon = np.transpose(upsilon, (0, 2, 1))                        # (L, D, Mbar)
    if not (np.all(np.isfinite(omega)) and np.all(np.isfinite(upsilon))):
        raise FloatingPointError("non-finite equivalent gain")
    return EquivalentGains(omega=np.ascontiguousarray(omega),
                           upsilon=np.ascontiguousarray(upsilon))
