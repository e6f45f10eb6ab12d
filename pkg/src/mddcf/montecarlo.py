"""Monte-Carlo SINR oracle for the per-symbol signal model.

Re-draws the self-interference, inter-AP and inter-MS channel realizations
together with the data symbols, averages the interference powers empirically
and forms SINR estimates. This exists purely to cross-check the analytic
equivalent-gain SINR expressions; production paths never call it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beamforming import Beamformers
from .config import NetworkConfig
from .network import ChannelSet, subcarrier_channels
from .rates import PowerAllocation, check_nonnegative


@dataclass
class OracleSinr:
    dl: np.ndarray  # (D, M)
    ul: np.ndarray  # (D, Mbar)


def _cn(rng, shape, variance=1.0):
    scale = np.sqrt(np.asarray(variance) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def mc_interference_oracle(channels: ChannelSet, beamformers: Beamformers,
                           pa: PowerAllocation, config: NetworkConfig,
                           draws: int, seed: int) -> OracleSinr:
    """Empirical SINR table from ``draws`` independent interference realizations."""
    if draws < 1000:
        raise ValueError(f"need at least 1000 draws, got {draws}")
    check_nonnegative(pa)
    config.validate()
    rng = np.random.default_rng(seed)
    L, D, N = config.L, config.D, config.N
    M, Mbar, M_sum, U = config.M, config.Mbar, config.M_sum, config.U

    sqrt_pdl = np.sqrt(pa.p_dl)                               # (L, D, M)
    sqrt_pul = np.sqrt(pa.p_ul)                               # (D, Mbar)
    f = beamformers.dl_precoders                              # (L, M, N, D)
    w = beamformers.ul_combiners                              # (L, Mbar, N, D)
    h_dl = channels.freq[:, :, :, :M]                         # (L, D, N, M)
    h_ul = channels.freq[:, :, :, M:]                         # (L, D, N, Mbar)

    # Deterministic pieces: desired signal, residual multiuser interference
    # (vanishes under exact ZF) and combiner-shaped thermal noise.
    g_eff = np.einsum("ldnm,lmne,lem->dem", h_dl.conj(), f, sqrt_pdl)
    g_diag = np.einsum("ddm->dm", g_eff)
    dl_desired = np.abs(g_diag) ** 2
    dl_mui = (np.abs(g_eff) ** 2).sum(axis=1) - np.abs(g_diag) ** 2

    c_eff = np.einsum("lknd,lenk->dek", w.conj(), h_ul)
    c_diag = np.einsum("ddk->dk", c_eff)
    ul_desired = pa.p_ul * np.abs(c_diag) ** 2
    ul_mui = np.einsum("ek,dek->dk", pa.p_ul, np.abs(c_eff) ** 2) - pa.p_ul * np.abs(c_diag) ** 2
    ul_noise = config.sigma2 * np.einsum("lknd->dk", np.abs(w) ** 2)

    si_ms_acc = np.zeros(D)
    imi_acc = np.zeros(D)
    si_ap_acc = np.zeros((D, Mbar))
    iai_acc = np.zeros((D, Mbar))

    # IAI channel draws dominate memory: (chunk, L, L, N, N, M_sum) complex.
    chunk = max(500, min(20000, int(3e6 / (L * L * N * N * M_sum))))
    done = 0
    while done < draws:
        s = min(chunk, draws - done)
        x_dl = _cn(rng, (s, D, M))                            # DL data symbols
        x_ul = _cn(rng, (s, D, Mbar))                         # UL data symbols

        # MS self-interference: own UL symbols through a drawn SI coefficient
        h_dd = _cn(rng, (s, D), config.xi_si_ms)
        z = h_dd * np.einsum("dk,sdk->sd", sqrt_pul, x_ul)
        si_ms_acc += (np.abs(z) ** 2).sum(axis=0)

        # Inter-MS interference over drawn multipath channels; the beta table
        # has a zero diagonal, so the own-signal term vanishes by itself.
        cir_mm = _cn(rng, (s, D, D, U), (channels.beta_ms_ms / U)[None, :, :, None])
        h_mm = subcarrier_channels(cir_mm, M_sum)[..., M:]    # (s, D, D, Mbar)
        z = np.einsum("ek,sdek,sek->sd", sqrt_pul, h_mm, x_ul)
        imi_acc += config.xi_imi * (np.abs(z) ** 2).sum(axis=0)

        # Per-AP transmit vectors on every DL subcarrier: u[s, l, m, n]
        u_tx = np.einsum("ldm,lmnd,sdm->slmn", sqrt_pdl, f, x_dl)

        # AP self-interference: summed transmit signal through the SI matrix
        h_ll = _cn(rng, (s, L, N, N), config.xi_si_ap)
        t_sum = u_tx.sum(axis=2)                              # (s, L, N)
        z_si = np.einsum("slpn,sln->slp", h_ll, t_sum)
        proj = np.einsum("lknd,sln->sldk", w.conj(), z_si)
        si_ap_acc += (np.abs(proj) ** 2).sum(axis=(0, 1))

        # Inter-AP interference over drawn multipath channels (zero diagonal)
        cir_aa = _cn(rng, (s, L, L, N, N, U),
                     (channels.beta_ap_ap / U)[None, :, :, None, None, None])
        h_aa = subcarrier_channels(cir_aa, M_sum)[..., :M]    # (s, L, L, N, N, M)
        z_iai = np.einsum("slepnm,semn->slp", h_aa, u_tx)
        proj = np.einsum("lknd,sln->sldk", w.conj(), z_iai)
        iai_acc += config.xi_iai * (np.abs(proj) ** 2).sum(axis=(0, 1))

        done += s

    dl = dl_desired / (dl_mui + (si_ms_acc / draws)[:, None]
                       + (imi_acc / draws)[:, None] + config.sigma2)
    ul = ul_desired / (ul_mui + si_ap_acc / draws + iai_acc / draws + ul_noise)
    return OracleSinr(dl=dl, ul=ul)
