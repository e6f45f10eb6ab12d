"""Topology, large-scale fading and multipath channel generation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import NetworkConfig

# Links shorter than this are clamped before the path-loss law; the model is
# unbounded as the distance goes to zero.
MIN_LINK_DISTANCE_M = 1.0


@dataclass
class Topology:
    ap_positions: np.ndarray  # (L, 2) [m]
    ms_positions: np.ndarray  # (D, 2) [m]


def generate_topology(config: NetworkConfig, seed: int) -> Topology:
    """Drop APs and MSs uniformly at random over the square service area."""
    config.validate()
    rng = np.random.default_rng(seed)
    ap = rng.uniform(0.0, config.S_D, size=(config.L, 2))
    ms = rng.uniform(0.0, config.S_D, size=(config.D, 2))
    return Topology(ap_positions=ap, ms_positions=ms)


def large_scale_fading(distance_m, shadow_draw, sigma_sh: float = 4.0):
    """Linear power gain: -30.5 - 36.7*log10(d) dB path loss plus log-normal shadowing.

    ``shadow_draw`` is the standard-normal shadowing realization; it is scaled
    by ``sigma_sh`` dB. Accepts scalars or arrays.
    """
    distance_m = np.asarray(distance_m, dtype=float)
    if np.any(distance_m <= 0.0):
        raise ValueError("large_scale_fading requires strictly positive distances")
    gain_db = -30.5 - 36.7 * np.log10(distance_m) + sigma_sh * np.asarray(shadow_draw, dtype=float)
    return 10.0 ** (gain_db / 10.0)


def subcarrier_channels(cir: np.ndarray, m_sum: int) -> np.ndarray:
    """Frequency response of time-domain taps on all ``m_sum`` subcarriers.

    Applies the unitary (1/sqrt(M_sum)-scaled) DFT to the taps placed in the
    first U delay bins, so a tap vector of total power beta yields
    E[|h[m]|^2] = beta / M_sum on every subcarrier. Works on any leading
    batch shape; the taps live on the last axis.
    """
    cir = np.asarray(cir)
    u = cir.shape[-1]
    if u > m_sum:
        raise ValueError(f"tap count U={u} exceeds subcarrier count M_sum={m_sum}")
    padded = np.zeros(cir.shape[:-1] + (m_sum,), dtype=complex)
    padded[..., :u] = cir
    return np.fft.fft(padded, axis=-1) / np.sqrt(m_sum)


@dataclass
class ChannelSet:
    """One realization of all channels of a network instance.

    ``cir`` and ``freq`` hold the AP-MS communication channels; the IAI/IMI
    links enter the analytic SINRs only through their large-scale gains, so
    just the beta tables are kept for them (the Monte-Carlo oracle re-draws
    their small-scale realizations).
    """

    beta_ap_ms: np.ndarray   # (L, D) linear gains
    beta_ap_ap: np.ndarray   # (L, L), symmetric, zero diagonal
    beta_ms_ms: np.ndarray   # (D, D), symmetric, zero diagonal
    cir: np.ndarray          # (L, D, N, U) complex taps
    freq: np.ndarray         # (L, D, N, M_sum) complex subcarrier channels
    si_ap: np.ndarray        # (L, N, N) complex self-interference channels
    si_ms: np.ndarray        # (D,) complex self-interference channels


def _pair_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff**2, axis=-1))


def _complex_gaussian(rng: np.random.Generator, shape, variance=1.0) -> np.ndarray:
    # independent real/imaginary parts, each with half the variance
    scale = np.sqrt(np.asarray(variance) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _symmetric_shadowed_gains(rng: np.random.Generator, positions: np.ndarray,
                              sigma_sh: float) -> np.ndarray:
    """Large-scale gains between same-type nodes; reciprocal pairs share one draw."""
    n = positions.shape[0]
    dist = np.maximum(_pair_distances(positions, positions), MIN_LINK_DISTANCE_M)
    z = rng.standard_normal((n, n))
    z = np.triu(z, k=1)
    z = z + z.T
    beta = large_scale_fading(dist, z, sigma_sh)
    np.fill_diagonal(beta, 0.0)
    return beta


def draw_channels(topology: Topology, config: NetworkConfig, seed: int) -> ChannelSet:
    """Draw one full channel realization for a given topology.

    Every multipath tap is circularly-symmetric complex Gaussian with variance
    beta/U; self-interference entries have variance xi_si. The draw order is
    fixed, so equal (topology, config, seed) give bit-identical output.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    L, D, N, U = config.L, config.D, config.N, config.U

    dist_ld = np.maximum(_pair_distances(topology.ap_positions, topology.ms_positions),
                         MIN_LINK_DISTANCE_M)
    beta_ap_ms = large_scale_fading(dist_ld, rng.standard_normal((L, D)), config.sigma_sh)
    beta_ap_ap = _symmetric_shadowed_gains(rng, topology.ap_positions, config.sigma_sh)
    beta_ms_ms = _symmetric_shadowed_gains(rng, topology.ms_positions, config.sigma_sh)

    tap_var = beta_ap_ms / U                     # (L, D)
    cir = _complex_gaussian(rng, (L, D, N, U), tap_var[:, :, None, None])
    freq = subcarrier_channels(cir, config.M_sum)

    si_ap = _complex_gaussian(rng, (L, N, N), config.xi_si_ap)
    si_ms = _complex_gaussian(rng, (D,), config.xi_si_ms)

    return ChannelSet(beta_ap_ms=beta_ap_ms, beta_ap_ap=beta_ap_ap, beta_ms_ms=beta_ms_ms,
                      cir=cir, freq=freq, si_ap=si_ap, si_ms=si_ms)
