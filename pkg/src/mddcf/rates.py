"""Analytic SINRs, spectral efficiency and QoS margins under ZF beamforming."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beamforming import EquivalentGains
from .config import NetworkConfig


@dataclass
class PowerAllocation:
    p_dl: np.ndarray  # (L, D, M) [W]
    p_ul: np.ndarray  # (D, Mbar) [W]

    def copy(self) -> "PowerAllocation":
        return PowerAllocation(p_dl=self.p_dl.copy(), p_ul=self.p_ul.copy())


def zero_allocation(config: NetworkConfig) -> PowerAllocation:
    return PowerAllocation(p_dl=np.zeros((config.L, config.D, config.M)),
                           p_ul=np.zeros((config.D, config.Mbar)))


def check_nonnegative(pa: PowerAllocation) -> None:
    if np.any(pa.p_dl < 0.0) or np.any(pa.p_ul < 0.0):
        raise ValueError("negative power in allocation")


def budget_usage(pa: PowerAllocation):
    """Per-AP DL and per-MS UL power sums."""
    return pa.p_dl.sum(axis=(1, 2)), pa.p_ul.sum(axis=1)


def within_budgets(pa: PowerAllocation, config: NetworkConfig, tol: float = 0.0) -> bool:
    used_dl, used_ul = budget_usage(pa)
    return bool(np.all(used_dl <= config.P_l + tol) and np.all(used_ul <= config.P_d + tol))


# ---------------------------------------------------------------------------
# Vectorized SINR terms. The denominators are written in the cancelled form
# xi_si * Theta + sigma^2 = xi_si * own-power + xi_cross/M_sum * beta-weighted
# cross power + sigma^2, which never divides by xi_si.
# ---------------------------------------------------------------------------

def dl_signal_amplitude(gains: EquivalentGains, p_dl: np.ndarray) -> np.ndarray:
    """sum_l sqrt(p_ldm) * omega_ldm, shape (D, M)."""
    return np.einsum("ldm,ldm->dm", np.sqrt(p_dl), gains.omega)


def dl_denominator(p_ul: np.ndarray, beta_ms_ms: np.ndarray, config: NetworkConfig) -> np.ndarray:
    """Per-MS DL interference-plus-noise power (same for every DL subcarrier), shape (D,)."""
    ul_sum = p_ul.sum(axis=1)                                  # (D,)
    cross = beta_ms_ms @ ul_sum                                # zero diagonal: d' != d only
    return config.xi_si_ms * ul_sum + (config.xi_imi / config.M_sum) * cross + config.sigma2


def ul_ap_noise(p_dl: np.ndarray, beta_ap_ap: np.ndarray, config: NetworkConfig) -> np.ndarray:
    """Per-AP SI + IAI + thermal power seen by the UL combiners, shape (L,)."""
    dl_sum = p_dl.sum(axis=(1, 2))                             # (L,)
    cross = beta_ap_ap @ dl_sum
    return config.xi_si_ap * dl_sum + (config.xi_iai / config.M_sum) * cross + config.sigma2


def ul_denominator(gains: EquivalentGains, p_dl: np.ndarray, beta_ap_ap: np.ndarray,
                   config: NetworkConfig) -> np.ndarray:
    """sum_l upsilon_ld mbar * (per-AP noise), shape (D, Mbar)."""
    return np.einsum("ldm,l->dm", gains.upsilon, ul_ap_noise(p_dl, beta_ap_ap, config))


def sinr_dl_all(gains: EquivalentGains, pa: PowerAllocation, beta_ms_ms: np.ndarray,
                config: NetworkConfig) -> np.ndarray:
    num = dl_signal_amplitude(gains, pa.p_dl) ** 2             # (D, M)
    den = dl_denominator(pa.p_ul, beta_ms_ms, config)          # (D,)
    return num / den[:, None]


def sinr_ul_all(gains: EquivalentGains, pa: PowerAllocation, beta_ap_ap: np.ndarray,
                config: NetworkConfig) -> np.ndarray:
    L = gains.upsilon.shape[0]
    num = pa.p_ul * L**2                                       # (D, Mbar)
    den = ul_denominator(gains, pa.p_dl, beta_ap_ap, config)
    return num / den


# ---------------------------------------------------------------------------
# Spec'd per-link operations and aggregate figures. ``channels`` may be any
# object exposing beta_ms_ms / beta_ap_ap (a ChannelSet or an Instance).
# ---------------------------------------------------------------------------

def sinr_dl(gains: EquivalentGains, pa: PowerAllocation, channels, config: NetworkConfig,
            d: int, m: int) -> float:
    check_nonnegative(pa)
    return float(sinr_dl_all(gains, pa, channels.beta_ms_ms, config)[d, m])


def sinr_ul(gains: EquivalentGains, pa: PowerAllocation, channels, config: NetworkConfig,
            mbar_user: int, mbar: int) -> float:
    check_nonnegative(pa)
    return float(sinr_ul_all(gains, pa, channels.beta_ap_ap, config)[mbar_user, mbar])


def per_ms_rates(gains: EquivalentGains, pa: PowerAllocation, channels,
                 config: NetworkConfig):
    """Per-MS DL and UL sum rates sum_m ln(1+SINR), both shape (D,)."""
    check_nonnegative(pa)
    dl = np.log1p(sinr_dl_all(gains, pa, channels.beta_ms_ms, config)).sum(axis=1)
    ul = np.log1p(sinr_ul_all(gains, pa, channels.beta_ap_ap, config)).sum(axis=1)
    return dl, ul


def spectral_efficiency(gains: EquivalentGains, pa: PowerAllocation, channels,
                        config: NetworkConfig) -> float:
    """Network SE in nats/s/Hz, normalized by the total subcarrier count."""
    dl, ul = per_ms_rates(gains, pa, channels, config)
    return float((dl.sum() + ul.sum()) / config.M_sum)


def qos_margins(gains: EquivalentGains, pa: PowerAllocation, channels,
                config: NetworkConfig):
    """Per-MS (DL rate - chi_dl, UL rate - chi_ul); nonnegative means feasible."""
    dl, ul = per_ms_rates(gains, pa, channels, config)
    return dl - config.chi_dl, ul - config.chi_ul
