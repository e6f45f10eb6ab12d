"""Water-filling power allocation and the greedy interference-blind baseline."""

from __future__ import annotations

import numpy as np

from .beamforming import EquivalentGains
from .config import NetworkConfig
from .rates import PowerAllocation


def waterfill(inv_gains, budget: float) -> np.ndarray:
    """Classic water-filling: p_i = max(0, mu - inv_gains_i) with sum p = budget.

    ``inv_gains`` are the effective noise-to-gain ratios of the parallel
    channels; infinite entries are allowed and never activated. The active
    set is found exactly by sorting, no iteration.
    """
    a = np.asarray(inv_gains, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("inv_gains must be a nonempty 1-D array")
    if np.any(a < 0.0) or not np.any(np.isfinite(a)):
        raise ValueError("inv_gains must be nonnegative with at least one finite entry")
    if budget < 0.0:
        raise ValueError("budget must be >= 0")
    if budget == 0.0:
        return np.zeros_like(a)
    order = np.argsort(a, kind="stable")
    a_sorted = a[order]
    # water level if the k best channels are active: mu_k = (budget + sum_k a)/k
    finite = np.isfinite(a_sorted)
    cumsum = np.cumsum(np.where(finite, a_sorted, 0.0))
    ks = np.arange(1, a.size + 1)
    mu = (budget + cumsum) / ks
    # largest k with mu_k > a_(k) (and a_(k) finite) gives the exact KKT level
    valid = finite & (mu > a_sorted)
    k_active = int(np.nonzero(valid)[0][-1]) + 1
    level = mu[k_active - 1]
    p_sorted = np.maximum(level - a_sorted, 0.0)
    p_sorted[k_active:] = 0.0
    p = np.empty_like(a)
    p[order] = p_sorted
    # guard against a 1-ulp budget overshoot from the level arithmetic
    for _ in range(3):
        total = p.sum()
        if total <= budget:
            break
        p *= budget / total
    return p


def greedy_unfair(gains: EquivalentGains, config: NetworkConfig) -> PowerAllocation:
    """Per-node water-filling over own channels, ignoring interference and QoS.

    Each AP spreads its full budget over its (d, m) DL channels against the
    thermal noise only; each MS spreads its budget over UL subcarriers using
    the combined-combiner noise floor. The cross-link and self-interference
    terms are deliberately ignored: that blindness is what the baseline is.
    """
    config.validate()
    L, D, M, Mbar = config.L, config.D, config.M, config.Mbar
    p_dl = np.zeros((L, D, M))
    for l in range(L):
        inv = config.sigma2 / gains.omega[l].ravel() ** 2
        p_dl[l] = waterfill(inv, config.P_l).reshape(D, M)
    p_ul = np.zeros((D, Mbar))
    for d in range(D):
        inv = config.sigma2 * gains.upsilon[:, d, :].sum(axis=0) / config.L**2
        p_ul[d] = waterfill(inv, config.P_d)
    return PowerAllocation(p_dl=p_dl, p_ul=p_ul)
