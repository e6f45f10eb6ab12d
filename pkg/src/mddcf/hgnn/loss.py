"""Unsupervised training loss: negated SE plus rectified QoS/budget penalties."""

from __future__ import annotations

from typing import List, Sequence

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..config import NetworkConfig
from ..instances import Instance
from ..rates import PowerAllocation


class LossConstants:
    """Per-batch instance data (gains and beta tables) as constant tensors."""

    def __init__(self, instances: List[Instance]):
        self.omega = Tensor(np.stack([i.gains.omega for i in instances]))
        self.upsilon = Tensor(np.stack([i.gains.upsilon for i in instances]))
        self.beta_ms = Tensor(np.stack([i.beta_ms_ms for i in instances]))
        self.beta_ap = Tensor(np.stack([i.beta_ap_ap for i in instances]))
        self.B = len(instances)


def batch_loss(amp_dl: Tensor, amp_ul: Tensor, consts: LossConstants,
               config: NetworkConfig, kappa: Sequence[float]):
    """Mean per-instance loss over a batch.

    ``amp_dl`` (B, L, D, M) and ``amp_ul`` (B, D, Mbar) carry transmit
    amplitudes: powers are their squares, which keeps the DL signal sum
    (linear in the amplitudes) smooth at zero power. When every QoS margin
    and budget holds, the loss equals minus the mean spectral efficiency.
    Returns (scalar loss tensor, per-instance SE values for logging).
    """
    B = consts.B
    k1, k2, k3, k4 = (float(k) for k in kappa)
    p_dl = ad.square(amp_dl)
    p_ul = ad.square(amp_ul)

    # DL SINR: (sum_l amp * omega)^2 over the per-MS interference-plus-noise
    s_amp = ad.tsum(ad.mul(amp_dl, consts.omega), axis=1)                # (B, D, M)
    ul_sum = ad.tsum(p_ul, axis=2)                                       # (B, D)
    cross_ms = ad.tsum(ad.mul(consts.beta_ms, ad.reshape(ul_sum, (B, 1, -1))), axis=2)
    den_dl = ad.add(ad.add(ad.scale(ul_sum, config.xi_si_ms),
                           ad.scale(cross_ms, config.xi_imi / config.M_sum)),
                    Tensor(config.sigma2))
    sinr_dl = ad.div(ad.square(s_amp), ad.reshape(den_dl, (B, -1, 1)))
    rate_dl = ad.tsum(ad.log1p(sinr_dl), axis=2)                         # (B, D)

    # UL SINR: p L^2 over the combiner-weighted per-AP noise
    w_dl = ad.tsum(p_dl, axis=(2, 3))                                    # (B, L)
    cross_ap = ad.tsum(ad.mul(consts.beta_ap, ad.reshape(w_dl, (B, 1, -1))), axis=2)
    e_ap = ad.add(ad.add(ad.scale(w_dl, config.xi_si_ap),
                         ad.scale(cross_ap, config.xi_iai / config.M_sum)),
                  Tensor(config.sigma2))
    b_ul = ad.tsum(ad.mul(consts.upsilon, ad.reshape(e_ap, (B, -1, 1, 1))), axis=1)
    sinr_ul = ad.div(ad.scale(p_ul, config.L**2), b_ul)
    rate_ul = ad.tsum(ad.log1p(sinr_ul), axis=2)                         # (B, D)

    se = ad.scale(ad.add(ad.tsum(rate_dl, axis=1), ad.tsum(rate_ul, axis=1)),
                  1.0 / config.M_sum)                                    # (B,)

    pen = ad.scale(ad.tsum(ad.relu(ad.sub(Tensor(config.chi_dl), rate_dl)), axis=1), k1)
    pen = ad.add(pen, ad.scale(
        ad.tsum(ad.relu(ad.sub(Tensor(config.chi_ul), rate_ul)), axis=1), k2))
    pen = ad.add(pen, ad.scale(
        ad.tsum(ad.relu(ad.sub(ul_sum, Tensor(config.P_d))), axis=1), k3))
    pen = ad.add(pen, ad.scale(
        ad.tsum(ad.relu(ad.sub(w_dl, Tensor(config.P_l))), axis=1), k4))

    loss = ad.scale(ad.tsum(ad.sub(pen, se)), 1.0 / B)
    return loss, se.data.copy()


def hgnn_loss(pa, gains, channels, config: NetworkConfig,
              kappa: Sequence[float] = (0.1, 1.0, 0.1, 0.1)):
    """Single-instance loss. ``pa`` may hold arrays or tensors.

    Pass tensors recorded on an active tape to differentiate through the
    allocation (powers must then be strictly positive: the square root that
    recovers amplitudes is non-smooth at zero).
    """
    consts = _single_instance_constants(gains, channels)
    p_dl = pa.p_dl if isinstance(pa.p_dl, Tensor) else Tensor(np.asarray(pa.p_dl))
    p_ul = pa.p_ul if isinstance(pa.p_ul, Tensor) else Tensor(np.asarray(pa.p_ul))
    if np.any(p_dl.data < 0.0) or np.any(p_ul.data < 0.0):
        raise ValueError("negative power in allocation")
    amp_dl = ad.reshape(ad.sqrt(p_dl), (1,) + p_dl.data.shape)
    amp_ul = ad.reshape(ad.sqrt(p_ul), (1,) + p_ul.data.shape)
    loss, _ = batch_loss(amp_dl, amp_ul, consts, config, kappa)
    return loss


def _single_instance_constants(gains, channels) -> LossConstants:
    consts = LossConstants.__new__(LossConstants)
    consts.omega = Tensor(gains.omega[None])
    consts.upsilon = Tensor(gains.upsilon[None])
    consts.beta_ms = Tensor(np.asarray(channels.beta_ms_ms)[None])
    consts.beta_ap = Tensor(np.asarray(channels.beta_ap_ap)[None])
    consts.B = 1
    return consts
