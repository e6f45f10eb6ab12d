"""Unsupervised training and evaluation of the power-allocation GNN."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..autodiff import AdamState, Tape, adam_step
from ..config import NetworkConfig
from ..instances import Instance
from ..rates import PowerAllocation, qos_margins, spectral_efficiency
from .graph import HetGraph, build_graph
from .loss import LossConstants, batch_loss
from .model import (BatchPlan, FeatureStats, HgnnConfig, ModelParams,
                    amplitudes_to_allocation, forward_batch)
from .. import autodiff as ad


def _graphs_for(instances: List[Instance], graphs: Optional[List[HetGraph]]):
    if graphs is None:
        return [build_graph(i.gains, i.topology, i.config) for i in instances]
    if len(graphs) != len(instances):
        raise ValueError("graphs and instances must align")
    return graphs


def train(instances: List[Instance], config: HgnnConfig, seed: int,
          graphs: Optional[List[HetGraph]] = None, log=None):
    """Mini-batch Adam on the penalized SE loss.

    Returns (ModelParams, per-epoch mean training loss). Deterministic for a
    fixed seed: parameter init, feature statistics and the batch order all
    derive from it.
    """
    if not instances:
        raise ValueError("training needs at least one instance")
    config.validate()
    net = instances[0].config
    graphs = _graphs_for(instances, graphs)

    model = ModelParams(net, config, seed)
    model.stats = FeatureStats.fit(graphs)
    adam = AdamState(model.tensors, lr=config.learning_rate)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5e0]))

    n = len(instances)
    curve = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            batch_graphs = [graphs[i] for i in idx]
            batch_inst = [instances[i] for i in idx]
            plan = BatchPlan(batch_graphs, model)
            consts = LossConstants(batch_inst)
            with Tape() as tape:
                amp_dl, amp_ul = forward_batch(plan, model, training=True)
                amp_dl = ad.reshape(amp_dl, (plan.B, plan.L, plan.D, -1))
                amp_ul = ad.reshape(amp_ul, (plan.B, plan.D, -1))
                loss, _ = batch_loss(amp_dl, amp_ul, consts, net, config.kappa)
                tape.backward(loss)
            value = float(loss.data)
            if not np.isfinite(value):
                raise FloatingPointError(f"training diverged at epoch {epoch}")
            adam_step(model.tensors, model.grads(), adam)
            model.zero_grads()
            epoch_loss += value * len(idx)
        curve.append(epoch_loss / n)
        if log is not None:
            log(epoch, curve[-1])
    return model, curve


def project_budgets(pa: PowerAllocation, config: NetworkConfig) -> PowerAllocation:
    """Uniformly scale any over-budget node's powers onto its budget."""
    p_dl = pa.p_dl.copy()
    p_ul = pa.p_ul.copy()
    used = p_dl.sum(axis=(1, 2))
    for l in np.nonzero(used > config.P_l)[0]:
        p_dl[l] *= config.P_l / used[l]
        while p_dl[l].sum() > config.P_l:
            p_dl[l] *= 1.0 - 1e-15
    used = p_ul.sum(axis=1)
    for d in np.nonzero(used > config.P_d)[0]:
        p_ul[d] *= config.P_d / used[d]
        while p_ul[d].sum() > config.P_d:
            p_ul[d] *= 1.0 - 1e-15
    return PowerAllocation(p_dl=p_dl, p_ul=p_ul)


@dataclass
class EvalReport:
    se_raw: np.ndarray            # per-instance SE of the raw network output
    se_projected: np.ndarray      # per-instance SE after budget projection
    qos_violation_rate: float     # fraction of instances with a negative margin
    budget_violation_rate: float  # fraction with any raw budget overshoot
    se_ratio: Optional[np.ndarray] = None   # per-instance SE vs the reference

    @property
    def mean_se(self) -> float:
        return float(self.se_projected.mean())

    def cdf_points(self):
        """Empirical CDF sample points (value, probability) of projected SE."""
        values = np.sort(self.se_projected)
        probs = np.arange(1, values.size + 1) / values.size
        return values, probs


def predict(model: ModelParams, instances: List[Instance],
            graphs: Optional[List[HetGraph]] = None,
            chunk: int = 256) -> List[PowerAllocation]:
    """Evaluation-mode allocations for a list of instances."""
    graphs = _graphs_for(instances, graphs)
    out: List[PowerAllocation] = []
    for start in range(0, len(instances), chunk):
        plan = BatchPlan(graphs[start:start + chunk], model)
        amp_dl, amp_ul = forward_batch(plan, model, training=False)
        out.extend(amplitudes_to_allocation(plan, amp_dl.data, amp_ul.data))
    return out


def evaluate(model: ModelParams, instances: List[Instance],
             reference_se: Optional[np.ndarray] = None,
             graphs: Optional[List[HetGraph]] = None) -> EvalReport:
    """Aggregate test metrics; SE comparisons use the budget-projected output."""
    allocations = predict(model, instances, graphs)
    se_raw = np.zeros(len(instances))
    se_proj = np.zeros(len(instances))
    qos_bad = 0
    budget_bad = 0
    for i, (inst, pa) in enumerate(zip(instances, allocations)):
        cfg = inst.config
        se_raw[i] = spectral_efficiency(inst.gains, pa, inst, cfg)
        over_dl = pa.p_dl.sum(axis=(1, 2)).max() > cfg.P_l * (1 + 1e-12)
        over_ul = pa.p_ul.sum(axis=1).max() > cfg.P_d * (1 + 1e-12)
        budget_bad += int(over_dl or over_ul)
        projected = project_budgets(pa, cfg)
        se_proj[i] = spectral_efficiency(inst.gains, projected, inst, cfg)
        dl_m, ul_m = qos_margins(inst.gains, projected, inst, cfg)
        qos_bad += int(dl_m.min() < 0 or ul_m.min() < 0)
    ratio = None
    if reference_se is not None:
        reference_se = np.asarray(reference_se, dtype=float)
        ratio = se_proj / reference_se
    return EvalReport(se_raw=se_raw, se_projected=se_proj,
                      qos_violation_rate=qos_bad / len(instances),
                      budget_violation_rate=budget_bad / len(instances),
                      se_ratio=ratio)
