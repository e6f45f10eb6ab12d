"""CF-HGNN: adaptive embedding, meta-path message passing with attention,
and the power-allocation heads.

Scalability & permutation handling: the gain block of a node feature is a
set of per-counterpart slots (one slot per MS inside an AP feature, one per
AP inside an MS feature). The embedding applies one shared linear map per
slot and mean-pools, which is exactly an embedding matrix whose columns are
tied across the slots of a subcarrier block; the DL head applies one shared
MLP per slot, fed with the node representation concatenated with that
slot's encoded gains. Relabeling nodes therefore permutes the outputs and
the same weights serve any node count, with the number of active slots per
AP bounded by its antenna count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .. import autodiff as ad
from ..autodiff import BatchNormState, Tensor
from ..config import NetworkConfig
from ..rates import PowerAllocation
from .graph import HetGraph

GAIN_LOG_FLOOR = 1e-30
LEAKY_SLOPE = 0.01


@dataclass
class HgnnConfig:
    embed_dim: int = 64            # shared embedded width for both node types
    hidden_dim: int = 64
    att_dim: int = 64
    layers: int = 2                # message-passing rounds K
    kappa: Tuple[float, float, float, float] = (0.1, 1.0, 0.1, 0.1)
    learning_rate: float = 0.001
    batch_size: int = 64
    epochs: int = 60
    max_ap: Optional[int] = None   # optional cap on supported AP count

    def validate(self) -> "HgnnConfig":
        if self.layers < 1:
            raise ValueError("need at least one message-passing layer")
        if min(self.embed_dim, self.hidden_dim, self.att_dim) < 1:
            raise ValueError("widths must be >= 1")
        if any(k < 0 for k in self.kappa) or len(self.kappa) != 4:
            raise ValueError("kappa must be four nonnegative weights")
        return self


@dataclass
class FeatureStats:
    """Train-set statistics of log-gains (per subcarrier) and context scalars."""

    ap_slot_mean: np.ndarray
    ap_slot_std: np.ndarray
    ap_ctx_mean: np.ndarray
    ap_ctx_std: np.ndarray
    ms_slot_mean: np.ndarray
    ms_slot_std: np.ndarray
    ms_ctx_mean: np.ndarray
    ms_ctx_std: np.ndarray

    @staticmethod
    def identity(m: int, mbar: int) -> "FeatureStats":
        return FeatureStats(np.zeros(m), np.ones(m), np.zeros(3), np.ones(3),
                            np.zeros(mbar), np.ones(mbar), np.zeros(3), np.ones(3))

    @staticmethod
    def fit(graphs: List[HetGraph]) -> "FeatureStats":
        ap_slots, ms_slots, ap_ctx, ms_ctx = [], [], [], []
        for g in graphs:
            mask = g.serve_mask
            ap = np.log(g.ap_gain_blocks() + GAIN_LOG_FLOOR)
            ap_slots.append(ap[mask])                         # active slots only
            ms = np.log(g.ms_gain_blocks() + GAIN_LOG_FLOOR)
            ms_slots.append(ms[mask.T])
            ap_ctx.append(g.ap_features[:, -3:])
            ms_ctx.append(g.ms_features[:, -3:])
        ap_all = np.concatenate(ap_slots)
        ms_all = np.concatenate(ms_slots)
        ap_c = np.concatenate(ap_ctx)
        ms_c = np.concatenate(ms_ctx)
        floor = 1e-12
        return FeatureStats(
            ap_all.mean(axis=0), np.maximum(ap_all.std(axis=0), floor),
            ap_c.mean(axis=0), np.maximum(ap_c.std(axis=0), floor),
            ms_all.mean(axis=0), np.maximum(ms_all.std(axis=0), floor),
            ms_c.mean(axis=0), np.maximum(ms_c.std(axis=0), floor))

    def ap_slots(self, blocks: np.ndarray) -> np.ndarray:
        return (np.log(blocks + GAIN_LOG_FLOOR) - self.ap_slot_mean) / self.ap_slot_std

    def ms_slots(self, blocks: np.ndarray) -> np.ndarray:
        return (np.log(blocks + GAIN_LOG_FLOOR) - self.ms_slot_mean) / self.ms_slot_std

    def ap_context(self, ctx: np.ndarray) -> np.ndarray:
        return (ctx - self.ap_ctx_mean) / self.ap_ctx_std

    def ms_context(self, ctx: np.ndarray) -> np.ndarray:
        return (ctx - self.ms_ctx_mean) / self.ms_ctx_std


class ModelParams:
    """Named learnable tensors, batch-norm buffers and feature statistics."""

    def __init__(self, net: NetworkConfig, cfg: HgnnConfig, seed: int):
        cfg.validate()
        self.cfg = cfg
        self.M = net.M
        self.Mbar = net.Mbar
        self.N = net.N
        self.tensors: Dict[str, Tensor] = {}
        self.bn: Dict[str, BatchNormState] = {}
        self.stats = FeatureStats.identity(net.M, net.Mbar)
        rng = np.random.default_rng(seed)

        F, H, A = cfg.embed_dim, cfg.hidden_dim, cfg.att_dim

        def weight(name, fan_in, fan_out, gain=2.0):
            self.tensors[name] = Tensor(
                rng.standard_normal((fan_in, fan_out)) * np.sqrt(gain / fan_in),
                requires_grad=True, name=name)

        def bias(name, width, value=0.0):
            self.tensors[name] = Tensor(np.full(width, value), requires_grad=True,
                                        name=name)

        def norm(name, width):
            self.tensors[name + ".gamma"] = Tensor(np.ones(width), requires_grad=True,
                                                   name=name + ".gamma")
            self.tensors[name + ".beta"] = Tensor(np.zeros(width), requires_grad=True,
                                                  name=name + ".beta")
            self.bn[name] = BatchNormState(width)

        for t, slot_in in (("ap", net.M), ("ms", net.Mbar)):
            weight(f"{t}.embed.slot", slot_in, F, gain=1.0)
            weight(f"{t}.embed.ctx", 3, F, gain=1.0)
            norm(f"{t}.embed.bn", F)
            for k in range(cfg.layers):
                for path in ("comm", "intf"):
                    base = f"{t}.l{k}.{path}"
                    weight(f"{base}.agg.fc0.w", F, H)
                    bias(f"{base}.agg.fc0.b", H)
                    norm(f"{base}.agg.bn0", H)
                    weight(f"{base}.agg.fc1.w", H, H)
                    bias(f"{base}.agg.fc1.b", H)
                    norm(f"{base}.agg.bn1", H)
                    weight(f"{base}.upd.fc0.w", F + H, H)
                    bias(f"{base}.upd.fc0.b", H)
                    norm(f"{base}.upd.bn0", H)
                    weight(f"{base}.upd.fc1.w", H, F)
                    bias(f"{base}.upd.fc1.b", F)
                    norm(f"{base}.upd.bn1", F)
                weight(f"{t}.l{k}.att.w", F, A, gain=1.0)
                bias(f"{t}.l{k}.att.b", A)
                self.tensors[f"{t}.l{k}.att.q"] = Tensor(
                    rng.standard_normal((A, 1)) / np.sqrt(A), requires_grad=True,
                    name=f"{t}.l{k}.att.q")

        # amplitude heads; powers are the squared rectified outputs, so the
        # bias seeds the initial allocation near half the uniform budget
        amp_ap = np.sqrt(0.5 * net.P_l / (net.D * net.M))
        amp_ms = np.sqrt(0.5 * net.P_d / net.Mbar)
        weight("ap.head.slot", net.M, F, gain=1.0)
        weight("ap.head.fc0.w", 2 * F, H)
        bias("ap.head.fc0.b", H)
        weight("ap.head.fc1.w", H, H)
        bias("ap.head.fc1.b", H)
        weight("ap.head.fc2.w", H, net.M, gain=0.02)
        bias("ap.head.fc2.b", net.M, value=amp_ap)
        weight("ms.head.fc0.w", F, H)
        bias("ms.head.fc0.b", H)
        weight("ms.head.fc1.w", H, H)
        bias("ms.head.fc1.b", H)
        weight("ms.head.fc2.w", H, net.Mbar, gain=0.02)
        bias("ms.head.fc2.b", net.Mbar, value=amp_ms)

    def trainable(self) -> Dict[str, Tensor]:
        return self.tensors

    def grads(self) -> Dict[str, np.ndarray]:
        return {k: t.grad for k, t in self.tensors.items() if t.grad is not None}

    def zero_grads(self) -> None:
        for t in self.tensors.values():
            t.grad = None


def norm_scale(area_side: float) -> float:
    return max(float(area_side), 1.0)


class BatchPlan:
    """Constant matrices that express one batch of graphs as a disjoint union."""

    def __init__(self, graphs: List[HetGraph], model: ModelParams):
        g0 = graphs[0]
        if any((g.L, g.D, g.M, g.Mbar) != (g0.L, g0.D, g0.M, g0.Mbar) for g in graphs):
            raise ValueError("all graphs in a batch must share (L, D, M, Mbar)")
        if g0.M != model.M or g0.Mbar != model.Mbar:
            raise ValueError(f"graph subcarrier counts (M={g0.M}, Mbar={g0.Mbar}) do not "
                             f"match the model (M={model.M}, Mbar={model.Mbar})")
        served = max(int(g.serve_mask.sum(axis=1).max()) for g in graphs)
        if served > model.N:
            raise ValueError(
                f"an AP serves {served} MSs but the model supports at most "
                f"{model.N} per AP; apply user-centric clustering first")
        if model.cfg.max_ap is not None and g0.L > model.cfg.max_ap:
            raise ValueError(f"graph has {g0.L} APs, more than the configured "
                             f"maximum {model.cfg.max_ap}; apply clustering")

        B, L, D = len(graphs), g0.L, g0.D
        self.B, self.L, self.D = B, L, D
        A, Ms = B * L, B * D
        stats = model.stats

        ap_slots = np.zeros((A * D, g0.M))
        ms_slots = np.zeros((Ms * L, g0.Mbar))
        ap_ctx = np.zeros((A, 3))
        ms_ctx = np.zeros((Ms, 3))
        ap_slot_mask = np.zeros((A * D, 1))
        ms_slot_mask = np.zeros((Ms * L, 1))
        e_ap_ms = np.zeros((A, Ms))
        e_ap_ap = np.zeros((A, A))
        e_ms_ap = np.zeros((Ms, A))
        e_ms_ms = np.zeros((Ms, Ms))
        pool_ap = np.zeros((A, A * D))
        pool_ms = np.zeros((Ms, Ms * L))
        inv_ap_comm = np.zeros((A, 1))
        inv_ms_comm = np.zeros((Ms, 1))
        head_expand = np.zeros((A * D, A))
        att_pool_ap = np.zeros((B, A))
        att_pool_ms = np.zeros((B, Ms))
        att_expand_ap = np.zeros((A, B))
        att_expand_ms = np.zeros((Ms, B))

        for b, g in enumerate(graphs):
            mask = g.serve_mask.astype(float)
            scale = norm_scale(g.area_side)
            ra, rm = slice(b * L, (b + 1) * L), slice(b * D, (b + 1) * D)
            sa, sm = slice(b * L * D, (b + 1) * L * D), slice(b * D * L, (b + 1) * D * L)

            ap_slots[sa] = stats.ap_slots(g.ap_gain_blocks()).reshape(L * D, -1)
            ms_slots[sm] = stats.ms_slots(g.ms_gain_blocks()).reshape(D * L, -1)
            ap_slot_mask[sa, 0] = mask.ravel()
            ms_slot_mask[sm, 0] = mask.T.ravel()
            ap_ctx[ra] = stats.ap_context(g.ap_features[:, -3:])
            ms_ctx[rm] = stats.ms_context(g.ms_features[:, -3:])

            e_ap_ms[ra, rm] = (g.dist_ap_ms / scale) * mask
            e_ms_ap[rm, ra] = (g.dist_ap_ms.T / scale) * mask.T
            e_ap_ap[ra, ra] = g.dist_ap_ap / scale
            e_ms_ms[rm, rm] = g.dist_ms_ms / scale

            n_ap = mask.sum(axis=1)
            n_ms = mask.sum(axis=0)
            inv_ap_comm[ra, 0] = np.where(n_ap > 0, 1.0 / np.maximum(n_ap, 1), 0.0)
            inv_ms_comm[rm, 0] = np.where(n_ms > 0, 1.0 / np.maximum(n_ms, 1), 0.0)
            for l in range(L):
                node = b * L + l
                cols = node * D + np.arange(D)
                active = mask[l] > 0
                if active.any():
                    pool_ap[node, cols[active]] = 1.0 / active.sum()
                head_expand[cols, node] = 1.0
            for d in range(D):
                node = b * D + d
                cols = node * L + np.arange(L)
                active = mask[:, d] > 0
                if active.any():
                    pool_ms[node, cols[active]] = 1.0 / active.sum()
            att_pool_ap[b, ra] = 1.0 / L
            att_pool_ms[b, rm] = 1.0 / D
            att_expand_ap[ra, b] = 1.0
            att_expand_ms[rm, b] = 1.0

        mk = lambda a: Tensor(a)
        self.ap_slots, self.ms_slots = mk(ap_slots), mk(ms_slots)
        self.ap_ctx, self.ms_ctx = mk(ap_ctx), mk(ms_ctx)
        self.ap_slot_mask, self.ms_slot_mask = mk(ap_slot_mask), mk(ms_slot_mask)
        self.e_ap_ms, self.e_ap_ap = mk(e_ap_ms), mk(e_ap_ap)
        self.e_ms_ap, self.e_ms_ms = mk(e_ms_ap), mk(e_ms_ms)
        self.pool_ap, self.pool_ms = mk(pool_ap), mk(pool_ms)
        self.inv_ap_comm, self.inv_ms_comm = mk(inv_ap_comm), mk(inv_ms_comm)
        self.inv_ap_intf = Tensor(np.full((A, 1), 1.0 / L))
        self.inv_ms_intf = Tensor(np.full((Ms, 1), 1.0 / D))
        self.head_expand = mk(head_expand)
        self.att_pool = {"ap": mk(att_pool_ap), "ms": mk(att_pool_ms)}
        self.att_expand = {"ap": mk(att_expand_ap), "ms": mk(att_expand_ms)}
        self.col0 = Tensor(np.array([[1.0], [0.0]]))
        self.col1 = Tensor(np.array([[0.0], [1.0]]))


# ---------------------------------------------------------------------------
# forward pieces (all differentiable through the active tape)
# ---------------------------------------------------------------------------

def _linear(model: ModelParams, name: str, x: Tensor) -> Tensor:
    return ad.add(ad.matmul(x, model.tensors[name + ".w"]), model.tensors[name + ".b"])


def _bn(model: ModelParams, name: str, x: Tensor, training: bool) -> Tensor:
    return ad.batch_norm(x, model.tensors[name + ".gamma"], model.tensors[name + ".beta"],
                         model.bn[name], training)


def _mlp2(model: ModelParams, prefix: str, x: Tensor, training: bool) -> Tensor:
    """Two (linear, LeakyReLU, batch-norm) stacks."""
    for i in (0, 1):
        x = _linear(model, f"{prefix}.fc{i}", x)
        x = ad.leaky_relu(x, LEAKY_SLOPE)
        x = _bn(model, f"{prefix}.bn{i}", x, training)
    return x


def embed_nodes(plan: BatchPlan, model: ModelParams, training: bool):
    """Adaptive embedding: shared per-slot encoding, mean-pool, context, norm."""
    slot_ap = ad.mul(ad.matmul(plan.ap_slots, model.tensors["ap.embed.slot"]),
                     plan.ap_slot_mask)
    v_ap = ad.add(ad.matmul(plan.pool_ap, slot_ap),
                  ad.matmul(plan.ap_ctx, model.tensors["ap.embed.ctx"]))
    v_ap = _bn(model, "ap.embed.bn", v_ap, training)
    slot_ms = ad.mul(ad.matmul(plan.ms_slots, model.tensors["ms.embed.slot"]),
                     plan.ms_slot_mask)
    v_ms = ad.add(ad.matmul(plan.pool_ms, slot_ms),
                  ad.matmul(plan.ms_ctx, model.tensors["ms.embed.ctx"]))
    v_ms = _bn(model, "ms.embed.bn", v_ms, training)
    return v_ap, v_ms


def pass_messages(model: ModelParams, prefix: str, own: Tensor, src: Tensor,
                  edges: Tensor, inv_count: Tensor, training: bool) -> Tensor:
    """Edge-scaled neighbor sum -> MLP -> neighbor mean -> concat -> MLP -> residual."""
    agg = _mlp2(model, f"{prefix}.agg", ad.matmul(edges, src), training)
    agg = ad.mul(agg, inv_count)
    upd = _mlp2(model, f"{prefix}.upd", ad.concat([own, agg], axis=1), training)
    return ad.add(upd, own)


def fuse_attention(plan: BatchPlan, model: ModelParams, node_type: str, layer: int,
                   z_comm: Tensor, z_intf: Tensor):
    """Per-graph semantic attention over the two meta-paths."""
    base = f"{node_type}.l{layer}.att"
    w, b, q = (model.tensors[base + ".w"], model.tensors[base + ".b"],
               model.tensors[base + ".q"])
    pool = plan.att_pool[node_type]
    scores = []
    for z in (z_comm, z_intf):
        s = ad.matmul(ad.add(ad.matmul(z, w), b), q)          # (nodes, 1)
        scores.append(ad.matmul(pool, s))                     # (B, 1) graph mean
    betas = ad.softmax(ad.concat(scores, axis=1))             # (B, 2)
    expand = plan.att_expand[node_type]
    w1 = ad.matmul(expand, ad.matmul(betas, plan.col0))       # (nodes, 1)
    w2 = ad.matmul(expand, ad.matmul(betas, plan.col1))
    fused = ad.add(ad.mul(z_comm, w1), ad.mul(z_intf, w2))
    return fused, betas


def amplitude_heads(plan: BatchPlan, model: ModelParams, z_ap: Tensor, z_ms: Tensor,
                    training: bool):
    """Rectified per-slot DL and per-node UL transmit amplitudes."""
    slot = ad.mul(ad.matmul(plan.ap_slots, model.tensors["ap.head.slot"]),
                  plan.ap_slot_mask)
    x = ad.concat([ad.matmul(plan.head_expand, z_ap), slot], axis=1)
    x = ad.leaky_relu(_linear(model, "ap.head.fc0", x), LEAKY_SLOPE)
    x = ad.leaky_relu(_linear(model, "ap.head.fc1", x), LEAKY_SLOPE)
    amp_dl = ad.mul(ad.relu(_linear(model, "ap.head.fc2", x)), plan.ap_slot_mask)

    y = ad.leaky_relu(_linear(model, "ms.head.fc0", z_ms), LEAKY_SLOPE)
    y = ad.leaky_relu(_linear(model, "ms.head.fc1", y), LEAKY_SLOPE)
    amp_ul = ad.relu(_linear(model, "ms.head.fc2", y))
    return amp_dl, amp_ul


def forward_batch(plan: BatchPlan, model: ModelParams, training: bool = False):
    """Full forward pass; returns DL/UL amplitude tensors.

    amp_dl has shape (B*L*D, M) in (graph, AP, MS-slot) row order; amp_ul has
    shape (B*D, Mbar). Powers are the squares.
    """
    z_ap, z_ms = embed_nodes(plan, model, training)
    for k in range(model.cfg.layers):
        ap_comm = pass_messages(model, f"ap.l{k}.comm", z_ap, z_ms,
                                plan.e_ap_ms, plan.inv_ap_comm, training)
        ap_intf = pass_messages(model, f"ap.l{k}.intf", z_ap, z_ap,
                                plan.e_ap_ap, plan.inv_ap_intf, training)
        ms_comm = pass_messages(model, f"ms.l{k}.comm", z_ms, z_ap,
                                plan.e_ms_ap, plan.inv_ms_comm, training)
        ms_intf = pass_messages(model, f"ms.l{k}.intf", z_ms, z_ms,
                                plan.e_ms_ms, plan.inv_ms_intf, training)
        z_ap, _ = fuse_attention(plan, model, "ap", k, ap_comm, ap_intf)
        z_ms, _ = fuse_attention(plan, model, "ms", k, ms_comm, ms_intf)
    return amplitude_heads(plan, model, z_ap, z_ms, training)


def amplitudes_to_allocation(plan: BatchPlan, amp_dl: np.ndarray,
                             amp_ul: np.ndarray) -> List[PowerAllocation]:
    B, L, D = plan.B, plan.L, plan.D
    p_dl = (amp_dl**2).reshape(B, L, D, -1)
    p_ul = (amp_ul**2).reshape(B, D, -1)
    return [PowerAllocation(p_dl=p_dl[b], p_ul=p_ul[b]) for b in range(B)]


# ---------------------------------------------------------------------------
# single-graph operations
# ---------------------------------------------------------------------------

def adaptive_embed(graph: HetGraph, params: ModelParams):
    """Embedded (AP, MS) node features of one graph, evaluation mode."""
    plan = BatchPlan([graph], params)
    v_ap, v_ms = embed_nodes(plan, params, training=False)
    return v_ap.data, v_ms.data


_META_PATHS = {
    "ms_ul_ap": ("ap", "comm"),
    "ap_iai_ap": ("ap", "intf"),
    "ap_dl_ms": ("ms", "comm"),
    "ms_imi_ms": ("ms", "intf"),
}


def message_pass(graph: HetGraph, embeddings, params: ModelParams,
                 meta_path: str, layer: int = 0):
    """One meta-path aggregation for one graph; ``embeddings`` is (v_ap, v_ms)."""
    if meta_path not in _META_PATHS:
        raise ValueError(f"unknown meta-path {meta_path!r}; expected one of "
                         f"{sorted(_META_PATHS)}")
    node_type, path = _META_PATHS[meta_path]
    plan = BatchPlan([graph], params)
    v_ap, v_ms = Tensor(embeddings[0]), Tensor(embeddings[1])
    own = v_ap if node_type == "ap" else v_ms
    src = {"ms_ul_ap": v_ms, "ap_iai_ap": v_ap, "ap_dl_ms": v_ap,
           "ms_imi_ms": v_ms}[meta_path]
    edges = {"ms_ul_ap": plan.e_ap_ms, "ap_iai_ap": plan.e_ap_ap,
             "ap_dl_ms": plan.e_ms_ap, "ms_imi_ms": plan.e_ms_ms}[meta_path]
    inv = {"ms_ul_ap": plan.inv_ap_comm, "ap_iai_ap": plan.inv_ap_intf,
           "ap_dl_ms": plan.inv_ms_comm, "ms_imi_ms": plan.inv_ms_intf}[meta_path]
    out = pass_messages(params, f"{node_type}.l{layer}.{path}", own, src, edges,
                        inv, training=False)
    return out.data


def metapath_attention(z_phi1: np.ndarray, z_phi2: np.ndarray, params: ModelParams,
                       node_type: str, layer: int = 0):
    """Fused representations plus the per-graph meta-path weights (beta1, beta2)."""
    n = z_phi1.shape[0]
    pool = Tensor(np.full((1, n), 1.0 / n))
    base = f"{node_type}.l{layer}.att"
    w, b, q = (params.tensors[base + ".w"], params.tensors[base + ".b"],
               params.tensors[base + ".q"])
    scores = [ad.matmul(pool, ad.matmul(ad.add(ad.matmul(Tensor(z), w), b), q))
              for z in (z_phi1, z_phi2)]
    betas = ad.softmax(ad.concat(scores, axis=1)).data[0]
    fused = betas[0] * z_phi1 + betas[1] * z_phi2
    return fused, betas


def pa_heads(final_reps, params: ModelParams, graph: HetGraph) -> PowerAllocation:
    """Map final (AP, MS) representations to a nonnegative power allocation."""
    plan = BatchPlan([graph], params)
    amp_dl, amp_ul = amplitude_heads(plan, params, Tensor(final_reps[0]),
                                     Tensor(final_reps[1]), training=False)
    return amplitudes_to_allocation(plan, amp_dl.data, amp_ul.data)[0]


def hgnn_forward(graph: HetGraph, params: ModelParams) -> PowerAllocation:
    """Evaluation-mode forward pass for one graph."""
    plan = BatchPlan([graph], params)
    amp_dl, amp_ul = forward_batch(plan, params, training=False)
    return amplitudes_to_allocation(plan, amp_dl.data, amp_ul.data)[0]
