from .graph import HetGraph, build_graph, masked_graph, permute_ap, permute_ms
from .loss import batch_loss, hgnn_loss
from .model import (BatchPlan, FeatureStats, HgnnConfig, ModelParams,
                    adaptive_embed, amplitudes_to_allocation, forward_batch,
                    hgnn_forward, message_pass, metapath_attention, pa_heads)
from .training import EvalReport, evaluate, predict, project_budgets, train
