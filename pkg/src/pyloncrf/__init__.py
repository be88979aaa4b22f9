"""Hierarchical CRF regularization for semantic segmentation of overhead
imagery: learned boundaries -> watershed superpixels -> UCM -> segmentation
tree -> Gibbs energy minimized over the tree with graph cuts."""

from .energy import (
    EnergyModel,
    build_energy_model,
    compatibility,
    edge_penalty,
    elevation,
    pairwise_sum,
    smoothness,
    spatial,
    total_energy,
    unary,
)
from .maxflow import FlowGraph, max_flow
from .metrics import boundary_gt, confusion, metrics, nms, roc_auc
from .pipeline import segment, estimate_compatibility
from .pylon import PylonSolution, alpha_expansion, binary_pylon
from .qpbo import PseudoBooleanEnergy, qpbo
from .regions import build_rag, build_ucm, fuse_boundaries, watershed
from .synth import SceneSpec, generate_scene
from .tensorio import (
    IGNORE,
    LabelMap,
    Raster,
    RunConfig,
    load_config,
    read_tensor,
    write_tensor,
)
from .tree import SegTree, build_tree, cut_at

__version__ = "0.1.0"
