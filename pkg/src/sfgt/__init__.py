"""Structure-frequency masked graph transformer toolkit.

Builds the normalized-Laplacian spectrum of a graph, splits node features
into low/high frequency bands via the graph Fourier transform, turns band
energies and eigenvalue sums into a multiplicative attention mask
M = ReLU(S * F), and runs that mask through a small multi-head attention
classifier with a hand-derived backward pass. A CLI exports the matrices,
band energies, and training reports as CSV/JSON plus rendered figures.
"""

from .attention import (
    AttentionParams,
    ModelConfig,
    backward,
    init_params,
    load_checkpoint,
    masked_attention_forward,
    model_forward,
    multi_head_forward,
    project_qkv,
    save_checkpoint,
)
from .graphs import (
    Graph,
    GraphDataset,
    GraphParseError,
    Split,
    adjacency,
    component_count,
    degrees,
    parse_dataset,
    parse_edge_list,
    read_graph_file,
    serialize_dataset,
    serialize_edge_list,
)
from .harness import (
    DivergenceError,
    InvariantReport,
    RunReport,
    TrainConfig,
    gen_synthetic,
    invariant_suite,
    run_ablation,
    train,
)
from .masks import (
    EnergyProfile,
    FrequencyMasks,
    StructureFrequencyMask,
    band_features,
    binary_eigenvalue_mask,
    build_mask,
    energy_profile,
    filter_matrix,
    frequency_masks,
    refine_mask,
    structural_matrix,
    structure_frequency_mask,
)
from .spectral import (
    NumericalError,
    SpectralDecomposition,
    decompose,
    eig_sym,
    gft,
    igft,
    normalized_laplacian,
    spectral_filter,
)

__version__ = "0.1.0"

__all__ = [
    "AttentionParams",
    "DivergenceError",
    "EnergyProfile",
    "FrequencyMasks",
    "Graph",
    "GraphDataset",
    "GraphParseError",
    "InvariantReport",
    "ModelConfig",
    "NumericalError",
    "RunReport",
    "SpectralDecomposition",
    "Split",
    "StructureFrequencyMask",
    "TrainConfig",
    "adjacency",
    "backward",
    "band_features",
    "binary_eigenvalue_mask",
    "build_mask",
    "component_count",
    "decompose",
    "degrees",
    "eig_sym",
    "energy_profile",
    "filter_matrix",
    "frequency_masks",
    "gen_synthetic",
    "gft",
    "igft",
    "init_params",
    "invariant_suite",
    "load_checkpoint",
    "masked_attention_forward",
    "model_forward",
    "multi_head_forward",
    "normalized_laplacian",
    "parse_dataset",
    "parse_edge_list",
    "project_qkv",
    "read_graph_file",
    "refine_mask",
    "run_ablation",
    "save_checkpoint",
    "serialize_dataset",
    "serialize_edge_list",
    "spectral_filter",
    "structural_matrix",
    "structure_frequency_mask",
    "train",
]
