"""Joint denoising and rewiring of graphs and node features by spectral alignment."""

from .alignment import AlignmentReport, alignment, alignment_sweep
from .csbm import CsbmParams, lambda_mu_to_phi, phi_to_lambda_mu, sample_csbm, sample_spiked_pair
from .dataset_io import DatasetFormatError, load_dataset, save_dataset
from .diffusion import DiglConfig, ppr_diffuse, ppr_kernel
from .evaluation import check_prop1, cluster_accuracy, ridge_denoise_sweep, ridge_gcn_mse, spectral_cluster
from .graph import Dataset, Graph, build_knn_graph, edge_homophily, from_edges, top_k_sparsify
from .jdr import JdrConfig, JdrOutput, jdr_run
from .spectral import BY_ABS, BY_VALUE, ConvergenceError, eigs_top, svd_top

__version__ = "0.1.0"

__all__ = [
    "AlignmentReport", "alignment", "alignment_sweep",
    "CsbmParams", "lambda_mu_to_phi", "phi_to_lambda_mu", "sample_csbm", "sample_spiked_pair",
    "DatasetFormatError", "load_dataset", "save_dataset",
    "DiglConfig", "ppr_diffuse", "ppr_kernel",
    "check_prop1", "cluster_accuracy", "ridge_denoise_sweep", "ridge_gcn_mse", "spectral_cluster",
    "Dataset", "Graph", "build_knn_graph", "edge_homophily", "from_edges", "top_k_sparsify",
    "JdrConfig", "JdrOutput", "jdr_run",
    "BY_ABS", "BY_VALUE", "ConvergenceError", "eigs_top", "svd_top",
]
