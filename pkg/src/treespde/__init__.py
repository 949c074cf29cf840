"""Stochastic reaction-diffusion on metric trees: exact strong Feller analysis and spectral simulation."""

__version__ = "0.1.0"

from .graph import MetricTree, NoiseConfig, build_tree, derive_matrices, matching_number, preset
from .nulldec import certify_sharpness, decide_strong_feller, decompose, kernel_basis, noise_free_bound
from .spectral import adjacency_spectrum, build_basis

__all__ = [
    "MetricTree", "NoiseConfig", "build_tree", "derive_matrices", "matching_number", "preset",
    "certify_sharpness", "decide_strong_feller", "decompose", "kernel_basis", "noise_free_bound",
    "adjacency_spectrum", "build_basis",
]
