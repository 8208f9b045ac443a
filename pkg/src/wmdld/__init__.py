"""Underdetermined instantaneous source separation with weighted mixtures of
directional Laplacian densities (WMDLD)."""

__version__ = "0.1.0"

from ._backend import NAME as backend
from .audio import AudioBuffer, Spectrogram, StftConfig, istft, read_wav, stft, write_wav
from .directional import (DldParams, QuadratureSpec, bessel_like_integral, directional_distance,
                          dld_norm_coeff, dld_pdf, importance_weight, sample_dld,
                          solve_concentration)
from .em import EmConfig, WmdldModel, directional_kmeans, e_step, fit, m_step
from .evaluation import MixingSpec, SeparationReport, bss_metrics, mix, mixing_matrix
from .separate import AssignmentMap, SeparatedSources, assign_points, reconstruct, separate
from .sparsify import (NeighborhoodStats, SparseDirectionalSet, SparsifierConfig,
                       angle_histogram, neighborhood_stats, norm_threshold_points,
                       select_points)
