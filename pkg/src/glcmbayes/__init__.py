"""Bayesian nonparametric clustering of gray-level co-occurrence matrices.

The library models whole GLCM count lattices with a rounded-Gaussian
spatial Dirichlet process mixture and clusters subjects from the posterior
random-effect surfaces.  It also ships the matching synthetic-cohort
generator, Haralick-feature baselines, and matching-matrix metrics.
"""

from .glcm import BinSpec, Glcm, GrayImage, build_glcm, quantile_bins, vectorize
from .lattice import FULL_GRID, UNIQUE_TRIANGLE, LatticeGraph, lattice_graph
from .sampler import ChainTrace, GibbsSampler, Hyperparams, ModelState, Subject, geweke_z, run_chain, subjects_from_vectors
from .spatial import CarPrecision, car_precision, count_interval, round_latent, sample_mvn_precision, truncnorm_inverse_cdf
from .cluster import Dendrogram, Partition, cut_dendrogram, dissimilarity, krzanowski_lai_rank, posterior_mean_surfaces, ward_cluster
from .simulate import SimConfig, empirical_rate_surface, generate_cohort, latent_sample, scale_and_round, smooth_surface
from .baselines import FeatureVector, feature_gmm, feature_hclust, feature_kmeans, haralick_features
from .metrics import MatchingMatrix, matching_matrix, misassignment_rate, pearson_chi2

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
