"""RBM gradient-estimator laboratory.

Train small binary RBMs with minibatch CD-1, draw single-data-point
gradient estimates under CD-k, PCD, I-CD-k and a long-chain baseline, and
measure per-weight estimate variance under a fully seeded protocol.
"""

__version__ = "0.1.0"

from .data import Dataset, binarize, load_cifar_subset, load_dataset, \
    load_mnist_subset, load_silhouettes, save_dataset
from .estimators import GradientEstimate, PcdChainState, Strategy, \
    baseline_estimate, cd_k_estimate, icd_k_estimate, init_pcd_chain, \
    negative_statistic, pcd_estimate, positive_statistic
from .model import RbmParams, energy, exact_log_likelihood, \
    exact_log_partition, exact_model_expectation, exact_visible_distribution, \
    free_energy, gibbs_chain, gibbs_step, hidden_conditional, \
    visible_conditional
from .training import Checkpoint, LrMode, TrainConfig, init_params, \
    load_checkpoint, save_checkpoint, train
from .variance import AggregateCell, ProtocolConfig, VarianceRow, aggregate, \
    per_element_variance, profile_cd, profile_icd, profile_pcd_mean, \
    subset_indices
