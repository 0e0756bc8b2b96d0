"""Kernel k-means: full-batch, mini-batch and truncated mini-batch solvers."""
from .centers import SparseCenter, assign_batch, center_center_ip, center_point_ip, center_sq_dist
from .data import (Dataset, build_heat_kernel, build_knn_kernel, gen_blobs, gen_circles,
                   load_csv, matrix_exp_symmetric)
from .full_batch import full_batch_fit
from .kernels import BoundKernel, KernelSpec, compute_gamma, gram_block, kernel_eval
from .metrics import ari, nmi, objective
from .minibatch import IpState, LearningRate, minibatch_fit, minibatch_step
from .seeding import kmeans_pp, make_rng, uniform_init
from .truncated import TruncatedCenter, auto_tau, truncated_fit, truncated_step

__version__ = "0.1.0"
