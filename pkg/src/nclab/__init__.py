"""Fixed-ETF classifier laboratory.

ETF weight construction, a sphere-noise mixture feature model, Monte-Carlo
random-feature kernels, neural-collapse metrics, and a toy pretrain /
fine-tune harness comparing trainable, whitened and fixed-ETF heads.
"""

from .errors import (DegeneracyError, DimensionError, NcLabError, NotPSDError, ParameterError,
                     TrainingDivergedError)
from .etf import EtfClassifier, GeometryReport, centering_matrix, make_etf, verify_etf
from .gmm import (GmmSpec, LabeledDataset, ShiftSpec, isotropic_spec, make_shifted_domain, random_spec,
                  sample_gmm, sample_sphere)
from .kernel import (KernelEstimate, PolyActivation, covariance_term_residual, linear_fit, mse_sweep, parse_grid,
                     poly_coeffs, random_projector, rf_kernel_mc)
from .linalg import (SeedSpec, frobenius, gaussian_matrix, haar_orthogonal, matmul, qr_decompose,
                     solve_ridge, sym_sqrt, trace, transpose)
from .metrics import NcReport, class_means, nc1_trace, nc2_deviation, nc3_alignment, nc_report, pooled_within_cov
from .mlp import HeadKind, MlpConfig, OptimizerSpec, TrainState, forward, init_state, loss_and_grads, train
from .transfer import (ExperimentResult, ExperimentSpec, bundled_config, evaluate, finetune, load_experiment, pretrain,
                       run_experiment)

__version__ = "0.1.0"
