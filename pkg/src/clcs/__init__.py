"""Compressed sensing reconstruction with coefficient learning.

Signals ``x = D s`` are sparse in the orthonormal DCT basis ``D`` and
measured as ``y = M x`` with a Gaussian sensing matrix ``M``. Solvers
recover ``s`` from ``y``: multi-atom OMP, IHT, ISTA, and CLOMP, which grows
its support like OMP but fits coefficients by gradient descent under
smoothness priors.
"""
from .datagen import (ImagePrepSpec, PreparedImage, SyntheticSpec1D, generate_batch,
                      generate_sparse_signal, piecewise_constant_signal, prepare_image,
                      synthetic_scene)
from .errors import (ConfigError, CSError, DimensionError, DivergenceError, InputError,
                     NumericalFailure)
from .learning import (ClompConfig, ClompState, LossBreakdown, clomp_reconstruct,
                       clomp_reconstruct_batch, gradient_step, loss_and_gradient,
                       residual_injection_step)
from .metrics import QualityReport, aggregate, batch_reports, mse, pcc, psnr, quality_report, ssim
from .priors import lv, tv_1d, tv_2d
from .sensing import (Measurement, MeasurementSetup, SensingMatrix, SparseBasis,
                      SparseCoefficients, build_dct_basis, build_gaussian_sensing_matrix,
                      compose_setup, compute_sparse_rate, make_setup, measure, measure_batch,
                      residual)
from .solvers import (IhtConfig, IstaConfig, OmpConfig, SolveResult, iht_reconstruct,
                      ista_reconstruct, omp_reconstruct, select_support, solve_support_ls)

__version__ = "0.1.0"
