"""Frequency-averaged pressure response of polygonal cylinders.

Computes the averaged response of 2D symmetric cylinders through a P1
finite element eigenmode expansion, differentiates it with respect to
domain perturbations, generates labelled datasets, and trains a dense
ReLU network surrogate against a linear baseline.
"""

__version__ = "0.1.0"

from .errors import (DegenerateMeshError, EigenSolverError, HelmavgError,
                     LemmaHypothesisViolated, PoleAtEndpoint)
from .geometry import (ArcParam, CylinderDomain, RadialProfile, arc_profile,
                       area, domain_from_profile, sample_profile)
from .meshing import MeshParams, TriangleMesh, build_half_mesh, build_mesh, refine
from .fem import DiscreteEigenBasis, apply_dirichlet, assemble, basis_for_mesh, mode_mean, solve_eigen
from .spectral import (DEFAULT_RANGE, FrequencyRange, ObjectiveResult,
                       mean_response, psi_objective, response,
                       trapezoid_reference, uniform_eigenvalues, uniform_psi_exact)
from .shape import (AffineSolenoidalField, ShapeDerivativeResult, StreamField,
                    VectorField, axial_bump_field, coeff_c, fd_shape_derivative,
                    psi_shape_derivative, uniform_shape_derivative)
from .pipeline import FemPredictor, PipelineConfig, default_config, psi_for_profile
from .dataset import Dataset, DatasetManifest, Sample, boost, generate, read_csv, split, stats, write_csv
from .surrogate import (MlpModel, MlpRegressor, TrainConfig, TrainHistory,
                        forward, init_glorot, load, loss_and_gradients,
                        lr_schedule, predict, save, train)
from .evaluation import (EvalReport, LinearSurrogate, affine_radius_grid,
                         arc_study, convergence_study, evaluate, fit_linear,
                         hyper_grid, size_curve)
