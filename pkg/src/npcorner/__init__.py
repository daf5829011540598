"""Spectral computations for the Neumann-Poincare operator on curves with corners."""
from .exceptions import (ConfigError, DegenerateKernel, DomainError, FitDiverged, NearSingular,
                         NoConvergence, NotInDomain, NPCornerError, OnBoundary, PoleError,
                         SchemaError, SmallDenominator, TruncationError, WindowTooSmall)
from .symbol import (essential_spectrum_bound, gamma1_endpoints, in_sigma_tilde,
                     mu_closed_form_right_angle, mu_continued, mu_inverse, reduce_angle,
                     sigma_contour, symbol_derivative, symbol_taylor_at_zero, symbol_value,
                     winding_number)
from .geometry import (BoundaryMesh, CurveSpec, build_mesh, builtin_disk, builtin_droplet,
                       builtin_square, load_curve)
from .operators import (BoundaryOperators, DiscreteFunction, OperatorMatrix, assemble_K,
                        assemble_Kstar, assemble_S, eprime_inner, eprime_symmetrized,
                        equilibrium_density, gauss_identity_error, plemelj_residual,
                        resolvent_solve)
from .halfline import (LogGrid, SingularCoefficient, apply_model_operator,
                       extract_singular_coefficient, model_kernel, model_resolvent)
from .spectral import (EigenReport, Polarizability, PolarizabilityTensor, SingularExponentFit,
                       SingularFit, SweepTable, detect_eigenvalues, exponent_fit,
                       limit_polarizability_sweep, polarizability, spectral_density)

__version__ = "0.1.0"
