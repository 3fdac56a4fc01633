"""Hamiltonian stationary Lagrangians: geometry, Jacobi operators and continuation."""

from __future__ import annotations

from .ambient import (
    AmbientModel,
    MetricFamily,
    WarpProfile,
    cheeger_family,
    cheeger_metric,
    homothety_family,
    make_flat_cn,
    make_sphere,
    ricci_tensor,
    warped_family,
)
from .continuation import (
    ContinuationState,
    PathResult,
    continue_in_leaf,
    continue_in_t,
    newton_solve,
    shooting_oracle_s2,
)
from .core import CompatibleTriple, check_triple, polar_retraction, triple_from_metric
from .errors import (
    ChartError,
    ConvergenceError,
    DegeneracyError,
    DimensionError,
    GeometryError,
    HamlagError,
    NonMinimalError,
)
from .lagrangian import LagrangianRep, induced_geometry, realize, sigma_form, volume
from .scenario import Scenario, ScenarioError, load_scenario
from .spectral import RealFourierBasis, SpectralField
from .variational import (
    el_residual,
    first_eigenvalue,
    hessian_operator,
    jacobi_full,
    jacobi_ke_minimal,
    kernel_candidates,
    nondegeneracy,
    stability_criterion,
)

__version__ = "0.1.0"
