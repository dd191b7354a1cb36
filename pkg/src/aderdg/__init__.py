"""ADER discontinuous Galerkin / finite-volume hyperbolic solver with
swappable time-stepping schedulers and an exact memory-access ledger."""

from .basis import Basis1D, make_basis
from .errors import (ConfigurationError, DomainError, NumericalError,
                     PredictorFailureError, ResourceBudgetError,
                     SchedulingOrderError)
from .kernels import Kernels, SpaceTimePolynomial
from .limiter import SubcellLimiter, rusanov_fv_step
from .mesh import Grid, build_grid, traversal_order
from .metrics import (AccessLedger, concurrency_profile, footprint_ratio,
                      persistent_footprint, rerun_upper_bound,
                      single_touch_audit, traffic_audit, traffic_model,
                      validate_trace)
from .pde import AdvectionSystem, EulerSystem
from .scheduler import Driver, TimeControl, update_time_step_sizes

__version__ = "0.1.0"

__all__ = [
    "AccessLedger", "AdvectionSystem", "Basis1D", "ConfigurationError",
    "DomainError", "Driver", "EulerSystem", "Grid", "Kernels",
    "NumericalError", "PredictorFailureError", "ResourceBudgetError",
    "SchedulingOrderError", "SpaceTimePolynomial", "SubcellLimiter",
    "TimeControl", "build_grid", "concurrency_profile", "footprint_ratio",
    "make_basis", "persistent_footprint", "rerun_upper_bound",
    "rusanov_fv_step", "single_touch_audit", "traffic_audit",
    "traffic_model", "traversal_order", "update_time_step_sizes",
    "validate_trace",
]
