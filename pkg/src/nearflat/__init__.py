"""Near-flat metric geometry toolkit.

Three connected pieces: the closed-form rank-one tanh geometry (divergence,
metric, natural-gradient transforms), a finite-difference Ricci-DeTurck flow
on a periodic grid with convergence and blow-up monitoring, and a toy
training stack that preconditions gradient descent with the same geometry
while tracking how the metric evolves.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ContractViolationError,
    DegenerateMetricError,
    NotPositiveDefiniteError,
    SingularityError,
)
from .geometry import (
    CoordPoint,
    DomainGuard,
    RankOneMetric,
    ball_radius,
    divergence,
    hessian_fd,
    is_strictly_diag_dominant,
    metric_apply,
    metric_at,
    natural_grad_exact,
    natural_grad_weak,
    potential,
)
from .grids import MetricGrid, SymTensorGrid
from .flow import (
    FlowConfig,
    FlowResult,
    FlowState,
    Profile,
    Verdict,
    flow_rhs,
    init_perturbation,
    l2_norm,
    linf_norm,
    run,
    step,
    sup_riemann,
)

__all__ = [
    "__version__",
    "ConfigError",
    "ContractViolationError",
    "DegenerateMetricError",
    "NotPositiveDefiniteError",
    "SingularityError",
    "CoordPoint",
    "DomainGuard",
    "RankOneMetric",
    "ball_radius",
    "divergence",
    "hessian_fd",
    "is_strictly_diag_dominant",
    "metric_apply",
    "metric_at",
    "natural_grad_exact",
    "natural_grad_weak",
    "potential",
    "MetricGrid",
    "SymTensorGrid",
    "FlowConfig",
    "FlowResult",
    "FlowState",
    "Profile",
    "Verdict",
    "flow_rhs",
    "init_perturbation",
    "l2_norm",
    "linf_norm",
    "run",
    "step",
    "sup_riemann",
]
