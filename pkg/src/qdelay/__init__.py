"""Fluid models of parallel queues under delayed queue-length information.

Customers pick one of two identical queues through a multinomial logit rule
applied either to queue lengths reported with a constant delay or to their
running window average.  The package integrates both delay-differential
systems, computes the Hopf thresholds where the symmetric equilibrium loses
stability, and classifies simulated runs as synchronized or oscillatory.
"""

from .analysis import (
    INCONCLUSIVE,
    OSCILLATORY,
    SYNCHRONIZED,
    StabilityVerdict,
    SweepRow,
    analytic_threshold,
    classify_stability,
    conservation_check,
    default_thresholds,
    locate_transition,
    sweep,
)
from .dde import (
    DdeSystem,
    HistoryFunction,
    IntegrationConfig,
    NumericalFailureError,
    Trajectory,
    dense_eval,
    integrate,
)
from .models import (
    CONSTANT,
    MODEL_KINDS,
    MOVING_AVERAGE,
    ModelParams,
    constant_delay_history,
    constant_delay_rhs,
    constant_delay_system,
    default_step,
    equilibrium,
    ma_from_trajectory,
    ma_history,
    ma_rhs,
    ma_system,
    mnl_weights,
    simulate,
)
from .stability import (
    ConvergenceError,
    HopfPoint,
    PerturbationQuery,
    characteristic_residual_constant,
    characteristic_residual_ma,
    critical_delay_constant,
    critical_delay_ma,
    hopf_curve,
    hopf_frequency_ma,
    ma_candidate_roots,
    ma_threshold_function,
    r2_constant,
    r2_ma,
    root_track,
)

__version__ = "0.1.0"
