"""K-policy adjustable robust optimization: scenario-based branch-and-bound
solver with an embedded reference LP/MILP kernel, piecewise affine decision
rules, brute-force validation oracles, benchmark instance generators and a
file-based CLI.
"""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    AffineMap,
    AffineScalar,
    KAdaptInstance,
    MipSet,
    Scenario,
    eval_affine,
    lift_first_stage_objective,
    validate_instance,
)
