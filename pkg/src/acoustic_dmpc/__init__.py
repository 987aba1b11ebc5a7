"""Communication-aware distributed MPC for acoustic vehicle formations.

Spline forecasts, a fixed-point codec for them, lossy TDMA/FDMA channel
simulation, relaxed consensus ADMM, closed-loop metrics and data-rate
tuning.
"""

from .bspline import BSpline, ideal_line_coeffs, shift_domain
from .codec import QuantScheme, decode_payload, encode_payload, payload_bits
from .dmpc import MpcParams, Network, VehicleModel, centralized_solve, mpc_step
from .imputation import Extrapolation, ExtrapolationMethod, impute_missing
from .mac import MacConfig, Scheme
from .simulation import SimConfig, run_simulation
from .tuning import HyperParams, coordinate_descent, data_rate

__version__ = "0.1.0"

__all__ = [
    "BSpline",
    "ideal_line_coeffs",
    "shift_domain",
    "QuantScheme",
    "encode_payload",
    "decode_payload",
    "payload_bits",
    "MpcParams",
    "Network",
    "VehicleModel",
    "centralized_solve",
    "mpc_step",
    "Extrapolation",
    "ExtrapolationMethod",
    "impute_missing",
    "MacConfig",
    "Scheme",
    "SimConfig",
    "run_simulation",
    "HyperParams",
    "coordinate_descent",
    "data_rate",
]
