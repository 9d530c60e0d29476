"""Small-time spectral heat content of an interval for symmetric stable processes."""

from .interval_heat import (
    HeatLossCurve,
    Interval,
    fractional_perimeter,
    h_limit_constant,
    heat_loss,
    heat_loss_outside,
    spectral_Q_brownian,
)
from .quadrature import QuadratureConfig, QuadratureError
from .stable_core import StableLaw, TailEnvelope, constant_A, envelope_tail_integral

__version__ = "0.1.0"

__all__ = [
    "HeatLossCurve",
    "Interval",
    "QuadratureConfig",
    "QuadratureError",
    "StableLaw",
    "TailEnvelope",
    "constant_A",
    "envelope_tail_integral",
    "fractional_perimeter",
    "h_limit_constant",
    "heat_loss",
    "heat_loss_outside",
    "spectral_Q_brownian",
    "__version__",
]
