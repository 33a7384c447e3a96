"""Smoother and filter concentration experiments for partially observed quadratic ODEs."""

__version__ = "0.1.0"

from .exceptions import (AssumptionViolation, Blowup, ChaosmootherError, ConfigError,
                         ConvergenceError, DegenerateInputError, NumericFailure, OnGammaError,
                         OrbitOnDiscontinuity, StepUnderflow, UnidentifiableAtZero)
from .geo import GeoParams, GeoPoint, geo_flow, geo_point, geo_trajectory
from .models import (Lorenz63Params, Lorenz96Params, get_preset, lorenz63_from_xyz,
                     lorenz63_system, lorenz96_system, random_system)
from .observe import ObsRecord, ObsSetup, generate_observations
from .quadode import QuadraticSystem, flow, system_constants, trajectory

__all__ = [
    "AssumptionViolation", "Blowup", "ChaosmootherError", "ConfigError", "ConvergenceError",
    "DegenerateInputError", "NumericFailure", "OnGammaError", "OrbitOnDiscontinuity",
    "StepUnderflow", "UnidentifiableAtZero", "GeoParams", "GeoPoint", "geo_flow", "geo_point",
    "geo_trajectory", "Lorenz63Params", "Lorenz96Params", "get_preset", "lorenz63_from_xyz",
    "lorenz63_system", "lorenz96_system", "random_system", "ObsRecord", "ObsSetup",
    "generate_observations", "QuadraticSystem", "flow", "system_constants", "trajectory",
    "__version__",
]
