"""Numerics for u_t + (-Delta)^{theta/2} u = u^p with singular and measure data."""

__version__ = "0.1.0"

from .grid import Grid
from .kernel import GridSpec, KernelProfile, ModelParams, build_profile, eval_kernel
from .semigroup import Constant, CriticalLog, Field, InitialDatum, PowerLaw, Singular, apply_semigroup, materialize
from .criteria import ball_sup_scan, check_necessary, check_sufficient
from .solver import TimeMesh, march, picard_certify, supersolution_check
from .lifespan import SweepConfig, dichotomy_probe, fit_scaling, lifespan_sweep, predicted_exponent

__all__ = [
    "Grid",
    "GridSpec",
    "KernelProfile",
    "ModelParams",
    "build_profile",
    "eval_kernel",
    "Constant",
    "CriticalLog",
    "Field",
    "InitialDatum",
    "PowerLaw",
    "Singular",
    "apply_semigroup",
    "materialize",
    "ball_sup_scan",
    "check_necessary",
    "check_sufficient",
    "TimeMesh",
    "march",
    "picard_certify",
    "supersolution_check",
    "SweepConfig",
    "dichotomy_probe",
    "fit_scaling",
    "lifespan_sweep",
    "predicted_exponent",
]
