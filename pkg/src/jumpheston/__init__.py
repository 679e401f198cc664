"""Simulation and closed-form drift estimation for a jump-type Heston model."""

from .errors import (
    DegenerateStats,
    JumpHestonError,
    MomentUndefined,
    NonpositivePath,
    ParameterError,
    RegimeError,
    SchemeDomainError,
    SingularSecondCoordinate,
)
from .estimator import InformationMatrix, MleEstimate, Route, ScoreVector, mle
from .model import JumpSpec, ModelParams, Psi, Regime, reference_params
from .simulate import PathBundle, SchemeKind, SimGrid, simulate_path
from .statistics import I3Variant, I45Variant, SuffStats, suff_stats

__all__ = [
    "DegenerateStats",
    "I3Variant",
    "I45Variant",
    "InformationMatrix",
    "JumpHestonError",
    "JumpSpec",
    "MleEstimate",
    "ModelParams",
    "MomentUndefined",
    "NonpositivePath",
    "ParameterError",
    "PathBundle",
    "Psi",
    "Regime",
    "RegimeError",
    "Route",
    "SchemeDomainError",
    "SchemeKind",
    "ScoreVector",
    "SimGrid",
    "SingularSecondCoordinate",
    "SuffStats",
    "mle",
    "reference_params",
    "simulate_path",
    "suff_stats",
]
