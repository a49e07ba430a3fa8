"""Synthesis and verification of minimal destabilizing feedback attacks on LTI systems."""

from .errors import (
    DestabError,
    DimensionError,
    IntegrationError,
    NumericError,
    ParseError,
    PoleError,
    PreconditionError,
    SingularityError,
    UnrepresentableError,
    WellPosednessError,
)
from .hinf import CriticalPoint, hinf_norm
from .lti import StateSpace, classify, interconnect
from .synth import AttackSystem, synthesize
from .verify import certify

__version__ = "0.1.0"

__all__ = [
    "AttackSystem",
    "CriticalPoint",
    "DestabError",
    "DimensionError",
    "IntegrationError",
    "NumericError",
    "ParseError",
    "PoleError",
    "PreconditionError",
    "SingularityError",
    "StateSpace",
    "UnrepresentableError",
    "WellPosednessError",
    "certify",
    "classify",
    "hinf_norm",
    "interconnect",
    "synthesize",
]
