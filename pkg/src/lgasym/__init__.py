"""Certified leading-order asymptotics for u'' = (f + g) u.

The package classifies the problem near the chosen endpoint, marches a
correction factor against the frozen-coefficient comparison equation,
and returns normalized solutions together with a Gronwall certificate
that bounds everything the march did not resolve.
"""

from .certificate import Certificate, CertificateError, NotIntegrableError
from .expr import EvalDomainError, ExprNode, ParseError, parse
from .pipeline import AnalysisError, AnalysisReport, RangeError, analyze
from .quadrature import BudgetExceededError, DivergenceError, QuadratureError
from .transform import AmbiguousSignError, HypothesisFailed, Regime
from .volterra import EnvelopeError, StepTooLargeError, VolterraError

__version__ = "0.1.0"

__all__ = [
    "AmbiguousSignError",
    "AnalysisError",
    "AnalysisReport",
    "BudgetExceededError",
    "Certificate",
    "CertificateError",
    "DivergenceError",
    "EnvelopeError",
    "EvalDomainError",
    "ExprNode",
    "HypothesisFailed",
    "NotIntegrableError",
    "ParseError",
    "QuadratureError",
    "RangeError",
    "Regime",
    "StepTooLargeError",
    "VolterraError",
    "analyze",
    "parse",
    "__version__",
]
