"""stochgeo: spatial-temporal SIR analysis for large-scale wireless networks."""

__version__ = "0.1.0"

from .core import Curve, Estimate, ToleranceError

__all__ = ["Curve", "Estimate", "ToleranceError", "__version__"]
