"""Fast-slow analysis of homoclinic bifurcations in the FitzHugh-Nagumo travelling-wave system."""

from .core_model import Params, eigen_analysis, equilibrium, fold_points, singular_hopf_limits
from .errors import FHNError

__all__ = ["Params", "eigen_analysis", "equilibrium", "fold_points", "singular_hopf_limits",
           "FHNError"]
__version__ = "0.1.0"
