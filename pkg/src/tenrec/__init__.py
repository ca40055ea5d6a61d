"""Low-rank tensor recovery: sum-of-nuclear-norms versus the square reshaping norm."""
from .tensor import DenseTensor, TuckerFactors, CPFactors, unfold, fold, square_reshape
from .operators import GaussianOperator, SamplingOperator, LinearMeasurement
from .solvers import AlbConfig, AlmConfig, RecoveryResult

__all__ = [
    "DenseTensor", "TuckerFactors", "CPFactors", "unfold", "fold", "square_reshape",
    "GaussianOperator", "SamplingOperator", "LinearMeasurement",
    "AlbConfig", "AlmConfig", "RecoveryResult",
]
__version__ = "0.1.0"
