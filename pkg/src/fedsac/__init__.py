"""Personalized federated learning with a cooperation matrix that trades off
model similarity against feature-subspace complementarity."""

from .errors import (
    ConfigError,
    DegenerateVector,
    DimensionMismatch,
    FedSaCError,
    FormatError,
    InvalidInput,
    OutputError,
)
from .numerics import Subspace, cosine, principal_angles, project_simplex, representative_subspace, thin_svd
from .server import ServerConfig, aggregate, cooperation_matrix, solve_row

__version__ = "0.1.0"
