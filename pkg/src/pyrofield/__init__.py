"""Exact and Monte Carlo engines for a two-neighbour forest-fire random field."""

from .errors import (ConstraintViolation, CouplingOrderViolation, DivergentMoments,
                     EnumLimitExceeded, ExactLimitExceeded, InternalConsistencyError,
                     NormalizationError, ValidationError)
from .model import (Boundary, DiagonalState, NeighborPair, Params, diagonal0_neighbors,
                    kernel, neighbor_statuses, validate_params)

__version__ = "0.1.0"
