"""Active-backend kernel dispatch (see backend.py for the selection rule)."""

from .backend import ACTIVE
from .kernels_numpy import (  # layout constants are backend-independent
    STATE_DIM,
    IPX,
    IVX,
    IPY,
    IVY,
    IOM,
    SMALL_TURN,
)

if ACTIVE == "numba":
    from .kernels_numba import (
        ct_propagate,
        enum_associations,
        gibbs_associations,
        likelihood_matrix,
        systematic_indices,
        turn_ratios,
        uniform_mixture_indices,
    )
else:
    from .kernels_numpy import (
        ct_propagate,
        enum_associations,
        gibbs_associations,
        likelihood_matrix,
        systematic_indices,
        turn_ratios,
        uniform_mixture_indices,
    )

__all__ = [
    "ACTIVE",
    "STATE_DIM",
    "IPX",
    "IVX",
    "IPY",
    "IVY",
    "IOM",
    "SMALL_TURN",
    "ct_propagate",
    "enum_associations",
    "gibbs_associations",
    "likelihood_matrix",
    "systematic_indices",
    "turn_ratios",
    "uniform_mixture_indices",
]
