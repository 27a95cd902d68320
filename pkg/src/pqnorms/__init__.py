"""Operator norms of structured Gaussian matrices between l_p spaces.

Submodules: ``profiles`` (variance profiles and norm pairs), ``sampling``
(seeded Gaussian streams), ``pqnorm`` (the norm engine), ``gaussian``
(deterministic Gaussian quantities), ``bounds`` (right-hand sides),
``montecarlo`` (estimators) and ``harness`` (checks and CLI).
"""

from .profiles import NormPair, VarianceProfile, make_diagonal, make_iid, make_tensor
from .pqnorm import op_norm, op_norm_batch
from .montecarlo import estimate_opnorm

__all__ = ["NormPair", "VarianceProfile", "make_iid", "make_tensor", "make_diagonal", "op_norm",
           "op_norm_batch", "estimate_opnorm"]
__version__ = "0.1.0"
