"""Finite-dimensional toolkit for states that saturate strong subadditivity.

Submodules: ``linops`` (states and subsystem bookkeeping), ``entropy``,
``channels`` (Kraus/Choi/Petz), ``algebra`` (fixed points, commutants, block
decomposition), ``markov`` (detection and decomposition of short Markov
chains), ``apps`` (error correction, Holevo saturation, classical embedding)
and ``cli``.
"""

from .channels import QuantumChannel, petz_transpose_channel
from .entropy import (
    INFINITY,
    Ensemble,
    conditional_mutual_information,
    holevo_chi,
    mutual_information,
    relative_entropy,
    von_neumann_entropy,
)
from .errors import (
    AlgebraError,
    FactorizationError,
    NoFaithfulStateError,
    NotMarkovError,
    PreservationError,
    QMCError,
    ShapeError,
    ValidationError,
)
from .linops import DensityOperator, Shape, partial_trace, trace_distance
from .markov import decompose, is_markov, reconstruct, recovery_residual

__version__ = "0.1.0"

__all__ = [
    "AlgebraError", "DensityOperator", "Ensemble", "FactorizationError", "INFINITY",
    "NoFaithfulStateError", "NotMarkovError", "PreservationError", "QMCError", "QuantumChannel",
    "Shape", "ShapeError", "ValidationError", "conditional_mutual_information", "decompose",
    "holevo_chi", "is_markov", "mutual_information", "partial_trace", "petz_transpose_channel",
    "reconstruct", "recovery_residual", "relative_entropy", "trace_distance", "von_neumann_entropy",
]
