"""Lueders-rule measurement simulation and observable discrimination."""

from .errors import (
    AngleOutOfRange,
    BasisNotOrthonormal,
    DimensionMismatch,
    IndistinguishableHypotheses,
    InvalidState,
    NotHermitian,
    QsimError,
    ZeroProbabilityOutcome,
    ZeroVector,
)
from .lueders import (
    MeasurementOutcome,
    lueders_collapse,
    lueders_collapse_mixed,
    lueders_measure_unread,
    measure,
    outcome_probabilities,
    von_neumann_measure_unread,
)
from .qcore import (
    KET_0,
    KET_1,
    KET_MINUS,
    KET_PLUS,
    DensityMatrix,
    Observable,
    PureState,
    fidelity,
    make_pure_state,
    spectral_decompose,
)

__version__ = "0.1.0"
