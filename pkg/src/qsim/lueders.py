"""Measurement channels: Lueders collapse, Born probabilities, sampling.

A measurement of observable ``obs`` with eigenspace projectors ``P_k`` maps a
pure state ``phi`` to ``P_k phi / sqrt(p_k)`` with ``p_k = <phi|P_k|phi>``.
Within a degenerate eigenspace the coherence of ``phi`` survives, which is
what separates this rule from a projection onto a full basis
(:func:`von_neumann_measure_unread`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Union

import numpy as np

from .errors import BasisNotOrthonormal, DimensionMismatch, ZeroProbabilityOutcome
from .qcore import (
    DensityMatrix,
    Observable,
    PureState,
    check_orthonormal,
)

ZERO_PROBABILITY = 1e-14

State = Union[PureState, DensityMatrix]


@dataclass(frozen=True, eq=False)
class MeasurementOutcome:
    group_index: int
    eigenvalue: float
    probability: float
    post_state: State

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "k": int(self.group_index),
            "eigenvalue": float(self.eigenvalue),
            "probability": float(self.probability),
            "post_state": self.post_state.to_json_dict(),
        }


def _check_dims(state: State, obs: Observable) -> None:
    if state.dim != obs.dim:
        raise DimensionMismatch(f"state has dim {state.dim}, observable has dim {obs.dim}")


def born_probabilities(state: State, obs: Observable) -> np.ndarray:
    """Array of Prob[O = lambda_k], ordered by group index."""
    _check_dims(state, obs)
    if isinstance(state, PureState):
        phi = state.amplitudes
        p = np.array([np.real(np.vdot(phi, P @ phi)) for P in obs.projectors])
    else:
        rho = state.matrix
        # tr(P rho) without forming the product
        p = np.array([np.real(np.sum(P * rho.T)) for P in obs.projectors])
    return np.clip(p, 0.0, None)


def outcome_probabilities(state: State, obs: Observable) -> list[tuple[float, float]]:
    """``[(lambda_k, Prob[O = lambda_k]), ...]`` for a pure or mixed state."""
    p = born_probabilities(state, obs)
    return [(lam, float(pk)) for lam, pk in zip(obs.eigenvalues, p)]


def lueders_collapse(state: PureState, obs: Observable, k: int) -> PureState:
    """Post-measurement state for outcome ``k`` (read-out, pure input)."""
    _check_dims(state, obs)
    P = obs.projectors[k]
    v = P @ state.amplitudes
    p = float(np.real(np.vdot(state.amplitudes, v)))
    if p < ZERO_PROBABILITY:
        raise ZeroProbabilityOutcome(f"outcome {k} has probability {p:.3e}")
    # realized norm equals sqrt(p) up to rounding
    return PureState(v / np.linalg.norm(v))


def lueders_collapse_mixed(rho: DensityMatrix, obs: Observable, k: int) -> DensityMatrix:
    """``P_k rho P_k / tr(P_k rho)``."""
    _check_dims(rho, obs)
    P = obs.projectors[k]
    out = P @ rho.matrix @ P
    p = float(np.real(np.trace(out)))
    if p < ZERO_PROBABILITY:
        raise ZeroProbabilityOutcome(f"outcome {k} has probability {p:.3e}")
    return DensityMatrix.from_unnormalized(out)


def lueders_measure_unread(state: State, obs: Observable) -> DensityMatrix:
    """Ensemble after measuring without reading the result: sum_k P_k rho P_k."""
    _check_dims(state, obs)
    rho = state.density().matrix if isinstance(state, PureState) else state.matrix
    return DensityMatrix.from_unnormalized(sum(P @ rho @ P for P in obs.projectors))


def _inverse_cdf_tables(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cdf = np.cumsum(probs)
    # Rounding can land the draw on a zero-probability group; map such
    # indices back to the nearest earlier admissible one.
    admissible = np.flatnonzero(probs >= ZERO_PROBABILITY)
    remap = np.empty(len(probs) + 1, dtype=np.intp)
    for j in range(len(probs) + 1):
        below = admissible[admissible <= j]
        remap[j] = below[-1] if below.size else admissible[0]
    return cdf, remap


def sample_outcomes(probs: np.ndarray, u):
    """Inverse-CDF selection of an outcome index from uniform draw(s) ``u``.

    Works elementwise on arrays; scalar and batched calls agree exactly.
    """
    probs = np.asarray(probs, dtype=float)
    cdf, remap = _inverse_cdf_tables(probs)
    idx = np.searchsorted(cdf, np.asarray(u) * cdf[-1], side="right")
    out = remap[idx]
    return int(out) if np.ndim(out) == 0 else out


def measure(state: State, obs: Observable, rng: np.random.Generator) -> MeasurementOutcome:
    """Sample one outcome and apply the Lueders update.

    Consumes exactly one uniform draw from ``rng``.
    """
    p = born_probabilities(state, obs)
    k = sample_outcomes(p, rng.random())
    if isinstance(state, PureState):
        post = lueders_collapse(state, obs, k)
    else:
        post = lueders_collapse_mixed(state, obs, k)
    return MeasurementOutcome(k, obs.eigenvalues[k], float(p[k]), post)


def von_neumann_measure_unread(state: State, basis) -> DensityMatrix:
    """Dephase ``state`` in a full orthonormal basis: sum_i |<b_i|phi>|^2 |b_i><b_i|.

    ``basis`` is a list of vectors/PureStates or a matrix with basis columns.
    """
    B = check_orthonormal(basis)
    if B.shape[1] != B.shape[0]:
        raise BasisNotOrthonormal(f"{B.shape[1]} vectors cannot span dimension {B.shape[0]}")
    if state.dim != B.shape[0]:
        raise DimensionMismatch(f"state has dim {state.dim}, basis has dim {B.shape[0]}")
    rho = state.density().matrix if isinstance(state, PureState) else state.matrix
    weights = np.real(np.einsum("ji,jk,ki->i", B.conj(), rho, B))
    return DensityMatrix.from_unnormalized((B * np.clip(weights, 0, None)) @ B.conj().T)
