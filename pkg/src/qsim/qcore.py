"""Finite-dimensional states and observables with degeneracy-aware spectra.

Everything here is immutable: arrays held by the dataclasses are marked
read-only on construction so instances can be shared between workers.

Basis convention for the spin-1/2 helpers: ``KET_1`` (spin-up) is the first
computational basis vector and ``KET_0`` (spin-down) the second, so that
``diag(1, 1 + delta)`` assigns eigenvalue 1 to ``KET_1``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import (
    BasisNotOrthonormal,
    DimensionMismatch,
    InvalidState,
    NotHermitian,
    ZeroVector,
)

log = logging.getLogger(__name__)

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
ORTHONORMAL_TOL = 1e-10
ZERO_NORM = 1e-14


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex, copy=True)
    arr.setflags(write=False)
    return arr


def _hermitian_error(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized complex amplitude vector."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.ndim != 1 or amps.size < 1:
            raise InvalidState(f"amplitudes must be a non-empty 1-D vector, got shape {amps.shape}")
        norm2 = float(np.sum(np.abs(amps) ** 2))
        if abs(norm2 - 1.0) > NORM_TOL:
            raise InvalidState(f"state is not normalized: sum |a|^2 = {norm2!r}")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def density(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))

    def to_json_dict(self) -> dict[str, Any]:
        return _encode("pure_state", self.amplitudes, self.dim)

    def __repr__(self):
        return f"PureState({np.array2string(self.amplitudes, precision=6)})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace operator."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise InvalidState(f"density matrix must be square, got shape {m.shape}")
        if _hermitian_error(m) > HERMITIAN_TOL:
            raise InvalidState("density matrix is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1.0) > NORM_TOL:
            raise InvalidState(f"density matrix trace is {tr!r}, expected 1")
        lo = float(np.min(np.linalg.eigvalsh(m)))
        if lo < -PSD_TOL:
            raise InvalidState(f"density matrix has negative eigenvalue {lo!r}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        """tr(rho^2); 1 for pure states, 1/dim when maximally mixed."""
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def to_json_dict(self) -> dict[str, Any]:
        return _encode("density_matrix", self.matrix, self.dim)

    @classmethod
    def from_unnormalized(cls, m: np.ndarray) -> DensityMatrix:
        """Symmetrize and rescale to unit trace (for channel outputs)."""
        m = np.asarray(m, dtype=complex)
        m = 0.5 * (m + m.conj().T)
        return cls(m / np.real(np.trace(m)))


@dataclass(frozen=True, eq=False)
class Observable:
    """Hermitian operator grouped into K distinct-eigenvalue eigenspaces.

    ``eigenvectors[k]`` is a ``(dim, d_k)`` array whose orthonormal columns
    span the k-th eigenspace; ``projectors[k]`` is the orthogonal projector
    onto it. Groups are ordered by ascending eigenvalue.
    """

    matrix: np.ndarray
    eigenvalues: tuple[float, ...]
    eigenvectors: tuple[np.ndarray, ...]
    projectors: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))
        object.__setattr__(self, "eigenvalues", tuple(float(x) for x in self.eigenvalues))
        object.__setattr__(self, "eigenvectors", tuple(_frozen(v) for v in self.eigenvectors))
        object.__setattr__(self, "projectors", tuple(_frozen(p) for p in self.projectors))
        K = len(self.eigenvalues)
        if K < 1 or len(self.eigenvectors) != K or len(self.projectors) != K:
            raise InvalidState("eigenvalues, eigenvectors and projectors must have equal length >= 1")
        if any(b <= a for a, b in zip(self.eigenvalues, self.eigenvalues[1:])):
            raise InvalidState("eigenvalues must be distinct and ascending")
        if sum(self.degeneracies) != self.dim:
            raise InvalidState("degeneracies must sum to the dimension")
        errs = self.invariant_errors()
        for name in ("idempotence", "hermiticity", "orthogonality", "completeness"):
            if errs[name] > NORM_TOL:
                raise InvalidState(f"projector {name} violated by {errs[name]:.3e}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def K(self) -> int:
        return len(self.eigenvalues)

    @property
    def degeneracies(self) -> tuple[int, ...]:
        return tuple(v.shape[1] for v in self.eigenvectors)

    def invariant_errors(self) -> dict[str, float]:
        """Largest elementwise violation of each projector-algebra invariant."""
        P = self.projectors
        eye = np.eye(self.dim)
        out = {
            "idempotence": max(float(np.max(np.abs(p @ p - p))) for p in P),
            "hermiticity": max(_hermitian_error(p) for p in P),
            "orthogonality": 0.0,
            "completeness": float(np.max(np.abs(sum(P) - eye))),
            "rank": max(
                abs(int(np.linalg.matrix_rank(p, tol=1e-8)) - d) for p, d in zip(P, self.degeneracies)
            ),
            "reconstruction": float(
                np.max(np.abs(sum(lam * p for lam, p in zip(self.eigenvalues, P)) - self.matrix))
            ),
        }
        for i in range(len(P)):
            for j in range(i + 1, len(P)):
                out["orthogonality"] = max(out["orthogonality"], float(np.max(np.abs(P[i] @ P[j]))))
        return out

    def to_json_dict(self) -> dict[str, Any]:
        return _encode("observable", self.matrix, self.dim)


def make_pure_state(amplitudes: Sequence[complex] | np.ndarray) -> PureState:
    """Return a normalized copy of ``amplitudes``.

    Raises ZeroVector when the input norm is below 1e-14.
    """
    v = np.asarray(amplitudes, dtype=complex).reshape(-1)
    if v.size < 1:
        raise ZeroVector("empty amplitude vector")
    norm = float(np.linalg.norm(v))
    if norm < ZERO_NORM:
        raise ZeroVector(f"cannot normalize vector with norm {norm!r}")
    if abs(norm - 1.0) > 1e-9:
        log.info("normalizing state: input norm %.12g", norm)
    return PureState(v / norm)


def basis_state(dim: int, index: int) -> PureState:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return PureState(v)


def check_hermitian(H: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``H`` as a complex square array or raise NotHermitian.

    The tolerance is absolute for entries of order one and scales with the
    largest entry otherwise.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] < 1:
        raise NotHermitian(f"expected a square matrix, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise NotHermitian("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(H))))
    err = _hermitian_error(H)
    if err > tol * scale:
        raise NotHermitian(f"matrix deviates from its adjoint by {err:.3e}")
    return H


def _orthonormalize(V: np.ndarray) -> np.ndarray:
    # QR keeps span(v_0..v_j) for every j, so eigenspace groups are preserved.
    Q, R = np.linalg.qr(V)
    phases = np.diag(R) / np.abs(np.diag(R))
    return Q * phases


def spectral_decompose(H: np.ndarray, tol_degen: float | None = None) -> Observable:
    """Decompose a Hermitian matrix into degenerate eigenspaces.

    Parameters
    ----------
    H : array_like
        Square Hermitian matrix.
    tol_degen : float, optional
        Consecutive (ascending) eigenvalues whose gap is at most this value
        belong to one group. Defaults to ``1e-10 * max(1, spectral radius)``.

    Returns
    -------
    Observable
        Groups ordered by eigenvalue; each group's eigenvalue is the mean of
        its merged raw eigenvalues.
    """
    H = check_hermitian(H)
    H = 0.5 * (H + H.conj().T)
    w, V = np.linalg.eigh(H)
    if tol_degen is None:
        tol_degen = 1e-10 * max(1.0, float(np.max(np.abs(w))))
    if not tol_degen > 0:
        raise ValueError("tol_degen must be positive")
    V = _orthonormalize(V)

    bounds = [0] + [i + 1 for i in range(len(w) - 1) if w[i + 1] - w[i] > tol_degen] + [len(w)]
    eigenvalues, groups, projectors = [], [], []
    for lo, hi in zip(bounds, bounds[1:]):
        Vk = V[:, lo:hi]
        eigenvalues.append(float(np.mean(w[lo:hi])))
        groups.append(Vk)
        projectors.append(Vk @ Vk.conj().T)
    return Observable(H, tuple(eigenvalues), tuple(groups), tuple(projectors))


def _as_columns(vectors: Sequence[Any] | np.ndarray) -> np.ndarray:
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        return vectors.astype(complex)
    cols = [v.amplitudes if isinstance(v, PureState) else np.asarray(v, dtype=complex) for v in vectors]
    return np.column_stack(cols)


def check_orthonormal(vectors, tol: float = ORTHONORMAL_TOL) -> np.ndarray:
    """Stack ``vectors`` as columns and verify ``B^dagger B = I``."""
    B = _as_columns(vectors)
    err = float(np.max(np.abs(B.conj().T @ B - np.eye(B.shape[1]))))
    if err > tol:
        raise BasisNotOrthonormal(f"vectors deviate from orthonormality by {err:.3e}")
    return B


def projector_from_basis(vectors) -> np.ndarray:
    """Sum of |v><v| over an orthonormal set (columns or list of vectors)."""
    B = check_orthonormal(vectors)
    return B @ B.conj().T


def observable_from_eigenspaces(eigenvalues: Sequence[float], bases: Sequence[Any]) -> Observable:
    """Build an Observable from known eigenvalues and eigenspace bases.

    ``bases[k]`` is either a ``(dim, d_k)`` column array or a list of
    vectors/PureStates. Groups are sorted by eigenvalue.
    """
    cols = [_as_columns(b) for b in bases]
    order = np.argsort(eigenvalues)
    lams = [float(eigenvalues[i]) for i in order]
    cols = [cols[i] for i in order]
    full = check_orthonormal(np.column_stack(cols))
    if full.shape[0] != full.shape[1]:
        raise BasisNotOrthonormal("eigenspaces must together span the space")
    full = _orthonormalize(full)
    splits = np.cumsum([c.shape[1] for c in cols])[:-1]
    groups = np.split(full, splits, axis=1)
    projectors = [g @ g.conj().T for g in groups]
    matrix = sum(lam * p for lam, p in zip(lams, projectors))
    return Observable(matrix, tuple(lams), tuple(groups), tuple(projectors))


def fidelity(a: PureState, b: PureState) -> float:
    """Transition probability |<a|b>|^2."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimensions differ: {a.dim} vs {b.dim}")
    # Real-arithmetic form: swapping a and b yields the same products, so the
    # result is bitwise symmetric.
    ar, ai = a.amplitudes.real, a.amplitudes.imag
    br, bi = b.amplitudes.real, b.amplitudes.imag
    re = float(np.sum(ar * br + ai * bi))
    im = float(np.sum(ar * bi - ai * br))
    return re * re + im * im


# JSON wire format: {"kind", "dim", "matrix_re", "matrix_im"}, row-major.
# Pure states are stored as a dim x 1 column, i.e. a flat list of length dim.


def _encode(kind: str, arr: np.ndarray, dim: int) -> dict[str, Any]:
    flat = np.asarray(arr).reshape(-1)
    return {
        "kind": kind,
        "dim": int(dim),
        "matrix_re": [float(x) for x in flat.real],
        "matrix_im": [float(x) for x in flat.imag],
    }


def from_json_dict(doc: dict[str, Any], kind: str | None = None):
    """Rebuild a PureState, DensityMatrix or Observable, re-validating it."""
    try:
        dim = int(doc["dim"])
        flat = np.asarray(doc["matrix_re"], dtype=float) + 1j * np.asarray(doc["matrix_im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidState(f"malformed document: {exc}") from exc
    kind = kind or doc.get("kind", "observable")
    if dim < 1:
        raise InvalidState("dim must be positive")
    if kind == "pure_state":
        if flat.size != dim:
            raise InvalidState(f"expected {dim} amplitudes, got {flat.size}")
        return PureState(flat)
    if flat.size != dim * dim:
        raise InvalidState(f"expected {dim * dim} matrix entries, got {flat.size}")
    m = flat.reshape(dim, dim)
    if kind == "density_matrix":
        return DensityMatrix(m)
    if kind == "observable":
        try:
            return spectral_decompose(m)
        except NotHermitian as exc:
            raise InvalidState(str(exc)) from exc
    raise InvalidState(f"unknown kind {kind!r}")


def dumps(obj: PureState | DensityMatrix | Observable) -> str:
    return json.dumps(obj.to_json_dict(), sort_keys=True)


def loads(text: str, kind: str | None = None):
    return from_json_dict(json.loads(text), kind)


_S = 1 / np.sqrt(2)
KET_1 = PureState(np.array([1, 0], dtype=complex))
KET_0 = PureState(np.array([0, 1], dtype=complex))
KET_PLUS = PureState(np.array([_S, _S], dtype=complex))
KET_MINUS = PureState(np.array([_S, -_S], dtype=complex))
