import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose
from scipy.stats import unitary_group

from qsim import qcore
from qsim.errors import (
    BasisNotOrthonormal,
    DimensionMismatch,
    InvalidState,
    NotHermitian,
    ZeroVector,
)
from qsim.qcore import (
    KET_0,
    KET_1,
    KET_MINUS,
    KET_PLUS,
    DensityMatrix,
    PureState,
    fidelity,
    make_pure_state,
    observable_from_eigenspaces,
    projector_from_basis,
    spectral_decompose,
)
from qsim.verify import random_hermitian


S = 1 / math.sqrt(2)


class TestMakePureState:
    def test_equal_superposition_is_normalized(self):
        st_ = make_pure_state([1, 1])
        assert_allclose(st_.amplitudes, [S, S], atol=1e-15)
        assert st_.dim == 2

    def test_already_normalized_is_unchanged(self):
        assert_allclose(make_pure_state([1, 0]).amplitudes, [1, 0])

    def test_zero_vector_rejected(self):
        with pytest.raises(ZeroVector):
            make_pure_state([0, 0])

    def test_tiny_vector_rejected(self):
        with pytest.raises(ZeroVector):
            make_pure_state([1e-15, 0])

    def test_reports_rescaling(self, caplog):
        with caplog.at_level("INFO", logger="qsim.qcore"):
            make_pure_state([3, 4])
        assert "5" in caplog.text

    def test_amplitudes_are_read_only(self):
        st_ = make_pure_state([1, 1j])
        with pytest.raises(ValueError):
            st_.amplitudes[0] = 0

    def test_unnormalized_direct_construction_rejected(self):
        with pytest.raises(InvalidState):
            PureState(np.array([1.0, 1.0]))


class TestSpectralDecompose:
    def test_identity_is_one_degenerate_group(self):
        obs = spectral_decompose(np.eye(2))
        assert obs.K == 1
        assert obs.eigenvalues == (1.0,)
        assert obs.degeneracies == (2,)
        assert_allclose(obs.projectors[0], np.eye(2), atol=1e-15)

    def test_split_observable_has_two_groups(self):
        obs = spectral_decompose(np.diag([1.0, 1.1]))
        assert obs.K == 2
        assert_allclose(obs.eigenvalues, [1.0, 1.1], atol=1e-15)
        assert obs.degeneracies == (1, 1)

    def test_gap_below_tolerance_merges(self):
        obs = spectral_decompose(np.diag([1.0, 1.0 + 1e-15]), tol_degen=1e-10)
        assert obs.K == 1
        assert obs.degeneracies == (2,)

    def test_group_eigenvalue_is_mean(self):
        obs = spectral_decompose(np.diag([2.0, 2.0 + 4e-11, 5.0]))
        assert obs.degeneracies == (2, 1)
        assert obs.eigenvalues[0] == pytest.approx(2.0 + 2e-11, abs=1e-15)

    def test_nonhermitian_rejected(self):
        with pytest.raises(NotHermitian):
            spectral_decompose(np.array([[1, 1], [0, 1]]))

    def test_nonsquare_rejected(self):
        with pytest.raises(NotHermitian):
            spectral_decompose(np.ones((2, 3)))

    def test_three_level_degeneracy(self):
        u = unitary_group.rvs(4, random_state=3)
        h = u @ np.diag([-1, 2, 2, 2]) @ u.conj().T
        obs = spectral_decompose(h)
        assert obs.degeneracies == (1, 3)
        assert_allclose(obs.eigenvalues, [-1, 2], atol=1e-12)


@st.composite
def hermitian_cases(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    dim = draw(st.integers(1, 8))
    degenerate = draw(st.booleans()) and dim > 1
    return random_hermitian(np.random.default_rng(seed), dim, degenerate)


@settings(max_examples=150, deadline=None)
@given(hermitian_cases())
def test_projector_algebra_and_reconstruction(case):
    h, mult = case
    obs = spectral_decompose(h)
    errs = obs.invariant_errors()
    for key in ("idempotence", "hermiticity", "orthogonality", "completeness"):
        assert errs[key] <= 1e-12, key
    assert errs["rank"] == 0
    assert errs["reconstruction"] <= 1e-10
    if mult is not None:
        assert list(obs.degeneracies) == mult
    # columns of each group are orthonormal
    for v in obs.eigenvectors:
        assert_allclose(v.conj().T @ v, np.eye(v.shape[1]), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_projector_is_basis_independent(seed, dim):
    rng = np.random.default_rng(seed)
    h, _ = random_hermitian(rng, dim, degenerate=True)
    obs = spectral_decompose(h)
    k = int(np.argmax(obs.degeneracies))
    v = obs.eigenvectors[k]
    d = v.shape[1]
    u1 = unitary_group.rvs(d, random_state=rng) if d > 1 else np.exp(1j * rng.uniform(0, 6.3, (1, 1)))
    u2 = unitary_group.rvs(d, random_state=rng) if d > 1 else np.exp(1j * rng.uniform(0, 6.3, (1, 1)))
    assert_allclose(projector_from_basis(v @ u1), projector_from_basis(v @ u2), atol=1e-10)
    assert_allclose(projector_from_basis(v @ u1), obs.projectors[k], atol=1e-10)


class TestFidelity:
    def test_identical(self):
        assert fidelity(KET_PLUS, KET_PLUS) == pytest.approx(1.0, abs=1e-15)

    def test_orthogonal(self):
        assert fidelity(KET_1, KET_0) == 0.0

    def test_half(self):
        assert fidelity(KET_PLUS, KET_1) == pytest.approx(0.5, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            fidelity(KET_PLUS, make_pure_state([1, 0, 0]))

    @given(
        arrays(complex, 4, elements=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)),
        arrays(complex, 4, elements=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)),
    )
    def test_symmetric_and_bounded(self, a, b):
        if np.linalg.norm(a) < 1e-6 or np.linalg.norm(b) < 1e-6:
            return
        sa, sb = make_pure_state(a), make_pure_state(b)
        f = fidelity(sa, sb)
        assert f == fidelity(sb, sa)
        assert 0.0 <= f <= 1 + 1e-12


class TestDensityMatrix:
    def test_maximally_mixed_purity(self):
        assert DensityMatrix(np.eye(2) / 2).purity() == pytest.approx(0.5, abs=1e-15)

    def test_pure_state_density(self):
        assert KET_PLUS.density().purity() == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize(
        "m",
        [
            np.array([[1, 1], [0, 0]]),  # not Hermitian
            np.eye(2),  # trace 2
            np.diag([1.5, -0.5]),  # negative eigenvalue
        ],
    )
    def test_invalid(self, m):
        with pytest.raises(InvalidState):
            DensityMatrix(m)


class TestEigenspaceConstructor:
    def test_known_eigenvectors_are_kept(self):
        obs = observable_from_eigenspaces([1.0, 2.0], [[KET_PLUS], [KET_MINUS]])
        assert_allclose(obs.eigenvectors[0][:, 0], KET_PLUS.amplitudes, atol=1e-15)
        assert_allclose(obs.matrix, [[1.5, -0.5], [-0.5, 1.5]], atol=1e-15)

    def test_unsorted_input_is_sorted(self):
        obs = observable_from_eigenspaces([2.0, 1.0], [[KET_MINUS], [KET_PLUS]])
        assert obs.eigenvalues == (1.0, 2.0)
        assert_allclose(obs.eigenvectors[0][:, 0], KET_PLUS.amplitudes, atol=1e-15)

    def test_non_orthogonal_rejected(self):
        with pytest.raises(BasisNotOrthonormal):
            observable_from_eigenspaces([1.0, 2.0], [[KET_PLUS], [KET_1]])

    def test_incomplete_rejected(self):
        with pytest.raises(BasisNotOrthonormal):
            observable_from_eigenspaces([1.0], [[KET_PLUS]])


class TestSerialization:
    @pytest.mark.parametrize("obj", [KET_PLUS, make_pure_state([1, 1j, 0]), DensityMatrix(np.eye(3) / 3)])
    def test_state_round_trip(self, obj):
        back = qcore.loads(qcore.dumps(obj))
        assert type(back) is type(obj)
        arr = obj.amplitudes if isinstance(obj, PureState) else obj.matrix
        arr2 = back.amplitudes if isinstance(back, PureState) else back.matrix
        assert_allclose(arr2, arr, atol=0)

    def test_observable_round_trip(self):
        obs = spectral_decompose(np.array([[2, 1j], [-1j, 2]]))
        doc = json.loads(qcore.dumps(obs))
        assert set(doc) == {"kind", "dim", "matrix_re", "matrix_im"}
        assert doc["matrix_im"] == [0.0, 1.0, -1.0, 0.0]
        back = qcore.from_json_dict(doc)
        assert_allclose(back.eigenvalues, obs.eigenvalues)

    def test_deserialization_revalidates(self):
        doc = {"kind": "pure_state", "dim": 2, "matrix_re": [1, 1], "matrix_im": [0, 0]}
        with pytest.raises(InvalidState):
            qcore.from_json_dict(doc)
        doc = {"kind": "observable", "dim": 2, "matrix_re": [1, 1, 0, 1], "matrix_im": [0, 0, 0, 0]}
        with pytest.raises(InvalidState):
            qcore.from_json_dict(doc)
        with pytest.raises(InvalidState):
            qcore.from_json_dict({"dim": 2, "matrix_re": [1]})
