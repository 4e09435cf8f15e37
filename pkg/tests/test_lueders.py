import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from qsim.errors import BasisNotOrthonormal, DimensionMismatch, ZeroProbabilityOutcome
from qsim.lueders import (
    born_probabilities,
    lueders_collapse,
    lueders_collapse_mixed,
    lueders_measure_unread,
    measure,
    outcome_probabilities,
    sample_outcomes,
    von_neumann_measure_unread,
)
from qsim.protocol import IDENTITY, split_observable
from qsim.qcore import (
    KET_0,
    KET_1,
    KET_MINUS,
    KET_PLUS,
    DensityMatrix,
    fidelity,
    make_pure_state,
    spectral_decompose,
)
from qsim.verify import random_hermitian

J = split_observable(0.1)


def random_state(rng, dim):
    return make_pure_state(rng.standard_normal(dim) + 1j * rng.standard_normal(dim))


class TestOutcomeProbabilities:
    def test_plus_on_j_is_even(self):
        out = outcome_probabilities(KET_PLUS, J)
        assert [lam for lam, _ in out] == pytest.approx([1.0, 1.1])
        assert [p for _, p in out] == pytest.approx([0.5, 0.5], abs=1e-15)

    def test_eigenstate(self):
        assert outcome_probabilities(KET_1, J) == [(1.0, 1.0), (pytest.approx(1.1), 0.0)]

    def test_identity_single_outcome(self):
        out = outcome_probabilities(KET_PLUS, IDENTITY)
        assert len(out) == 1
        assert out[0][1] == pytest.approx(1.0, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            outcome_probabilities(make_pure_state([1, 0, 0]), J)

    def test_mixed_state(self):
        out = outcome_probabilities(DensityMatrix(np.eye(2) / 2), J)
        assert [p for _, p in out] == pytest.approx([0.5, 0.5])

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.booleans())
    def test_normalized(self, seed, dim, degenerate):
        rng = np.random.default_rng(seed)
        obs = spectral_decompose(random_hermitian(rng, dim, degenerate and dim > 1)[0])
        p = [pk for _, pk in outcome_probabilities(random_state(rng, dim), obs)]
        assert min(p) >= 0
        assert sum(p) == pytest.approx(1.0, abs=1e-12)


class TestCollapse:
    def test_identity_leaves_plus(self):
        post = lueders_collapse(KET_PLUS, IDENTITY, 0)
        assert fidelity(post, KET_PLUS) == pytest.approx(1.0, abs=1e-12)

    def test_j_projects_to_spin_up(self):
        post = lueders_collapse(KET_PLUS, J, 0)
        assert_allclose(post.amplitudes, [1, 0], atol=1e-12)

    def test_impossible_outcome(self):
        with pytest.raises(ZeroProbabilityOutcome):
            lueders_collapse(KET_1, J, 1)

    def test_identity_any_dimension(self):
        rng = np.random.default_rng(4)
        for dim in range(1, 7):
            phi = random_state(rng, dim)
            post = lueders_collapse(phi, spectral_decompose(np.eye(dim)), 0)
            assert fidelity(phi, post) == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 8))
    def test_post_state_lies_in_range(self, seed, dim):
        rng = np.random.default_rng(seed)
        obs = spectral_decompose(random_hermitian(rng, dim, True)[0])
        phi = random_state(rng, dim)
        for k, P in enumerate(obs.projectors):
            if born_probabilities(phi, obs)[k] < 1e-10:
                continue
            post = lueders_collapse(phi, obs, k)
            assert_allclose(P @ post.amplitudes, post.amplitudes, atol=1e-12)
            assert np.linalg.norm(post.amplitudes) == pytest.approx(1.0, abs=1e-12)

    def test_closest_point_in_eigenspace(self):
        # the Lueders post-state beats every other unit vector of the eigenspace
        rng = np.random.default_rng(11)
        h, _ = random_hermitian(rng, 6, degenerate=True)
        obs = spectral_decompose(h)
        k = int(np.argmax(obs.degeneracies))
        phi = random_state(rng, 6)
        post = lueders_collapse(phi, obs, k)
        best = fidelity(phi, post)
        p_k = born_probabilities(phi, obs)[k]
        assert best == pytest.approx(p_k, abs=1e-12)
        v = obs.eigenvectors[k]
        coeffs = rng.standard_normal((1000, v.shape[1])) + 1j * rng.standard_normal((1000, v.shape[1]))
        for c in coeffs:
            b = make_pure_state(v @ c)
            assert fidelity(phi, b) <= best + 1e-12

    def test_repeatability(self):
        rng = np.random.default_rng(5)
        h, _ = random_hermitian(rng, 5, degenerate=True)
        obs = spectral_decompose(h)
        for _ in range(50):
            phi = random_state(rng, 5)
            first = measure(phi, obs, rng)
            second = measure(first.post_state, obs, rng)
            assert second.group_index == first.group_index
            assert second.probability == pytest.approx(1.0, abs=1e-12)
            assert_allclose(second.post_state.amplitudes, first.post_state.amplitudes, atol=1e-12)


class TestMixedCollapse:
    def test_identity_keeps_maximally_mixed(self):
        out = lueders_collapse_mixed(DensityMatrix(np.eye(2) / 2), IDENTITY, 0)
        assert_allclose(out.matrix, np.eye(2) / 2, atol=1e-15)

    def test_consistent_with_pure(self):
        out = lueders_collapse_mixed(KET_PLUS.density(), J, 0)
        assert_allclose(out.matrix, KET_1.density().matrix, atol=1e-12)

    def test_maximally_mixed_onto_spin_down(self):
        out = lueders_collapse_mixed(DensityMatrix(np.eye(2) / 2), J, 1)
        assert_allclose(out.matrix, np.diag([0, 1]), atol=1e-15)

    def test_impossible(self):
        with pytest.raises(ZeroProbabilityOutcome):
            lueders_collapse_mixed(KET_1.density(), J, 1)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 6))
    def test_channel_output_is_a_state(self, seed, dim):
        rng = np.random.default_rng(seed)
        obs = spectral_decompose(random_hermitian(rng, dim, True)[0])
        w = rng.dirichlet(np.ones(dim))
        vecs = [random_state(rng, dim).density().matrix for _ in range(dim)]
        rho = DensityMatrix.from_unnormalized(sum(wi * v for wi, v in zip(w, vecs)))
        for k in range(obs.K):
            if born_probabilities(rho, obs)[k] < 1e-10:
                continue
            out = lueders_collapse_mixed(rho, obs, k).matrix
            assert np.max(np.abs(out - out.conj().T)) <= 1e-12
            assert np.trace(out).real == pytest.approx(1.0, abs=1e-12)
            assert np.min(np.linalg.eigvalsh(out)) >= -1e-10
            P = obs.projectors[k]
            assert_allclose(P @ out @ P, out, atol=1e-12)


class TestSampling:
    def test_identity_always_same_outcome(self):
        for seed in range(20):
            out = measure(KET_PLUS, IDENTITY, np.random.default_rng(seed))
            assert out.group_index == 0
            assert fidelity(out.post_state, KET_PLUS) == pytest.approx(1.0, abs=1e-12)

    def test_eigenstate_input(self):
        for seed in range(20):
            out = measure(KET_1, J, np.random.default_rng(seed))
            assert out.eigenvalue == 1.0
            assert_allclose(out.post_state.amplitudes, [1, 0])

    def test_one_draw_per_measurement(self):
        rng = np.random.default_rng(8)
        measure(KET_PLUS, J, rng)
        ref = np.random.default_rng(8)
        ref.random()
        assert rng.random() == ref.random()

    def test_zero_probability_groups_never_sampled(self):
        probs = np.array([0.3, 0.0, 0.7, 0.0])
        u = np.array([0.0, 0.3, 0.2999999999, 0.9999999999999999, 1 - 1e-18])
        assert set(sample_outcomes(probs, u).tolist()) <= {0, 2}

    def test_scalar_and_batched_agree(self):
        u = np.random.default_rng(0).random(5000)
        p = np.array([0.2, 0.5, 0.3])
        batched = sample_outcomes(p, u)
        assert all(sample_outcomes(p, float(x)) == b for x, b in zip(u, batched))

    def test_measure_frequency_matches_born_rule(self):
        rng = np.random.default_rng(21)
        n = 20_000
        hits = sum(measure(KET_PLUS, J, rng).group_index == 0 for _ in range(n))
        assert abs(hits / n - 0.5) <= 3 * np.sqrt(0.25 / n)

    def test_million_samples(self):
        n = 1_000_000
        u = np.random.default_rng(22).random(n)
        k = sample_outcomes(born_probabilities(KET_PLUS, J), u)
        assert abs(np.mean(k == 0) - 0.5) <= 3 * np.sqrt(0.25 / n)

    def test_outcome_json(self):
        doc = measure(KET_PLUS, J, np.random.default_rng(1)).to_json_dict()
        assert set(doc) == {"k", "eigenvalue", "probability", "post_state"}
        assert doc["probability"] == pytest.approx(0.5)


class TestVonNeumann:
    def test_plus_in_computational_basis(self):
        rho = von_neumann_measure_unread(KET_PLUS, [KET_1, KET_0])
        assert_allclose(rho.matrix, np.eye(2) / 2, atol=1e-15)

    def test_basis_state(self):
        rho = von_neumann_measure_unread(KET_1, [KET_1, KET_0])
        assert_allclose(rho.matrix, np.diag([1, 0]), atol=1e-15)

    def test_own_basis(self):
        rho = von_neumann_measure_unread(KET_PLUS, [KET_PLUS, KET_MINUS])
        assert_allclose(rho.matrix, KET_PLUS.density().matrix, atol=1e-15)

    def test_bad_basis(self):
        with pytest.raises(BasisNotOrthonormal):
            von_neumann_measure_unread(KET_PLUS, [KET_PLUS, KET_1])
        with pytest.raises(BasisNotOrthonormal):
            von_neumann_measure_unread(KET_PLUS, [KET_PLUS])

    def test_purity_separation(self):
        lueders = lueders_collapse(KET_PLUS, IDENTITY, 0).density().purity()
        vn = von_neumann_measure_unread(KET_PLUS, [KET_1, KET_0]).purity()
        assert lueders == pytest.approx(1.0, abs=1e-12)
        assert vn == pytest.approx(0.5, abs=1e-12)

    def test_unread_lueders_on_degenerate_keeps_coherence(self):
        rho = lueders_measure_unread(KET_PLUS, IDENTITY)
        assert rho.purity() == pytest.approx(1.0, abs=1e-12)
        rho_j = lueders_measure_unread(KET_PLUS, J)
        assert_allclose(rho_j.matrix, np.eye(2) / 2, atol=1e-12)
