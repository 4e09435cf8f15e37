"""Imperfectly implemented observables and what they do to discrimination.

An implementation error lifts the degeneracy of the identity and leaves a
random orthonormal eigenbasis, parametrized by an angle ``alpha`` in
``[0, pi/2]``::

    e1(alpha) = (cos(alpha) (|1> + |0>) + sin(alpha) (|1> - |0>)) / sqrt(2)
    e2(alpha) = (sin(alpha) (|1> + |0>) - cos(alpha) (|1> - |0>)) / sqrt(2)

``alpha = 0`` is the ``{|+>, |->}`` basis (behaves like the identity for the
interference test) and ``alpha = pi/4`` is ``{|1>, |0>}`` (behaves like J).
Measuring ``|+>`` and then interfering gives ``plus`` with probability
``cos(alpha)^4 + sin(alpha)^4``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, partial

import numpy as np
from scipy.stats import binom

from .errors import AngleOutOfRange, IndistinguishableHypotheses
from .lueders import measure, sample_outcomes
from .protocol import IDENTITY, PLUS, chain_plus_probability, chain_tree, interference_measure, split_observable
from .qcore import KET_0, KET_1, KET_MINUS, KET_PLUS, Observable, PureState, observable_from_eigenspaces
from .quadrature import simpson_ratio_until_stable, simpson_until_stable
from .report import ExperimentReport, MetricEntry
from .rng import DEFAULT_SEED, check_seed, derive_stream, fold_chunks, trial_uniforms

HALF_PI = math.pi / 2
TABLE_POINTS = 4096
DEFAULT_DELTA_NOISE = 1e-9
KINDS = ("uniform", "von_mises")
TIE_TOL = 1e-12


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha <= HALF_PI:
        raise AngleOutOfRange(f"alpha={alpha!r} outside [0, pi/2]")
    return alpha


@dataclass(frozen=True, eq=False)
class AngleParametrizedObservable:
    alpha: float
    eigvec_1: PureState
    eigvec_2: PureState

    @classmethod
    def from_alpha(cls, alpha: float) -> AngleParametrizedObservable:
        alpha = check_alpha(alpha)
        c, s = math.cos(alpha), math.sin(alpha)
        ket_p = KET_1.amplitudes + KET_0.amplitudes
        ket_m = KET_1.amplitudes - KET_0.amplitudes
        e1 = (c * ket_p + s * ket_m) / math.sqrt(2)
        e2 = (s * ket_p - c * ket_m) / math.sqrt(2)
        return cls(alpha, PureState(e1), PureState(e2))


def perturbed_observable(alpha: float, delta_noise: float = DEFAULT_DELTA_NOISE) -> Observable:
    """Nondegenerate qubit observable with eigenvalues 1 on e1(alpha), 1+delta_noise on e2(alpha)."""
    pair = AngleParametrizedObservable.from_alpha(alpha)
    return observable_from_eigenspaces([1.0, 1.0 + delta_noise], [[pair.eigvec_1], [pair.eigvec_2]])


def plus_probability_given_alpha(alpha: float) -> float:
    check_alpha(alpha)
    c2, s2 = math.cos(alpha) ** 2, math.sin(alpha) ** 2
    return c2 * c2 + s2 * s2


@dataclass(frozen=True)
class NoiseModel:
    """Distribution of the eigenbasis angle on ``[0, pi/2]``.

    ``von_mises`` has density proportional to ``exp(q^2 cos(alpha - alpha_mean))``
    truncated to the support and renormalized; ``uniform`` ignores ``q`` and
    ``alpha_mean``.
    """

    kind: str = "uniform"
    q: float = 0.0
    alpha_mean: float = math.pi / 4

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.q >= 0:
            raise ValueError("q must be >= 0")
        check_alpha(self.alpha_mean)

    @classmethod
    def uniform(cls) -> NoiseModel:
        return cls("uniform")

    @classmethod
    def von_mises(cls, q: float, alpha_mean: float = math.pi / 4) -> NoiseModel:
        return cls("von_mises", float(q), float(alpha_mean))

    def weight(self, alpha):
        """Unnormalized density; peak value 1 so large q cannot overflow."""
        alpha = np.asarray(alpha, dtype=float)
        if self.kind == "uniform" or self.q == 0:
            return np.ones_like(alpha)
        return np.exp(self.q**2 * (np.cos(alpha - self.alpha_mean) - 1.0))

    @property
    def quadrature_start(self) -> int:
        """Initial Simpson interval count; resolves the peak width (about 1/q)."""
        if self.kind == "uniform" or self.q == 0:
            return 64
        return max(64, 1 << math.ceil(math.log2(8 * HALF_PI * self.q)))

    @cached_property
    def normalizer(self) -> float:
        return simpson_until_stable(self.weight, 0.0, HALF_PI, tol=1e-12, n_start=self.quadrature_start)

    def density(self, alpha):
        return self.weight(alpha) / self.normalizer

    @cached_property
    def cdf_table(self) -> tuple[np.ndarray, np.ndarray]:
        grid = np.linspace(0.0, HALF_PI, TABLE_POINTS)
        w = self.weight(grid)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(grid))])
        return grid, cum / cum[-1]

    def alpha_from_uniform(self, u):
        """Inverse-CDF map from uniform draws to angles."""
        u = np.asarray(u, dtype=float)
        if self.kind == "uniform":
            return u * HALF_PI
        grid, cdf = self.cdf_table
        return np.interp(u, cdf, grid)

    def to_dict(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform"}
        return {"kind": self.kind, "q": self.q, "alpha_mean": self.alpha_mean}


def sample_alpha(model: NoiseModel, rng: np.random.Generator, size=None):
    """Draw angle(s) from ``model``; one uniform per angle."""
    alpha = model.alpha_from_uniform(rng.random(size))
    return float(alpha) if size is None else alpha


def average_plus_probability(model: NoiseModel, tol: float = 1e-10) -> float:
    """Plus probability averaged over the model's angle distribution (Simpson)."""

    def num(a):
        c2, s2 = np.cos(a) ** 2, np.sin(a) ** 2
        return model.weight(a) * (c2 * c2 + s2 * s2)

    return simpson_ratio_until_stable(num, model.weight, 0.0, HALF_PI, tol=tol, n_start=model.quadrature_start)


def _eigvec_arrays(alpha: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    c, s = np.cos(alpha)[..., None], np.sin(alpha)[..., None]
    ket_p = KET_1.amplitudes + KET_0.amplitudes
    ket_m = KET_1.amplitudes - KET_0.amplitudes
    return (c * ket_p + s * ket_m) / math.sqrt(2), (s * ket_p - c * ket_m) / math.sqrt(2)


def chain_plus_outcomes(alpha: np.ndarray, u_measure: np.ndarray, u_interf: np.ndarray) -> np.ndarray:
    """Batched two-step chain on ``|+>``: Lueders measurement of ``perturbed_observable(alpha)``
    followed by the interference measurement. Returns a boolean ``plus`` array.

    Each draw is mapped with the same inverse-CDF convention as
    :func:`qsim.lueders.sample_outcomes`.
    """
    e1, e2 = _eigvec_arrays(np.asarray(alpha, dtype=float))
    phi = KET_PLUS.amplitudes
    # rank-one projectors P_k = e_k e_k^dagger applied to |+>
    v1 = e1 * np.einsum("...i,i->...", e1.conj(), phi)[..., None]
    v2 = e2 * np.einsum("...i,i->...", e2.conj(), phi)[..., None]
    p1 = np.sum(np.abs(v1) ** 2, axis=-1)
    p2 = np.sum(np.abs(v2) ** 2, axis=-1)
    second = u_measure * (p1 + p2) >= p1
    post = np.where(second[..., None], v2, v1)
    post = post / np.linalg.norm(post, axis=-1, keepdims=True)
    p_minus = np.abs(np.einsum("i,...i->...", KET_MINUS.amplitudes.conj(), post)) ** 2
    p_plus = np.abs(np.einsum("i,...i->...", KET_PLUS.amplitudes.conj(), post)) ** 2
    return ~(u_interf * (p_minus + p_plus) < p_minus)


def mc_average_plus_probability(model: NoiseModel, n: int, rng: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo plus probability with a fresh angle per sample; ``(mean, stderr)``."""
    alpha = sample_alpha(model, rng, n)
    u = rng.random((n, 2))
    plus = chain_plus_outcomes(alpha, u[:, 0], u[:, 1])
    mean = float(plus.mean())
    return mean, math.sqrt(max(mean * (1 - mean), 0.0) / n)


def simulate_chain_plus_count(obs: Observable, n: int, rng: np.random.Generator) -> int:
    """Count ``plus`` results over ``n`` runs of the measure-then-interfere chain for ``obs``.

    The Lueders outcome tree is built once from ``obs``; only the sampling is
    vectorized.
    """
    p_first, p_interf, _ = chain_tree(obs)
    u = rng.random((n, 2))
    k = sample_outcomes(p_first, u[:, 0])
    plus = 0
    for kk in range(obs.K):
        if np.isnan(p_interf[kk, 0]):
            continue
        sel = k == kk
        plus += int(np.sum(sample_outcomes(p_interf[kk], u[sel, 1]) == 1))
    return plus


def hoeffding_copies(epsilon: float, gap: float) -> int:
    """Copies after which a midpoint threshold test errs with probability <= epsilon."""
    return math.ceil(2 * math.log(2 / epsilon) / gap**2)


@dataclass(frozen=True)
class NoisySetup:
    """Discrimination where either hypothesis may be implemented noisily.

    ``model_i``/``model_j`` of None means the ideal observable (identity for
    I, ``diag(1, 1 + delta)`` for J). With ``frozen_noise`` one angle is drawn
    per trial and reused for every copy.
    """

    model_i: NoiseModel | None = NoiseModel()
    model_j: NoiseModel | None = None
    m: int | None = None
    epsilon: float = 0.05
    delta: float = 0.1
    prior_j: float = 0.5
    seed: int = DEFAULT_SEED
    frozen_noise: bool = False

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0 < self.prior_j < 1:
            raise ValueError("prior_j must lie in (0, 1)")
        if self.m is not None and self.m < 1:
            raise ValueError("m must be >= 1")
        check_seed(self.seed)

    def plus_rate(self, label: str) -> float:
        model = self.model_i if label == "I" else self.model_j
        if model is not None:
            return average_plus_probability(model)
        return chain_plus_probability(_ideal(label, self.delta))

    @cached_property
    def rates(self) -> tuple[float, float]:
        p_i, p_j = self.plus_rate("I"), self.plus_rate("J")
        if abs(p_i - p_j) < 1e-6:
            raise IndistinguishableHypotheses(f"both hypotheses give plus with probability ~{p_i:.9f}")
        return p_i, p_j

    @property
    def m_bound(self) -> int:
        p_i, p_j = self.rates
        return hoeffding_copies(self.epsilon, abs(p_i - p_j))

    @property
    def copies(self) -> int:
        return self.m if self.m is not None else self.m_bound

    def decide_i(self, plus_count):
        """Closer-rate rule: I iff the plus fraction is strictly nearer p_I; ties go to J."""
        p_i, p_j = self.rates
        frac = np.asarray(plus_count) / self.copies
        # rates come from quadrature; absorb rounding so exact ties stay ties
        return np.abs(frac - p_i) < np.abs(frac - p_j) - TIE_TOL


def _ideal(label: str, delta: float) -> Observable:
    return IDENTITY if label == "I" else split_observable(delta)


def _hypothesis_plus(setup: NoisySetup, label: str, U: np.ndarray) -> np.ndarray:
    m = setup.copies
    u_alpha, u_meas, u_interf = U[:, 1::3], U[:, 2::3], U[:, 3::3]
    model = setup.model_i if label == "I" else setup.model_j
    if model is None:
        p_first, p_interf, _ = chain_tree(_ideal(label, setup.delta))
        k = sample_outcomes(p_first, u_meas)
        plus = np.zeros(u_meas.shape, dtype=bool)
        for kk in range(len(p_first)):
            if np.isnan(p_interf[kk, 0]):
                continue
            sel = k == kk
            plus[sel] = sample_outcomes(p_interf[kk], u_interf[sel]) == 1
        return plus
    if setup.frozen_noise:
        u_alpha = np.repeat(u_alpha[:, :1], m, axis=1)
    return chain_plus_outcomes(model.alpha_from_uniform(u_alpha), u_meas, u_interf)


def simulate_noisy_batch(setup: NoisySetup, start: int, stop: int) -> dict[str, np.ndarray]:
    """Per-trial layout: ``[truth, (alpha, measure, interfere) x m]`` uniforms."""
    m = setup.copies
    U = trial_uniforms(setup.seed, start, stop, 1 + 3 * m)
    is_j = U[:, 0] < setup.prior_j
    plus = np.where(is_j[:, None], _hypothesis_plus(setup, "J", U), _hypothesis_plus(setup, "I", U))
    count = plus.sum(axis=1)
    return {"is_j": is_j, "plus": plus, "plus_count": count, "decide_j": ~setup.decide_i(count)}


def _noisy_tally(setup: NoisySetup, start: int, stop: int) -> np.ndarray:
    b = simulate_noisy_batch(setup, start, stop)
    wrong = b["decide_j"] != b["is_j"]
    return np.array(
        [stop - start, wrong.sum(), (~b["is_j"]).sum(), (wrong & ~b["is_j"]).sum(), b["is_j"].sum(), (wrong & b["is_j"]).sum()],
        dtype=np.int64,
    )


def exact_noisy_error(setup: NoisySetup) -> tuple[float, float, float]:
    """``(total, given_I, given_J)`` error for independent per-copy angles.

    With a fresh angle per copy every copy is Bernoulli(p_H), so the plus count
    is binomial. With frozen noise the binomial error is averaged over the angle.
    """
    m = setup.copies
    counts = np.arange(m + 1)
    wrong_given = {"I": ~setup.decide_i(counts), "J": setup.decide_i(counts)}
    out = {}
    for label in ("I", "J"):
        model = setup.model_i if label == "I" else setup.model_j
        if setup.frozen_noise and model is not None:
            mask = wrong_given[label]

            def num(a, mask=mask, model=model):
                c2, s2 = np.cos(a) ** 2, np.sin(a) ** 2
                p = c2 * c2 + s2 * s2
                pmf = binom.pmf(counts[:, None], m, p[None, :])
                return model.weight(a) * np.sum(pmf * mask[:, None], axis=0)

            out[label] = simpson_ratio_until_stable(
                num, model.weight, 0.0, HALF_PI, tol=1e-10, n_start=model.quadrature_start
            )
        else:
            p = setup.rates[0] if label == "I" else setup.rates[1]
            out[label] = float(np.sum(binom.pmf(counts, m, p) * wrong_given[label]))
    total = (1 - setup.prior_j) * out["I"] + setup.prior_j * out["J"]
    return total, out["I"], out["J"]


def noisy_discrimination(setup: NoisySetup, trials: int, workers: int = 1) -> ExperimentReport:
    """Monte Carlo error rate of the threshold test under implementation noise.

    Raises IndistinguishableHypotheses when the two predicted plus rates
    differ by less than 1e-6.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p_i, p_j = setup.rates
    n, errors, n_i, err_i, n_j, err_j = (int(x) for x in fold_chunks(partial(_noisy_tally, setup), trials, workers))
    exact, exact_i, exact_j = exact_noisy_error(setup)
    overall = MetricEntry.proportion("error_rate", errors, n, exact)
    metrics = [overall]
    if n_i:
        metrics.append(MetricEntry.proportion("error_given_I", err_i, n_i, exact_i))
    if n_j:
        metrics.append(MetricEntry.proportion("error_given_J", err_j, n_j, exact_j))
    config = {
        "command": "discriminate",
        "noise_i": None if setup.model_i is None else setup.model_i.to_dict(),
        "noise_j": None if setup.model_j is None else setup.model_j.to_dict(),
        "delta": setup.delta,
        "epsilon": setup.epsilon,
        "prior_j": setup.prior_j,
        "seed": setup.seed,
        "frozen_noise": setup.frozen_noise,
    }
    summary = {
        "empirical_error": overall.empirical,
        "ci_low": overall.ci_low,
        "ci_high": overall.ci_high,
        "analytic_error": exact,
        "trials": n,
        "m": setup.copies,
        "m_bound": setup.m_bound,
        "p_plus_I": p_i,
        "p_plus_J": p_j,
    }
    return ExperimentReport(config, metrics, summary)


def run_noisy_trial(setup: NoisySetup, trial_index: int):
    """Scalar reference path (explicit Observables) for one noisy trial.

    Returns ``(is_j, plus_count)``.
    """
    rng = derive_stream(setup.seed, trial_index)
    is_j = rng.random() < setup.prior_j
    label = "J" if is_j else "I"
    model = setup.model_i if label == "I" else setup.model_j
    plus = 0
    alpha0 = None
    for _ in range(setup.copies):
        u_alpha = rng.random()
        if model is None:
            obs = _ideal(label, setup.delta)
        else:
            if alpha0 is None or not setup.frozen_noise:
                alpha0 = float(model.alpha_from_uniform(u_alpha))
            obs = perturbed_observable(alpha0)
        first = measure(KET_PLUS, obs, rng)
        plus += interference_measure(first.post_state, rng) == PLUS
    return is_j, plus


def sweep_rows(model_kind: str, q_values, alpha_mean: float, trials: int, seed: int):
    """Rows ``(q, p_plus_quadrature, p_plus_montecarlo, mc_stderr)`` for a q grid."""
    if model_kind == "uniform":
        models = [(None, NoiseModel.uniform())]
    else:
        models = [(q, NoiseModel.von_mises(q, alpha_mean)) for q in q_values]
    rows = []
    for idx, (q, model) in enumerate(models):
        quad = average_plus_probability(model)
        mean, err = mc_average_plus_probability(model, trials, derive_stream(seed, idx))
        rows.append((q, quad, mean, err))
    return rows


__all__ = [
    "AngleParametrizedObservable",
    "NoiseModel",
    "NoisySetup",
    "average_plus_probability",
    "chain_plus_outcomes",
    "exact_noisy_error",
    "hoeffding_copies",
    "mc_average_plus_probability",
    "noisy_discrimination",
    "perturbed_observable",
    "plus_probability_given_alpha",
    "sample_alpha",
    "simulate_chain_plus_count",
    "sweep_rows",
]
