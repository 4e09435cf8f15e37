"""Discriminating the identity from a slightly split spin-1/2 observable.

The black box measures either ``I = diag(1, 1)`` or ``J = diag(1, 1 + delta)``
on copies of ``|+>``. Under ``I`` the Lueders update leaves ``|+>`` untouched;
under ``J`` it collapses onto ``|1>`` or ``|0>``. A second measurement in the
``{|+>, |->}`` basis therefore never yields ``minus`` for ``I`` and yields it
with probability 1/2 per copy for ``J``. Decision rule: ``J`` iff any copy
yields ``minus``.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from functools import lru_cache, partial
from typing import Iterable

import numpy as np

from .errors import DimensionMismatch
from .lueders import State, born_probabilities, lueders_collapse, measure, sample_outcomes
from .qcore import (
    KET_MINUS,
    KET_PLUS,
    Observable,
    observable_from_eigenspaces,
    spectral_decompose,
)
from .report import ExperimentReport, MetricEntry
from .rng import DEFAULT_SEED, check_seed, derive_stream, fold_chunks, trial_uniforms

PLUS, MINUS = "plus", "minus"
HYPOTHESES = ("I", "J")

# group 0 (eigenvalue -1) is |->, group 1 (eigenvalue +1) is |+>
INTERFERENCE = observable_from_eigenspaces([-1.0, 1.0], [[KET_MINUS], [KET_PLUS]])
IDENTITY = spectral_decompose(np.eye(2))


@lru_cache(maxsize=64)
def split_observable(delta: float) -> Observable:
    """``diag(1, 1 + delta)``, kept nondegenerate however small ``delta`` is."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    if 1.0 + delta == 1.0:
        raise ValueError(f"delta={delta!r} is below double precision resolution at 1")
    tol = min(1e-10 * max(1.0, 1.0 + delta), delta / 2)
    return spectral_decompose(np.diag([1.0, 1.0 + delta]).astype(complex), tol_degen=tol)


@dataclass(frozen=True)
class DiscriminationConfig:
    delta: float
    m: int
    prior_j: float = 0.5
    seed: int = DEFAULT_SEED
    early_stop: bool = False

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be > 0: with delta = 0 the two observables coincide")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")
        if not 0 < self.prior_j < 1:
            raise ValueError("prior_j must lie in (0, 1)")
        check_seed(self.seed)

    def observable(self, label: str) -> Observable:
        return IDENTITY if label == "I" else split_observable(self.delta)


@dataclass(frozen=True)
class TrialRecord:
    true_observable: str
    interference_outcomes: tuple[str, ...]
    decision: str
    correct: bool
    eigenvalues: tuple[float, ...] = ()


def decides_j(minus: np.ndarray) -> np.ndarray:
    """Decision rule on a boolean ``minus`` array (last axis = copies): J iff any minus."""
    return np.any(minus, axis=-1)


def decide(outcomes: Iterable[str]) -> str:
    return "J" if decides_j(np.array([o == MINUS for o in outcomes], dtype=bool)) else "I"


def interference_measure(state: State, rng: np.random.Generator) -> str:
    """Measure in the ``{|+>, |->}`` basis; one uniform draw."""
    if state.dim != 2:
        raise DimensionMismatch(f"interference measurement needs a qubit, got dim {state.dim}")
    k = sample_outcomes(born_probabilities(state, INTERFERENCE), rng.random())
    return PLUS if k == 1 else MINUS


def draw_truth(rng: np.random.Generator, prior_j: float) -> str:
    return "J" if rng.random() < prior_j else "I"


def run_trial(cfg: DiscriminationConfig, true_obs: str, rng: np.random.Generator) -> TrialRecord:
    """Measure ``m`` fresh copies of ``|+>`` and apply the decision rule.

    The first measurement's eigenvalue is recorded but never consulted.
    """
    if true_obs not in HYPOTHESES:
        raise ValueError(f"unknown observable label {true_obs!r}")
    obs = cfg.observable(true_obs)
    outcomes, eigenvalues = [], []
    for _ in range(cfg.m):
        first = measure(KET_PLUS, obs, rng)
        eigenvalues.append(first.eigenvalue)
        outcomes.append(interference_measure(first.post_state, rng))
        if cfg.early_stop and outcomes[-1] == MINUS:
            break
    decision = decide(outcomes)
    return TrialRecord(true_obs, tuple(outcomes), decision, decision == true_obs, tuple(eigenvalues))


def replay_trial(cfg: DiscriminationConfig, trial_index: int, truth: str | None = None) -> TrialRecord:
    """Scalar reference path for trial ``trial_index`` of a Monte Carlo run."""
    rng = derive_stream(cfg.seed, trial_index)
    drawn = draw_truth(rng, cfg.prior_j)
    return run_trial(cfg, truth or drawn, rng)


def analytic_error_probability(m: int, prior_j: float = 0.5) -> float:
    """Prior-weighted error: only a true ``J`` can be misread, with chance 2^-m."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return prior_j * 2.0 ** (-m)


def worst_case_error_probability(m: int) -> float:
    return 2.0 ** (-m)


def required_copies(epsilon: float, prior_j: float = 0.5) -> int:
    """Smallest m whose analytic error does not exceed ``epsilon``."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    m = 1
    while analytic_error_probability(m, prior_j) > epsilon:
        m += 1
    return m


def chain_tree(obs: Observable, state=KET_PLUS) -> tuple[np.ndarray, np.ndarray, list]:
    """First-measurement probabilities, and per outcome the interference probabilities.

    Returns ``(p_first, p_interf, post_states)`` where ``p_interf[k]`` is
    ``[P(minus), P(plus)]`` for the Lueders post-state of outcome ``k``
    (rows of impossible outcomes are left as ``nan``).
    """
    p_first = born_probabilities(state, obs)
    p_interf = np.full((obs.K, 2), np.nan)
    posts = []
    for k, pk in enumerate(p_first):
        if pk < 1e-14:
            posts.append(None)
            continue
        post = lueders_collapse(state, obs, k)
        posts.append(post)
        p_interf[k] = born_probabilities(post, INTERFERENCE)
    return p_first, p_interf, posts


def chain_plus_probability(obs: Observable, state=KET_PLUS) -> float:
    """P(plus) after measuring ``obs`` then interfering, summed over the tree."""
    p_first, p_interf, _ = chain_tree(obs, state)
    ok = ~np.isnan(p_interf[:, 1])
    return float(np.sum(p_first[ok] * p_interf[ok, 1]))


def enumerate_error_probability(m: int, prior_j, p_plus_i, p_plus_j):
    """Exact error by summing over all 2^m interference strings.

    Exact in rational arithmetic when given ``Fraction`` inputs.
    """
    total = 0 * prior_j
    for outcomes in itertools.product((PLUS, MINUS), repeat=m):
        n_plus = outcomes.count(PLUS)
        w_i = p_plus_i**n_plus * (1 - p_plus_i) ** (m - n_plus)
        w_j = p_plus_j**n_plus * (1 - p_plus_j) ** (m - n_plus)
        decision = decide(outcomes)
        total += (1 - prior_j) * w_i * (decision != "I") + prior_j * w_j * (decision != "J")
    return total


def _simulate_columns(cfg: DiscriminationConfig, label: str, U: np.ndarray) -> np.ndarray:
    """Boolean ``minus`` matrix (trials x m) for hypothesis ``label``."""
    p_first, p_interf, _ = chain_tree(cfg.observable(label))
    u_first, u_interf = U[:, 1::2], U[:, 2::2]
    k = sample_outcomes(p_first, u_first)
    minus = np.zeros_like(u_first, dtype=bool)
    for kk in range(len(p_first)):
        if np.isnan(p_interf[kk, 0]):
            continue
        sel = k == kk
        minus[sel] = sample_outcomes(p_interf[kk], u_interf[sel]) == 0
    return minus


def simulate_batch(cfg: DiscriminationConfig, start: int, stop: int, truth: str | None = None) -> dict[str, np.ndarray]:
    """Vectorized replay of trials ``[start, stop)``; matches :func:`replay_trial`."""
    U = trial_uniforms(cfg.seed, start, stop, 1 + 2 * cfg.m)
    is_j = U[:, 0] < cfg.prior_j
    if truth is not None:
        is_j = np.full(len(U), truth == "J")
    minus = np.where(is_j[:, None], _simulate_columns(cfg, "J", U), _simulate_columns(cfg, "I", U))
    any_minus = minus.any(axis=1)
    if cfg.early_stop:
        used = np.where(any_minus, minus.argmax(axis=1) + 1, cfg.m)
    else:
        used = np.full(len(U), cfg.m)
    return {"is_j": is_j, "minus": minus, "decide_j": decides_j(minus), "copies_used": used}


def _tally(cfg: DiscriminationConfig, truth: str | None, start: int, stop: int) -> np.ndarray:
    b = simulate_batch(cfg, start, stop, truth)
    wrong = b["decide_j"] != b["is_j"]
    return np.array(
        [
            stop - start,
            wrong.sum(),
            (~b["is_j"]).sum(),
            (wrong & ~b["is_j"]).sum(),
            b["is_j"].sum(),
            (wrong & b["is_j"]).sum(),
            b["copies_used"].sum(),
        ],
        dtype=np.int64,
    )


def tally(cfg: DiscriminationConfig, trials: int, truth: str | None = None, workers: int = 1, chunk: int = 20_000) -> np.ndarray:
    """Integer counts ``[trials, errors, n_I, err_I, n_J, err_J, copies_used]``."""
    return fold_chunks(partial(_tally, cfg, truth), trials, workers=workers, chunk=chunk)


def monte_carlo_error_rate(
    cfg: DiscriminationConfig,
    trials: int,
    truth: str | None = None,
    workers: int = 1,
) -> ExperimentReport:
    """Empirical error rate of the decision rule with a Wilson interval.

    ``truth`` pins the black box to ``"I"`` or ``"J"`` instead of drawing it
    from the prior; the reference is then the conditional error.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n, errors, n_i, err_i, n_j, err_j, used = (int(x) for x in tally(cfg, trials, truth, workers))
    if truth is None:
        analytic = analytic_error_probability(cfg.m, cfg.prior_j)
    else:
        analytic = 0.0 if truth == "I" else worst_case_error_probability(cfg.m)
    overall = MetricEntry.proportion("error_rate", errors, n, analytic)
    metrics = [overall]
    if n_i:
        metrics.append(MetricEntry.proportion("error_given_I", err_i, n_i, 0.0))
    if n_j:
        metrics.append(MetricEntry.proportion("error_given_J", err_j, n_j, worst_case_error_probability(cfg.m)))
    config = {
        "command": "discriminate",
        "delta": cfg.delta,
        "m": cfg.m,
        "prior_j": cfg.prior_j,
        "seed": cfg.seed,
        "early_stop": cfg.early_stop,
        "truth": truth,
    }
    summary = {
        "empirical_error": overall.empirical,
        "ci_low": overall.ci_low,
        "ci_high": overall.ci_high,
        "analytic_error": analytic,
        "trials": n,
        "m": cfg.m,
        "mean_copies_used": used / n,
    }
    return ExperimentReport(config, metrics, summary)


def write_trials_csv(path, cfg: DiscriminationConfig, trials: int, truth: str | None = None, chunk: int = 20_000) -> None:
    """Per-trial CSV: trial, truth, outcomes ('+'/'-' per copy used), decision, correct."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "truth", "outcomes", "decision", "correct"])
        for lo in range(0, trials, chunk):
            hi = min(lo + chunk, trials)
            b = simulate_batch(cfg, lo, hi, truth)
            for i in range(hi - lo):
                signs = "".join("-" if x else "+" for x in b["minus"][i, : b["copies_used"][i]])
                t = "J" if b["is_j"][i] else "I"
                d = "J" if b["decide_j"][i] else "I"
                w.writerow([lo + i, t, signs, d, int(t == d)])

