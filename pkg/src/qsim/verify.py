"""One-shot reproduction of every quotable number, as a pass/fail table."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Callable

import numpy as np

from . import protocol
from .lueders import lueders_collapse, lueders_measure_unread, measure, von_neumann_measure_unread
from .noise import (
    NoiseModel,
    average_plus_probability,
    mc_average_plus_probability,
    perturbed_observable,
    plus_probability_given_alpha,
    simulate_chain_plus_count,
)
from .protocol import (
    IDENTITY,
    DiscriminationConfig,
    analytic_error_probability,
    chain_plus_probability,
    enumerate_error_probability,
    interference_measure,
    monte_carlo_error_rate,
    split_observable,
    tally,
)
from .qcore import KET_0, KET_1, KET_PLUS, fidelity, projector_from_basis, spectral_decompose
from .report import ExperimentReport
from .rng import derive_stream, subseed
from .stats import binomial_sigma


@dataclass
class Check:
    id: str
    claim: str
    passed: bool
    value: Any = None
    reference: Any = None
    tolerance: Any = None
    detail: dict[str, Any] = field(default_factory=dict)


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(rng: np.random.Generator, dim: int, degenerate: bool) -> tuple[np.ndarray, list[int] | None]:
    """Random Hermitian matrix; with ``degenerate`` it has planted repeated eigenvalues.

    Returns the matrix and, for planted spectra, the multiplicities in
    ascending eigenvalue order.
    """
    if not degenerate:
        a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        return (a + a.conj().T) / 2, None
    k = int(rng.integers(1, dim))  # at most dim - 1 distinct values forces a repeat
    cuts = np.sort(rng.choice(np.arange(1, dim), size=k - 1, replace=False)) if k > 1 else np.array([], int)
    mult = np.diff(np.concatenate([[0], cuts, [dim]])).astype(int).tolist()
    levels = np.sort(rng.uniform(-3, 3, size=k))
    while k > 1 and np.min(np.diff(levels)) < 1e-3:
        levels = np.sort(rng.uniform(-3, 3, size=k))
    diag = np.repeat(levels, mult)
    u = random_unitary(rng, dim)
    h = (u * diag) @ u.conj().T
    return (h + h.conj().T) / 2, mult


def check_projector_algebra(seed: int, cases: int = 200) -> Check:
    worst = {"idempotence": 0.0, "hermiticity": 0.0, "orthogonality": 0.0, "completeness": 0.0, "reconstruction": 0.0}
    rank_ok = mult_ok = True
    for i in range(cases):
        rng = derive_stream(seed, i)
        dim = int(rng.integers(2, 9))
        h, mult = random_hermitian(rng, dim, degenerate=(i % 2 == 0))
        obs = spectral_decompose(h)
        errs = obs.invariant_errors()
        for key in worst:
            worst[key] = max(worst[key], errs[key])
        rank_ok &= errs["rank"] == 0
        if mult is not None:
            mult_ok &= list(obs.degeneracies) == mult
    passed = (
        rank_ok
        and mult_ok
        and all(worst[k] <= 1e-12 for k in ("idempotence", "hermiticity", "orthogonality", "completeness"))
        and worst["reconstruction"] <= 1e-10
    )
    return Check(
        "1", "projector algebra holds for random Hermitian matrices (dim 2-8)", passed,
        value=worst, tolerance={"algebra": 1e-12, "reconstruction": 1e-10},
        detail={"cases": cases, "ranks_match": bool(rank_ok), "planted_degeneracies_found": bool(mult_ok)},
    )


def check_basis_independence(seed: int, cases: int = 100) -> Check:
    worst = 0.0
    for i in range(cases):
        rng = derive_stream(seed, i)
        dim = int(rng.integers(2, 9))
        h, _ = random_hermitian(rng, dim, degenerate=True)
        obs = spectral_decompose(h)
        k = int(np.argmax(obs.degeneracies))
        v = obs.eigenvectors[k]
        d = v.shape[1]
        p1 = projector_from_basis(v @ random_unitary(rng, d))
        p2 = projector_from_basis(v @ random_unitary(rng, d))
        worst = max(worst, float(np.max(np.abs(p1 - p2))), float(np.max(np.abs(p1 - obs.projectors[k]))))
    return Check("2", "eigenspace projector does not depend on the chosen orthonormal basis", worst <= 1e-10,
                 value=worst, tolerance=1e-10, detail={"cases": cases})


def check_error_rates(seed: int, trials: int = 100_000, m_max: int = 6) -> Check:
    rows, passed = [], True
    for m in range(1, m_max + 1):
        cfg = DiscriminationConfig(delta=0.1, m=m, seed=subseed(seed, m))
        r = monte_carlo_error_rate(cfg, trials)
        ref = 2.0 ** (-m - 1)
        dist = r.metric("error_rate").sigma_distance
        ok = dist is not None and dist <= 3.0 and r.summary["analytic_error"] == ref
        passed &= ok
        rows.append({"m": m, "empirical": r.summary["empirical_error"], "analytic": ref, "sigma_distance": dist})
    return Check("3a", "error(m) = 2^{-m-1}, m=1..6", passed,
                 value=max(row["sigma_distance"] for row in rows), reference=0.0, tolerance="3 sigma",
                 detail={"trials_per_m": trials, "rows": rows})


def check_enumeration(m_max: int = 10) -> Check:
    p_i = chain_plus_probability(IDENTITY)
    p_j = chain_plus_probability(split_observable(0.1))
    chain_ok = abs(p_i - 1.0) <= 1e-12 and abs(p_j - 0.5) <= 1e-12
    half = Fraction(1, 2)
    exact = all(
        enumerate_error_probability(m, half, Fraction(1), half) == Fraction(1, 2 ** (m + 1))
        and enumerate_error_probability(m, Fraction(1), Fraction(1), half) == Fraction(1, 2**m)
        and enumerate_error_probability(m, Fraction(0), Fraction(1), half) == 0
        and analytic_error_probability(m) == 2.0 ** (-m - 1)
        for m in range(1, m_max + 1)
    )
    return Check("3b", "exhaustive enumeration gives exactly 2^{-m-1} for m <= 10", bool(exact and chain_ok),
                 value={"chain_plus_I": p_i, "chain_plus_J": p_j}, reference={"chain_plus_I": 1.0, "chain_plus_J": 0.5},
                 tolerance="exact (rational)", detail={"m_max": m_max})


def check_identity(seed: int, trials: int = 10_000) -> Check:
    post = lueders_collapse(KET_PLUS, IDENTITY, 0)
    fid = fidelity(post, KET_PLUS)
    plus = 0
    for i in range(trials):
        rng = derive_stream(seed, i)
        out = measure(KET_PLUS, IDENTITY, rng)
        plus += interference_measure(out.post_state, rng) == protocol.PLUS
    return Check("4", "measuring |+> with the identity leaves |+>; interference always plus",
                 fid >= 1 - 1e-12 and plus == trials,
                 value={"fidelity": fid, "plus": plus}, reference={"fidelity": 1.0, "plus": trials}, tolerance=1e-12)


def check_per_angle(seed: int, n_alpha: int = 50, samples: int = 1_000_000) -> Check:
    rng0 = derive_stream(seed, 0)
    alphas = rng0.uniform(0, math.pi / 2, n_alpha)
    worst_sigma, worst_exact = 0.0, 0.0
    for i, a in enumerate(alphas):
        obs = perturbed_observable(float(a))
        p = plus_probability_given_alpha(float(a))
        worst_exact = max(worst_exact, abs(chain_plus_probability(obs) - p))
        count = simulate_chain_plus_count(obs, samples, derive_stream(seed, i + 1))
        worst_sigma = max(worst_sigma, abs(count / samples - p) / binomial_sigma(p, samples))
    return Check("5", "simulated chain gives cos^4 + sin^4 per angle", worst_sigma <= 3.0 and worst_exact <= 1e-12,
                 value={"max_sigma_distance": worst_sigma, "max_tree_vs_formula": worst_exact},
                 tolerance={"sigma": 3.0, "exact": 1e-12}, detail={"angles": n_alpha, "samples": samples})


def check_uniform_average(seed: int, samples: int = 1_000_000) -> Check:
    quad = average_plus_probability(NoiseModel.uniform())
    mean, _ = mc_average_plus_probability(NoiseModel.uniform(), samples, derive_stream(seed, 0))
    dist = abs(mean - 0.75) / binomial_sigma(0.75, samples)
    return Check("6", "uniform average = 0.75", abs(quad - 0.75) <= 1e-9 and dist <= 3.0,
                 value={"quadrature": quad, "monte_carlo": mean, "sigma_distance": dist}, reference=0.75,
                 tolerance={"quadrature": 1e-9, "monte_carlo": "3 sigma"}, detail={"samples": samples})


def check_von_mises_limits() -> Check:
    grid = [0.5 * i for i in range(41)]
    avgs = [average_plus_probability(NoiseModel.von_mises(q)) for q in grid]
    uniform = average_plus_probability(NoiseModel.uniform())
    monotone = all(b <= a for a, b in zip(avgs, avgs[1:]))
    bounded = all(0.5 <= a <= 0.75 + 1e-12 for a in avgs)
    passed = abs(avgs[0] - uniform) <= 1e-9 and abs(avgs[-1] - 0.5) <= 0.01 and monotone and bounded
    return Check("7", "von Mises: q=0 gives the uniform 3/4, q=20 gives ~1/2, monotone in between", passed,
                 value={"q0": avgs[0], "q20": avgs[-1], "monotone": monotone, "bounded": bounded},
                 reference={"q0": uniform, "q20": 0.5}, tolerance={"q0": 1e-9, "q20": 0.01})


def check_purity_separation() -> Check:
    lueders = lueders_collapse(KET_PLUS, IDENTITY, 0).density().purity()
    lueders_unread = lueders_measure_unread(KET_PLUS, IDENTITY).purity()
    vn = von_neumann_measure_unread(KET_PLUS, [KET_1, KET_0]).purity()
    passed = abs(lueders - 1) <= 1e-12 and abs(lueders_unread - 1) <= 1e-12 and abs(vn - 0.5) <= 1e-12
    return Check("8", "Lueders keeps |+> pure under the identity; von Neumann in {|1>,|0>} halves purity", passed,
                 value={"lueders": lueders, "lueders_unread": lueders_unread, "von_neumann": vn},
                 reference={"lueders": 1.0, "von_neumann": 0.5}, tolerance=1e-12)


def check_parallel(seed: int, workers: int = 2, trials: int = 40_000) -> Check:
    cfg = DiscriminationConfig(delta=0.1, m=3, seed=seed)
    seq = tally(cfg, trials, workers=1, chunk=5_000)
    par = tally(cfg, trials, workers=workers, chunk=5_000)
    whole = tally(cfg, trials, workers=1, chunk=trials)
    same = bool(np.array_equal(seq, par) and np.array_equal(seq, whole))
    return Check("9", "parallel and sequential trial tallies are identical", same,
                 value=seq.tolist(), reference=par.tolist(), detail={"workers": workers, "trials": trials})


CHECKS: list[tuple[str, Callable[[int, int], Check]]] = [
    ("1", lambda s, w: check_projector_algebra(subseed(s, 1))),
    ("2", lambda s, w: check_basis_independence(subseed(s, 2))),
    ("3a", lambda s, w: check_error_rates(subseed(s, 3))),
    ("3b", lambda s, w: check_enumeration()),
    ("4", lambda s, w: check_identity(subseed(s, 4))),
    ("5", lambda s, w: check_per_angle(subseed(s, 5))),
    ("6", lambda s, w: check_uniform_average(subseed(s, 6))),
    ("7", lambda s, w: check_von_mises_limits()),
    ("8", lambda s, w: check_purity_separation()),
    ("9", lambda s, w: check_parallel(subseed(s, 9), workers=w)),
]


def verify_all(seed: int, workers: int = 2) -> ExperimentReport:
    """Run every check; failures are recorded, never raised."""
    checks = []
    for cid, fn in CHECKS:
        try:
            checks.append(fn(seed, workers))
        except Exception as exc:  # a crash is a failed check, not an aborted run
            checks.append(Check(cid, "check raised", False, detail={"error": f"{type(exc).__name__}: {exc}"}))
    passed = all(c.passed for c in checks)
    summary = {"passed": passed, "checks": [asdict(c) for c in checks]}
    return ExperimentReport({"command": "verify", "seed": seed}, [], summary)


def format_table(report: ExperimentReport) -> str:
    lines = []
    for c in report.summary["checks"]:
        lines.append(f"[{'PASS' if c['passed'] else 'FAIL'}] {c['id']:>3}  {c['claim']}")
    lines.append("ALL PASSED" if report.summary["passed"] else "VERIFICATION FAILED")
    return "\n".join(lines)
