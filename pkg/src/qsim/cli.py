"""Command line entry point: ``qsim measure|discriminate|noise-sweep|verify``.

Exit codes: 0 success, 1 verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import qcore
from .errors import QsimError
from .lueders import born_probabilities, lueders_collapse, sample_outcomes
from .noise import NoiseModel, NoisySetup, noisy_discrimination, simulate_noisy_batch, sweep_rows
from .protocol import IDENTITY, DiscriminationConfig, monte_carlo_error_rate, split_observable, write_trials_csv
from .report import ExperimentReport, MetricEntry
from .rng import resolve_seed, trial_uniforms
from .verify import format_table, verify_all

log = logging.getLogger("qsim")

STATES = {"plus": qcore.KET_PLUS, "minus": qcore.KET_MINUS, "one": qcore.KET_1, "zero": qcore.KET_0}


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` inclusive of ``stop`` (within rounding), or a single value."""
    parts = text.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must be start:stop:step, got {text!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}")
    n = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + i * step, 12) for i in range(n + 1)]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (else $QSIM_SEED, else default)")
    common.add_argument("--trials", type=_positive_int, default=None)
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--out", default="-", help="output path, '-' for stdout")
    common.add_argument("--workers", type=_positive_int, default=1, help="processes for trial fan-out")
    common.add_argument("--timing", action="store_true", help="include wall time in JSON reports")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="qsim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("measure", parents=[common], help="sample Lueders measurements of a state")
    m.add_argument("--observable", default="J", help="I, J, or path to an observable JSON document")
    m.add_argument("--delta", type=float, default=0.1, help="splitting of J")
    m.add_argument("--state", default="plus", help="plus|minus|one|zero or path to a pure_state JSON document")

    d = sub.add_parser("discriminate", parents=[common], help="identity vs split observable experiment")
    d.add_argument("--m", type=_positive_int, default=None, help="copies per trial")
    d.add_argument("--delta", type=float, default=0.1)
    d.add_argument("--prior-j", type=float, default=0.5)
    d.add_argument("--early-stop", action="store_true", help="stop a trial at its first minus outcome")
    d.add_argument("--truth", choices=("I", "J"), default=None, help="pin the black box instead of drawing it")
    d.add_argument("--csv", default=None, help="write per-trial records to this CSV path")
    for h in ("i", "j"):
        d.add_argument(f"--noise-{h}", choices=("none", "uniform", "vonmises"), default="none",
                       help=f"eigenbasis noise on hypothesis {h.upper()}")
        d.add_argument(f"--q-{h}", type=float, default=0.0)
        d.add_argument(f"--alpha-mean-{h}", type=float, default=math.pi / 4)
    d.add_argument("--epsilon", type=float, default=0.05, help="target error for the Hoeffding copy count")
    d.add_argument("--frozen-noise", action="store_true", help="one angle per trial instead of per copy")

    s = sub.add_parser("noise-sweep", parents=[common], help="plus probability against noise concentration")
    s.add_argument("--model", choices=("uniform", "vonmises"), default="vonmises")
    s.add_argument("--alpha-mean", type=float, default=math.pi / 4)
    s.add_argument("--q-grid", type=parse_grid, default=parse_grid("0:20:0.5"))

    sub.add_parser("verify", parents=[common], help="reproduce every headline number")
    return p


def _noise_model(kind: str, q: float, alpha_mean: float) -> NoiseModel | None:
    if kind == "none":
        return None
    if kind == "uniform":
        return NoiseModel.uniform()
    return NoiseModel.von_mises(q, alpha_mean)


def _load_json(path: str, kind: str):
    return qcore.loads(Path(path).read_text(), kind=kind)


def cmd_measure(args, seed: int) -> tuple[ExperimentReport, list[list]]:
    if args.observable == "I":
        obs = IDENTITY
    elif args.observable == "J":
        obs = split_observable(args.delta)
    else:
        obs = _load_json(args.observable, "observable")
    state = STATES[args.state] if args.state in STATES else _load_json(args.state, "pure_state")
    trials = args.trials or 10_000
    p = born_probabilities(state, obs)
    k = sample_outcomes(p, trial_uniforms(seed, 0, trials, 1)[:, 0])
    counts = np.bincount(k, minlength=obs.K)
    metrics, outcomes, rows = [], [], []
    for idx, (lam, pk, c) in enumerate(zip(obs.eigenvalues, p, counts)):
        metrics.append(MetricEntry.proportion(f"P(k={idx})", int(c), trials, float(pk)))
        post = lueders_collapse(state, obs, idx).to_json_dict() if pk >= 1e-14 else None
        outcomes.append({"k": idx, "eigenvalue": lam, "probability": float(pk), "count": int(c),
                         "degeneracy": obs.degeneracies[idx], "post_state": post})
        rows.append([idx, lam, float(pk), int(c), int(c) / trials])
    config = {"command": "measure", "seed": seed, "trials": trials, "observable": obs.to_json_dict(),
              "state": state.to_json_dict()}
    report = ExperimentReport(config, metrics, {"outcomes": outcomes, "trials": trials})
    return report, [["k", "eigenvalue", "probability", "count", "frequency"], *rows]


def cmd_discriminate(args, seed: int, workers: int) -> tuple[ExperimentReport, list[list]]:
    trials = args.trials or 100_000
    model_i = _noise_model(args.noise_i, args.q_i, args.alpha_mean_i)
    model_j = _noise_model(args.noise_j, args.q_j, args.alpha_mean_j)
    if model_i is None and model_j is None:
        if args.m is None:
            raise UsageError("--m is required without noise models")
        cfg = DiscriminationConfig(args.delta, args.m, args.prior_j, seed, args.early_stop)
        report = monte_carlo_error_rate(cfg, trials, truth=args.truth, workers=workers)
        if args.csv:
            write_trials_csv(args.csv, cfg, trials, truth=args.truth)
    else:
        if args.truth or args.early_stop:
            raise UsageError("--truth and --early-stop apply to the noiseless protocol only")
        setup = NoisySetup(model_i, model_j, args.m, args.epsilon, args.delta, args.prior_j, seed, args.frozen_noise)
        report = noisy_discrimination(setup, trials, workers=workers)
        if args.csv:
            _write_noisy_csv(args.csv, setup, trials)
    keys = ["empirical_error", "ci_low", "ci_high", "analytic_error", "trials", "m"]
    return report, [keys, [report.summary[k] for k in keys]]


def _write_noisy_csv(path: str, setup: NoisySetup, trials: int, chunk: int = 20_000) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "truth", "outcomes", "decision", "correct"])
        for lo in range(0, trials, chunk):
            hi = min(lo + chunk, trials)
            b = simulate_noisy_batch(setup, lo, hi)
            for i in range(hi - lo):
                t = "J" if b["is_j"][i] else "I"
                dec = "J" if b["decide_j"][i] else "I"
                w.writerow([lo + i, t, "".join("+" if x else "-" for x in b["plus"][i]), dec, int(t == dec)])


def cmd_noise_sweep(args, seed: int) -> tuple[ExperimentReport, list[list]]:
    trials = args.trials or 100_000
    kind = "uniform" if args.model == "uniform" else "von_mises"
    rows = sweep_rows(kind, args.q_grid, args.alpha_mean, trials, seed)
    table = [["q", "p_plus_quadrature", "p_plus_montecarlo", "mc_stderr"]]
    table += [["" if q is None else q, quad, mc, err] for q, quad, mc, err in rows]
    config = {"command": "noise-sweep", "model": kind, "seed": seed, "trials": trials}
    if kind == "von_mises":
        config["alpha_mean"] = args.alpha_mean
    summary = {"rows": [dict(zip(table[0], r)) for r in rows]}
    return ExperimentReport(config, [], summary), table


def _csv_text(table: list[list]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(table)
    return buf.getvalue()


def _emit(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(out).write_text(text)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        seed = resolve_seed(args.seed)
        t0 = time.perf_counter()
        if args.command == "measure":
            report, table = cmd_measure(args, seed)
        elif args.command == "discriminate":
            report, table = cmd_discriminate(args, seed, args.workers)
        elif args.command == "noise-sweep":
            report, table = cmd_noise_sweep(args, seed)
        else:
            report = verify_all(seed, workers=max(2, args.workers))
            table = [["id", "passed", "claim"]] + [[c["id"], int(c["passed"]), c["claim"]] for c in report.summary["checks"]]
            print(format_table(report), file=sys.stderr)
        report.wall_time = time.perf_counter() - t0
        log.info("%s finished in %.2f s", args.command, report.wall_time)
    except (QsimError, ValueError, UsageError, OSError, json.JSONDecodeError) as exc:
        print(f"qsim: error: {exc}", file=sys.stderr)
        return 2

    fmt = args.format or ("csv" if args.command == "noise-sweep" else "json")
    _emit(_csv_text(table) if fmt == "csv" else report.to_json(include_timing=args.timing), args.out)
    if args.command == "verify" and not report.summary["passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
