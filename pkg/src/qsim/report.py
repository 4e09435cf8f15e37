"""Experiment reports: config echo plus metric entries, JSON canonical."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any

from .stats import sigma_distance, wilson_interval


@dataclass
class MetricEntry:
    name: str
    empirical: float
    trials: int
    successes: int | None = None
    analytic: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None
    sigma_distance: float | None = None

    @classmethod
    def proportion(cls, name: str, successes: int, trials: int, analytic: float | None = None) -> MetricEntry:
        successes, trials = int(successes), int(trials)
        emp = successes / trials
        lo, hi = wilson_interval(successes, trials)
        dist = None if analytic is None else sigma_distance(emp, analytic, trials)
        return cls(name, emp, trials, successes, analytic, lo, hi, dist)


@dataclass
class ExperimentReport:
    """Result of one CLI command or library experiment.

    ``wall_time`` is excluded from :meth:`to_json` unless asked for, so that a
    fixed configuration always serializes to identical bytes.
    """

    config: dict[str, Any]
    metrics: list[MetricEntry] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)
    wall_time: float | None = None

    def metric(self, name: str) -> MetricEntry:
        for m in self.metrics:
            if m.name == name:
                return m
        raise KeyError(name)

    def to_dict(self, include_timing: bool = False) -> dict[str, Any]:
        out = dict(self.summary)
        out["config"] = self.config
        out["metrics"] = [asdict(m) for m in self.metrics]
        if include_timing:
            out["wall_time"] = self.wall_time
        return out

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), sort_keys=True, indent=2, allow_nan=False) + "\n"
