"""Batches of trials described by a JSON run specification.

A run specification looks like

    {"kind": "covering", "params": {...}, "seeds": [0, 1, 2] | "0..199",
     "instance": "path.json", "instance_seed": 7,
     "settings": {"mode": "monotone", "eps_step": 1e-3, "feas_tol": 1e-9},
     "output": "report.csv"}

With "instance" or "instance_seed" every seed reuses one instance and the
seed only drives rounding; otherwise each seed also generates its own
instance. The fractional stage is solved once per distinct instance.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError, InputError
from .instances import KINDS, generate_instance, load_instance
from .trials import CSV_COLUMNS, TrialReport, TrialSettings, run_trial, solve_fractional


def parse_seeds(value) -> list:
    """Accept a list of ints, a single int, or an inclusive range "a..b"."""
    if isinstance(value, int):
        return [value]
    if isinstance(value, str):
        if ".." in value:
            a, b = value.split("..", 1)
            a, b = int(a), int(b)
            if b < a:
                raise ConfigError(f"empty seed range {value!r}")
            return list(range(a, b + 1))
        return [int(v) for v in value.split(",") if v.strip()]
    return [int(v) for v in value]


@dataclass
class RunSpec:
    kind: str | None = None
    params: dict = field(default_factory=dict)
    seeds: list = field(default_factory=lambda: [0])
    instance: str | None = None
    instance_seed: int | None = None
    settings: TrialSettings = field(default_factory=TrialSettings)
    output: str | None = None

    def __post_init__(self):
        self.seeds = parse_seeds(self.seeds)
        if not self.seeds:
            raise ConfigError("a run needs at least one seed")
        if self.instance is None and self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}")
        if isinstance(self.settings, dict):
            self.settings = TrialSettings.from_dict(self.settings)

    @classmethod
    def from_dict(cls, data: dict) -> "RunSpec":
        allowed = {"kind", "params", "seeds", "instance", "instance_seed", "settings", "output"}
        extra = set(data) - allowed
        if extra:
            raise ConfigError(f"unknown run spec fields {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "RunSpec":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from None
        spec = cls.from_dict(data)
        if spec.instance is not None and not Path(spec.instance).is_absolute():
            spec.instance = str(Path(path).parent / spec.instance)
        return spec

    def instance_key(self, seed: int):
        if self.instance is not None:
            return ("file", self.instance)
        if self.instance_seed is not None:
            return ("gen", self.instance_seed)
        return ("gen", seed)

    def build_instance(self, key):
        if key[0] == "file":
            return load_instance(key[1])
        return generate_instance(self.kind, self.params, key[1])


def run_suite(spec: RunSpec, jobs: int = 1) -> list:
    """Run every trial; results are ordered by seed whatever the completion order."""
    groups: dict = {}
    for seed in spec.seeds:
        groups.setdefault(spec.instance_key(seed), []).append(seed)

    def work(item):
        key, seeds = item
        inst = spec.build_instance(key)
        frac = solve_fractional(inst, spec.settings)
        return [run_trial(inst, s, spec.settings, frac) for s in seeds]

    items = list(groups.items())
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(work, items))
    else:
        chunks = [work(it) for it in items]
    order = {s: i for i, s in enumerate(spec.seeds)}
    reports = [r for chunk in chunks for r in chunk]
    reports.sort(key=lambda r: order[r.seed])
    return reports


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    return str(v)


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow([_fmt(v) for v in r.row()])
    return buf.getvalue()


def write_csv(reports, path) -> None:
    Path(path).write_text(reports_to_csv(reports), encoding="utf-8")


def summarize(reports) -> dict:
    """Ratio quantiles relative to the bound and the audit tally."""
    rel = np.array([r.ratio / r.bound for r in reports if math.isfinite(r.ratio)])
    q = np.quantile(rel, [0.5, 0.9, 1.0]) if rel.size else [math.nan] * 3
    return {
        "trials": len(reports),
        "failed": sum(not r.audit_pass for r in reports),
        "ratio_over_bound_median": float(q[0]),
        "ratio_over_bound_p90": float(q[1]),
        "ratio_over_bound_max": float(q[2]),
    }
