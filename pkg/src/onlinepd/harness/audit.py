"""Invariant audits over a finished engine state."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..engine import Mode, PrimalDualState


@dataclass(frozen=True)
class Tolerances:
    weak: float = 1e-6          # dual <= primal + weak (1 + |primal|)
    dual: float = 1e-6          # sum_i a_ij y_i <= mu_j + dual
    landing: float = 1e-9       # a_t . x in [1 - landing, 1 + landing]
    growth: float = 1e-6        # slack of the exponential lower bound on x
    ratio: float = 1e-6         # primal / dual <= bound (1 + ratio)
    monotone: float = 1e-12


@dataclass
class AuditResult:
    failures: list = field(default_factory=list)
    worst: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures

    def merge(self, other: "AuditResult", prefix: str = "") -> "AuditResult":
        self.failures += [prefix + f for f in other.failures]
        for k, v in other.worst.items():
            self.worst[prefix + k] = v
        return self

    def require(self, cond: bool, message: str):
        if not cond:
            self.failures.append(message)


def _worst(values, fn, default):
    values = [v for v in values if not (isinstance(v, float) and math.isnan(v))]
    return fn(values) if values else default


def audit_engine(state: PrimalDualState, tol: Tolerances = Tolerances(), check_ratio: bool = True) -> AuditResult:
    """Check every engine invariant recorded during the run."""
    out = AuditResult()
    cfg = state.config
    live = [a for a in state.audits if not a.skipped]
    weak_mid = _worst([a.weak_duality for a in live], max, -math.inf)
    weak = _worst([a.weak_duality_landed for a in live], max, -math.inf)
    weak_cert = _worst([a.weak_duality_certified for a in live], max, -math.inf)
    vstep = _worst([a.dual_violation_steps for a in live], max, -math.inf)
    vfull = _worst([a.dual_violation_full for a in live], max, -math.inf)
    land = _worst([abs(a.row_value - 1.0) for a in live], max, 0.0)
    below = _worst([1.0 - a.row_value for a in state.audits], max, -math.inf)
    dx = _worst([a.min_dx for a in live], min, math.inf)
    dmu = _worst([a.min_dmu for a in live], min, math.inf)
    dy = _worst([a.min_dy for a in live], min, math.inf)
    growth = _worst([a.growth_slack for a in live], min, math.inf)
    out.worst.update(weak_duality=weak, weak_duality_certified=weak_cert, weak_duality_midarrival=weak_mid,
                     dual_violation=max(vstep, vfull), landing=land,
                     min_dx=dx, min_dmu=dmu, min_dy=dy, growth_slack=growth)
    certify = cfg.mode is Mode.MINIMIZE_CERTIFY
    if not certify:
        # x is feasible only once a row lands; mid-arrival records get the
        # bound with y_t discounted by the uncovered part of row t
        out.require(weak <= tol.weak, f"weak duality exceeded by {weak:.3g}")
        out.require(weak_cert <= tol.weak, f"mid-arrival weak duality exceeded by {weak_cert:.3g}")
        out.require(max(vstep, vfull) <= tol.dual, f"dual constraint violated by {max(vstep, vfull):.3g}")
    out.require(land <= tol.landing, f"row landed {land:.3g} away from 1")
    out.require(below <= tol.landing, f"row left uncovered by {below:.3g}")
    out.require(dx >= -tol.monotone, f"x decreased by {-dx:.3g}")
    out.require(dmu >= -tol.monotone, f"mu decreased by {-dmu:.3g}")
    out.require(all(a.mu_monotone for a in state.audits), "mu decreased between arrivals")
    if cfg.mode is Mode.MONOTONE:
        out.require(dy >= -tol.monotone, f"y decreased by {-dy:.3g}")
    if cfg.mode is Mode.WITH_DECREASE:
        out.require(growth >= -tol.growth, f"growth bound slack {growth:.3g}")
    if certify and state.n_rows:
        y, mu, _ = state.certificate_minimization()
        lhs = np.zeros(state.n)
        for t, r in enumerate(state.rows):
            lhs[r.indices] += r.values * y[t]
        viol = float(np.max(lhs - mu, initial=-math.inf))
        out.worst["dual_violation"] = viol
        out.require(viol <= tol.dual, f"hindsight dual violated by {viol:.3g}")
    if check_ratio:
        rep = state.duality_report()
        out.worst["ratio_over_bound"] = rep.ratio / rep.bound
        out.require(rep.ratio <= rep.bound * (1 + tol.ratio), f"ratio {rep.ratio:.6g} above bound {rep.bound:.6g}")
    return out
