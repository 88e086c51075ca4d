"""One trial: fractional run, optional rounding for a seed, audits, report row."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..apps.ccfl import CCFLFractional, CCFLInstance, run_ccfl_fractional
from ..apps.lp_norm import MixedPCInstance
from ..apps.pmpc import (PMPCFractional, PMPCInstance, pmpc_oracle_enumerate, production_cost,
                         production_cost_at_gradient, run_pmpc_fractional)
from ..apps.set_cover import SetCoverFractional, SetCoverInstance, run_setcover_fractional
from ..engine import EngineConfig, Mode, PrimalDualState
from ..errors import ConfigError
from ..objective import ObjectiveSpec
from ..rounding.ccfl import CCFLRoundState, ccfl_round_client
from ..rounding.pmpc import PMPCRoundState, pmpc_round_buyer
from ..rounding.rng import RngStream
from ..rounding.setcover import round_setcover
from .audit import AuditResult, Tolerances, audit_engine
from .instances import CoveringInstance, kind_of

CSV_COLUMNS = ("kind", "seed", "n", "m", "d", "p", "mode", "primal", "dual", "ratio", "bound", "steps",
               "rounded_cost", "fallbacks", "max_load", "audit_pass")


@dataclass(frozen=True)
class TrialSettings:
    mode: str = "with_decrease"
    eps_step: float = 1e-3
    feas_tol: float = 1e-9
    delta: float | None = None      # default: 1 for linear objectives, 1/(pL) otherwise
    rho: float | None = None        # monotone mode; default: observed column ratio
    alpha: float | None = None      # CCFL phase checks; default pL
    eps_round: float = 0.5          # PMPC rounding
    record_trace: bool = False

    @classmethod
    def from_dict(cls, data: dict | None) -> "TrialSettings":
        data = dict(data or {})
        known = {k: data.pop(k) for k in list(data) if k in cls.__dataclass_fields__}
        if data:
            raise ConfigError(f"unknown trial settings {sorted(data)}")
        return cls(**known)


@dataclass
class TrialReport:
    kind: str
    seed: int
    n: int
    m: int
    d: int
    p: float
    mode: str
    primal: float
    dual: float
    ratio: float
    bound: float
    steps: int
    rounded_cost: float = math.nan
    fallbacks: int = 0
    max_load: float = math.nan
    audit_pass: bool = True
    failures: list = field(default_factory=list)
    arrival_steps: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


@dataclass
class Fractional:
    """Seed-independent part of a trial."""

    kind: str
    instance: object
    state: PrimalDualState | None
    audit: AuditResult
    app: object = None
    p: float = 1.0
    d: int = 1


def _engine(spec: ObjectiveSpec, d: int, p: float, s: TrialSettings, rho: float = 1.0) -> PrimalDualState:
    mode = Mode.parse(s.mode)
    base = EngineConfig(d=d, delta=1.0, mode=mode, rho=rho)
    delta = s.delta if s.delta is not None else (1.0 if p == 1 else 1.0 / (p * base.ratio_constant))
    cfg = EngineConfig(d=d, delta=delta, mode=mode, rho=rho, eps_step=s.eps_step, feas_tol=s.feas_tol,
                       record_trace=s.record_trace)
    return PrimalDualState(spec, cfg)


def solve_fractional(instance, settings: TrialSettings = TrialSettings()) -> Fractional:
    kind = kind_of(instance)
    tol = Tolerances(landing=max(settings.feas_tol, 1e-9))
    if kind in ("covering", "mixed_pc"):
        if kind == "covering":
            spec, rows, d, p = instance.spec, instance.rows, instance.d, instance.spec.max_exponent
            rho = instance.column_ratio()
        else:
            spec = ObjectiveSpec.from_forms(instance.B, instance.p, 1.0 / instance.p)
            rows, d, p = instance.rows, instance.sparsity, instance.p
            rho = CoveringInstance(spec, rows, d).column_ratio()
        rho = settings.rho if settings.rho is not None else rho
        state = _engine(spec, d, p, settings, max(rho, 1.0))
        state.process_all(rows)
        return Fractional(kind, instance, state, audit_engine(state, tol), p=p, d=d)
    if kind == "setcover_multicost":
        d = instance.degree
        app = run_setcover_fractional(instance, d, eps_step=settings.eps_step, feas_tol=settings.feas_tol,
                                      record_trace=settings.record_trace)
        return Fractional(kind, instance, app.state, audit_engine(app.state, tol), app, instance.p, d)
    if kind == "ccfl":
        app = run_ccfl_fractional(instance, settings.alpha, Mode.parse(settings.mode), settings.eps_step,
                                  settings.feas_tol, settings.record_trace)
        audit = AuditResult()
        for ph in app.phases:
            audit.merge(audit_engine(ph.state, tol), f"phase {ph.index}: ")
            if ph.clients:
                audit.require(ph.check.ok, f"phase {ph.index} ended with failed inequalities")
        nph = len(app.phases)
        audit.require(nph <= math.log2(app.M_final / app.M_initial) + 1 + 1e-9, f"{nph} phases for the M range")
        m = instance.m
        audit.require(app.max_rows_per_client <= 4 * m, f"a client needed {app.max_rows_per_client} rows")
        low = min((e.cover for e in app.events), default=0.5)
        audit.require(low >= 0.5 - 1e-9, f"client left at half-coverage {low:.6g}")
        return Fractional(kind, instance, app.phases[-1].state, audit, app, instance.p, m)
    if kind == "pmpc":
        app = run_pmpc_fractional(instance, eps_step=settings.eps_step, feas_tol=settings.feas_tol,
                                  record_trace=settings.record_trace)
        audit = audit_engine(app.state, tol)
        limit = 2 * (instance.m + 1) * instance.R
        worst = max(app.iterations, default=0)
        audit.worst["iterations_over_limit"] = worst / limit
        audit.require(worst <= limit, f"buyer needed {worst} oracle iterations (limit {limit:g})")
        x, m = app.state.x, instance.m
        for i, bl in enumerate(instance.buyers):
            audit.require(pmpc_oracle_enumerate(2 * x[m + i], 2 * x[:m], bl) is None,
                          f"buyer {i} violated at the doubled solution")
            final = app.allocation(i)
            audit.require(bool(np.all(final >= app.allocs[i] - 1e-12)), f"allocation of buyer {i} decreased")
            audit.require(final.sum() <= 1 + 1e-6, f"buyer {i} allocated mass {final.sum():.6g}")
        mus = np.array(app.snapshots) if app.snapshots else np.zeros((0, m))
        audit.require(bool(np.all(np.diff(mus, axis=0) >= -1e-12)), "production decreased between buyers")
        return Fractional(kind, instance, app.state, audit, app, instance.p_conj, instance.d)
    raise ConfigError(f"unsupported kind {kind}")


def _round_setcover(frac: Fractional, seed: int, rep: TrialReport, audit: AuditResult):
    inst: SetCoverInstance = frac.instance
    app: SetCoverFractional = frac.app
    sets_of = [inst.sets_containing(e) for e in inst.arrivals]
    res = round_setcover(app.snapshots, sets_of, inst.costs, inst.p, inst.universe, seed)
    final = res.chosen.copy()
    final[res.fallback[res.fallback >= 0]] = True
    covered = all(final[list(c)].any() for c in sets_of)
    audit.require(covered, "an element was left uncovered")
    rep.rounded_cost = float(np.sum(res.cost_total ** inst.p) ** (1.0 / inst.p))
    rep.fallbacks = res.fallbacks
    rep.max_load = float(res.cost_total.max(initial=0.0))
    frac_cost = inst.costs @ app.state.x
    rep.extra.update(uncovered=res.uncovered, cost_rounded=res.cost_rounded.tolist(),
                     cost_bound=(res.rate * frac_cost).tolist(), rate=res.rate)


def _round_ccfl(frac: Fractional, seed: int, rep: TrialReport, audit: AuditResult):
    inst: CCFLInstance = frac.instance
    app: CCFLFractional = frac.app
    st = CCFLRoundState(inst.m, inst.n, RngStream(seed))
    limit_factor = 32.0 * app.alpha * math.log(max(inst.m * inst.n, 2))
    worst = 0.0
    cur = None

    def close():
        if st.fixed is not None and st.fixed.any():
            return float(st.phase_load[st.fixed].max() / (limit_factor * st.M))
        return 0.0

    for e in app.events:
        if e.phase != cur:
            if cur is not None:
                worst = max(worst, close())
            st.start_phase(e.phase, e.M)
            cur = e.phase
        ccfl_round_client(st, e.j, e.xbar, e.ybar, inst.opening, inst.assign[:, e.j], inst.load[:, e.j])
    if cur is not None:
        worst = max(worst, close())
    audit.require(len(st.assignment) == inst.n, "a client was not assigned")
    makespan = float(st.total_load.max(initial=0.0))
    rep.rounded_cost = st.opening_cost(inst.opening) + st.assign_cost + makespan
    rep.fallbacks = st.fallbacks
    rep.max_load = makespan
    rep.extra.update(fixed_load_ratio=worst, phases=len(app.phases), M_initial=app.M_initial,
                     M_final=app.M_final, alpha=app.alpha)


def _round_pmpc(frac: Fractional, seed: int, rep: TrialReport, audit: AuditResult, eps: float):
    inst: PMPCInstance = frac.instance
    app: PMPCFractional = frac.app
    st = PMPCRoundState(inst.m, eps, inst.beta, RngStream(seed))
    worst = -math.inf
    value = 0.0
    for i, bl in enumerate(inst.buyers):
        mu = app.snapshots[i]
        k = pmpc_round_buyer(st, i, bl, app.allocs[i], mu)
        if k is not None:
            value += bl[k].value
        worst = max(worst, float(np.max(st.M - st.cap(mu), initial=-math.inf)))
    audit.require(worst <= 1e-9, f"integral production exceeds its cap by {worst:.3g}")
    gM = production_cost(inst.rates, inst.q, st.M.astype(np.float64))
    g_mu = production_cost_at_gradient(inst, app.state.config.delta * app.prices)
    gL = production_cost(inst.rates, inst.q, np.full(inst.m, st.L))
    rhs = st.a * g_mu + gL.lower
    audit.require(gM.upper <= rhs * (1 + 1e-9), f"production cost {gM.upper:.6g} above {rhs:.6g}")
    rep.rounded_cost = gM.upper
    rep.fallbacks = st.skipped
    rep.max_load = float(st.M.max(initial=0))
    rep.extra.update(profit=value - gM.upper, value=value, cost_bound=rhs, cap_excess=worst, a=st.a)


def run_trial(instance, seed: int, settings: TrialSettings = TrialSettings(),
              frac: Fractional | None = None) -> TrialReport:
    """Run (or reuse) the fractional stage, round with ``seed`` and audit."""
    frac = solve_fractional(instance, settings) if frac is None else frac
    state = frac.state
    rep_d = state.duality_report()
    kind = frac.kind
    if kind == "ccfl":
        steps = sum(ph.state.steps_total() for ph in frac.app.phases)
        arrival = [r.steps for ph in frac.app.phases for r in ph.state.results]
    else:
        steps = state.steps_total()
        arrival = [r.steps for r in state.results]
    # m counts facilities (ccfl), items (pmpc) or engine rows otherwise
    m = frac.instance.m if kind in ("ccfl", "pmpc") else len(state.results)
    audit = AuditResult(list(frac.audit.failures), dict(frac.audit.worst))
    rep = TrialReport(kind=kind, seed=int(seed), n=state.n, m=m, d=frac.d, p=frac.p,
                      mode=state.config.mode.value, primal=rep_d.primal, dual=rep_d.dual,
                      ratio=rep_d.ratio, bound=rep_d.bound, steps=steps, arrival_steps=arrival)
    if kind == "setcover_multicost":
        _round_setcover(frac, seed, rep, audit)
    elif kind == "ccfl":
        _round_ccfl(frac, seed, rep, audit)
    elif kind == "pmpc":
        _round_pmpc(frac, seed, rep, audit, settings.eps_round)
    rep.failures = audit.failures
    rep.audit_pass = audit.passed
    rep.extra["worst"] = audit.worst
    return rep
