"""Online primal-dual engine for covering rows arriving one at a time.

The primal grows along dx_j/dtau = (a_tj x_j + 1/d) / grad_j f(x) until the
new row is satisfied, while the row's dual grows at rate r and the dual
vector is kept at mu = grad f(delta x). In the decreasing mode a dual
column that becomes tight is held at mu_j by lowering the dual of the
earlier row with the largest coefficient in that column.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _kernel as K
from .errors import ConfigError, InputError, NumericalError, StateError
from .objective import ObjectiveSpec


class Mode(str, enum.Enum):
    WITH_DECREASE = "with_decrease"
    MONOTONE = "monotone"
    MINIMIZE_CERTIFY = "minimize_certify"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, Mode):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"withdecrease": "with_decrease", "decrease": "with_decrease",
                   "minimizecertify": "minimize_certify", "certify": "minimize_certify"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown mode {value!r}") from None


_MODE_CODE = {Mode.WITH_DECREASE: K.MODE_DECREASE, Mode.MONOTONE: K.MODE_MONOTONE,
              Mode.MINIMIZE_CERTIFY: K.MODE_CERTIFY}


@dataclass(frozen=True)
class EngineConfig:
    """Engine parameters.

    d is the declared bound on row sparsity, rho the declared bound on the
    max/min ratio of a column's entries (used only in monotone mode).
    """

    d: int
    delta: float = 1.0
    mode: Mode = Mode.WITH_DECREASE
    rho: float = 1.0
    eps_step: float = 1e-3
    feas_tol: float = 1e-9
    max_steps: int = 10_000_000
    record_trace: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        if int(self.d) != self.d or self.d < 1:
            raise ConfigError(f"d must be a positive integer, got {self.d}")
        object.__setattr__(self, "d", int(self.d))
        if not (0 < self.delta <= 1):
            raise ConfigError(f"delta must lie in (0, 1], got {self.delta}")
        if not (self.rho >= 1) or not math.isfinite(self.rho):
            raise ConfigError(f"rho must be >= 1, got {self.rho}")
        if not (0 < self.eps_step < 1):
            raise ConfigError("eps_step must lie in (0, 1)")
        if not (0 < self.feas_tol < 1e-2):
            raise ConfigError("feas_tol must lie in (0, 0.01)")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be positive")

    @property
    def rate_log(self) -> float:
        """The logarithm dividing the dual rate."""
        if self.mode is Mode.MONOTONE:
            return math.log1p(self.d * self.rho)
        return math.log1p(2.0 * self.d ** 2)

    @property
    def ratio_constant(self) -> float:
        """L in the competitive bound: 4 ln(1+2d^2), or 2 ln(1+d rho) when monotone."""
        if self.mode is Mode.MONOTONE:
            return 2.0 * math.log1p(self.d * self.rho)
        return 4.0 * math.log1p(2.0 * self.d ** 2)


@dataclass(frozen=True)
class ConstraintRow:
    """Sparse covering row a.x >= 1 with strictly positive entries."""

    indices: np.ndarray
    values: np.ndarray
    id: int = -1

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        val = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if idx.shape != val.shape:
            raise InputError("row indices and values differ in length")
        if idx.size == 0:
            raise InputError("a covering row needs at least one entry")
        if np.any(idx < 0):
            raise InputError("row indices must be non-negative")
        if np.any(~np.isfinite(val)) or np.any(val <= 0):
            raise InputError("row coefficients must be strictly positive (omit zeros)")
        order = np.argsort(idx, kind="stable")
        idx, val = idx[order], val[order]
        if np.any(np.diff(idx) == 0):
            raise InputError("duplicate index in row")
        idx.flags.writeable = False
        val.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_pairs(cls, pairs: Iterable, id: int = -1) -> "ConstraintRow":
        pairs = [(int(j), float(a)) for j, a in pairs if float(a) != 0.0]
        if not pairs:
            raise InputError("a covering row needs at least one entry")
        j, a = zip(*pairs)
        return cls(np.array(j), np.array(a), id)

    @classmethod
    def from_dense(cls, a, id: int = -1) -> "ConstraintRow":
        a = np.asarray(a, dtype=np.float64)
        nz = np.flatnonzero(a)
        return cls(nz, a[nz], id)

    def value(self, x) -> float:
        return float(np.dot(self.values, np.asarray(x)[self.indices]))

    def __len__(self):
        return int(self.indices.size)


@dataclass(frozen=True)
class ArrivalResult:
    row_id: int
    steps: int
    tau: float
    primal: float
    dual: float
    row_value: float
    skipped: bool = False


@dataclass(frozen=True)
class ArrivalAudit:
    """Worst values of the runtime checks over one arrival's steps."""

    row_id: int
    skipped: bool
    row_value: float
    weak_duality: float
    dual_violation_steps: float
    dual_violation_full: float
    min_dx: float
    min_dmu: float
    min_dy: float
    mu_monotone: bool
    growth_slack: float
    jumps: int
    # weak_duality above is taken mid-arrival, where x need not be feasible
    weak_duality_certified: float = -math.inf
    weak_duality_landed: float = -math.inf


@dataclass(frozen=True)
class TraceRecord:
    row: int
    dt: float
    tau: float
    primal: float
    dual: float
    row_value: float
    dual_violation: float
    min_dx: float
    min_dmu: float
    min_dy: float


@dataclass(frozen=True)
class DualityReport:
    primal: float
    dual: float
    ratio: float
    bound: float

    def as_dict(self) -> dict:
        return {"primal": self.primal, "dual": self.dual, "ratio": self.ratio, "bound": self.bound}


def competitive_bound(spec: ObjectiveSpec, config: EngineConfig) -> float:
    """Theoretical primal/dual ratio for a power-sum objective.

    With L the mode's constant, the ratio bound is
    1 / (delta^(p_max - 1) / L - max_k (p_k - 1) delta^(p_k)),
    and infinity when the denominator is not positive. For linear f it is L
    and for a uniform exponent p with delta = 1/(pL) it is (pL)^p.
    """
    L = config.ratio_constant
    live = spec._live
    p = spec.exponents[live]
    if p.size == 0:
        return L
    delta = config.delta
    den = delta ** (p.max() - 1.0) / L - np.max((p - 1.0) * delta ** p)
    return float(1.0 / den) if den > 0 else math.inf


def _grow(arr: np.ndarray, need: int, fill=0) -> np.ndarray:
    if need <= arr.shape[0]:
        return arr
    cap = max(need, 2 * arr.shape[0], 16)
    out = np.full((cap,) + arr.shape[1:], fill, dtype=arr.dtype)
    out[: arr.shape[0]] = arr
    return out


class PrimalDualState:
    """Full engine state: x, per-row duals, mu = grad f(delta x), time, trace.

    Not thread safe; distinct states are independent.
    """

    TRACE_CHUNK = 4096

    def __init__(self, spec: ObjectiveSpec, config: EngineConfig):
        if not isinstance(spec, ObjectiveSpec):
            raise InputError("spec must be an ObjectiveSpec")
        if not isinstance(config, EngineConfig):
            raise ConfigError("config must be an EngineConfig")
        self.spec = spec
        self.config = config
        n = spec.dimension
        self.n = n
        csc = spec._csc
        self._colptr = csc.indptr.astype(np.int64)
        self._colform = csc.indices.astype(np.int64)
        self._colval = csc.data.astype(np.float64)
        self._s = spec.scales.astype(np.float64).copy()
        self._p = spec.exponents.astype(np.float64).copy()
        self._spk = self._s * self._p
        self._pm1 = self._p - 1.0
        self._pmin = spec.min_exponent_per_column.astype(np.float64).copy()
        self._free = spec.free_columns.copy()
        up = spec.uniform_exponent
        self._uniform_ratio = -1.0 if up is None else float(config.delta ** (up - 1.0))

        self._x = np.zeros(n)
        self._F = np.zeros(spec.n_forms)
        self._lhs = np.zeros(n)
        self._y = np.zeros(16)
        self._tau_spent = np.zeros(16)
        self._rptr = np.zeros(17, dtype=np.int64)
        self._ridx = np.zeros(64, dtype=np.int64)
        self._rval = np.zeros(64)
        self._erow = np.zeros(64, dtype=np.int64)
        self._enext = np.full(64, -1, dtype=np.int64)
        self._chead = np.full(n, -1, dtype=np.int64)
        self._active_mask = np.zeros(n, dtype=bool)
        self._active = np.zeros(max(n, 1), dtype=np.int64)
        self._nact = 0
        self._colmax = np.zeros(n)
        self._colmin = np.full(n, np.inf)
        self._nrows = 0
        self._io = np.zeros(K.N_IO)
        self._ck = np.zeros(spec.n_forms)
        self._ckd = np.zeros(spec.n_forms)
        self._Ftmp = np.zeros(spec.n_forms)
        self._trace_chunks: list[np.ndarray] = []
        self._trace_buf = np.zeros((self.TRACE_CHUNK if config.record_trace else 1, K.N_TRACE))
        self._ntrace = 0
        self.rows: list[ConstraintRow] = []
        self.results: list[ArrivalResult] = []
        self.audits: list[ArrivalAudit] = []
        self._broken = False
        self._mu_prev = self.mu.copy()

    # ------------------------------------------------------------------
    # read-only views

    @staticmethod
    def _ro(a: np.ndarray) -> np.ndarray:
        v = a.view()
        v.flags.writeable = False
        return v

    @property
    def x(self) -> np.ndarray:
        return self._ro(self._x)

    @property
    def y(self) -> np.ndarray:
        return self._ro(self._y[: self._nrows])

    @property
    def tau_spent(self) -> np.ndarray:
        return self._ro(self._tau_spent[: self._nrows])

    @property
    def mu(self) -> np.ndarray:
        return self.spec.gradient_from_forms(self._F, self.config.delta)

    @property
    def tau(self) -> float:
        return float(self._io[K.IO_TAU])

    @property
    def n_rows(self) -> int:
        return self._nrows

    @property
    def active(self) -> np.ndarray:
        return self._ro(self._active[: self._nact])

    @property
    def dual_lhs(self) -> np.ndarray:
        """y^T A, the left side of the dual constraints."""
        return self._ro(self._lhs)

    def trace_array(self) -> np.ndarray:
        """All recorded steps as an (N, 10) array, columns ``TRACE_FIELDS``."""
        parts = self._trace_chunks + [self._trace_buf[: self._ntrace]]
        return np.vstack(parts) if parts else np.zeros((0, K.N_TRACE))

    @property
    def trace(self) -> list[TraceRecord]:
        arr = self.trace_array()
        return [TraceRecord(int(r[0]), *map(float, r[1:])) for r in arr]

    # ------------------------------------------------------------------
    # row bookkeeping

    def _append_row(self, row: ConstraintRow) -> int:
        t = self._nrows
        k = len(row)
        start = int(self._rptr[t])
        self._y = _grow(self._y, t + 1)
        self._tau_spent = _grow(self._tau_spent, t + 1)
        self._rptr = _grow(self._rptr, t + 2)
        self._ridx = _grow(self._ridx, start + k)
        self._rval = _grow(self._rval, start + k)
        self._erow = _grow(self._erow, start + k)
        self._enext = _grow(self._enext, start + k, fill=-1)
        for off, (j, a) in enumerate(zip(row.indices, row.values)):
            e = start + off
            self._ridx[e] = j
            self._rval[e] = a
            self._erow[e] = t
            self._enext[e] = self._chead[j]
            self._chead[j] = e
            if not self._active_mask[j]:
                self._active_mask[j] = True
                self._active[self._nact] = j
                self._nact += 1
        self._rptr[t + 1] = start + k
        self._y[t] = 0.0
        self._tau_spent[t] = 0.0
        self._nrows = t + 1
        self.rows.append(ConstraintRow(row.indices, row.values, t))
        return t

    def _validate_row(self, row: ConstraintRow):
        if len(row) > self.config.d:
            raise ConfigError(f"row has {len(row)} entries but d = {self.config.d}")
        if row.indices[-1] >= self.n:
            raise InputError(f"row index {row.indices[-1]} out of range for n = {self.n}")
        if self.config.mode is Mode.MONOTONE:
            idx = row.indices
            cmax = np.maximum(self._colmax[idx], row.values)
            cmin = np.minimum(self._colmin[idx], row.values)
            worst = float(np.max(cmax / cmin))
            if worst > self.config.rho * (1 + 1e-12):
                raise ConfigError(f"column ratio {worst:.6g} exceeds rho = {self.config.rho}")

    # ------------------------------------------------------------------
    # processing

    def process_constraint(self, row) -> ArrivalResult:
        """Run the continuous update until ``row`` is satisfied."""
        if self._broken:
            raise StateError("state is unusable after an aborted arrival")
        if not isinstance(row, ConstraintRow):
            row = ConstraintRow.from_pairs(row)
        self._validate_row(row)
        cfg = self.config
        before = row.value(self._x)
        if before >= 1.0:
            res = ArrivalResult(-1, 0, 0.0, self.primal_value(), self.dual_value(), before, skipped=True)
            self.results.append(res)
            self.audits.append(ArrivalAudit(-1, True, before, -np.inf, -np.inf, -np.inf,
                                            np.inf, np.inf, np.inf, True, np.inf, 0))
            return res
        if cfg.mode is Mode.MONOTONE:
            self._colmax[row.indices] = np.maximum(self._colmax[row.indices], row.values)
            self._colmin[row.indices] = np.minimum(self._colmin[row.indices], row.values)
        t = self._append_row(row)
        J = row.indices.astype(np.int64)
        aJ = row.values.astype(np.float64)
        scr = np.zeros((7, J.size))
        stats = K.new_stats()
        tau0 = self.tau
        self._io[K.IO_DT] = 0.0
        self._io[K.IO_RATIO] = -1.0
        steps = 0
        self._broken = True
        while True:
            status, steps, self._ntrace = K.integrate_row(
                self._x, self._F, self._y, self._lhs, self._tau_spent, self._io, stats,
                self._trace_buf, self._ntrace,
                J, aJ, t,
                self._colptr, self._colform, self._colval, self._s, self._p, self._spk,
                self._pm1, self._pmin, self._free,
                self._active, self._nact, self._uniform_ratio,
                self._rptr, self._ridx, self._rval, self._chead, self._enext, self._erow,
                float(cfg.d), cfg.delta, cfg.rate_log, cfg.eps_step, cfg.feas_tol,
                _MODE_CODE[cfg.mode], cfg.max_steps, cfg.record_trace, steps,
                self._ck, self._ckd, self._Ftmp, scr,
            )
            if status == K.DONE:
                break
            if status == K.TRACE_FULL:
                self._trace_chunks.append(self._trace_buf.copy())
                self._ntrace = 0
                continue
            msg = "step guard exceeded" if status == K.GUARD else "step size collapsed"
            raise NumericalError(f"row {t}: {msg} after {steps} steps", trace=self.trace_array()[-50:])
        self._broken = False
        # resynchronize the incrementally updated quantities
        self._F = np.asarray(self.spec.forms @ self._x, dtype=np.float64)
        if cfg.mode is not Mode.MINIMIZE_CERTIFY:
            K.recompute_lhs(self._y, self._nrows, self._rptr, self._ridx, self._rval, self._lhs)
            self._io[K.IO_YSUM] = float(self._y[: self._nrows].sum())
        res = ArrivalResult(t, steps, self.tau - tau0, self.primal_value(),
                            self.dual_value() if cfg.mode is not Mode.MINIMIZE_CERTIFY else math.nan,
                            row.value(self._x))
        self.results.append(res)
        self.audits.append(self._audit_arrival(t, res, stats))
        return res

    def _audit_arrival(self, t: int, res: ArrivalResult, stats: np.ndarray) -> ArrivalAudit:
        cfg = self.config
        mu = self.mu
        mono = bool(np.all(mu >= self._mu_prev))
        self._mu_prev = mu
        full = -np.inf
        growth = np.inf
        if cfg.mode is not Mode.MINIMIZE_CERTIFY:
            full = K.max_violation(self._lhs, self._F, self._active, self._nact, cfg.delta,
                                   self._colptr, self._colform, self._colval, self._spk, self._pm1)
            growth = K.growth_slack(self._x, self._F, self._y, self._active, self._nact,
                                   self._colptr, self._colform, self._colval, self._spk, self._pm1,
                                   self._chead, self._enext, self._erow, self._rval,
                                   float(cfg.d), cfg.delta, cfg.rate_log)
        return ArrivalAudit(
            row_id=t, skipped=False, row_value=res.row_value,
            weak_duality=float(stats[K.ST_WEAK]),
            dual_violation_steps=float(stats[K.ST_VIOL]),
            dual_violation_full=float(full),
            min_dx=float(stats[K.ST_DX]), min_dmu=float(stats[K.ST_DMU]),
            min_dy=float(stats[K.ST_DY]), mu_monotone=mono,
            growth_slack=float(growth), jumps=int(stats[K.ST_JUMPS]),
            weak_duality_certified=float(stats[K.ST_WEAK_CERT]),
            weak_duality_landed=(res.dual - res.primal) / (1.0 + abs(res.primal))
            if cfg.mode is not Mode.MINIMIZE_CERTIFY else -math.inf,
        )

    def process_all(self, rows: Iterable) -> list[ArrivalResult]:
        return [self.process_constraint(r) for r in rows]

    # ------------------------------------------------------------------
    # objective values

    def primal_value(self) -> float:
        return self.spec.value_from_forms(self._F)

    def dual_value(self) -> float:
        """sum_t y_t - f*(mu) with mu = grad f(delta x)."""
        if self.config.mode is Mode.MINIMIZE_CERTIFY:
            return self.certificate_minimization()[2]
        return float(self._y[: self._nrows].sum()) - self.spec.conjugate_from_forms(self._F, self.config.delta)

    def rate_ratio(self) -> float:
        if self._nact == 0:
            return 1.0
        from .objective import ratio_from_forms
        return ratio_from_forms(self.spec, self._F, self.config.delta, self._active[: self._nact])

    def certificate_minimization(self):
        """Dual assigned in hindsight from the final x.

        mu = grad f(delta x_final) and y_t = rbar * tau_spent[t] with
        rbar = rate_ratio(x_final) / ln(1 + 2 d^2). If the result is not
        dual feasible it is scaled down uniformly until it is.
        Returns (y, mu, dual_value).
        """
        if self._broken:
            raise StateError("an arrival did not complete; no certificate available")
        cfg = self.config
        mu = self.mu
        if self._nrows == 0:
            return np.zeros(0), mu, -self.spec.conjugate_from_forms(self._F, cfg.delta)
        rbar = self.rate_ratio() / math.log1p(2.0 * cfg.d ** 2)
        y = rbar * self._tau_spent[: self._nrows].copy()
        lhs = np.zeros(self.n)
        K.recompute_lhs(y, self._nrows, self._rptr, self._ridx, self._rval, lhs)
        with np.errstate(divide="ignore", invalid="ignore"):
            over = np.where(lhs > 0, lhs / np.where(mu > 0, mu, 0.0), 0.0)
        worst = float(np.nanmax(over)) if over.size else 0.0
        if worst > 1.0:
            y /= worst
        dual = float(y.sum()) - self.spec.conjugate_from_forms(self._F, cfg.delta)
        return y, mu, dual

    def duality_report(self) -> DualityReport:
        primal = self.primal_value()
        dual = self.dual_value()
        if self._nrows == 0 or primal <= 0:
            ratio = 1.0
        elif dual <= 0:
            ratio = math.inf
        else:
            ratio = primal / dual
        return DualityReport(primal, dual, ratio, competitive_bound(self.spec, self.config))

    def steps_total(self) -> int:
        return int(sum(r.steps for r in self.results))

    # ------------------------------------------------------------------
    # single-step operations (exposed for inspection and testing)

    def dual_step(self, row_id: int, dtau: float, x_new=None):
        """Raise y_row at rate r for dtau and restore dual feasibility.

        mu is taken at ``x_new`` (default: current x). In decreasing mode the
        columns of the row that end above mu_j are pulled back by lowering
        the dual with the largest coefficient (lowest id on ties).
        """
        if not 0 <= row_id < self._nrows:
            raise InputError("unknown row id")
        if dtau < 0:
            raise InputError("dtau must be non-negative")
        cfg = self.config
        xs = self._x if x_new is None else np.asarray(x_new, dtype=np.float64)
        F = self.spec.forms @ xs
        from .objective import ratio_from_forms
        ratio = ratio_from_forms(self.spec, F, cfg.delta, self._active[: self._nact])
        dy = dtau * ratio / cfg.rate_log
        a, b = self._rptr[row_id], self._rptr[row_id + 1]
        cols = self._ridx[a:b]
        self._y[row_id] += dy
        self._lhs[cols] += self._rval[a:b] * dy
        if cfg.mode is Mode.WITH_DECREASE:
            mu = self.spec.gradient_from_forms(F, cfg.delta)
            for j in cols:
                while self._lhs[j] > mu[j]:
                    best, bestval = -1, -1.0
                    e = self._chead[j]
                    while e >= 0:
                        r = self._erow[e]
                        if self._y[r] > 0 and (self._rval[e] > bestval or (self._rval[e] == bestval and r < best)):
                            best, bestval = r, self._rval[e]
                        e = self._enext[e]
                    if best < 0:
                        break
                    dec = (self._lhs[j] - mu[j]) / bestval
                    partial = dec < self._y[best]
                    dec = dec if partial else self._y[best]
                    self._y[best] -= dec
                    s0, s1 = self._rptr[best], self._rptr[best + 1]
                    self._lhs[self._ridx[s0:s1]] -= self._rval[s0:s1] * dec
                    if partial:
                        break
        self._io[K.IO_YSUM] = float(self._y[: self._nrows].sum())
        return self.y.copy(), self.spec.gradient_from_forms(F, cfg.delta)


def primal_step(x, row: ConstraintRow, grad, d: int, dtau: float) -> np.ndarray:
    """Exact solution of the primal rate over dtau with a frozen gradient.

    x_j <- (x_j + 1/(a_j d)) exp(a_j dtau / g_j) - 1/(a_j d) on the row's
    entries; other coordinates are unchanged.
    """
    if dtau < 0:
        raise InputError("dtau must be non-negative")
    x = np.array(x, dtype=np.float64)
    g = np.asarray(grad, dtype=np.float64)[row.indices]
    if np.any(g <= 0):
        raise InputError("frozen gradient must be positive on the row")
    c = 1.0 / (row.values * d)
    x[row.indices] = (x[row.indices] + c) * np.exp(row.values * dtau / g) - c
    return x


# functional aliases for the module's operations

def new_engine(spec: ObjectiveSpec, config: EngineConfig) -> PrimalDualState:
    return PrimalDualState(spec, config)


def process_constraint(state: PrimalDualState, row) -> ArrivalResult:
    return state.process_constraint(row)


def dual_step(state: PrimalDualState, row_id: int, dtau: float, x_new=None):
    return state.dual_step(row_id, dtau, x_new)


def certificate_minimization(state: PrimalDualState):
    return state.certificate_minimization()


def duality_report(state: PrimalDualState) -> DualityReport:
    return state.duality_report()
