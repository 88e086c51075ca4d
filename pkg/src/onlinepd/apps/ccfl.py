"""Capacity-constrained facility location: fractional phases and lazy rows.

Variables are x_i (open facility i) followed by y_ij at m + j*m + i. Each
client's exponentially many covering rows are generated on demand by a
separation oracle, at half strength so the number of rows stays O(m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..engine import ConstraintRow, EngineConfig, Mode, PrimalDualState
from ..errors import ConfigError, InfeasibleError, InputError, NumericalError
from ..objective import ObjectiveSpec
from ..rounding.ccfl import PhaseCheck, ccfl_phase_check, ccfl_update_modified


@dataclass(frozen=True)
class CCFLInstance:
    """Facilities with opening costs; client j has column j of ``assign`` and ``load``."""

    opening: np.ndarray
    assign: np.ndarray
    load: np.ndarray
    capacity: np.ndarray | None = None
    p: float | None = None

    def __post_init__(self):
        c = np.asarray(self.opening, dtype=np.float64).reshape(-1)
        m = c.shape[0]
        a = np.asarray(self.assign, dtype=np.float64).reshape(m, -1)
        ld = np.asarray(self.load, dtype=np.float64).reshape(m, -1)
        if m < 1:
            raise InputError("need at least one facility")
        if a.shape != ld.shape:
            raise InputError("assign and load must have the same shape")
        for name, arr in (("opening", c), ("assign", a), ("load", ld)):
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise InputError(f"{name} entries must be finite and non-negative")
        cap = np.full(m, np.inf) if self.capacity is None else np.asarray(self.capacity, dtype=np.float64).reshape(m)
        p = default_exponent(m) if self.p is None else float(self.p)
        if p < 1:
            raise ConfigError("p must be >= 1")
        for arr in (c, a, ld, cap):
            arr.flags.writeable = False
        object.__setattr__(self, "opening", c)
        object.__setattr__(self, "assign", a)
        object.__setattr__(self, "load", ld)
        object.__setattr__(self, "capacity", cap)
        object.__setattr__(self, "p", p)

    @property
    def m(self) -> int:
        return self.opening.shape[0]

    @property
    def n(self) -> int:
        return self.assign.shape[1]

    def allowed(self, j: int, M: float) -> np.ndarray:
        """Facilities usable by client j in the instance restricted by guess M."""
        return np.flatnonzero((self.opening <= M) & (self.load[:, j] <= M))

    def initial_guess(self) -> float:
        if self.n == 0:
            return 1.0
        M0 = float(np.min(self.opening + self.assign[:, 0] + self.load[:, 0]))
        if M0 > 0:
            return M0
        pos = np.concatenate([self.opening, self.assign.ravel(), self.load.ravel()])
        pos = pos[pos > 0]
        return float(pos.min()) if pos.size else 1.0

    def y_index(self, j: int) -> int:
        return self.m + j * self.m


def default_exponent(m: int) -> float:
    return float(math.ceil(math.log2(m)) + 1) if m > 1 else 1.0


def ccfl_alpha(p: float, d: int) -> float:
    """Fractional competitive ratio pL of the composite objective under the p-th root."""
    return p * 4.0 * math.log1p(2.0 * d * d)


def ccfl_separation(x, y_j, F):
    """Most violated half-strength row for one client.

    Returns (S, value) with value = sum_{i in F} min(x_i, y_ij) when it is
    below 1/2, else None. With F empty the row can never be met and
    (empty, 0.0) is returned.
    """
    F = np.asarray(F, dtype=np.int64)
    xs = np.asarray(x, dtype=np.float64)[F]
    ys = np.asarray(y_j, dtype=np.float64)[F]
    value = float(np.sum(np.minimum(xs, ys)))
    if value >= 0.5:
        return None
    if np.all(xs == 0) and np.all(ys == 0):
        return F.copy(), value
    inS = (xs < ys) | ((xs == ys) & (ys > 0))
    return F[inS], value


def ccfl_process_client(instance: CCFLInstance, state: PrimalDualState, j: int, F=None) -> int:
    """Add separated rows for client j until it is half covered; returns the row count."""
    m = instance.m
    F = instance.allowed(j, np.inf) if F is None else np.asarray(F, dtype=np.int64)
    if F.size == 0:
        raise InfeasibleError(f"no facility can serve client {j}")
    base = instance.y_index(j)
    for added in range(4 * m + 1):
        x = state.x
        sep = ccfl_separation(x[:m], x[base:base + m], F)
        if sep is None:
            return added
        if added == 4 * m:
            raise NumericalError(f"client {j} still uncovered after {4 * m} rows")
        S = sep[0]
        rest = np.setdiff1d(F, S)
        idx = np.concatenate([S, base + rest])
        state.process_constraint(ConstraintRow(idx, np.ones(idx.size)))
    return 4 * m


@dataclass
class ClientEvent:
    j: int
    phase: int
    M: float
    rows: int
    cover: float               # sum_i min(x_i, y_ij) over allowed facilities at acceptance
    xbar: np.ndarray
    ybar: np.ndarray
    check: PhaseCheck


@dataclass
class CCFLPhase:
    index: int
    M: float
    state: PrimalDualState
    clients: list = field(default_factory=list)
    check: PhaseCheck | None = None
    rows: int = 0
    attempts: int = 0


@dataclass
class CCFLFractional:
    instance: CCFLInstance
    p: float
    alpha: float
    events: list
    phases: list

    @property
    def M_initial(self) -> float:
        return self.phases[0].M

    @property
    def M_final(self) -> float:
        return self.phases[-1].M

    @property
    def max_rows_per_client(self) -> int:
        return max((e.rows for e in self.events), default=0)


def _phase_variables(instance: CCFLInstance, state: PrimalDualState, clients: list, M: float):
    m = instance.m
    x = state.x
    cols = np.asarray(clients, dtype=np.int64)
    y = np.stack([x[instance.y_index(j):instance.y_index(j) + m] for j in clients], axis=1) if clients else np.zeros((m, 0))
    load = instance.load[:, cols]
    xbar, ybar = ccfl_update_modified(x[:m], y, load, M)
    return xbar, ybar, cols


def run_ccfl_fractional(instance: CCFLInstance, alpha: float | None = None, mode=Mode.WITH_DECREASE,
                        eps_step: float = 1e-3, feas_tol: float = 1e-9, record_trace: bool = False) -> CCFLFractional:
    """Guess-and-double over the client stream.

    A client is accepted once the three phase inequalities hold for the
    phase's modified variables; otherwise M doubles, all variables reset
    and the client is replayed in the new phase.
    """
    m, p = instance.m, instance.p
    d = m
    L = 4.0 * math.log1p(2.0 * d * d)
    alpha = ccfl_alpha(p, d) if alpha is None else float(alpha)
    if alpha <= 0:
        raise ConfigError("alpha must be positive")

    def new_phase(index, M):
        spec = ObjectiveSpec.ccfl_composite(instance.opening, instance.assign, instance.load, M, p)
        cfg = EngineConfig(d=d, delta=1.0 / (p * L), mode=mode, eps_step=eps_step,
                           feas_tol=feas_tol, record_trace=record_trace)
        return CCFLPhase(index, M, PrimalDualState(spec, cfg))

    phases = [new_phase(0, instance.initial_guess())]
    events = []
    for j in range(instance.n):
        while True:
            ph = phases[-1]
            ph.attempts += 1
            F = instance.allowed(j, ph.M)
            if F.size:
                rows = ccfl_process_client(instance, ph.state, j, F)
                clients = ph.clients + [j]
                xbar, ybar, cols = _phase_variables(instance, ph.state, clients, ph.M)
                chk = ccfl_phase_check(xbar, ybar, ph.M, alpha, instance.opening,
                                       instance.assign[:, cols], instance.load[:, cols])
                if chk.ok:
                    ph.clients.append(j)
                    ph.check = chk
                    ph.rows += rows
                    x = ph.state.x
                    b = instance.y_index(j)
                    cover = float(np.sum(np.minimum(x[F], x[b + F])))
                    events.append(ClientEvent(j, ph.index, ph.M, rows, cover, xbar, ybar[:, -1].copy(), chk))
                    break
            phases.append(new_phase(ph.index + 1, 2.0 * ph.M))
    return CCFLFractional(instance, p, alpha, events, phases)
