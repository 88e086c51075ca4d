"""Online rounding for capacity-constrained facility location."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalError
from .rng import RngStream


def ccfl_update_modified(x, y, load, M: float):
    """Modified variables (xbar, ybar).

    ``y`` and ``load`` are (m,) for one client or (m, k) for k clients;
    ybar = min(y, x) and xbar = max(x, sum_j load_ij y_ij / M).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    load = np.asarray(load, dtype=np.float64)
    yy = y.reshape(x.shape[0], -1)
    ll = load.reshape(x.shape[0], -1)
    xbar = np.maximum(x, np.sum(ll * yy, axis=1) / M)
    ybar = np.minimum(yy, x[:, None]).reshape(y.shape)
    return xbar, ybar


@dataclass(frozen=True)
class PhaseCheck:
    opening: float
    assignment: float
    max_load: float
    limit: float

    @property
    def ok(self) -> bool:
        return self.opening <= self.limit and self.assignment <= self.limit and self.max_load <= self.limit

    @property
    def action(self) -> str:
        return "ok" if self.ok else "double"


def ccfl_phase_check(xbar, ybar, M: float, alpha: float, opening, assign, load) -> PhaseCheck:
    """Test the three lower-bound inequalities against 4 alpha M (inclusive).

    ``ybar``, ``assign`` and ``load`` are (m, k) over the phase's clients.
    """
    xbar = np.asarray(xbar, dtype=np.float64)
    ybar = np.asarray(ybar, dtype=np.float64).reshape(xbar.shape[0], -1)
    a = np.asarray(assign, dtype=np.float64).reshape(ybar.shape)
    ld = np.asarray(load, dtype=np.float64).reshape(ybar.shape)
    loads = np.sum(ld * ybar, axis=1)
    return PhaseCheck(
        opening=float(np.dot(opening, xbar)),
        assignment=float(np.sum(a * ybar)),
        max_load=float(loads.max(initial=0.0)),
        limit=4.0 * alpha * M,
    )


@dataclass
class CCFLRoundState:
    """Integral state carried across clients; thresholds are redrawn per phase."""

    m: int
    n: int
    rng: RngStream
    phase: int = -1
    M: float = 0.0
    opened: np.ndarray = None          # ever opened, any phase
    X: np.ndarray = None               # open in the current phase
    fixed: np.ndarray = None           # current-phase fixed facilities
    theta: np.ndarray = None
    phase_load: np.ndarray = None
    total_load: np.ndarray = None
    assignment: list = field(default_factory=list)
    fallbacks: int = 0
    assign_cost: float = 0.0

    def __post_init__(self):
        self.opened = np.zeros(self.m, dtype=bool)
        self.total_load = np.zeros(self.m)
        self.log_mn = math.log(max(self.m * self.n, 2))

    @property
    def rate(self) -> float:
        return 4.0 * self.log_mn

    def start_phase(self, phase: int, M: float):
        self.phase = phase
        self.M = float(M)
        self.X = np.zeros(self.m, dtype=bool)
        self.fixed = np.zeros(self.m, dtype=bool)
        self.phase_load = np.zeros(self.m)
        self.theta = self.rng.thresholds("facility_thresholds", self.m, phase)

    def opening_cost(self, opening) -> float:
        return float(np.dot(opening, self.opened))


def ccfl_round_client(state: CCFLRoundState, j: int, xbar, ybar_j, opening, assign_j, load_j):
    """Round one client given its modified variables; returns (facility, used_fallback)."""
    xbar = np.asarray(xbar, dtype=np.float64)
    ybar_j = np.asarray(ybar_j, dtype=np.float64)
    if np.any(ybar_j > xbar * (1 + 1e-12) + 1e-300):
        raise NumericalError("modified assignment exceeds modified opening")
    rate = state.rate
    # X_i is monotone in xbar through the per-phase threshold
    state.X |= np.minimum(rate * xbar, 1.0) >= state.theta
    state.fixed |= xbar >= 1.0 / rate
    prob = np.where(state.fixed, np.minimum(rate * ybar_j, 1.0),
                    np.divide(ybar_j, xbar, out=np.zeros_like(ybar_j), where=xbar > 0))
    prob = np.minimum(prob, 1.0)
    z = prob >= state.rng.thresholds("client_assign", state.m, j)
    hit = np.flatnonzero(state.X & z & (prob > 0))
    if hit.size:
        i, fallback = int(hit[0]), False
    else:
        i = int(np.argmin(np.asarray(opening) + assign_j + load_j))
        fallback = True
        state.fallbacks += 1
    state.opened |= state.X
    state.opened[i] = True
    state.phase_load[i] += load_j[i]
    state.total_load[i] += load_j[i]
    state.assign_cost += float(assign_j[i])
    state.assignment.append(i)
    return i, fallback
