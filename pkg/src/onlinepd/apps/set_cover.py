"""Fractional set cover minimizing the l_p norm of K cost vectors.

The relaxation is g(x) = sum_k (sum_j b_kj x_j)^p + sum_j (sum_k b_kj^p) x_j,
a sum of p-th powers plus one linear form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..engine import ConstraintRow, EngineConfig, PrimalDualState
from ..errors import ConfigError, InfeasibleError, InputError
from ..objective import ObjectiveSpec


@dataclass(frozen=True)
class SetCoverInstance:
    """Sets over a ground set with K non-negative cost vectors.

    ``sets[j]`` lists the elements of set j, ``arrivals`` is the element
    stream and ``universe`` is r = |U|.
    """

    costs: np.ndarray
    p: float
    sets: tuple
    arrivals: tuple
    universe: int | None = None
    _members: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        costs = np.atleast_2d(np.asarray(self.costs, dtype=np.float64))
        if np.any(costs < 0) or not np.all(np.isfinite(costs)):
            raise InputError("costs must be finite and non-negative")
        sets = tuple(tuple(sorted(set(int(e) for e in s))) for s in self.sets)
        if costs.shape[1] != len(sets):
            raise InputError(f"{len(sets)} sets but costs have {costs.shape[1]} columns")
        if not self.p >= 1:
            raise ConfigError("p must be >= 1")
        arrivals = tuple(int(e) for e in self.arrivals)
        members: dict[int, list[int]] = {}
        for j, s in enumerate(sets):
            for e in s:
                members.setdefault(e, []).append(j)
        universe = self.universe
        if universe is None:
            allel = set(members) | set(arrivals)
            universe = max(len(allel), 1)
        costs.flags.writeable = False
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "sets", sets)
        object.__setattr__(self, "arrivals", arrivals)
        object.__setattr__(self, "universe", int(universe))
        object.__setattr__(self, "_members", {e: tuple(v) for e, v in members.items()})

    @property
    def n(self) -> int:
        return len(self.sets)

    def sets_containing(self, e: int) -> tuple:
        return self._members.get(int(e), ())

    @property
    def degree(self) -> int:
        """Largest number of sets containing an arriving element."""
        return max((len(self.sets_containing(e)) for e in self.arrivals), default=1)

    def element_cost(self) -> np.ndarray:
        """sum_k b_kj^p per set, the price of a set used as a fallback."""
        return np.sum(self.costs ** self.p, axis=0)

    def fallback_set(self, e: int) -> int:
        cand = self.sets_containing(e)
        if not cand:
            raise InfeasibleError(f"element {e} belongs to no set")
        price = self.element_cost()
        return int(min(cand, key=lambda j: (price[j], j)))


def element_row(instance: SetCoverInstance, e: int, row_id: int = -1) -> ConstraintRow:
    """Coverage constraint sum_{j : e in S_j} x_j >= 1."""
    cand = instance.sets_containing(e)
    if not cand:
        raise InfeasibleError(f"element {e} belongs to no set")
    return ConstraintRow(np.array(cand), np.ones(len(cand)), row_id)


def build_setcover_multicost(instance: SetCoverInstance, d: int):
    """Return (spec, delta, bound) for the relaxation g."""
    if d < 1:
        raise ConfigError("d must be >= 1")
    p = instance.p
    K = instance.costs.shape[0]
    B = np.vstack([instance.costs, instance.element_cost()[None, :]])
    exps = np.r_[np.full(K, p), 1.0]
    spec = ObjectiveSpec.from_forms(B, exps, np.ones(K + 1))
    L = 4.0 * math.log1p(2.0 * d * d)
    return spec, 1.0 / (p * L), (p * L) ** p


@dataclass
class SetCoverFractional:
    state: PrimalDualState
    snapshots: np.ndarray      # x after each arrival, shape (arrivals, n)
    delta: float
    bound: float


def run_setcover_fractional(instance: SetCoverInstance, d: int | None = None, **config) -> SetCoverFractional:
    d = instance.degree if d is None else d
    spec, delta, bound = build_setcover_multicost(instance, d)
    state = PrimalDualState(spec, EngineConfig(d=d, delta=delta, **config))
    snaps = np.zeros((len(instance.arrivals), instance.n))
    for t, e in enumerate(instance.arrivals):
        state.process_constraint(element_row(instance, e))
        snaps[t] = state.x
    return SetCoverFractional(state, snaps, delta, bound)


def integral_cost(instance: SetCoverInstance, chosen) -> float:
    """p-th power of the l_p norm of the cost vector of a set selection."""
    X = np.asarray(chosen, dtype=np.float64)
    return float(np.sum((instance.costs @ X) ** instance.p))
