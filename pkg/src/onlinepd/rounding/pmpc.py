"""Online rounding of fractional bundle allocations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, NumericalError
from .rng import RngStream


@dataclass
class PMPCRoundState:
    m: int
    eps: float
    beta: float
    rng: RngStream
    M: np.ndarray = None
    allocated: list = field(default_factory=list)
    skipped: int = 0

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ConfigError("eps must lie in (0, 1)")
        if not self.beta > 1:
            raise ConfigError("beta must exceed 1")
        self.M = np.zeros(self.m, dtype=np.int64)

    @property
    def a(self) -> float:
        return (1.0 + self.eps) ** (-2.0 - 2.0 / (self.beta - 1.0))

    @property
    def slack(self) -> float:
        return 6.0 / self.eps * math.log(self.m) if self.m > 1 else 0.0

    @property
    def ell(self) -> float:
        return self.slack + 1.0

    @property
    def L(self) -> float:
        return (1.0 + 1.0 / self.eps) * self.ell

    def cap(self, mu) -> np.ndarray:
        """Coordinatewise ceiling (1+eps) a mu + ell maintained on M."""
        return (1.0 + self.eps) * self.a * np.asarray(mu) + self.ell


def pmpc_round_buyer(state: PMPCRoundState, i: int, bundles, y_i, mu):
    """Allocate at most one bundle to buyer i; returns its index or None."""
    y_i = np.asarray(y_i, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    a = state.a
    if a * y_i.sum() > 1.0 + 1e-9:
        raise NumericalError("scaled allocation mass exceeds one")
    if np.any(state.M > (1.0 + state.eps) * a * mu + state.slack):
        state.skipped += 1
        state.allocated.append(None)
        return None
    u = state.rng.substream("buyer_alloc", i).random()
    cum = np.cumsum(a * y_i)
    k = int(np.searchsorted(cum, u, side="right"))
    if k >= len(bundles):
        state.allocated.append(None)
        return None
    state.M[list(bundles[k].items)] += 1
    state.allocated.append(k)
    return k
