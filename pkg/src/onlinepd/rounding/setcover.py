"""Online rounding of the fractional multi-cost set cover."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InfeasibleError, InputError
from .rng import RngStream


@dataclass
class SetCoverRounding:
    chosen: np.ndarray          # X_j at the end of the stream
    fallback: np.ndarray        # fallback set per arrival, -1 if none was needed
    uncovered: int              # arrivals not covered by X when they arrived
    rate: float
    cost_rounded: np.ndarray    # sum_j b_kj X_j per k
    cost_total: np.ndarray      # including fallback sets

    @property
    def fallbacks(self) -> int:
        return int(np.sum(self.fallback >= 0))


def rounding_rate(p: float, r: int) -> float:
    return 4.0 * p * math.log(max(r, 2))


def round_setcover(x_stream, sets_of, costs, p: float, r: int, seed: int) -> SetCoverRounding:
    """Threshold-coupled rounding of a non-decreasing fractional stream.

    ``x_stream[t]`` is the fractional solution after arrival t and
    ``sets_of[t]`` lists the sets containing that element. X_j switches on
    the first time rate * x_j reaches a threshold drawn once per set, so
    Pr[X_j = 1] = min(rate x_j, 1) at every moment.
    """
    X_stream = np.atleast_2d(np.asarray(x_stream, dtype=np.float64))
    costs = np.atleast_2d(np.asarray(costs, dtype=np.float64))
    n = costs.shape[1]
    if X_stream.shape[1] != n:
        raise InputError("fractional stream and costs disagree on the number of sets")
    rate = rounding_rate(p, r)
    theta = RngStream(seed).thresholds("set_thresholds", n)
    price = np.sum(costs ** p, axis=0)
    X = np.zeros(n, dtype=bool)
    extra = np.zeros(n, dtype=bool)
    fallback = np.full(len(sets_of), -1, dtype=np.int64)
    uncovered = 0
    for t, cand in enumerate(sets_of):
        cand = np.asarray(cand, dtype=np.int64)
        if cand.size == 0:
            raise InfeasibleError(f"arrival {t} belongs to no set")
        X |= np.minimum(rate * X_stream[t], 1.0) >= theta
        if X[cand].any():
            continue
        uncovered += 1
        if extra[cand].any():
            continue
        j = int(cand[np.lexsort((cand, price[cand]))[0]])
        extra[j] = True
        fallback[t] = j
    return SetCoverRounding(
        chosen=X, fallback=fallback, uncovered=uncovered, rate=rate,
        cost_rounded=costs @ X, cost_total=costs @ (X | extra),
    )
