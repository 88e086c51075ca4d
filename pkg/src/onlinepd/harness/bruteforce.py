"""Offline optima of tiny instances by exhaustive search.

Covering kinds grid the first n-1 coordinates and set the last one to the
smallest feasible value, which is optimal because f is non-decreasing. The
reduced function is convex, so the grid is refined around the incumbent
until the step drops below ``resolution``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..apps.lp_norm import MixedPCInstance
from ..apps.pmpc import PMPCInstance, production_cost
from ..apps.set_cover import SetCoverInstance, element_row
from ..errors import InfeasibleError, SizeError
from ..objective import ObjectiveSpec
from .instances import CoveringInstance, kind_of


@dataclass(frozen=True)
class BruteForceResult:
    value: float
    point: tuple
    resolution: float


def _covering_parts(instance):
    kind = kind_of(instance)
    if kind == "covering":
        return instance.spec, instance.rows
    if kind == "mixed_pc":
        return ObjectiveSpec.from_forms(instance.B, instance.p, 1.0 / instance.p), instance.rows
    if kind == "setcover_multicost":
        from ..apps.set_cover import build_setcover_multicost
        spec, _, _ = build_setcover_multicost(instance, max(instance.degree, 1))
        return spec, tuple(element_row(instance, e) for e in instance.arrivals)
    raise SizeError(f"no covering brute force for kind {kind}")


def covering_bruteforce(spec: ObjectiveSpec, rows, resolution: float = 1e-3, points: int = 41) -> BruteForceResult:
    n = spec.dimension
    if n > 3:
        raise SizeError(f"brute force supports n <= 3, got {n}")
    A = np.zeros((len(rows), n))
    for t, r in enumerate(rows):
        A[t, r.indices] = r.values
    if not rows:
        return BruteForceResult(spec.value(np.zeros(n)), tuple([0.0] * n), 0.0)
    # no coordinate needs to exceed the largest 1/a over its column
    with np.errstate(divide="ignore"):
        hi = np.max(np.where(A > 0, 1.0 / A, 0.0), axis=0)
    last = A[:, -1]

    def complete(xs):
        """Cheapest feasible last coordinate for a batch of leading coordinates."""
        need = 1.0 - xs @ A[:, :-1].T
        ok = np.all(need[:, last == 0] <= 1e-12, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(last > 0, need / np.where(last > 0, last, 1.0), 0.0)
        z = np.maximum(z.max(axis=1, initial=0.0), 0.0)
        return np.column_stack([xs, z]), ok

    def evaluate(X, ok):
        vals = np.array([spec.value(x) for x in X])
        vals[~ok] = np.inf
        return vals

    k = n - 1
    if k == 0:
        X, ok = complete(np.zeros((1, 0)))
        return BruteForceResult(float(evaluate(X, ok)[0]), tuple(X[0]), 0.0)
    lo_box = np.zeros(k)
    hi_box = hi[:k].copy()
    step = float(np.max(hi_box)) / (points - 1)
    best_val, best_x = np.inf, None
    while True:
        axes = [np.linspace(lo_box[i], hi_box[i], points) for i in range(k)]
        grid = np.array(list(itertools.product(*axes)))
        X, ok = complete(grid)
        vals = evaluate(X, ok)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best_x = float(vals[i]), X[i]
        step = float(np.max((hi_box - lo_box) / (points - 1)))
        if step <= resolution or not np.isfinite(best_val):
            break
        center = best_x[:k]
        lo_box = np.maximum(center - 4 * step, 0.0)
        hi_box = np.minimum(center + 4 * step, hi[:k])
    if not np.isfinite(best_val):
        raise InfeasibleError("no feasible grid point")
    return BruteForceResult(best_val, tuple(best_x), step)


def pmpc_bruteforce(instance: PMPCInstance) -> BruteForceResult:
    """Best integral profit over all choices of at most one bundle per buyer."""
    if instance.n_buyers > 3 or any(len(bl) > 4 for bl in instance.buyers):
        raise SizeError("brute force supports at most 3 buyers with 4 bundles each")
    best, arg = -math.inf, None
    options = [range(-1, len(bl)) for bl in instance.buyers]
    for choice in itertools.product(*options):
        mu = np.zeros(instance.m)
        value = 0.0
        for bl, k in zip(instance.buyers, choice):
            if k >= 0:
                mu[list(bl[k].items)] += 1
                value += bl[k].value
        profit = value - production_cost(instance.rates, instance.q, mu).mid
        if profit > best:
            best, arg = profit, choice
    return BruteForceResult(best, tuple(arg), 0.0)


def offline_bruteforce(instance, resolution: float = 1e-3) -> BruteForceResult:
    if isinstance(instance, PMPCInstance):
        return pmpc_bruteforce(instance)
    if isinstance(instance, (CoveringInstance, MixedPCInstance, SetCoverInstance)):
        spec, rows = _covering_parts(instance)
        return covering_bruteforce(spec, rows, resolution)
    raise SizeError(f"no brute force for {type(instance).__name__}")
