"""Profit maximization with production costs.

Items are produced by K factories; factory k makes r_kj units of item j per
hour and g(mu) = min{(1/q) sum_k z_k^q : R^T z >= mu, z >= 0}. The covering
side minimizes sum_i u_i + g*(x) with g*(x) = (1/p') sum_k (r_k . x)^p',
1/p' + 1/q = 1. Variables are x_0..x_{m-1} followed by u_i at m + i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from ..engine import ConstraintRow, EngineConfig, Mode, PrimalDualState
from ..errors import ConfigError, InputError, NumericalError
from ..objective import ObjectiveSpec


@dataclass(frozen=True)
class Bundle:
    items: tuple
    value: float

    def __post_init__(self):
        items = tuple(sorted(set(int(j) for j in self.items)))
        if not items:
            raise InputError("bundle must contain at least one item")
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise InputError("valuation must be finite and non-negative")
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class PMPCInstance:
    rates: np.ndarray
    q: float
    buyers: tuple
    R: float | None = None

    def __post_init__(self):
        rates = np.atleast_2d(np.asarray(self.rates, dtype=np.float64))
        if np.any(rates < 0) or not np.all(np.isfinite(rates)):
            raise InputError("factory rates must be finite and non-negative")
        if np.any(rates.max(axis=0) <= 0):
            raise InputError("every item needs a factory that produces it")
        if not self.q > 1:
            raise ConfigError("production exponent q must exceed 1")
        m = rates.shape[1]
        buyers = tuple(tuple(b if isinstance(b, Bundle) else Bundle(*b) for b in bl) for bl in self.buyers)
        for bl in buyers:
            for b in bl:
                if b.items[0] < 0 or b.items[-1] >= m:
                    raise InputError("bundle refers to a missing item")
        vals = [b.value for bl in buyers for b in bl if b.value > 0]
        observed = max(vals) / min(vals) if vals else 1.0
        R = observed if self.R is None else float(self.R)
        if R < observed * (1 - 1e-12):
            raise InputError(f"valuation ratio {observed:.6g} exceeds declared R={R:.6g}")
        rates.flags.writeable = False
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "q", float(self.q))
        object.__setattr__(self, "buyers", buyers)
        object.__setattr__(self, "R", max(R, 1.0))

    @property
    def m(self) -> int:
        return self.rates.shape[1]

    @property
    def n_buyers(self) -> int:
        return len(self.buyers)

    @property
    def p_conj(self) -> float:
        return self.q / (self.q - 1.0)

    @property
    def beta(self) -> float:
        return self.q

    @property
    def d(self) -> int:
        return 1 + max((len(b.items) for bl in self.buyers for b in bl), default=0)


def build_pmpc_objective(instance: PMPCInstance) -> ObjectiveSpec:
    m, n, K = instance.m, instance.n_buyers, instance.rates.shape[0]
    pc = instance.p_conj
    B = np.zeros((K + 1, m + n))
    B[:K, :m] = instance.rates
    B[K, m:] = 1.0
    return ObjectiveSpec.from_forms(B, np.r_[np.full(K, pc), 1.0], np.r_[np.full(K, 1.0 / pc), 1.0])


def pmpc_config(instance: PMPCInstance, eps_step: float = 1e-3, feas_tol: float = 1e-9,
                record_trace: bool = False) -> EngineConfig:
    d = instance.d
    L = 2.0 * math.log1p(d * instance.R)
    return EngineConfig(d=d, delta=1.0 / (instance.p_conj * L), mode=Mode.MONOTONE, rho=instance.R,
                        eps_step=eps_step, feas_tol=feas_tol, record_trace=record_trace)


def pmpc_oracle_enumerate(u_i: float, x, bundles):
    """Index of the most violated bundle (u_i + x(T) - v(T) < 0), lowest index on ties, else None."""
    x = np.asarray(x, dtype=np.float64)
    best, best_val = None, 0.0
    for k, b in enumerate(bundles):
        viol = u_i + float(np.sum(x[list(b.items)])) - b.value
        if viol < best_val:
            best, best_val = k, viol
    return best


@dataclass
class PMPCFractional:
    instance: PMPCInstance
    state: PrimalDualState
    row_owner: list = field(default_factory=list)      # (buyer, bundle) per engine row
    iterations: list = field(default_factory=list)
    allocs: list = field(default_factory=list)         # y_i. of buyer i right after it was served
    snapshots: list = field(default_factory=list)      # item production mu right after each buyer

    @classmethod
    def create(cls, instance: PMPCInstance, **config) -> "PMPCFractional":
        return cls(instance, PrimalDualState(build_pmpc_objective(instance), pmpc_config(instance, **config)))

    @property
    def u(self) -> np.ndarray:
        return self.state.x[self.instance.m:]

    @property
    def prices(self) -> np.ndarray:
        return self.state.x[:self.instance.m]

    @property
    def production(self) -> np.ndarray:
        return self.state.mu[:self.instance.m]

    def allocation(self, i: int) -> np.ndarray:
        """y_iT over buyer i's bundles."""
        bl = self.instance.buyers[i]
        out = np.zeros(len(bl))
        y = self.state.y
        for r, (b, k) in enumerate(self.row_owner):
            if b == i:
                out[k] += y[r] / bl[k].value
        return out

    def profit_certificate(self) -> float:
        return self.state.dual_value()


def pmpc_process_buyer(instance: PMPCInstance, frac: PMPCFractional, i: int):
    """Serve buyer i; returns (allocation over its bundles, oracle iterations)."""
    m = instance.m
    bundles = instance.buyers[i]
    guard = int(math.ceil(4 * (m + 1) * instance.R))
    it = 0
    while True:
        x = frac.state.x
        k = pmpc_oracle_enumerate(2.0 * x[m + i], 2.0 * x[:m], bundles)
        if k is None:
            break
        if it >= guard:
            raise NumericalError(f"buyer {i} exceeded {guard} oracle iterations")
        b = bundles[k]
        idx = np.r_[np.asarray(b.items), m + i]
        res = frac.state.process_constraint(ConstraintRow(idx, np.full(idx.size, 1.0 / b.value)))
        if not res.skipped:
            frac.row_owner.append((i, k))
        it += 1
    frac.iterations.append(it)
    alloc = frac.allocation(i)
    frac.allocs.append(alloc)
    frac.snapshots.append(frac.production.copy())
    return alloc, it


def run_pmpc_fractional(instance: PMPCInstance, **config) -> PMPCFractional:
    frac = PMPCFractional.create(instance, **config)
    for i in range(instance.n_buyers):
        pmpc_process_buyer(instance, frac, i)
    return frac


@dataclass(frozen=True)
class CostBracket:
    lower: float
    upper: float

    @property
    def mid(self) -> float:
        return 0.5 * (self.lower + self.upper)


def _gstar(rates, pc, x):
    lam = rates @ x
    return float(np.sum(lam ** pc) / pc), rates.T @ (lam ** (pc - 1.0))


def production_cost(rates, q: float, mu) -> CostBracket:
    """Bracket g(mu) between a dual lower bound and a feasible-schedule upper bound."""
    rates = np.atleast_2d(np.asarray(rates, dtype=np.float64))
    mu = np.asarray(mu, dtype=np.float64)
    if np.all(mu <= 0):
        return CostBracket(0.0, 0.0)
    pc = q / (q - 1.0)
    # a feasible schedule: each item made by its fastest factory
    best = np.argmax(rates, axis=0)
    z0 = np.zeros(rates.shape[0])
    np.maximum.at(z0, best, mu / rates[best, np.arange(mu.size)])
    upper = float(np.sum(z0 ** q) / q)
    # dual: max_x mu.x - g*(x), scaled so the optimum has unit magnitude
    scale = max(float(np.max(mu)), 1e-300)

    def obj(x):
        v, g = _gstar(rates, pc, x)
        return v - mu @ x, g - mu

    x0 = np.full(mu.size, (upper * q) ** (1.0 / q) / max(float(rates.sum()), 1e-300))
    res = optimize.minimize(obj, x0, jac=True, method="L-BFGS-B", bounds=[(0, None)] * mu.size,
                            options={"ftol": 1e-16, "gtol": 1e-14 * scale, "maxiter": 20000})
    x = np.maximum(res.x, 0.0)
    lower = max(float(mu @ x - _gstar(rates, pc, x)[0]), 0.0)
    # primal recovery from the dual point
    z = (rates @ x) ** (pc - 1.0)
    made = rates.T @ z
    need = mu > 0
    if np.all(made[need] > 0):
        s = float(np.max(mu[need] / made[need]))
        upper = min(upper, float(np.sum((s * z) ** q) / q))
    if lower > upper:
        lower = upper
    return CostBracket(lower, upper)


def production_cost_at_gradient(instance: PMPCInstance, xdelta) -> float:
    """Exact g(grad g*(a)) = a . grad g*(a) - g*(a) for the item block a."""
    v, grad = _gstar(instance.rates, instance.p_conj, np.asarray(xdelta, dtype=np.float64))
    return float(xdelta @ grad - v)
