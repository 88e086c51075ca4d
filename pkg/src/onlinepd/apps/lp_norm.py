"""Online covering under an l_p norm of packing loads.

The loads are lambda_k = B_k . x and the objective handed to the engine is
the p-th power (1/p) ||B x||_p^p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..engine import ConstraintRow, EngineConfig, Mode, PrimalDualState
from ..errors import ConfigError, InputError
from ..objective import ObjectiveSpec


@dataclass(frozen=True)
class MixedPCInstance:
    B: np.ndarray
    p: float
    rows: tuple

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, dtype=np.float64))
        if np.any(B < 0) or not np.all(np.isfinite(B)):
            raise InputError("packing matrix must be finite and non-negative")
        if not self.p >= 1:
            raise ConfigError(f"p must be >= 1, got {self.p}")
        rows = tuple(r if isinstance(r, ConstraintRow) else ConstraintRow.from_pairs(r) for r in self.rows)
        for r in rows:
            if r.indices[-1] >= B.shape[1]:
                raise InputError("covering row refers to a missing variable")
        B.flags.writeable = False
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return self.B.shape[1]

    @property
    def sparsity(self) -> int:
        return max((len(r) for r in self.rows), default=1)


def ratio_constant(d: int) -> float:
    return 4.0 * math.log1p(2.0 * d * d)


def build_lp_norm(instance: MixedPCInstance, d: int):
    """Return (spec, delta, bound) with delta = 1/(pL) and bound = (pL)^p.

    The bound applies to f = (1/p)||Bx||_p^p; its p-th root pL bounds the
    norm itself.
    """
    p = instance.p
    if p < 1:
        raise ConfigError("p must be >= 1")
    if d < 1:
        raise ConfigError("d must be >= 1")
    L = ratio_constant(d)
    spec = ObjectiveSpec.from_forms(instance.B, p, 1.0 / p)
    return spec, 1.0 / (p * L), (p * L) ** p


def run_lp_norm(instance: MixedPCInstance, d: int | None = None, **config) -> PrimalDualState:
    d = instance.sparsity if d is None else d
    spec, delta, _ = build_lp_norm(instance, d)
    state = PrimalDualState(spec, EngineConfig(d=d, delta=delta, mode=config.pop("mode", Mode.WITH_DECREASE), **config))
    state.process_all(instance.rows)
    return state


def mixed_pc_report(instance: MixedPCInstance, state: PrimalDualState) -> dict:
    """Loads, their l_p norm and the norm ratio bound pL."""
    lam = instance.B @ state.x
    p = instance.p
    norm = float(np.sum(lam ** p) ** (1.0 / p))
    return {
        "loads": lam,
        "lp_norm": norm,
        "norm_ratio_bound": p * ratio_constant(state.config.d),
        "objective": float(np.sum(lam ** p) / p),
    }
