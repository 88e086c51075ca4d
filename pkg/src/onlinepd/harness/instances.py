"""Instance generation and the JSON instance format.

Every file has the shape

    {"kind": str, "objective": {...}, "rows" | "clients" | "buyers": [...],
     "params": {...}}

with matrices stored as {"shape": [r, c], "triplets": [[i, j, v], ...]}.

kind "covering"            objective = ObjectiveSpec.to_dict(); rows are
                           lists of [index, coefficient] pairs; params.d.
kind "mixed_pc"            objective = {"B": matrix}; rows as above;
                           params.p, params.d.
kind "setcover_multicost"  objective = {"costs": matrix (K x n)}; "sets" is
                           a list of element lists; "rows" is the element
                           arrival stream; params.p, params.universe.
kind "ccfl"                objective = {"opening": [...], "capacity": [...]};
                           clients = [{"assign": [...], "load": [...]}];
                           params.p.
kind "pmpc"                objective = {"rates": matrix (K x m), "q": num};
                           buyers = [[{"items": [...], "value": v}, ...]];
                           params.R.

Generator ranges (all uniform): covering and mixed_pc entries in [lo, hi]
(default [0.1, 10]); set costs in [0.1, 10]; CCFL opening in [1, 10],
assignment in [0.1, 5], load in [0.1, 3]; PMPC rates in [0.5, 2] and
valuations in [1, R].
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..apps.ccfl import CCFLInstance
from ..apps.lp_norm import MixedPCInstance
from ..apps.pmpc import Bundle, PMPCInstance
from ..apps.set_cover import SetCoverInstance
from ..engine import ConstraintRow
from ..errors import ConfigError, InputError
from ..objective import ObjectiveSpec, csr_to_triplets, triplets_to_csr

KINDS = ("covering", "mixed_pc", "setcover_multicost", "ccfl", "pmpc")


@dataclass(frozen=True)
class CoveringInstance:
    """A bare covering program: objective plus row stream."""

    spec: ObjectiveSpec
    rows: tuple
    d: int | None = None

    def __post_init__(self):
        rows = tuple(r if isinstance(r, ConstraintRow) else ConstraintRow.from_pairs(r) for r in self.rows)
        for r in rows:
            if r.indices[-1] >= self.spec.dimension:
                raise InputError("covering row refers to a missing variable")
        object.__setattr__(self, "rows", rows)
        if self.d is None:
            object.__setattr__(self, "d", max((len(r) for r in rows), default=1))

    @property
    def n(self) -> int:
        return self.spec.dimension

    def column_ratio(self) -> float:
        """Largest max/min ratio of positive entries within a column."""
        hi = np.zeros(self.n)
        lo = np.full(self.n, np.inf)
        for r in self.rows:
            hi[r.indices] = np.maximum(hi[r.indices], r.values)
            lo[r.indices] = np.minimum(lo[r.indices], r.values)
        used = hi > 0
        return float(np.max(hi[used] / lo[used])) if used.any() else 1.0


def kind_of(instance) -> str:
    for cls, kind in ((CoveringInstance, "covering"), (MixedPCInstance, "mixed_pc"),
                      (SetCoverInstance, "setcover_multicost"), (CCFLInstance, "ccfl"),
                      (PMPCInstance, "pmpc")):
        if isinstance(instance, cls):
            return kind
    raise InputError(f"unknown instance type {type(instance).__name__}")


def _generator(kind: str, seed: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, zlib.crc32(kind.encode())])


def _random_rows(rng, n, count, d, lo, hi):
    rows = []
    for t in range(count):
        k = int(rng.integers(1, min(d, n) + 1))
        idx = np.sort(rng.choice(n, size=k, replace=False))
        rows.append(ConstraintRow(idx, rng.uniform(lo, hi, size=k), t))
    return tuple(rows)


def _check(cond, msg):
    if not cond:
        raise ConfigError(msg)


def generate_instance(kind: str, params: dict | None = None, seed: int = 0):
    """Random instance of ``kind``; identical for identical (params, seed)."""
    params = dict(params or {})
    rng = _generator(kind, seed)
    if kind == "covering":
        n, count, d = int(params.get("n", 6)), int(params.get("rows", 20)), int(params.get("d", 3))
        lo, hi = float(params.get("lo", 0.1)), float(params.get("hi", 10.0))
        p = float(params.get("p", 1.0))
        _check(n >= 1 and count >= 0 and d >= 1 and 0 < lo <= hi, "inconsistent covering parameters")
        _check(p >= 1, "p must be >= 1")
        rows = _random_rows(rng, n, count, d, lo, hi)
        if p == 1:
            spec = ObjectiveSpec.linear(rng.uniform(lo, hi, size=n))
        else:
            spec = ObjectiveSpec.from_forms(np.diag(rng.uniform(lo, hi, size=n)), p, 1.0 / p)
        return CoveringInstance(spec, rows, d)
    if kind == "mixed_pc":
        n, K = int(params.get("n", 4)), int(params.get("K", 2))
        count, d = int(params.get("rows", 20)), int(params.get("d", 3))
        p, density = float(params.get("p", 2.0)), float(params.get("density", 0.5))
        lo, hi = float(params.get("lo", 0.1)), float(params.get("hi", 10.0))
        _check(n >= 1 and K >= 1 and d >= 1 and 0 < density <= 1 and 0 < lo <= hi, "inconsistent mixed_pc parameters")
        B = np.where(rng.random((K, n)) < density, rng.uniform(lo, hi, size=(K, n)), 0.0)
        empty = np.flatnonzero(B.max(axis=0) == 0)
        B[rng.integers(0, K, size=empty.size), empty] = rng.uniform(lo, hi, size=empty.size)
        rows = _random_rows(rng, n, count, d, lo, hi)
        return MixedPCInstance(B, p, rows)
    if kind == "setcover_multicost":
        n, r, K = int(params.get("n", 20)), int(params.get("universe", 50)), int(params.get("K", 3))
        d, p = int(params.get("d", 5)), float(params.get("p", 2.0))
        _check(n >= 1 and r >= 1 and K >= 1 and 1 <= d <= n, "inconsistent set cover parameters")
        members = [rng.choice(n, size=int(rng.integers(1, d + 1)), replace=False) for _ in range(r)]
        sets = [[] for _ in range(n)]
        for e, js in enumerate(members):
            for j in js:
                sets[int(j)].append(e)
        costs = rng.uniform(0.1, 10.0, size=(K, n))
        arrivals = rng.permutation(r)
        return SetCoverInstance(costs, p, sets, arrivals, r)
    if kind == "ccfl":
        m, n = int(params.get("m", 4)), int(params.get("clients", 10))
        _check(m >= 1 and n >= 0, "inconsistent ccfl parameters")
        opening = rng.uniform(1.0, 10.0, size=m)
        assign = rng.uniform(0.1, 5.0, size=(m, n))
        load = rng.uniform(0.1, 3.0, size=(m, n))
        return CCFLInstance(opening, assign, load, np.full(m, np.inf), params.get("p"))
    if kind == "pmpc":
        m, nb, K = int(params.get("m", 4)), int(params.get("buyers", 10)), int(params.get("K", 2))
        R, q = float(params.get("R", 10.0)), float(params.get("q", 2.0))
        max_b, max_s = int(params.get("bundles", 3)), int(params.get("bundle_size", 3))
        _check(m >= 1 and nb >= 0 and K >= 1 and R >= 1 and q > 1 and max_b >= 1 and max_s >= 1,
               "inconsistent pmpc parameters")
        rates = rng.uniform(0.5, 2.0, size=(K, m))
        buyers = []
        for _ in range(nb):
            bl = []
            for _ in range(int(rng.integers(1, max_b + 1))):
                size = int(rng.integers(1, min(max_s, m) + 1))
                bl.append(Bundle(tuple(rng.choice(m, size=size, replace=False)), float(rng.uniform(1.0, R))))
            buyers.append(tuple(bl))
        return PMPCInstance(rates, q, tuple(buyers), R)
    raise ConfigError(f"unknown instance kind {kind!r}")


def _rows_out(rows):
    return [[[int(j), float(a)] for j, a in zip(r.indices, r.values)] for r in rows]


def instance_to_dict(instance) -> dict:
    kind = kind_of(instance)
    if kind == "covering":
        return {"kind": kind, "objective": instance.spec.to_dict(), "rows": _rows_out(instance.rows),
                "params": {"d": int(instance.d)}}
    if kind == "mixed_pc":
        return {"kind": kind, "objective": {"B": csr_to_triplets(instance.B)}, "rows": _rows_out(instance.rows),
                "params": {"p": instance.p, "d": int(instance.sparsity)}}
    if kind == "setcover_multicost":
        return {"kind": kind, "objective": {"costs": csr_to_triplets(instance.costs)},
                "sets": [list(s) for s in instance.sets], "rows": list(instance.arrivals),
                "params": {"p": instance.p, "universe": instance.universe, "d": int(instance.degree)}}
    if kind == "ccfl":
        cap = [None if not np.isfinite(u) else float(u) for u in instance.capacity]
        return {"kind": kind, "objective": {"opening": instance.opening.tolist(), "capacity": cap},
                "clients": [{"assign": instance.assign[:, j].tolist(), "load": instance.load[:, j].tolist()}
                            for j in range(instance.n)],
                "params": {"p": instance.p}}
    return {"kind": kind, "objective": {"rates": csr_to_triplets(instance.rates), "q": instance.q},
            "buyers": [[{"items": list(b.items), "value": b.value} for b in bl] for bl in instance.buyers],
            "params": {"R": instance.R, "d": int(instance.d)}}


def instance_from_dict(data: dict):
    try:
        kind = data["kind"]
        obj = data.get("objective", {})
        params = data.get("params", {})
        if kind == "covering":
            return CoveringInstance(ObjectiveSpec.from_dict(obj), tuple(ConstraintRow.from_pairs(r, t)
                                    for t, r in enumerate(data["rows"])), params.get("d"))
        if kind == "mixed_pc":
            return MixedPCInstance(triplets_to_csr(obj["B"]).toarray(), params["p"],
                                   tuple(ConstraintRow.from_pairs(r, t) for t, r in enumerate(data["rows"])))
        if kind == "setcover_multicost":
            return SetCoverInstance(triplets_to_csr(obj["costs"]).toarray(), params["p"], data["sets"],
                                    data["rows"], params.get("universe"))
        if kind == "ccfl":
            clients = data["clients"]
            m = len(obj["opening"])
            assign = np.array([c["assign"] for c in clients], dtype=np.float64).T.reshape(m, len(clients))
            load = np.array([c["load"] for c in clients], dtype=np.float64).T.reshape(m, len(clients))
            cap = obj.get("capacity")
            cap = None if cap is None else [np.inf if u is None else u for u in cap]
            return CCFLInstance(obj["opening"], assign, load, cap, params.get("p"))
        if kind == "pmpc":
            buyers = tuple(tuple(Bundle(b["items"], b["value"]) for b in bl) for bl in data["buyers"])
            return PMPCInstance(triplets_to_csr(obj["rates"]).toarray(), obj["q"], buyers, params.get("R"))
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed instance: missing or bad field {exc}") from None
    raise InputError(f"unknown instance kind {data.get('kind')!r}")


def save_instance(instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=1) + "\n", encoding="utf-8")


def load_instance(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    return instance_from_dict(data)
