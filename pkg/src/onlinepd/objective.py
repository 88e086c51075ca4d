"""Convex objectives of the form f(x) = sum_k s_k (B_k . x)^{p_k}.

Every objective the package uses is a sum of powers of non-negative linear
forms. A linear cost is the single form B = c with p = 1, and the facility
location composite is assembled from the same parts, so one evaluation kernel
serves all variants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InputError

VARIANTS = ("linear", "power_sum", "ccfl_composite")


def _as_forms(B, n=None) -> sp.csr_matrix:
    if sp.issparse(B):
        mat = sp.csr_matrix(B, dtype=np.float64, copy=True)
    else:
        arr = np.atleast_2d(np.asarray(B, dtype=np.float64))
        mat = sp.csr_matrix(arr)
    if n is not None and mat.shape[1] != n:
        raise InputError(f"forms have {mat.shape[1]} columns, expected {n}")
    mat.sum_duplicates()
    mat.eliminate_zeros()
    mat.sort_indices()
    return mat


def _powneg(base: np.ndarray, q: np.ndarray) -> np.ndarray:
    # 0**q is 0 for q > 0 and 1 for q == 0; np.power already follows that
    return np.power(np.maximum(base, 0.0), q)


@dataclass(frozen=True, eq=False)
class ObjectiveSpec:
    """Immutable description of f with analytic gradient and conjugate data.

    Attributes
    ----------
    forms : (K, n) sparse matrix of non-negative coefficients b_kj.
    exponents : (K,) exponents p_k >= 1.
    scales : (K,) non-negative scales s_k.
    variant : tag, one of ``VARIANTS``.
    params : variant parameters kept for reporting and serialization.
    """

    forms: sp.csr_matrix
    exponents: np.ndarray
    scales: np.ndarray
    variant: str = "power_sum"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InputError(f"unknown objective variant {self.variant!r}")
        forms = _as_forms(self.forms)
        p = np.asarray(self.exponents, dtype=np.float64).reshape(-1)
        s = np.asarray(self.scales, dtype=np.float64).reshape(-1)
        K = forms.shape[0]
        if p.shape[0] != K or s.shape[0] != K:
            raise InputError(f"{K} forms but {p.shape[0]} exponents and {s.shape[0]} scales")
        if forms.nnz and forms.data.min() < 0:
            raise InputError("form coefficients must be non-negative")
        if not np.all(np.isfinite(forms.data)):
            raise InputError("form coefficients must be finite")
        if np.any(~np.isfinite(p)) or np.any(p < 1):
            raise InputError("exponents must be >= 1")
        if np.any(~np.isfinite(s)) or np.any(s < 0):
            raise InputError("scales must be non-negative")
        for arr in (p, s, forms.data, forms.indices, forms.indptr):
            arr.flags.writeable = False
        object.__setattr__(self, "forms", forms)
        object.__setattr__(self, "exponents", p)
        object.__setattr__(self, "scales", s)

        csc = forms.tocsc()
        csc.sort_indices()
        # effective forms: those that actually contribute to f
        live = (s > 0) & (np.diff(forms.indptr) > 0)
        pmin = np.full(forms.shape[1], np.inf)
        for j in range(forms.shape[1]):
            ks = csc.indices[csc.indptr[j]:csc.indptr[j + 1]]
            ks = ks[live[ks]]
            if ks.size:
                pmin[j] = p[ks].min()
        free = ~np.isfinite(pmin)
        exps = p[live]
        object.__setattr__(self, "_csc", csc)
        object.__setattr__(self, "_pmin", np.where(free, 1.0, pmin))
        object.__setattr__(self, "_free", free)
        object.__setattr__(self, "_live", live)
        uniform = exps.size > 0 and bool(np.all(exps == exps[0]))
        object.__setattr__(self, "_uniform_p", float(exps[0]) if uniform else None)

    # ------------------------------------------------------------------
    # constructors

    @classmethod
    def linear(cls, c: Sequence[float]) -> "ObjectiveSpec":
        c = np.asarray(c, dtype=np.float64).reshape(1, -1)
        if np.any(c < 0):
            raise InputError("linear costs must be non-negative")
        return cls(c, np.ones(1), np.ones(1), variant="linear")

    @classmethod
    def power_sum(cls, terms: Iterable[tuple], n: int | None = None) -> "ObjectiveSpec":
        """Build from ``(B_k, p_k, s_k)`` triples; B_k is a length-n vector."""
        terms = list(terms)
        if not terms:
            if n is None:
                raise InputError("empty power sum needs an explicit dimension")
            return cls(sp.csr_matrix((0, n)), np.zeros(0), np.zeros(0))
        rows = [np.asarray(t[0], dtype=np.float64).reshape(-1) for t in terms]
        width = {r.shape[0] for r in rows}
        if len(width) != 1 or (n is not None and width != {n}):
            raise InputError("all forms must have the same length")
        return cls(
            np.vstack(rows),
            np.array([t[1] for t in terms], dtype=np.float64),
            np.array([t[2] for t in terms], dtype=np.float64),
        )

    @classmethod
    def from_forms(cls, B, exponents, scales, variant="power_sum", params=None) -> "ObjectiveSpec":
        K = _as_forms(B).shape[0]
        exponents = np.broadcast_to(np.asarray(exponents, dtype=np.float64), (K,)).copy()
        scales = np.broadcast_to(np.asarray(scales, dtype=np.float64), (K,)).copy()
        return cls(B, exponents, scales, variant=variant, params=dict(params or {}))

    @classmethod
    def ccfl_composite(cls, opening, assign, load, M: float, p: float) -> "ObjectiveSpec":
        """Facility-location objective over variables (x_1..x_m, y_11..y_mn).

        ``assign`` and ``load`` are (m, n) arrays; y_ij sits at index
        m + j*m + i. The objective is

            (sum_i c_i x_i + sum_ij c_i p_ij y_ij / M)^p
            + (sum_ij a_ij y_ij)^p + sum_i (sum_j p_ij y_ij)^p.
        """
        c = np.asarray(opening, dtype=np.float64).reshape(-1)
        a = np.asarray(assign, dtype=np.float64)
        ld = np.asarray(load, dtype=np.float64)
        m = c.shape[0]
        if a.ndim != 2 or a.shape[0] != m or ld.shape != a.shape:
            raise InputError("assign and load must be (m, n) arrays matching the facilities")
        if M <= 0:
            raise InputError("guess M must be positive")
        if min(c.min(initial=0), a.min(initial=0), ld.min(initial=0)) < 0:
            raise InputError("facility data must be non-negative")
        n = a.shape[1]
        N = m + m * n
        ii, jj = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
        yidx = (m + jj * m + ii).ravel()
        rows, cols, vals = [], [], []
        # opening form
        rows += [np.zeros(m, dtype=int), np.zeros(m * n, dtype=int)]
        cols += [np.arange(m), yidx]
        vals += [c, (c[:, None] * ld / M).ravel()]
        # assignment form
        rows.append(np.ones(m * n, dtype=int))
        cols.append(yidx)
        vals.append(a.ravel())
        # load forms, one per facility
        rows.append((2 + ii).ravel())
        cols.append(yidx)
        vals.append(ld.ravel())
        B = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(m + 2, N),
        )
        params = {"opening": c.tolist(), "assign": a.tolist(), "load": ld.tolist(), "M": float(M), "p": float(p)}
        return cls(B, np.full(m + 2, float(p)), np.ones(m + 2), variant="ccfl_composite", params=params)

    # ------------------------------------------------------------------
    # basic properties

    @property
    def dimension(self) -> int:
        return self.forms.shape[1]

    @property
    def n_forms(self) -> int:
        return self.forms.shape[0]

    @property
    def uniform_exponent(self) -> float | None:
        """Common exponent of all contributing forms, or None if mixed."""
        return self._uniform_p

    @property
    def max_exponent(self) -> float:
        p = self.exponents[self._live]
        return float(p.max()) if p.size else 1.0

    @property
    def free_columns(self) -> np.ndarray:
        """Mask of coordinates that f does not depend on."""
        return self._free

    @property
    def min_exponent_per_column(self) -> np.ndarray:
        return self._pmin

    # ------------------------------------------------------------------
    # evaluation

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.dimension:
            raise InputError(f"expected a vector of length {self.dimension}, got shape {x.shape}")
        if np.any(x < 0):
            raise InputError("coordinates must be non-negative")
        if not np.all(np.isfinite(x)):
            raise InputError("coordinates must be finite")
        return x

    def form_values(self, x) -> np.ndarray:
        return self.forms @ self._check(x)

    def value_from_forms(self, F: np.ndarray) -> float:
        return float(np.dot(self.scales, _powneg(F, self.exponents)))

    def gradient_from_forms(self, F: np.ndarray, scale: float = 1.0) -> np.ndarray:
        coef = self.scales * self.exponents * _powneg(scale * F, self.exponents - 1.0)
        return self.forms.T @ coef

    def conjugate_from_forms(self, F: np.ndarray, scale: float = 1.0) -> float:
        return float(np.dot(self.scales * (self.exponents - 1.0), _powneg(scale * F, self.exponents)))

    def value(self, x) -> float:
        return self.value_from_forms(self.form_values(x))

    def gradient(self, x) -> np.ndarray:
        return self.gradient_from_forms(self.form_values(x))

    def conjugate_at_gradient(self, a) -> float:
        """f*(grad f(a)) = a . grad f(a) - f(a).

        For a power sum this is sum_k s_k (p_k - 1)(B_k . a)^{p_k}, which is
        the same quantity without the cancellation.
        """
        return self.conjugate_from_forms(self.form_values(a))

    def rate_ratio(self, x, delta: float, active) -> float:
        """min over active l of grad_l f(delta x) / grad_l f(x).

        Coordinates with a zero gradient use the limit delta^(p_min(l) - 1),
        where p_min(l) is the smallest exponent of a form touching l;
        coordinates f does not depend on contribute 1.
        """
        if not 0 < delta <= 1:
            raise InputError("delta must lie in (0, 1]")
        idx = np.asarray(active, dtype=np.int64).reshape(-1)
        if idx.size == 0:
            raise InputError("rate_ratio needs a non-empty active set")
        if idx.min() < 0 or idx.max() >= self.dimension:
            raise InputError("active index out of range")
        x = self._check(x)
        F = self.forms @ x
        return ratio_from_forms(self, F, delta, idx)

    # ------------------------------------------------------------------
    # serialization

    def to_dict(self) -> dict:
        if self.variant == "linear":
            return {"variant": "linear", "c": self.forms.toarray()[0].tolist()}
        coo = self.forms.tocoo()
        out = {
            "variant": self.variant,
            "n": int(self.dimension),
            "forms": {
                "shape": [int(self.n_forms), int(self.dimension)],
                "triplets": [[int(r), int(c), float(v)] for r, c, v in zip(coo.row, coo.col, coo.data)],
            },
            "exponents": self.exponents.tolist(),
            "scales": self.scales.tolist(),
        }
        if self.params:
            out["params"] = self.params
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ObjectiveSpec":
        variant = data.get("variant")
        if variant == "linear":
            return cls.linear(data["c"])
        if variant == "ccfl_composite" and "forms" not in data:
            p = data["params"]
            return cls.ccfl_composite(p["opening"], p["assign"], p["load"], p["M"], p["p"])
        if variant not in VARIANTS:
            raise InputError(f"unknown objective variant {variant!r}")
        try:
            B = triplets_to_csr(data["forms"])
            return cls(B, data["exponents"], data["scales"], variant=variant, params=data.get("params", {}))
        except KeyError as exc:
            raise InputError(f"objective is missing field {exc}") from None


def ratio_from_forms(spec: ObjectiveSpec, F: np.ndarray, delta: float, idx: np.ndarray) -> float:
    free = spec.free_columns[idx]
    if np.all(free):
        return 1.0
    if spec.uniform_exponent is not None:
        return float(delta ** (spec.uniform_exponent - 1.0))
    gx = spec.gradient_from_forms(F)[idx]
    gd = spec.gradient_from_forms(F, delta)[idx]
    limit = delta ** (spec.min_exponent_per_column[idx] - 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(gx > 0, gd / np.where(gx > 0, gx, 1.0), limit)
    r = np.where(free, 1.0, r)
    return float(r.min())


def triplets_to_csr(block: dict) -> sp.csr_matrix:
    """Read ``{"shape": [r, c], "triplets": [[i, j, v], ...]}``."""
    try:
        shape = tuple(int(v) for v in block["shape"])
        trip = np.asarray(block.get("triplets", []), dtype=np.float64).reshape(-1, 3)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad sparse matrix block: {exc}") from None
    r = trip[:, 0].astype(np.int64)
    c = trip[:, 1].astype(np.int64)
    if trip.shape[0] and (r.min() < 0 or c.min() < 0 or r.max() >= shape[0] or c.max() >= shape[1]):
        raise InputError("triplet index out of range")
    return sp.csr_matrix((trip[:, 2], (r, c)), shape=shape)


def csr_to_triplets(mat) -> dict:
    coo = sp.coo_matrix(mat)
    return {
        "shape": [int(coo.shape[0]), int(coo.shape[1])],
        "triplets": [[int(r), int(c), float(v)] for r, c, v in zip(coo.row, coo.col, coo.data)],
    }


# functional aliases for the module's operations

def value(spec: ObjectiveSpec, x) -> float:
    return spec.value(x)


def gradient(spec: ObjectiveSpec, x) -> np.ndarray:
    return spec.gradient(x)


def conjugate_at_gradient(spec: ObjectiveSpec, a) -> float:
    return spec.conjugate_at_gradient(a)


def rate_ratio(spec: ObjectiveSpec, x, delta: float, active) -> float:
    return spec.rate_ratio(x, delta, active)
