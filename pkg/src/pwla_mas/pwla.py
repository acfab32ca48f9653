"""Potential weights linear analysis.

Three phases, each a pure function:

1. :func:`normalize` -- per-column min-max scaling to [0, 1].
2. :func:`potential_weights` -- per-attribute deviation mass
   ``w[j] = sum_i |v[i, j] - g|`` around the global mean ``g`` of the
   normalized matrix. No random initialisation is involved.
3. :func:`reduce` / :func:`project` -- keep the strong attributes and drop
   the weak ones.

:func:`analyze` chains all three.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .dataset import Dataset, format_number
from .errors import AllWeightsZero, BadIndex, BadPolicy, DimensionMismatch, SnapshotFormatError

WEIGHTS_MAGIC = "#pwla-weights v1"


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class NormalizedMatrix:
    values: np.ndarray
    col_min: np.ndarray
    col_max: np.ndarray
    constant_cols: frozenset
    global_mean: float
    attribute_names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "col_min", _frozen(self.col_min))
        object.__setattr__(self, "col_max", _frozen(self.col_max))
        object.__setattr__(self, "constant_cols", frozenset(int(j) for j in self.constant_cols))
        if not self.attribute_names:
            names = tuple(f"x{j}" for j in range(self.values.shape[1]))
            object.__setattr__(self, "attribute_names", names)
        else:
            object.__setattr__(self, "attribute_names", tuple(self.attribute_names))

    @property
    def shape(self):
        return self.values.shape

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def take_rows(self, rows: Sequence[int]) -> "NormalizedMatrix":
        """Row subset sharing the column statistics (global mean recomputed)."""
        values = self.values[list(rows), :]
        return replace(self, values=values, global_mean=float(values.mean()))

    def __eq__(self, other):
        if not isinstance(other, NormalizedMatrix):
            return NotImplemented
        return (
            np.array_equal(self.values, other.values)
            and np.array_equal(self.col_min, other.col_min)
            and np.array_equal(self.col_max, other.col_max)
            and self.constant_cols == other.constant_cols
            and self.global_mean == other.global_mean
            and self.attribute_names == other.attribute_names
        )

    __hash__ = None


@dataclass(frozen=True)
class ReductionPolicy:
    """Cutoff rule separating strong from weak weights.

    ``mean`` keeps weights at or above the mean over non-constant columns,
    ``topk`` keeps the ``k`` largest, ``frac`` keeps ``w >= tau * max(w)``.
    """

    rule: str = "mean"
    k: int | None = None
    tau: float | None = None

    def __post_init__(self):
        if self.rule not in ("mean", "topk", "frac"):
            raise BadPolicy(f"unknown reduction rule {self.rule!r}")
        if self.rule == "topk" and (self.k is None or self.k < 1):
            raise BadPolicy("top-k needs k >= 1")
        if self.rule == "frac" and (self.tau is None or not 0.0 < self.tau <= 1.0):
            raise BadPolicy("fraction-of-max needs tau in (0, 1]")

    @classmethod
    def mean_threshold(cls):
        return cls("mean")

    @classmethod
    def top_k(cls, k: int):
        return cls("topk", k=int(k))

    @classmethod
    def fraction_of_max(cls, tau: float):
        return cls("frac", tau=float(tau))

    @classmethod
    def parse(cls, text: str) -> "ReductionPolicy":
        """Parse ``mean``, ``topk:K`` or ``frac:T``."""
        rule, _, arg = text.strip().partition(":")
        try:
            if rule == "mean" and not arg:
                return cls.mean_threshold()
            if rule == "topk":
                return cls.top_k(int(arg))
            if rule == "frac":
                return cls.fraction_of_max(float(arg))
        except ValueError:
            pass
        raise BadPolicy(f"cannot parse reduction policy {text!r}")

    def __str__(self):
        if self.rule == "topk":
            return f"topk:{self.k}"
        if self.rule == "frac":
            return f"frac:{format_number(self.tau)}"
        return "mean"


@dataclass(frozen=True, eq=False)
class PotentialWeights:
    w: np.ndarray
    constant_cols: frozenset = frozenset()
    attribute_names: tuple[str, ...] = ()
    strong: tuple[int, ...] | None = None
    weak: tuple[int, ...] | None = None
    policy: ReductionPolicy | None = None

    def __post_init__(self):
        object.__setattr__(self, "w", _frozen(self.w))
        object.__setattr__(self, "constant_cols", frozenset(self.constant_cols))
        if not self.attribute_names:
            object.__setattr__(self, "attribute_names", tuple(f"x{j}" for j in range(len(self.w))))

    @property
    def strong_names(self) -> tuple[str, ...]:
        return tuple(self.attribute_names[j] for j in self.strong or ())

    @property
    def strong_weights(self) -> np.ndarray:
        return self.w[list(self.strong or ())]

    def __eq__(self, other):
        if not isinstance(other, PotentialWeights):
            return NotImplemented
        return (
            np.array_equal(self.w, other.w)
            and self.constant_cols == other.constant_cols
            and self.attribute_names == other.attribute_names
            and self.strong == other.strong
            and self.weak == other.weak
            and self.policy == other.policy
        )

    __hash__ = None


def normalize(ds: Dataset) -> NormalizedMatrix:
    """Min-max scale each column of ``ds`` into [0, 1].

    Constant columns become all zeros and are listed in ``constant_cols``.
    """
    x = ds.values
    col_min = x.min(axis=0)
    col_max = x.max(axis=0)
    span = col_max - col_min
    constant = span == 0
    safe = np.where(constant, 1.0, span)
    values = (x - col_min) / safe
    values[:, constant] = 0.0
    # guard against 1 + ulp from the division
    np.clip(values, 0.0, 1.0, out=values)
    return NormalizedMatrix(
        values=values,
        col_min=col_min,
        col_max=col_max,
        constant_cols=frozenset(np.flatnonzero(constant).tolist()),
        global_mean=float(values.mean()),
        attribute_names=ds.attribute_names,
    )


def apply_normalization(nm: NormalizedMatrix, raw) -> np.ndarray:
    """Map raw instance(s) with the training statistics, clamped to [0, 1].

    Accepts one length-d vector or an (m, d) matrix.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape[-1:] != (nm.d,):
        raise DimensionMismatch(nm.d, raw.shape[-1] if raw.ndim else 0)
    return _scale(raw, nm.col_min, nm.col_max)


def _scale(raw, col_min, col_max):
    span = col_max - col_min
    constant = span == 0
    out = (raw - col_min) / np.where(constant, 1.0, span)
    out = np.clip(out, 0.0, 1.0)
    out[..., constant] = 0.0
    return out


def potential_weights(nm: NormalizedMatrix) -> PotentialWeights:
    """Per-attribute sum of absolute deviations from the global mean."""
    w = np.abs(nm.values - nm.global_mean).sum(axis=0)
    w[list(nm.constant_cols)] = 0.0
    return PotentialWeights(w=w, constant_cols=nm.constant_cols, attribute_names=nm.attribute_names)


def ratio_weights(nm: NormalizedMatrix) -> np.ndarray:
    """Weights in ratio form: ``sum_i |v[i, j] / g - 1|``.

    Equal to ``potential_weights(nm).w / g``; only defined for ``g > 0``.
    """
    g = nm.global_mean
    if not g > 0:
        raise AllWeightsZero("ratio form needs a positive global mean")
    w = np.abs(nm.values / g - 1.0).sum(axis=0)
    w[list(nm.constant_cols)] = 0.0
    return w


def rank(w, rtol: float = 1e-9) -> np.ndarray:
    """Column indices by decreasing weight.

    Weights within ``rtol * max|w|`` of their neighbour in sorted order are
    tied, and ties go to the lower column index. Without the tolerance,
    rounding noise would decide between mathematically equal weights.
    """
    w = np.asarray(w, dtype=np.float64)
    order = np.lexsort((np.arange(len(w)), -w))
    tol = rtol * float(np.abs(w).max()) if len(w) else 0.0
    out, group = [], [int(order[0])] if len(w) else []
    for j in order[1:]:
        if w[group[-1]] - w[j] > tol:
            out.extend(sorted(group))
            group = []
        group.append(int(j))
    out.extend(sorted(group))
    return np.array(out, dtype=np.int64)


def reduce(pw: PotentialWeights, policy: ReductionPolicy | None = None) -> PotentialWeights:
    """Partition columns into strong and weak under ``policy`` (default mean)."""
    policy = policy or ReductionPolicy.mean_threshold()
    w = pw.w
    d = len(w)
    if not np.any(w > 0):
        raise AllWeightsZero("every potential weight is zero")
    wmax = w.max()

    if policy.rule == "mean":
        live = [j for j in range(d) if j not in pw.constant_cols]
        cutoff = w[live].mean()
        keep = [j for j in live if w[j] >= cutoff or w[j] == wmax]
    elif policy.rule == "topk":
        if policy.k > d:
            raise BadPolicy(f"top-k with k={policy.k} exceeds {d} attributes")
        keep = sorted(int(j) for j in rank(w)[: policy.k])
    else:
        keep = [j for j in range(d) if w[j] >= policy.tau * wmax]

    strong = tuple(int(j) for j in keep)
    weak = tuple(j for j in range(d) if j not in set(strong))
    return replace(pw, strong=strong, weak=weak, policy=policy)


def project(nm: NormalizedMatrix, strong: Sequence[int]) -> NormalizedMatrix:
    """Restrict ``nm`` to the ``strong`` columns; the global mean is recomputed."""
    strong = [int(j) for j in strong]
    if not strong:
        raise BadIndex("strong set is empty")
    for j in strong:
        if not 0 <= j < nm.d:
            raise BadIndex(f"column {j} out of range for d={nm.d}")
    values = nm.values[:, strong]
    remap = {old: new for new, old in enumerate(strong)}
    return NormalizedMatrix(
        values=values,
        col_min=nm.col_min[strong],
        col_max=nm.col_max[strong],
        constant_cols=frozenset(remap[j] for j in nm.constant_cols if j in remap),
        global_mean=float(values.mean()),
        attribute_names=tuple(nm.attribute_names[j] for j in strong),
    )


@dataclass(frozen=True)
class PwlaResult:
    normalized: NormalizedMatrix
    weights: PotentialWeights
    projected: NormalizedMatrix


def analyze(ds: Dataset, policy: ReductionPolicy | None = None) -> PwlaResult:
    nm = normalize(ds)
    pw = reduce(potential_weights(nm), policy)
    return PwlaResult(nm, pw, project(nm, pw.strong))


def weights_snapshot(nm: NormalizedMatrix, pw: PotentialWeights) -> str:
    """Text snapshot: one tab-separated line per attribute."""
    lines = [
        WEIGHTS_MAGIC,
        f"global_mean\t{format_number(nm.global_mean)}",
        f"policy\t{pw.policy if pw.policy is not None else '-'}",
        "name\tmin\tmax\tweight\tstrong",
    ]
    strong = set(pw.strong or ())
    for j, name in enumerate(pw.attribute_names):
        lines.append(
            "\t".join(
                [
                    name,
                    format_number(nm.col_min[j]),
                    format_number(nm.col_max[j]),
                    format_number(pw.w[j]),
                    "1" if j in strong else "0",
                ]
            )
        )
    return "\n".join(lines) + "\n"


def parse_weights_snapshot(text: str) -> list[dict]:
    """Rows of a weights snapshot as dicts (name, min, max, weight, strong)."""
    lines = text.splitlines()
    if not lines or lines[0] != WEIGHTS_MAGIC:
        raise SnapshotFormatError("not a weights snapshot")
    rows = []
    for line in lines[4:]:
        name, lo, hi, w, strong = line.split("\t")
        rows.append(
            {"name": name, "min": float(lo), "max": float(hi), "weight": float(w), "strong": strong == "1"}
        )
    return rows
