"""One-epoch binary-step classifier over PWLA weights.

Network layout: the input layer takes every selected attribute, the hidden
layer passes through the strong attributes kept by PWLA, and the single
output node applies a binary step to ``s = sum_j w[j] * x[j]``.

Training is a single pass: each training instance is scored once, then the
threshold and its orientation are read off the sorted scores. There is no
bias, no error signal and no random initialisation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import CLASSES, Dataset, format_number
from .errors import (
    DimensionMismatch,
    EmptyTestSet,
    MissingColumn,
    SingleClassTraining,
    SnapshotFormatError,
)
from .pwla import NormalizedMatrix, PotentialWeights, ReductionPolicy, _scale, analyze

MODEL_MAGIC = "#smffnn-model v1"
CLASS1_ABOVE = "class1_above"
CLASS1_BELOW = "class1_below"


@dataclass(frozen=True, eq=False)
class SmffnnModel:
    attribute_names: tuple[str, ...]
    weights: np.ndarray
    col_min: np.ndarray
    col_max: np.ndarray
    threshold: float
    orientation: str
    train_accuracy: float

    def __post_init__(self):
        for name in ("weights", "col_min", "col_max"):
            a = np.array(getattr(self, name), dtype=np.float64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "attribute_names", tuple(self.attribute_names))
        if len(self.weights) == 0:
            raise DimensionMismatch(1, 0)
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")
        if self.orientation not in (CLASS1_ABOVE, CLASS1_BELOW):
            raise ValueError(f"bad orientation {self.orientation!r}")

    @property
    def d(self) -> int:
        return len(self.weights)

    def __eq__(self, other):
        if not isinstance(other, SmffnnModel):
            return NotImplemented
        return self.to_text() == other.to_text()

    __hash__ = None

    def to_text(self) -> str:
        lines = [
            MODEL_MAGIC,
            f"threshold\t{format_number(self.threshold)}",
            f"orientation\t{self.orientation}",
            f"train_accuracy\t{format_number(self.train_accuracy)}",
            "name\tmin\tmax\tweight",
        ]
        for row in zip(self.attribute_names, self.col_min, self.col_max, self.weights):
            lines.append("\t".join([row[0], *(format_number(v) for v in row[1:])]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SmffnnModel":
        lines = text.splitlines()
        if not lines or lines[0] != MODEL_MAGIC:
            raise SnapshotFormatError("not a model snapshot")
        try:
            header = dict(line.split("\t", 1) for line in lines[1:4])
            rows = [line.split("\t") for line in lines[5:] if line]
            return cls(
                attribute_names=tuple(r[0] for r in rows),
                col_min=[float(r[1]) for r in rows],
                col_max=[float(r[2]) for r in rows],
                weights=[float(r[3]) for r in rows],
                threshold=float(header["threshold"]),
                orientation=header["orientation"],
                train_accuracy=float(header["train_accuracy"]),
            )
        except (KeyError, IndexError, ValueError) as exc:
            raise SnapshotFormatError(f"malformed model snapshot: {exc}") from exc


@dataclass(frozen=True)
class Evaluation:
    accuracy: float
    confusion: np.ndarray  # rows: true class 1, 2; columns: predicted 1, 2
    scores: np.ndarray
    predictions: np.ndarray


def score(model, instance) -> float:
    """Weighted sum of a normalized instance.

    ``model`` is an :class:`SmffnnModel` or a bare weight vector. Summation
    is exactly rounded (``math.fsum``), so the result does not depend on
    platform or vectorisation.
    """
    weights = model.weights if isinstance(model, SmffnnModel) else np.asarray(model, dtype=np.float64)
    x = np.asarray(instance, dtype=np.float64)
    if x.shape != weights.shape:
        raise DimensionMismatch(len(weights), x.size)
    return math.fsum((weights * x).tolist())


def step(s: float, threshold: float, orientation: str) -> int:
    """Binary step. Scores at or above the threshold take the upper class."""
    upper, lower = (1, 2) if orientation == CLASS1_ABOVE else (2, 1)
    return upper if s >= threshold else lower


def _weights_for(nm: NormalizedMatrix, pw: PotentialWeights) -> np.ndarray:
    index = {name: j for j, name in enumerate(pw.attribute_names)}
    try:
        return np.array([pw.w[index[name]] for name in nm.attribute_names])
    except KeyError as exc:
        raise MissingColumn(exc.args[0]) from None


def best_threshold(scores, labels) -> tuple[float, str, int]:
    """Pick ``(threshold, orientation, n_correct)`` maximizing training accuracy.

    Candidates are the midpoints between consecutive distinct scores plus one
    point below the minimum and one above the maximum, offset by half the
    score span (or 1 when all scores coincide). Ties go to the larger margin,
    then ``class1_above``, then the smaller threshold.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n = len(scores)
    order = np.argsort(scores, kind="stable")
    s_sorted = scores[order]
    is1 = (labels[order] == 1).astype(np.int64)
    # ones_below[p]: class-1 count among the p smallest scores
    ones_below = np.concatenate(([0], np.cumsum(is1)))
    total1 = int(ones_below[-1])

    distinct = np.unique(s_sorted)
    span = distinct[-1] - distinct[0]
    offset = span / 2 if span > 0 else 1.0
    candidates = [distinct[0] - offset]
    candidates += [(a + b) / 2 for a, b in zip(distinct[:-1], distinct[1:])]
    candidates.append(distinct[-1] + offset)

    best = None
    for theta in candidates:
        p = int(np.searchsorted(s_sorted, theta, side="left"))  # scores < theta
        below1 = int(ones_below[p])
        below2 = p - below1
        above1 = total1 - below1
        above2 = (n - p) - above1
        gaps = []
        if p > 0:
            gaps.append(theta - s_sorted[p - 1])
        if p < n:
            gaps.append(s_sorted[p] - theta)
        margin = min(gaps)
        for orientation, correct in ((CLASS1_ABOVE, above1 + below2), (CLASS1_BELOW, below1 + above2)):
            key = (correct, margin, orientation == CLASS1_ABOVE, -theta)
            if best is None or key > best[0]:
                best = (key, float(theta), orientation, correct)
    return best[1], best[2], best[3]


def train(nm: NormalizedMatrix, pw: PotentialWeights, labels: Sequence[int]) -> SmffnnModel:
    """Single-epoch training on the projected matrix ``nm``.

    Weights are looked up in ``pw`` by attribute name, so ``nm`` may be any
    column subset of the matrix ``pw`` was computed on.
    """
    labels = np.asarray(labels)
    if labels.shape != (nm.shape[0],):
        raise DimensionMismatch(nm.shape[0], labels.size)
    if set(np.unique(labels).tolist()) != set(CLASSES):
        raise SingleClassTraining("training labels must contain both classes 1 and 2")
    weights = _weights_for(nm, pw)
    scores = [score(weights, row) for row in nm.values]
    theta, orientation, correct = best_threshold(scores, labels)
    return SmffnnModel(
        attribute_names=nm.attribute_names,
        weights=weights,
        col_min=nm.col_min,
        col_max=nm.col_max,
        threshold=theta,
        orientation=orientation,
        train_accuracy=correct / len(labels),
    )


def normalize_instance(model: SmffnnModel, raw) -> np.ndarray:
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape[-1:] != (model.d,):
        raise DimensionMismatch(model.d, raw.shape[-1] if raw.ndim else 0)
    if not np.all(np.isfinite(raw)):
        raise ValueError("instance must be finite")
    return _scale(raw, model.col_min, model.col_max)


def predict(model: SmffnnModel, raw_instance) -> int:
    """Class (1 or 2) of one raw instance over the model's attributes."""
    x = normalize_instance(model, raw_instance)
    return step(score(model, x), model.threshold, model.orientation)


def classify(model: SmffnnModel, raw) -> tuple[np.ndarray, np.ndarray]:
    """Scores and predicted classes for every row of ``raw``."""
    x = normalize_instance(model, np.atleast_2d(raw))
    scores = np.array([score(model, row) for row in x])
    preds = np.array([step(s, model.threshold, model.orientation) for s in scores], dtype=np.int64)
    return scores, preds


def _model_columns(model: SmffnnModel, ds: Dataset) -> np.ndarray:
    if ds.attribute_names == model.attribute_names:
        return ds.values
    if all(name in ds.attribute_names for name in model.attribute_names):
        return ds.select(model.attribute_names).values
    raise DimensionMismatch(model.d, ds.d)


def evaluate(model: SmffnnModel, test: Dataset) -> Evaluation:
    """Accuracy and confusion counts of ``model`` on a labeled dataset."""
    if test.n == 0:
        raise EmptyTestSet("test set is empty")
    if not test.is_labeled:
        raise EmptyTestSet("test set has no labels")
    scores, preds = classify(model, _model_columns(model, test))
    confusion = np.zeros((2, 2), dtype=np.int64)
    for t, p in zip(test.labels, preds):
        confusion[t - 1, p - 1] += 1
    return Evaluation(
        accuracy=float(np.trace(confusion)) / test.n,
        confusion=confusion,
        scores=scores,
        predictions=preds,
    )


def fit(ds: Dataset, policy: ReductionPolicy | None = None) -> SmffnnModel:
    """PWLA on ``ds`` followed by one-epoch training on its labels."""
    if not ds.is_labeled:
        raise SingleClassTraining("dataset has no labels")
    result = analyze(ds, policy)
    return train(result.projected, result.weights, ds.labels)
