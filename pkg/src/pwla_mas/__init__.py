"""Deterministic PWLA feature weighting, one-epoch binary-step classification
and a small multi-agent pipeline around them."""

__version__ = "0.1.0"

from .dataset import AttributeSpec, Dataset, SchemaSelection, export_csv, ingest_csv, join_sources, split_train_test
from .pwla import (
    NormalizedMatrix,
    PotentialWeights,
    ReductionPolicy,
    analyze,
    apply_normalization,
    normalize,
    potential_weights,
    project,
    rank,
    ratio_weights,
    reduce,
)
from .smffnn import Evaluation, SmffnnModel, evaluate, fit, predict, score, train

__all__ = [
    "AttributeSpec",
    "Dataset",
    "Evaluation",
    "NormalizedMatrix",
    "PotentialWeights",
    "ReductionPolicy",
    "SchemaSelection",
    "SmffnnModel",
    "analyze",
    "apply_normalization",
    "evaluate",
    "export_csv",
    "fit",
    "ingest_csv",
    "join_sources",
    "normalize",
    "potential_weights",
    "predict",
    "project",
    "rank",
    "ratio_weights",
    "reduce",
    "score",
    "split_train_test",
    "train",
]
