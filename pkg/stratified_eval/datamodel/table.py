from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from stratified_eval.datamodel.subgroup import CONSTRAINT_SEPARATOR, VALUE_SEPARATOR
from stratified_eval.errors import ConfigError, DataValidationError, UnknownAttribute

MISSING_CATEGORY = "(missing)"

RowMask = Optional[np.ndarray]


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, copy=True)
    values.setflags(write=False)
    return values


@dataclass(frozen=True, slots=True)
class Sample:
    """Scores, labels and per-row values of a selection of rows."""

    scores: np.ndarray
    labels: np.ndarray
    values: Mapping[str, np.ndarray] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    @property
    def n_pos(self) -> int:
        return int(self.labels.sum())

    @property
    def n_neg(self) -> int:
        return self.n - self.n_pos

    def take(self, idx: np.ndarray) -> Sample:
        return Sample(
            scores=self.scores[idx],
            labels=self.labels[idx],
            values={k: v[idx] for k, v in self.values.items()},
        )

    @classmethod
    def concat(cls, first: Sample, second: Sample) -> Sample:
        return cls(
            scores=np.concatenate([first.scores, second.scores]),
            labels=np.concatenate([first.labels, second.labels]),
            values={
                k: np.concatenate([v, second.values[k]])
                for k, v in first.values.items()
            },
        )


@dataclass(frozen=True, slots=True)
class EvalTable:
    """Validated, immutable prediction table.

    ``scores`` are probabilities in [0, 1], ``labels`` are 0/1, ``attributes``
    maps attribute names to categorical string columns and ``values`` holds
    optional numeric per-row columns (for averaged metrics such as dice).
    """

    scores: np.ndarray
    labels: np.ndarray
    attributes: Mapping[str, np.ndarray] = field(default_factory=dict)
    values: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        scores = np.asarray(self.scores, dtype=np.float64)
        labels = np.asarray(self.labels)
        n = scores.shape[0]

        if scores.ndim != 1 or labels.ndim != 1 or labels.shape[0] != n:
            raise ValueError("scores and labels must be 1D columns of equal length.")

        bad = np.flatnonzero(~np.isfinite(scores) | (scores < 0.0) | (scores > 1.0))
        if bad.size:
            raise DataValidationError(int(bad[0]) + 1, "score outside [0,1]")
        bad = np.flatnonzero((labels != 0) & (labels != 1))
        if bad.size:
            raise DataValidationError(int(bad[0]) + 1, "label outside {0,1}")

        attributes: dict[str, np.ndarray] = {}
        for name, column in self.attributes.items():
            column = np.asarray(column, dtype=object)
            if column.shape != (n,):
                raise ValueError(f"Attribute column {name!r} has the wrong length.")
            _check_key_safe(name, column)
            attributes[name] = _frozen(column)

        values: dict[str, np.ndarray] = {}
        for name, column in self.values.items():
            column = np.asarray(column, dtype=np.float64)
            if column.shape != (n,):
                raise ValueError(f"Value column {name!r} has the wrong length.")
            values[name] = _frozen(column)

        object.__setattr__(self, "scores", _frozen(scores))
        object.__setattr__(self, "labels", _frozen(labels.astype(np.int8)))
        object.__setattr__(self, "attributes", attributes)
        object.__setattr__(self, "values", values)

    @property
    def row_count(self) -> int:
        return int(self.scores.shape[0])

    @property
    def attribute_names(self) -> list[str]:
        return list(self.attributes)

    def attribute(self, name: str) -> np.ndarray:
        try:
            return self.attributes[name]
        except KeyError:
            raise UnknownAttribute(name) from None

    def sample(self, mask: RowMask = None) -> Sample:
        if mask is None:
            return Sample(scores=self.scores, labels=self.labels, values=self.values)
        return Sample(
            scores=self.scores[mask],
            labels=self.labels[mask],
            values={k: v[mask] for k, v in self.values.items()},
        )

    def equals(self, other: EvalTable) -> bool:
        return (
            np.array_equal(self.scores, other.scores)
            and np.array_equal(self.labels, other.labels)
            and list(self.attributes) == list(other.attributes)
            and all(
                np.array_equal(v, other.attributes[k])
                for k, v in self.attributes.items()
            )
            and list(self.values) == list(other.values)
            and all(
                np.array_equal(v, other.values[k]) for k, v in self.values.items()
            )
        )


def _check_key_safe(name: str, column: np.ndarray) -> None:
    # subgroup keys join "name=value" pairs with " & "
    if VALUE_SEPARATOR in name or CONSTRAINT_SEPARATOR in name:
        raise ConfigError(
            f"Attribute name {name!r} must not contain {VALUE_SEPARATOR!r} "
            f"or {CONSTRAINT_SEPARATOR!r}."
        )
    bad = np.flatnonzero(
        np.fromiter((CONSTRAINT_SEPARATOR in str(v) for v in column), bool, column.size)
    )
    if bad.size:
        raise DataValidationError(
            int(bad[0]) + 1, f"value of {name} contains {CONSTRAINT_SEPARATOR!r}"
        )
