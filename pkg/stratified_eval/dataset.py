"""Ingestion, validation and thresholds of the prediction table."""

import hashlib
import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from stratified_eval.datamodel.requests import (
    BaseRateThreshold,
    FixedThreshold,
    MaxGmeanThreshold,
    ThresholdRule,
)
from stratified_eval.datamodel.table import MISSING_CATEGORY, EvalTable, RowMask
from stratified_eval.errors import (
    ColumnMissing,
    ConfigError,
    DataValidationError,
    EmptySelection,
    OneClassOnly,
)

_log = logging.getLogger(__name__)

CANONICAL_SCORE_COL = "score"
CANONICAL_LABEL_COL = "label"


def _check_columns(frame: pd.DataFrame, columns: Sequence[str]) -> None:
    for name in columns:
        if name not in frame.columns:
            raise ColumnMissing(name)


def _numeric_column(frame: pd.DataFrame, name: str, what: str) -> np.ndarray:
    raw = frame[name]
    numeric = pd.to_numeric(raw, errors="coerce")
    missing = raw.isna() | (raw.astype(str).str.strip() == "")
    not_numeric = numeric.isna() & ~missing

    problems = np.flatnonzero(missing.to_numpy() | not_numeric.to_numpy())
    if problems.size:
        row = int(problems[0])
        reason = f"missing {what}" if missing.iloc[row] else f"non-numeric {what}"
        raise DataValidationError(row + 1, reason)
    return numeric.to_numpy(dtype=np.float64)


def _category_column(frame: pd.DataFrame, name: str) -> np.ndarray:
    column = frame[name].fillna("").astype(str)
    column = column.where(column != "", MISSING_CATEGORY)
    return column.to_numpy(dtype=object)


def table_from_frame(
    frame: pd.DataFrame,
    score_col: str,
    label_col: str,
    attr_cols: Sequence[str] = (),
    value_cols: Sequence[str] = (),
) -> EvalTable:
    """Build a validated EvalTable from a DataFrame.

    Empty attribute cells become the "(missing)" category. Rows with a
    missing or non-numeric score, label or value are rejected with the
    1-based data row number.
    """
    if len(set(attr_cols)) != len(attr_cols):
        raise ConfigError("Attribute column names must be unique.")
    _check_columns(frame, [score_col, label_col, *attr_cols, *value_cols])

    frame = frame.reset_index(drop=True)
    scores = _numeric_column(frame, score_col, "score")
    labels = _numeric_column(frame, label_col, "label")

    values: dict[str, np.ndarray] = {}
    for name in value_cols:
        column = _numeric_column(frame, name, f"value in {name}")
        bad = np.flatnonzero(~np.isfinite(column))
        if bad.size:
            raise DataValidationError(int(bad[0]) + 1, f"non-finite value in {name}")
        values[name] = column

    table = EvalTable(
        scores=scores,
        labels=labels,
        attributes={name: _category_column(frame, name) for name in attr_cols},
        values=values,
    )
    return table


def ingest_csv(
    path: Union[str, Path],
    score_col: str,
    label_col: str,
    attr_cols: Sequence[str] = (),
    value_cols: Sequence[str] = (),
) -> EvalTable:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Input file {path} does not exist.")

    frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    table = table_from_frame(frame, score_col, label_col, attr_cols, value_cols)
    _log.info(
        "Ingested %d rows with %d attributes from %s",
        table.row_count,
        len(table.attributes),
        path,
    )
    return table


def table_to_frame(
    table: EvalTable,
    score_col: str = CANONICAL_SCORE_COL,
    label_col: str = CANONICAL_LABEL_COL,
) -> pd.DataFrame:
    columns: dict[str, np.ndarray] = {
        score_col: table.scores,
        label_col: table.labels.astype(np.int64),
    }
    columns.update(table.attributes)
    columns.update(table.values)
    return pd.DataFrame(columns)


def write_csv(
    table: EvalTable,
    path: Union[str, Path],
    score_col: str = CANONICAL_SCORE_COL,
    label_col: str = CANONICAL_LABEL_COL,
) -> Path:
    """Write the canonical CSV, which re-ingests to an identical table."""
    path = Path(path)
    table_to_frame(table, score_col, label_col).to_csv(
        path, index=False, lineterminator="\n", encoding="utf-8"
    )
    return path


def file_sha256(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def base_rate(table: EvalTable, mask: RowMask = None) -> float:
    labels = table.labels if mask is None else table.labels[mask]
    if labels.size == 0:
        raise EmptySelection("The row selection is empty.")
    return float(labels.mean())


def max_gmean_threshold(scores: np.ndarray, labels: np.ndarray) -> float:
    """Threshold maximising sqrt(sensitivity * specificity).

    Candidates are 0, 1 and the midpoints between adjacent distinct scores.
    The first (smallest) maximiser wins.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = np.sort(scores[labels == 1])
    neg = np.sort(scores[labels == 0])
    if pos.size == 0 or neg.size == 0:
        raise OneClassOnly()

    distinct = np.unique(scores)
    candidates = np.concatenate([[0.0], (distinct[:-1] + distinct[1:]) / 2.0, [1.0]])

    # predicted positive iff score >= t
    sens = (pos.size - np.searchsorted(pos, candidates, side="left")) / pos.size
    spec = np.searchsorted(neg, candidates, side="left") / neg.size
    gmean = np.sqrt(sens * spec)
    return float(candidates[int(np.argmax(gmean))])


def resolve_threshold(
    rule: ThresholdRule, table: EvalTable, mask: RowMask = None
) -> float:
    if isinstance(rule, FixedThreshold):
        return rule.t
    if isinstance(rule, BaseRateThreshold):
        return base_rate(table, mask)
    if isinstance(rule, MaxGmeanThreshold):
        sample = table.sample(mask)
        if sample.n == 0:
            raise EmptySelection("The row selection is empty.")
        return max_gmean_threshold(sample.scores, sample.labels)
    raise ConfigError(f"Unknown threshold rule {rule!r}.")
