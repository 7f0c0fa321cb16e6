"""Intersectional subgroups, complementary groups and interestingness ranking."""

import itertools
import logging
from collections.abc import Sequence

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from stratified_eval.datamodel.requests import EnumerationConfig
from stratified_eval.datamodel.responses import RankedSubgroup, TestResult
from stratified_eval.datamodel.subgroup import SubgroupSpec
from stratified_eval.datamodel.table import EvalTable
from stratified_eval.errors import UnknownAttribute

_log = logging.getLogger(__name__)


def subgroup_mask(table: EvalTable, spec: SubgroupSpec) -> np.ndarray:
    mask = np.ones(table.row_count, dtype=bool)
    for name, value in spec.constraints:
        mask &= table.attribute(name) == value
    return mask


def complement_mask(table: EvalTable, spec: SubgroupSpec) -> np.ndarray:
    """Rows differing from ``spec`` in every constrained attribute."""
    mask = np.ones(table.row_count, dtype=bool)
    for name, value in spec.constraints:
        mask &= table.attribute(name) != value
    return mask


def enumerate_subgroups(table: EvalTable, cfg: EnumerationConfig) -> list[SubgroupSpec]:
    """All observed attribute-value conjunctions up to ``cfg.max_level``.

    Only conjunctions with at least ``cfg.min_group_size`` rows are kept.
    The result is sorted by level, then by constraints.
    """
    names = sorted(cfg.attributes_in_scope or table.attribute_names)
    for name in names:
        if name not in table.attributes:
            raise UnknownAttribute(name)
    if not names or table.row_count == 0:
        return []

    frame = pd.DataFrame({name: table.attributes[name] for name in names})
    specs: list[SubgroupSpec] = []
    for level in range(1, min(cfg.max_level, len(names)) + 1):
        for combo in itertools.combinations(names, level):
            counts = frame.groupby(list(combo), sort=True).size()
            for key, count in counts.items():
                if count < cfg.min_group_size:
                    continue
                values = key if isinstance(key, tuple) else (key,)
                specs.append(
                    SubgroupSpec(
                        constraints=tuple(zip(combo, (str(v) for v in values)))
                    )
                )

    specs.sort(key=SubgroupSpec.sort_key)
    _log.info(
        "Enumerated %d subgroups over %d attributes (max level %d, min size %d)",
        len(specs),
        len(names),
        cfg.max_level,
        cfg.min_group_size,
    )
    return specs


def rank_interestingness(results: Sequence[TestResult]) -> list[RankedSubgroup]:
    """Order completed tests by rank(p_raw) + rank(|disparity|).

    Smaller p and larger disparities rank first; exact ties get average
    ranks. Ties in the rank sum fall back to the smaller p, then to the
    canonical subgroup order.
    """
    completed = [r for r in results if r.completed]
    if not completed:
        return []

    p_raw = np.array([r.p_raw for r in completed], dtype=np.float64)
    magnitude = np.array([abs(r.disparity or 0.0) for r in completed], dtype=np.float64)
    rank_p = rankdata(p_raw, method="average")
    rank_d = rankdata(-magnitude, method="average")

    ranked = [
        RankedSubgroup(
            group=r.group,
            metric_id=r.metric_id,
            rank_p=float(rp),
            rank_d=float(rd),
            score=float(rp + rd),
            p_raw=float(r.p_raw or 1.0),
            p_adj=r.p_adj,
            disparity=float(r.disparity or 0.0),
        )
        for r, rp, rd in zip(completed, rank_p, rank_d)
    ]
    ranked.sort(key=lambda r: (r.score, r.p_raw, r.group.sort_key(), r.metric_id))
    return ranked
