import enum
from dataclasses import dataclass
from datetime import datetime
from typing import Literal, Optional, Union

from pydantic import BaseModel, NonNegativeInt, model_validator
from typing_extensions import Self

from stratified_eval.datamodel.requests import RunConfig
from stratified_eval.datamodel.subgroup import SubgroupSpec

SCHEMA_VERSION = 1


@dataclass(frozen=True, slots=True)
class Undefined:
    """A metric value that does not exist on the given rows."""

    reason: str


MetricValue = Union[float, Undefined]


def is_undefined(value: MetricValue) -> bool:
    return isinstance(value, Undefined)


## Metrics


class ConfusionCounts(BaseModel):
    tp: NonNegativeInt
    fp: NonNegativeInt
    tn: NonNegativeInt
    fn: NonNegativeInt

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


class ConfidenceInterval(BaseModel):
    lo: float
    hi: float
    method: str


class MetricResult(BaseModel):
    metric_id: str
    value: Optional[float] = None
    n: NonNegativeInt
    n_pos: NonNegativeInt
    n_neg: NonNegativeInt
    ci: Optional[ConfidenceInterval] = None
    undefined_reason: Optional[str] = None
    ci_unavailable_reason: Optional[str] = None
    params: dict[str, float] = {}

    @model_validator(mode="after")
    def check_invariants(self) -> Self:
        if self.n != self.n_pos + self.n_neg:
            raise ValueError("n must equal n_pos + n_neg.")
        if self.value is None and self.undefined_reason is None:
            raise ValueError("An undefined metric needs a reason.")
        if self.ci is not None and self.value is not None:
            if not self.ci.lo - 1e-9 <= self.value <= self.ci.hi + 1e-9:
                raise ValueError(
                    f"CI [{self.ci.lo}, {self.ci.hi}] does not contain {self.value}."
                )
        return self

    @property
    def is_defined(self) -> bool:
        return self.value is not None


## Curves

CurveKind = Literal["roc", "pr", "prg", "calibration"]


class CurvePoint(BaseModel):
    x: float
    y: Optional[float]
    threshold: float


class CurveBand(BaseModel):
    x: list[float]
    lo: list[Optional[float]]
    hi: list[Optional[float]]


class CurveSet(BaseModel):
    kind: CurveKind
    attribute: str
    groups: list[SubgroupSpec]
    polylines: dict[str, list[CurvePoint]]
    bands: dict[str, CurveBand] = {}
    operating_points: dict[str, CurvePoint] = {}


## Hypothesis tests


class TestStatus(str, enum.Enum):
    __test__ = False

    COMPLETED = "completed"
    SKIPPED = "skipped"


class TestResult(BaseModel):
    __test__ = False

    group: SubgroupSpec
    metric_id: str
    group_n: NonNegativeInt
    complement_n: NonNegativeInt
    disparity: Optional[float] = None
    t_obs: Optional[float] = None
    p_raw: Optional[float] = None
    p_adj: Optional[float] = None
    n_perm_used: NonNegativeInt = 0
    status: TestStatus
    skip_reason: Optional[str] = None

    @model_validator(mode="after")
    def check_invariants(self) -> Self:
        if self.status == TestStatus.COMPLETED:
            if self.p_raw is None or self.t_obs is None or self.disparity is None:
                raise ValueError("A completed test needs t_obs, disparity and p_raw.")
            if not 0.0 < self.p_raw <= 1.0:
                raise ValueError("p_raw must be in (0, 1].")
            if self.p_raw < 1.0 / (self.n_perm_used + 1) - 1e-15:
                raise ValueError("p_raw must be at least 1/(n_perm + 1).")
            if self.p_adj is not None and self.p_adj < self.p_raw:
                raise ValueError("p_adj must not be smaller than p_raw.")
        elif self.skip_reason is None:
            raise ValueError("A skipped test needs a reason.")
        return self

    @property
    def completed(self) -> bool:
        return self.status == TestStatus.COMPLETED


class RankedSubgroup(BaseModel):
    group: SubgroupSpec
    metric_id: str
    rank_p: float
    rank_d: float
    score: float
    p_raw: float
    p_adj: Optional[float]
    disparity: float


## Report


class Provenance(BaseModel):
    tool_version: str
    seed: int
    input_sha256: Optional[str] = None
    row_count: int
    threshold: float
    started_at: Optional[datetime] = None
    finished_at: Optional[datetime] = None


class ReportBundle(BaseModel):
    schema_version: int = SCHEMA_VERSION
    config: RunConfig
    provenance: Provenance
    subgroups: list[SubgroupSpec]
    overall: dict[str, MetricResult]
    grid: dict[str, dict[str, MetricResult]]
    tests: list[TestResult]
    curves: dict[str, dict[str, CurveSet]]
    ranking: dict[str, list[RankedSubgroup]]

    def test_for(self, metric_id: str, group_key: str) -> Optional[TestResult]:
        for result in self.tests:
            if result.metric_id == metric_id and result.group.key == group_key:
                return result
        return None
