# Define the run configuration of an evaluation
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator
from typing_extensions import Self

from stratified_eval.settings import stratified_eval_settings

BUILTIN_METRICS: tuple[str, ...] = (
    "accuracy",
    "balanced_accuracy",
    "sensitivity",
    "specificity",
    "precision",
    "auroc",
    "brier",
    "balanced_brier",
    "drmsce",
    "auprg",
    "pauprg",
)
MEAN_METRIC_PREFIX = "mean:"


def check_metric_id(metric_id: str) -> str:
    if metric_id in BUILTIN_METRICS:
        return metric_id
    if metric_id.startswith(MEAN_METRIC_PREFIX) and metric_id[len(MEAN_METRIC_PREFIX) :]:
        return metric_id
    raise ValueError(
        f"Unknown metric id {metric_id!r}. "
        f"Allowed values: {', '.join(BUILTIN_METRICS)} or mean:<column>."
    )


## Threshold rules


class FixedThreshold(BaseModel):
    kind: Literal["fixed"] = "fixed"
    t: Annotated[
        float,
        Field(ge=0.0, le=1.0, description="Decision threshold, score >= t is positive."),
    ]


class BaseRateThreshold(BaseModel):
    kind: Literal["base_rate"] = "base_rate"


class MaxGmeanThreshold(BaseModel):
    kind: Literal["max_gmean"] = "max_gmean"


ThresholdRule = Annotated[
    Union[FixedThreshold, BaseRateThreshold, MaxGmeanThreshold],
    Field(discriminator="kind"),
]


## Uncertainty and enumeration options


class CiConfig(BaseModel):
    alpha: Annotated[
        float, Field(gt=0.0, le=0.5, description="Two-sided miscoverage level.")
    ] = stratified_eval_settings.alpha
    n_boot: Annotated[
        int, Field(ge=100, description="Number of percentile-bootstrap resamples.")
    ] = stratified_eval_settings.n_boot
    seed: Annotated[
        Optional[int],
        Field(ge=0, description="Bootstrap seed. Defaults to the run seed."),
    ] = None
    stratify: Annotated[
        bool,
        Field(
            description=(
                "Resample positives and negatives separately for metrics that "
                "need both classes."
            )
        ),
    ] = True
    method_override: Annotated[
        Optional[Literal["analytic", "bootstrap"]],
        Field(description="Force analytic or bootstrap intervals for every metric."),
    ] = None
    max_dropped_fraction: Annotated[
        float,
        Field(
            gt=0.0,
            lt=1.0,
            description="Report no CI when more resamples than this are undefined.",
        ),
    ] = stratified_eval_settings.max_dropped_fraction


class EnumerationConfig(BaseModel):
    min_group_size: Annotated[int, Field(ge=1)] = stratified_eval_settings.min_group_size
    max_level: Annotated[int, Field(ge=1)] = stratified_eval_settings.max_level
    attributes_in_scope: Annotated[
        list[str],
        Field(description="Attributes to intersect. Empty means all input attributes."),
    ] = []


class InputSpec(BaseModel):
    path: Path
    score_col: str
    label_col: str
    attr_cols: list[str] = []
    value_cols: list[str] = []


## Complete run configuration


class RunConfig(BaseModel):
    input: InputSpec
    metrics: Annotated[list[str], Field(min_length=1)]
    tested_metrics: list[str] = []
    threshold_rule: ThresholdRule = BaseRateThreshold()
    ci: CiConfig = CiConfig()
    enumeration: EnumerationConfig = EnumerationConfig()
    n_perm: Annotated[int, Field(ge=1)] = stratified_eval_settings.n_perm
    recg_min: Annotated[float, Field(ge=0.0, lt=1.0)] = stratified_eval_settings.recg_min
    n_bins: Annotated[
        Optional[int],
        Field(ge=1, description="Calibration bins. Defaults to min(15, n // 10)."),
    ] = None
    alpha: Annotated[float, Field(gt=0.0, lt=1.0)] = stratified_eval_settings.alpha
    seed: Annotated[int, Field(ge=0)] = stratified_eval_settings.seed
    top_k: Annotated[int, Field(ge=1)] = stratified_eval_settings.top_k
    n_jobs: int = stratified_eval_settings.n_jobs
    output_dir: Path = Path("out")

    @field_validator("metrics", "tested_metrics")
    @classmethod
    def known_metrics(cls, value: list[str]) -> list[str]:
        return [check_metric_id(m) for m in value]

    @model_validator(mode="after")
    def consistent(self) -> Self:
        missing = [m for m in self.tested_metrics if m not in self.metrics]
        if missing:
            raise ValueError(
                f"Tested metrics must be a subset of metrics; not in metrics: {', '.join(missing)}"
            )
        for m in self.metrics:
            if m.startswith(MEAN_METRIC_PREFIX):
                column = m[len(MEAN_METRIC_PREFIX) :]
                if column not in self.input.value_cols:
                    raise ValueError(
                        f"Metric {m!r} needs {column!r} in the input value columns."
                    )
        unknown = [
            a
            for a in self.enumeration.attributes_in_scope
            if a not in self.input.attr_cols
        ]
        if unknown:
            raise ValueError(
                f"Attributes in scope are not input attributes: {', '.join(unknown)}"
            )
        if self.ci.seed is None:
            self.ci = self.ci.model_copy(update={"seed": self.seed})
        return self

    @property
    def attributes(self) -> list[str]:
        return self.enumeration.attributes_in_scope or list(self.input.attr_cols)
