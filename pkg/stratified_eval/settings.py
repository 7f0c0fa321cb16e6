from pydantic import model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict
from typing_extensions import Self


class StratifiedEvalSettings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="STRATIFIED_EVAL_",
        env_file=".env",
        env_parse_none_str="",
        extra="allow",
    )

    alpha: float = 0.05
    seed: int = 0

    # Confidence intervals
    n_boot: int = 2000
    max_dropped_fraction: float = 0.1

    # Hypothesis tests
    n_perm: int = 1000
    variance_n_boot: int = 50
    variance_floor: float = 1e-12

    # Subgroup enumeration
    min_group_size: int = 10
    max_level: int = 2
    top_k: int = 20

    # Curves
    recg_min: float = 0.2
    curve_n_boot: int = 200
    curve_grid_size: int = 51

    n_jobs: int = 1

    @model_validator(mode="after")
    def check_ranges(self) -> Self:
        if not 0 < self.alpha <= 0.5:
            raise ValueError("alpha must be in (0, 0.5].")
        if self.n_boot < 100:
            raise ValueError("n_boot must be at least 100.")
        if not 0 < self.max_dropped_fraction < 1:
            raise ValueError("max_dropped_fraction must be in (0, 1).")
        if not 0 <= self.recg_min < 1:
            raise ValueError("recg_min must be in [0, 1).")
        return self


stratified_eval_settings = StratifiedEvalSettings()
