import json
import re
from pathlib import Path
from typing import Any, Union

from stratified_eval.datamodel.requests import (
    BaseRateThreshold,
    FixedThreshold,
    MaxGmeanThreshold,
)
from stratified_eval.errors import ConfigError

ThresholdRuleModel = Union[FixedThreshold, BaseRateThreshold, MaxGmeanThreshold]


def _to_list_of_strings(input_value: Union[str, list[str]]) -> list[str]:
    def split_and_strip(value: str) -> list[str]:
        if re.search(r"[;,]", value):
            return [item.strip() for item in re.split(r"[;,]", value) if item.strip()]
        else:
            return [value.strip()] if value.strip() else []

    if isinstance(input_value, str):
        return split_and_strip(input_value)
    elif isinstance(input_value, list):
        result = []
        for item in input_value:
            result.extend(split_and_strip(str(item)))
        return result
    else:
        raise ValueError("Invalid input: must be a string or a list of strings.")


def parse_threshold_rule(value: str) -> ThresholdRuleModel:
    """Parse ``fixed:<t>``, ``base-rate`` or ``max-gmean``."""
    text = value.strip().lower()
    if text in ("base-rate", "base_rate"):
        return BaseRateThreshold()
    if text in ("max-gmean", "max_gmean"):
        return MaxGmeanThreshold()
    if text.startswith("fixed:"):
        raw = text[len("fixed:") :]
        try:
            t = float(raw)
        except ValueError:
            raise ConfigError(f"Threshold {raw!r} is not a number.") from None
        if not 0.0 <= t <= 1.0:
            raise ConfigError(f"Threshold must be in [0, 1], got {t}.")
        return FixedThreshold(t=t)
    raise ConfigError(
        f"Unknown threshold rule {value!r}. "
        "Allowed values: fixed:<t>, base-rate, max-gmean."
    )


def load_config_file(path: Path) -> dict[str, Any]:
    """Read a JSON file mirroring RunConfig."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"Config file {path} not found.") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain a JSON object.")
    return data


def merge_config(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Recursive dict merge; values in ``overrides`` win, None is ignored."""
    merged = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict):
            current = merged.get(key)
            merged[key] = merge_config(current if isinstance(current, dict) else {}, value)
        else:
            merged[key] = value
    return merged
