"""HTML and JSON renderings of a :class:`ReportBundle`."""

import json
import logging
import math
from pathlib import Path
from typing import Any, Union

from jinja2 import Environment, PackageLoader, StrictUndefined

from stratified_eval.datamodel.responses import ReportBundle
from stratified_eval.inference import significance_stars
from stratified_eval.svg_charts import bar_panel, curve_panel, fmt

_log = logging.getLogger(__name__)

TEMPLATE_NAME = "report.html.jinja"
FLOAT_DIGITS = 12

# fields that vary between otherwise identical runs
_JSON_EXCLUDE: dict[str, Any] = {
    "config": {"output_dir", "n_jobs"},
    "provenance": {"started_at", "finished_at"},
}


def _environment() -> Environment:
    env = Environment(
        loader=PackageLoader("stratified_eval", "templates"),
        autoescape=True,
        undefined=StrictUndefined,
        trim_blocks=True,
        lstrip_blocks=True,
        keep_trailing_newline=True,
    )
    env.filters["fmt"] = fmt
    env.filters["stars"] = significance_stars
    return env


def _metric_panels(bundle: ReportBundle) -> list[Any]:
    panels = []
    for metric_id in bundle.config.metrics:
        cells = [
            (
                spec.key,
                bundle.grid[metric_id][spec.key],
                bundle.test_for(metric_id, spec.key),
            )
            for spec in bundle.subgroups
        ]
        panels.append(bar_panel(metric_id, cells, bundle.overall.get(metric_id)))
    return panels


def _curve_panels(bundle: ReportBundle) -> dict[str, list[Any]]:
    return {
        attribute: [curve_panel(cs) for cs in by_kind.values()]
        for attribute, by_kind in bundle.curves.items()
    }


def render_html(bundle: ReportBundle, out: Union[str, Path]) -> Path:
    """Write the self-contained HTML report to ``out``."""
    out = Path(out)
    template = _environment().get_template(TEMPLATE_NAME)
    ci_methods = sorted(
        {
            r.ci.method
            for cells in [bundle.overall, *bundle.grid.values()]
            for r in cells.values()
            if r.ci is not None
        }
    )
    html = template.render(
        bundle=bundle,
        metric_panels=_metric_panels(bundle),
        curve_panels=_curve_panels(bundle),
        skipped=[t for t in bundle.tests if not t.completed],
        ci_methods=ci_methods,
    )
    out.write_text(html, encoding="utf-8")
    _log.info("Wrote HTML report to %s", out)
    return out


def _normalize(value: Any) -> Any:
    if isinstance(value, float):
        if not math.isfinite(value):
            return None
        return float(f"{value:.{FLOAT_DIGITS}g}")
    if isinstance(value, dict):
        return {str(k): _normalize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_normalize(v) for v in value]
    return value


def results_payload(bundle: ReportBundle) -> dict[str, Any]:
    """JSON-ready raw results, floats rounded to 12 significant digits."""
    return _normalize(bundle.model_dump(mode="json", exclude=_JSON_EXCLUDE))


def render_json(bundle: ReportBundle, out: Union[str, Path]) -> Path:
    """Write the raw results to ``out`` with sorted keys."""
    out = Path(out)
    text = json.dumps(
        results_payload(bundle),
        sort_keys=True,
        indent=2,
        ensure_ascii=False,
        allow_nan=False,
    )
    out.write_text(text + "\n", encoding="utf-8")
    _log.info("Wrote JSON results to %s", out)
    return out
