import html
import json
import re
from pathlib import Path

import numpy as np
import pytest
from pytest_check import check

from stratified_eval.dataset import table_from_frame
from stratified_eval.datamodel.requests import RunConfig
from stratified_eval.datamodel.responses import MetricResult, ReportBundle
from stratified_eval.evaluation import run_evaluation
from stratified_eval.inference import holm_bonferroni, significance_stars
from stratified_eval.report import render_html, render_json, results_payload
from stratified_eval.settings import stratified_eval_settings
from stratified_eval.svg_charts import bar_panel, fmt
from tests.synthetic import subgroup_frame

BAR_RE = re.compile(
    r'<g class="bar" data-metric="(?P<metric>[^"]+)" data-group="(?P<group>[^"]+)">'
    r"(?P<body>.*?)</g>",
    re.DOTALL,
)
STARS_RE = re.compile(
    r'<text class="stars" data-metric="(?P<metric>[^"]+)" data-group="(?P<group>[^"]+)"'
    r"[^>]*>(?P<stars>[^<]*)</text>"
)


@pytest.fixture(scope="module")
def bundle() -> ReportBundle:
    rng = np.random.default_rng(17)
    frame = subgroup_frame(rng, 500)
    # site C holds negatives only, so its AUROC is undefined
    site = rng.choice(np.array(["A", "B"], dtype=object), size=len(frame))
    site[(frame["label"].to_numpy() == 0) & (rng.random(len(frame)) < 0.15)] = "C"
    frame["site"] = site
    table = table_from_frame(frame, "score", "label", ["sex", "site"])

    cfg = RunConfig.model_validate(
        {
            "input": {
                "path": "synthetic.csv",
                "score_col": "score",
                "label_col": "label",
                "attr_cols": ["sex", "site"],
            },
            "metrics": ["accuracy", "auroc"],
            "tested_metrics": ["accuracy", "auroc"],
            "n_perm": 20,
            "ci": {"n_boot": 100},
            "seed": 1,
        }
    )
    with pytest.MonkeyPatch.context() as mp:
        mp.setattr(stratified_eval_settings, "curve_n_boot", 30)
        return run_evaluation(cfg, table=table)


@pytest.fixture(scope="module")
def report(bundle: ReportBundle, tmp_path_factory) -> str:
    out = render_html(bundle, tmp_path_factory.mktemp("report") / "report.html")
    return out.read_text(encoding="utf-8")


def _bars(report: str, metric_id: str) -> dict[str, str]:
    return {
        html.unescape(m["group"]): m["body"]
        for m in BAR_RE.finditer(report)
        if m["metric"] == metric_id
    }


def test_one_bar_per_subgroup(bundle: ReportBundle, report: str):
    keys = [s.key for s in bundle.subgroups]
    for metric_id in ("accuracy", "auroc"):
        bars = _bars(report, metric_id)
        check.equal(list(bars), keys)
    check.equal(report.count('<section class="panel" id="metric-'), 2)


def test_undefined_value_is_drawn_dashed(bundle: ReportBundle, report: str):
    check.is_none(bundle.grid["auroc"]["site=C"].value)
    body = _bars(report, "auroc")["site=C"]
    check.is_in("bar-undefined", body)
    check.is_in("n/a", body)
    check.is_in("only one class present", body)
    check.is_not_in("bar-fill", body)


def test_bars_with_intervals_have_whiskers(bundle: ReportBundle, report: str):
    body = _bars(report, "accuracy")["sex=F"]
    check.is_not_none(bundle.grid["accuracy"]["sex=F"].ci)
    check.is_in('class="bar-fill"', body)
    check.equal(body.count('class="whisker"'), 3)


def test_missing_interval_is_drawn_dashed(bundle: ReportBundle, tmp_path: Path):
    cell = bundle.grid["accuracy"]["sex=F"]
    grid = {m: dict(cells) for m, cells in bundle.grid.items()}
    grid["accuracy"]["sex=F"] = cell.model_copy(
        update={"ci": None, "ci_unavailable_reason": "too many resamples undefined"}
    )
    out = render_html(bundle.model_copy(update={"grid": grid}), tmp_path / "r.html")
    body = _bars(out.read_text(encoding="utf-8"), "accuracy")["sex=F"]
    check.is_in("bar-fill no-ci", body)
    check.is_not_in("whisker", body)


def test_stars_match_adjusted_p_values(bundle: ReportBundle, report: str):
    rendered = {
        (m["metric"], html.unescape(m["group"])): m["stars"]
        for m in STARS_RE.finditer(report)
    }
    expected = {
        (t.metric_id, t.group.key): significance_stars(t.p_adj)
        for t in bundle.tests
        if t.completed
    }
    check.greater(len(expected), 0)
    check.equal(rendered, expected)

    # skipped tests are listed, without stars
    skipped = bundle.test_for("auroc", "site=C")
    check.equal(skipped.skip_reason, "metric undefined on the original groups")
    check.is_not_in(("auroc", "site=C"), rendered)
    check.is_in('<table class="skipped">', report)


def test_report_is_self_contained(bundle: ReportBundle, report: str):
    check.is_not_in("<script", report)
    check.is_not_in("http://cdn", report)
    check.is_in(f"<strong>Seed:</strong> {bundle.provenance.seed}", report)
    check.is_in(bundle.provenance.tool_version, report)


def test_curve_panels(bundle: ReportBundle, report: str):
    for attribute in ("sex", "site"):
        for kind in ("roc", "pr", "prg", "calibration"):
            check.is_in(
                f'<section class="panel curve" data-kind="{kind}" data-attribute="{attribute}">',
                report,
            )
    roc_sex = bundle.curves["sex"]["roc"]
    check.equal(len(roc_sex.groups), 2)
    check.greater_equal(report.count('class="operating-point"'), 2)
    check.greater_equal(report.count('class="band"'), 2)


def test_ranking_tables(bundle: ReportBundle, report: str):
    for metric_id, ranked in bundle.ranking.items():
        if ranked:
            check.is_in(f'<table class="ranking" data-metric="{metric_id}">', report)


def test_json_payload(bundle: ReportBundle, tmp_path: Path):
    path = render_json(bundle, tmp_path / "results.json")
    text = path.read_text(encoding="utf-8")
    data = json.loads(text)

    check.equal(data["schema_version"], 1)
    check.is_true(text.endswith("}\n"))
    check.is_not_in("output_dir", data["config"])
    check.is_not_in("started_at", data["provenance"])

    undefined = data["grid"]["auroc"]["site=C"]
    check.is_none(undefined["value"])
    check.equal(undefined["undefined_reason"], "only one class present")

    completed = [t for t in data["tests"] if t["status"] == "completed"]
    recomputed = holm_bonferroni([t["p_raw"] for t in completed])
    check.equal([t["p_adj"] for t in completed], pytest.approx(recomputed, rel=1e-10))

    # rendering is a pure function of the bundle
    again = render_json(bundle, tmp_path / "again.json")
    check.equal(again.read_bytes(), path.read_bytes())


def test_payload_floats_are_rounded(bundle: ReportBundle):
    payload = results_payload(bundle)
    value = payload["overall"]["auroc"]["value"]
    check.equal(value, float(f"{bundle.overall['auroc'].value:.12g}"))
    check.equal(payload["provenance"]["row_count"], 500)


def test_bar_domain_and_labels():
    inside = MetricResult(metric_id="accuracy", value=0.25, n=4, n_pos=2, n_neg=2)
    panel = bar_panel("accuracy", [("sex=F", inside, None)], inside)
    check.equal(panel.ticks[0][1], "0")
    check.equal(panel.ticks[-1][1], "1")
    check.equal(panel.bars[0].value_text, "0.25")
    check.is_none(panel.bars[0].stars)
    check.is_not_none(panel.reference_x)

    outside = MetricResult(metric_id="mean:delta", value=-2.0, n=4, n_pos=2, n_neg=2)
    panel = bar_panel("mean:delta", [("sex=F", outside, None)])
    check.equal(panel.ticks[0][1], "-2")
    check.less(panel.bars[0].x0, panel.bars[0].x1)

    check.equal(fmt(None), "n/a")
    check.equal(fmt(float("nan")), "n/a")
    check.equal(fmt(0.123456, 4), "0.1235")
