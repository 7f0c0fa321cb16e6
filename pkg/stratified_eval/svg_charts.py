"""Pixel geometry of the inline SVG charts of the HTML report.

The functions here only compute coordinates and labels; the markup itself is
written by ``templates/report.html.jinja``.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from stratified_eval.datamodel.responses import (
    CurveBand,
    CurveKind,
    CurvePoint,
    CurveSet,
    MetricResult,
    TestResult,
)
from stratified_eval.inference import significance_stars

PALETTE: tuple[str, ...] = (
    "#1f77b4",
    "#ff7f0e",
    "#2ca02c",
    "#d62728",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
    "#bcbd22",
    "#17becf",
)

AXIS_LABELS: dict[CurveKind, tuple[str, str]] = {
    "roc": ("False positive rate", "True positive rate"),
    "pr": ("Recall", "Precision"),
    "prg": ("Recall gain", "Precision gain"),
    "calibration": ("Mean predicted score", "Observed positive rate"),
}


def group_color(index: int) -> str:
    return PALETTE[index % len(PALETTE)]


def fmt(value: Optional[float], digits: int = 3) -> str:
    if value is None or not math.isfinite(value):
        return "n/a"
    return f"{value:.{digits}g}"


@dataclass(frozen=True, slots=True)
class Scale:
    lo: float
    hi: float
    px_lo: float
    px_hi: float

    def __call__(self, value: float) -> float:
        frac = (value - self.lo) / (self.hi - self.lo)
        return round(self.px_lo + frac * (self.px_hi - self.px_lo), 2)

    def ticks(self, count: int = 5) -> list[tuple[float, str]]:
        values = np.linspace(self.lo, self.hi, count + 1)
        return [(self(float(v)), fmt(float(v))) for v in values]


## Bar panels


@dataclass(frozen=True, slots=True)
class BarGeometry:
    group_key: str
    y: float
    height: float
    defined: bool
    x0: float
    x1: float
    has_ci: bool
    ci_x0: Optional[float]
    ci_x1: Optional[float]
    stars: Optional[str]
    tooltip: str
    value_text: str
    color: str


@dataclass(frozen=True, slots=True)
class BarPanel:
    metric_id: str
    width: int
    height: int
    plot_left: float
    plot_right: float
    plot_top: float
    plot_bottom: float
    bars: list[BarGeometry]
    ticks: list[tuple[float, str]]
    reference_x: Optional[float] = None
    reference_text: str = ""


BAR_ROW = 24
BAR_LEFT = 220
BAR_RIGHT = 110
BAR_TOP = 16
BAR_BOTTOM = 34
BAR_WIDTH = 860


def _bar_domain(values: Sequence[float]) -> tuple[float, float]:
    finite = [v for v in values if math.isfinite(v)]
    if not finite or (min(finite) >= 0.0 and max(finite) <= 1.0):
        return 0.0, 1.0
    lo = min(0.0, *finite)
    hi = max(0.0, *finite)
    if hi - lo <= 0.0:
        hi = lo + 1.0
    return lo, hi


def _bar_tooltip(key: str, result: MetricResult, test: Optional[TestResult]) -> str:
    lines = [f"{key}: n={result.n} (pos {result.n_pos}, neg {result.n_neg})"]
    if result.value is None:
        lines.append(f"undefined: {result.undefined_reason}")
    else:
        lines.append(f"{result.metric_id} = {fmt(result.value, 4)}")
    if result.ci is not None:
        lines.append(
            f"CI [{fmt(result.ci.lo, 4)}, {fmt(result.ci.hi, 4)}] ({result.ci.method})"
        )
    elif result.ci_unavailable_reason:
        lines.append(f"no CI: {result.ci_unavailable_reason}")
    if test is not None:
        if test.completed:
            lines.append(
                f"vs complement: diff {fmt(test.disparity, 3)}, "
                f"p_raw {fmt(test.p_raw, 3)}, p_adj {fmt(test.p_adj, 3)}"
            )
        else:
            lines.append(f"test skipped: {test.skip_reason}")
    return "\n".join(lines)


def bar_panel(
    metric_id: str,
    cells: Sequence[tuple[str, MetricResult, Optional[TestResult]]],
    overall: Optional[MetricResult] = None,
) -> BarPanel:
    """Horizontal bar chart, one bar per subgroup, in the given order."""
    values: list[float] = []
    for _, result, _ in cells:
        if result.value is not None:
            values.append(result.value)
        if result.ci is not None:
            values.extend((result.ci.lo, result.ci.hi))
    if overall is not None and overall.value is not None:
        values.append(overall.value)

    lo, hi = _bar_domain(values)
    plot_bottom = BAR_TOP + max(1, len(cells)) * BAR_ROW
    scale = Scale(lo, hi, BAR_LEFT, BAR_WIDTH - BAR_RIGHT)
    origin = scale(min(max(0.0, lo), hi))

    bars = []
    for i, (key, result, test) in enumerate(cells):
        y = BAR_TOP + i * BAR_ROW + 4
        stars = None
        if test is not None and test.completed and test.p_adj is not None:
            stars = significance_stars(test.p_adj)
        if result.value is None:
            x0, x1 = scale(lo), scale(hi)
        else:
            end = scale(result.value)
            x0, x1 = min(origin, end), max(origin, end)
        bars.append(
            BarGeometry(
                group_key=key,
                y=y,
                height=BAR_ROW - 8,
                defined=result.value is not None,
                x0=x0,
                x1=max(x1, x0 + 1.0),
                has_ci=result.ci is not None,
                ci_x0=scale(result.ci.lo) if result.ci is not None else None,
                ci_x1=scale(result.ci.hi) if result.ci is not None else None,
                stars=stars,
                tooltip=_bar_tooltip(key, result, test),
                value_text=fmt(result.value),
                color=group_color(i),
            )
        )

    reference_x = None
    reference_text = ""
    if overall is not None and overall.value is not None:
        reference_x = scale(overall.value)
        reference_text = f"all rows: {fmt(overall.value, 4)}"

    return BarPanel(
        metric_id=metric_id,
        width=BAR_WIDTH,
        height=plot_bottom + BAR_BOTTOM,
        plot_left=BAR_LEFT,
        plot_right=BAR_WIDTH - BAR_RIGHT,
        plot_top=BAR_TOP,
        plot_bottom=plot_bottom,
        bars=bars,
        ticks=scale.ticks(),
        reference_x=reference_x,
        reference_text=reference_text,
    )


## Curve panels


@dataclass(frozen=True, slots=True)
class CurveSeries:
    group_key: str
    color: str
    points: str
    band: Optional[str]
    operating_point: Optional[tuple[float, float]]
    operating_tooltip: str


@dataclass(frozen=True, slots=True)
class CurvePanel:
    kind: CurveKind
    attribute: str
    x_label: str
    y_label: str
    size: int
    plot_left: float
    plot_right: float
    plot_top: float
    plot_bottom: float
    series: list[CurveSeries]
    ticks_x: list[tuple[float, str]]
    ticks_y: list[tuple[float, str]]
    diagonal: bool = False
    legend: list[tuple[str, str]] = field(default_factory=list)


CURVE_SIZE = 320
CURVE_MARGIN = 44


def _visible(x: float, y: Optional[float]) -> Optional[tuple[float, float]]:
    if y is None or not (math.isfinite(x) and math.isfinite(y)):
        return None
    if not 0.0 <= x <= 1.0:
        return None
    return x, min(max(y, 0.0), 1.0)


def _polyline(points: Sequence[CurvePoint], sx: Scale, sy: Scale) -> str:
    coords = []
    for p in points:
        xy = _visible(p.x, p.y)
        if xy is not None:
            coords.append(f"{sx(xy[0])},{sy(xy[1])}")
    return " ".join(coords)


def _band_polygon(band: CurveBand, sx: Scale, sy: Scale) -> Optional[str]:
    upper = []
    lower = []
    for x, lo, hi in zip(band.x, band.lo, band.hi):
        if lo is None or hi is None:
            continue
        upper.append(f"{sx(x)},{sy(min(max(hi, 0.0), 1.0))}")
        lower.append(f"{sx(x)},{sy(min(max(lo, 0.0), 1.0))}")
    if len(upper) < 2:
        return None
    return " ".join(upper + lower[::-1])


def curve_panel(curve_set: CurveSet) -> CurvePanel:
    """ROC, PR, PRG or calibration plot of every group of one attribute.

    Everything is drawn on the unit square; PRG curves are clipped to it.
    """
    kind = curve_set.kind
    plot_left = CURVE_MARGIN
    plot_right = CURVE_SIZE - 12
    plot_top = 12
    plot_bottom = CURVE_SIZE - CURVE_MARGIN
    sx = Scale(0.0, 1.0, plot_left, plot_right)
    sy = Scale(0.0, 1.0, plot_bottom, plot_top)

    series = []
    legend = []
    for i, spec in enumerate(curve_set.groups):
        key = spec.key
        color = group_color(i)
        legend.append((key, color))
        band = curve_set.bands.get(key)
        op = curve_set.operating_points.get(key)
        op_xy = _visible(op.x, op.y) if op is not None else None
        series.append(
            CurveSeries(
                group_key=key,
                color=color,
                points=_polyline(curve_set.polylines.get(key, []), sx, sy),
                band=_band_polygon(band, sx, sy) if band is not None else None,
                operating_point=(
                    (sx(op_xy[0]), sy(op_xy[1])) if op_xy is not None else None
                ),
                operating_tooltip=(
                    f"{key} at threshold {fmt(op.threshold, 4)}: "
                    f"({fmt(op.x, 3)}, {fmt(op.y, 3)})"
                    if op is not None
                    else ""
                ),
            )
        )

    x_label, y_label = AXIS_LABELS[kind]
    return CurvePanel(
        kind=kind,
        attribute=curve_set.attribute,
        x_label=x_label,
        y_label=y_label,
        size=CURVE_SIZE,
        plot_left=plot_left,
        plot_right=plot_right,
        plot_top=plot_top,
        plot_bottom=plot_bottom,
        series=series,
        ticks_x=sx.ticks(),
        ticks_y=sy.ticks(),
        diagonal=kind in ("roc", "calibration"),
        legend=legend,
    )
