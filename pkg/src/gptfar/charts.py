"""Declarative chart specs and deterministic SVG rendering.

Chart values are taken verbatim from the analytics display properties; this
module never recomputes a statistic. Rendering identical specs yields
byte-identical SVG.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from .analytics import (
    CollectionIndex,
    EmptyDenominator,
    mix_attribute,
    mix_category,
    yoy,
)
from .domain import DomainConfig, ReportScope
from .tagging import display_form

CHART_KINDS = ("category_mix_bar", "attribute_mix_bar", "yoy_bar", "trend_line")

WIDTH = 640
HEIGHT = 400
MARGIN_LEFT = 56
MARGIN_RIGHT = 24
MARGIN_TOP = 56
MARGIN_BOTTOM = 72

PALETTE = ("#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2", "#b279a2")

TOP_K_TREND_VALUES = 5
MAX_BAR_VALUES = 8


class NoData(Exception):
    """The requested scope contains no garments at all."""


def slugify(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")


@dataclass(frozen=True)
class ChartSeries:
    label: str
    points: tuple[tuple[int, float], ...]  # (year, percent)


@dataclass(frozen=True)
class ChartSpec:
    chart_id: str
    kind: str
    title: str
    subject: str
    labels: tuple[str, ...] = ()
    values: tuple[float | None, ...] = ()
    badges: tuple[str | None, ...] = ()
    years: tuple[int, ...] = ()
    series: tuple[ChartSeries, ...] = ()
    category: str | None = None  # set on per-category charts, None on group charts

    def __post_init__(self) -> None:
        if self.kind not in CHART_KINDS:
            raise ValueError(f"unknown chart kind {self.kind!r}")
        if self.kind == "trend_line":
            if not self.series:
                raise ValueError("trend chart requires at least one series")
        else:
            if not self.labels:
                raise ValueError("bar chart requires at least one label")
            if len(self.values) != len(self.labels):
                raise ValueError("labels and values must align")
        if self.kind in ("category_mix_bar", "attribute_mix_bar"):
            for value in self.values:
                if value is not None and not 0.0 <= value <= 100.0:
                    raise ValueError(f"mix value {value} outside [0, 100]")

    def to_json_dict(self) -> dict:
        return {
            "chart_id": self.chart_id,
            "kind": self.kind,
            "title": self.title,
            "subject": self.subject,
            "labels": list(self.labels),
            "values": list(self.values),
            "badges": list(self.badges),
            "years": list(self.years),
            "series": [
                {"label": s.label, "points": [list(p) for p in s.points]}
                for s in self.series
            ],
            "category": self.category,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "ChartSpec":
        return cls(
            chart_id=data["chart_id"],
            kind=data["kind"],
            title=data["title"],
            subject=data["subject"],
            labels=tuple(data["labels"]),
            values=tuple(data["values"]),
            badges=tuple(data["badges"]),
            years=tuple(data["years"]),
            series=tuple(
                ChartSeries(
                    label=s["label"],
                    points=tuple((int(y), float(v)) for y, v in s["points"]),
                )
                for s in data["series"]
            ),
            category=data.get("category"),
        )

    def summary_text(self) -> str:
        """Compact textual rendering used when charts travel as prompt text."""
        if self.kind == "trend_line":
            parts = [
                f"{s.label}: "
                + ", ".join(f"{year}={value}%" for year, value in s.points)
                for s in self.series
            ]
        else:
            parts = []
            for i, label in enumerate(self.labels):
                value = self.values[i]
                badge = self.badges[i] if i < len(self.badges) else None
                if value is None:
                    parts.append(f"{label}={badge or 'n/a'}")
                else:
                    suffix = f" ({badge})" if badge else ""
                    parts.append(f"{label}={value}%{suffix}")
        return f"[{self.kind}] {self.title}: " + "; ".join(parts)


def make_chart_specs(
    indices_by_year: Mapping[int, CollectionIndex],
    scope: ReportScope,
    config: DomainConfig | None = None,
    *,
    top_k: int = TOP_K_TREND_VALUES,
) -> list[ChartSpec]:
    """Emit the deterministic chart list for a scope.

    Order: one category mix bar (latest year), one YoY bar per consecutive
    year pair, then per category an attribute mix bar per aspect with data
    plus one trend line of its top-k attribute values (multi-year scopes).
    """
    config = config or DomainConfig.default()
    group = config.group(scope.group)
    years = [y for y in sorted(indices_by_year) if indices_by_year[y].garment_total > 0]
    if not years:
        raise NoData(f"no garments in scope {scope.group} {sorted(scope.years)}")
    latest = years[-1]
    latest_index = indices_by_year[latest]
    subject_line = f"{', '.join(scope.brands)} · {scope.season}"

    specs: list[ChartSpec] = []
    seq = 0

    def next_id(kind: str, detail: str) -> str:
        nonlocal seq
        seq += 1
        return f"{seq:02d}-{slugify(kind)}-{slugify(detail)}"[:80]

    specs.append(
        ChartSpec(
            chart_id=next_id("category-mix", f"{group.name}-{latest}"),
            kind="category_mix_bar",
            title=f"Category mix {latest} — {group.name}",
            subject=subject_line,
            labels=tuple(display_form(c) for c in group.members),
            values=tuple(
                mix_category(latest_index, c).display_percent for c in group.members
            ),
            badges=(None,) * len(group.members),
            years=(latest,),
        )
    )

    for year in years:
        if year - 1 not in years:
            continue
        values: list[float | None] = []
        badges: list[str | None] = []
        for category in group.members:
            change = yoy(
                mix_category(indices_by_year[year], category),
                mix_category(indices_by_year[year - 1], category),
            )
            values.append(change.display_percent)
            badges.append(None if change.status == "defined" else change.status)
        specs.append(
            ChartSpec(
                chart_id=next_id("yoy", f"{group.name}-{year}"),
                kind="yoy_bar",
                title=f"YoY {year - 1} → {year} — {group.name}",
                subject=subject_line,
                labels=tuple(display_form(c) for c in group.members),
                values=tuple(values),
                badges=tuple(badges),
                years=(year - 1, year),
            )
        )

    for category in group.members:
        for aspect in config.aspects:
            values_by_count = latest_index.attribute_values(category, aspect)
            if not values_by_count:
                continue
            top_values = sorted(values_by_count.items(), key=lambda kv: (-kv[1], kv[0]))
            top_values = top_values[:MAX_BAR_VALUES]
            specs.append(
                ChartSpec(
                    chart_id=next_id("mix", f"{category}-{aspect}-{latest}"),
                    kind="attribute_mix_bar",
                    title=f"{display_form(aspect)} mix {latest} — {display_form(category)}",
                    subject=subject_line,
                    labels=tuple(display_form(v) for v, _ in top_values),
                    values=tuple(
                        mix_attribute(latest_index, category, aspect, v).display_percent
                        for v, _ in top_values
                    ),
                    badges=(None,) * len(top_values),
                    years=(latest,),
                    category=category,
                )
            )
        if len(years) < 2:
            continue
        totals: dict[tuple[str, str], int] = {}
        for year in years:
            for (c, a, v), n in indices_by_year[year].attribute_counts.items():
                if c == category:
                    totals[(a, v)] = totals.get((a, v), 0) + n
        top_subjects = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
        series = []
        for (aspect, value), _ in top_subjects:
            points = []
            for year in years:
                try:
                    m = mix_attribute(indices_by_year[year], category, aspect, value)
                except EmptyDenominator:
                    continue
                points.append((year, m.display_percent))
            if points:
                series.append(
                    ChartSeries(
                        label=f"{display_form(value)} ({aspect})",
                        points=tuple(points),
                    )
                )
        if series:
            specs.append(
                ChartSpec(
                    chart_id=next_id("trend", category),
                    kind="trend_line",
                    title=f"Attribute trends — {display_form(category)}",
                    subject=subject_line,
                    years=tuple(years),
                    series=tuple(series),
                    category=category,
                )
            )
    return specs


# --------------------------------------------------------------------------
# SVG rendering
# --------------------------------------------------------------------------


def _esc(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")
    )


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _svg_open(out: list[str], spec: ChartSpec) -> None:
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" role="img">'
    )
    out.append(
        "<style>text{font-family:Helvetica,Arial,sans-serif;fill:#222}"
        ".title{font-size:16px;font-weight:bold}.subject{font-size:11px;fill:#666}"
        ".value{font-size:11px}.label{font-size:11px}.badge{font-size:10px;fill:#a33}"
        ".legend{font-size:11px}</style>"
    )
    out.append(f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>')
    out.append(f'<text class="title" x="{MARGIN_LEFT}" y="24">{_esc(spec.title)}</text>')
    out.append(f'<text class="subject" x="{MARGIN_LEFT}" y="42">{_esc(spec.subject)}</text>')


def _render_bars(spec: ChartSpec) -> list[str]:
    out: list[str] = []
    _svg_open(out, spec)
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    n = len(spec.labels)
    slot = plot_w / n
    bar_w = slot * 0.6
    numeric = [v for v in spec.values if v is not None]
    signed = spec.kind == "yoy_bar"
    scale_max = max((abs(v) for v in numeric), default=1.0) or 1.0
    baseline = MARGIN_TOP + (plot_h / 2 if signed else plot_h)
    span = plot_h / 2 if signed else plot_h

    out.append(
        f'<line x1="{_fmt(MARGIN_LEFT)}" y1="{_fmt(baseline)}" '
        f'x2="{_fmt(MARGIN_LEFT + plot_w)}" y2="{_fmt(baseline)}" stroke="#999"/>'
    )
    for i, label in enumerate(spec.labels):
        x = MARGIN_LEFT + i * slot + (slot - bar_w) / 2
        cx = x + bar_w / 2
        value = spec.values[i]
        badge = spec.badges[i] if i < len(spec.badges) else None
        if value is None:
            if badge:
                out.append(
                    f'<text class="badge" x="{_fmt(cx)}" y="{_fmt(baseline - 6)}" '
                    f'text-anchor="middle">{_esc(badge.replace("_", " "))}</text>'
                )
        else:
            height = abs(value) / scale_max * span
            y = baseline - height if value >= 0 else baseline
            color = PALETTE[0] if value >= 0 else PALETTE[3]
            out.append(
                f'<rect class="bar" x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(bar_w)}" '
                f'height="{_fmt(height)}" fill="{color}"/>'
            )
            label_y = y - 4 if value >= 0 else y + height + 12
            out.append(
                f'<text class="value" x="{_fmt(cx)}" y="{_fmt(label_y)}" '
                f'text-anchor="middle">{value}%</text>'
            )
            if badge:
                out.append(
                    f'<text class="badge" x="{_fmt(cx)}" y="{_fmt(label_y - 12)}" '
                    f'text-anchor="middle">{_esc(badge.replace("_", " "))}</text>'
                )
        out.append(
            f'<text class="label" x="{_fmt(cx)}" y="{_fmt(HEIGHT - MARGIN_BOTTOM + 18)}" '
            f'text-anchor="middle">{_esc(label)}</text>'
        )
    out.append("</svg>")
    return out


def _render_trend(spec: ChartSpec) -> list[str]:
    out: list[str] = []
    _svg_open(out, spec)
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    years = sorted({y for s in spec.series for y, _ in s.points} | set(spec.years))
    y_min, y_max = years[0], years[-1]
    year_span = max(y_max - y_min, 1)
    all_values = [v for s in spec.series for _, v in s.points]
    scale_max = max(all_values, default=1.0) or 1.0

    def x_of(year: int) -> float:
        return MARGIN_LEFT + (year - y_min) / year_span * plot_w

    def y_of(value: float) -> float:
        return MARGIN_TOP + plot_h - value / scale_max * plot_h

    baseline = MARGIN_TOP + plot_h
    out.append(
        f'<line x1="{_fmt(MARGIN_LEFT)}" y1="{_fmt(baseline)}" '
        f'x2="{_fmt(MARGIN_LEFT + plot_w)}" y2="{_fmt(baseline)}" stroke="#999"/>'
    )
    for year in years:
        out.append(
            f'<text class="label" x="{_fmt(x_of(year))}" y="{_fmt(baseline + 18)}" '
            f'text-anchor="middle">{year}</text>'
        )
    for si, series in enumerate(spec.series):
        color = PALETTE[si % len(PALETTE)]
        # Split at gap years so missing collections break the line.
        segments: list[list[tuple[int, float]]] = []
        run: list[tuple[int, float]] = []
        previous_year: int | None = None
        for year, value in series.points:
            if previous_year is not None and year != previous_year + 1:
                segments.append(run)
                run = []
            run.append((year, value))
            previous_year = year
        if run:
            segments.append(run)
        for segment in segments:
            if len(segment) >= 2:
                coords = " ".join(
                    f"{_fmt(x_of(year))},{_fmt(y_of(value))}" for year, value in segment
                )
                out.append(
                    f'<polyline class="trend" data-series="{_esc(series.label)}" '
                    f'points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>'
                )
        for year, value in series.points:
            out.append(
                f'<circle cx="{_fmt(x_of(year))}" cy="{_fmt(y_of(value))}" r="3" '
                f'fill="{color}"/>'
            )
        legend_y = MARGIN_TOP + 14 * si
        out.append(
            f'<rect x="{_fmt(WIDTH - MARGIN_RIGHT - 150)}" y="{_fmt(legend_y)}" '
            f'width="10" height="10" fill="{color}"/>'
        )
        out.append(
            f'<text class="legend" x="{_fmt(WIDTH - MARGIN_RIGHT - 136)}" '
            f'y="{_fmt(legend_y + 9)}">{_esc(series.label)}</text>'
        )
    out.append("</svg>")
    return out


def render_chart(spec: ChartSpec) -> str:
    """Self-contained SVG document; identical specs render to identical bytes."""
    if spec.kind == "trend_line":
        parts = _render_trend(spec)
    else:
        parts = _render_bars(spec)
    return "\n".join(parts) + "\n"
