import xml.etree.ElementTree as ET

import pytest

from gptfar.analytics import CollectionIndex, mix_category
from gptfar.charts import (
    ChartSeries,
    ChartSpec,
    NoData,
    make_chart_specs,
    render_chart,
)
from gptfar.domain import CollectionKey, ReportScope

SVG_NS = "{http://www.w3.org/2000/svg}"


def _bar_spec(values, kind="category_mix_bar", badges=None):
    labels = tuple(f"c{i}" for i in range(len(values)))
    return ChartSpec(
        chart_id="01-test",
        kind=kind,
        title="Test chart",
        subject="Test · SS",
        labels=labels,
        values=tuple(values),
        badges=tuple(badges) if badges else (None,) * len(values),
        years=(2023,),
    )


def _index(year, counts, attributes=None):
    return CollectionIndex(
        key=CollectionKey(year, "SS", "Chanel"),
        category_counts=dict(counts),
        attribute_counts=dict(attributes or {}),
        garment_total=sum(counts.values()),
    )


SCOPE = ReportScope(
    years=(2022, 2023), season="SS", brands=("Chanel",), group="Dresses & Skirts"
)


class TestMakeChartSpecs:
    def test_two_categories_two_years(self, config):
        indices = {
            2022: _index(
                2022,
                {"dresses": 6, "skirts": 4},
                {("dresses", "style", "draped"): 3, ("dresses", "style", "modern"): 3},
            ),
            2023: _index(
                2023,
                {"dresses": 7, "skirts": 3},
                {("dresses", "style", "draped"): 5, ("dresses", "style", "modern"): 2},
            ),
        }
        specs = make_chart_specs(indices, SCOPE, config)
        kinds = [s.kind for s in specs]
        assert kinds.count("category_mix_bar") == 1
        assert kinds.count("yoy_bar") == 1
        assert kinds.count("attribute_mix_bar") == 1  # dresses/style only
        assert kinds.count("trend_line") == 1
        # deterministic ordering: group charts first
        assert kinds[0] == "category_mix_bar"
        assert kinds[1] == "yoy_bar"

    def test_chart_values_come_from_analytics(self, config):
        indices = {2023: _index(2023, {"dresses": 6, "skirts": 4})}
        specs = make_chart_specs(indices, SCOPE, config)
        mix_bar = specs[0]
        assert mix_bar.values == (
            mix_category(indices[2023], "dresses").display_percent,
            mix_category(indices[2023], "skirts").display_percent,
        )

    def test_single_year_no_yoy_no_trend(self, config):
        indices = {2023: _index(2023, {"dresses": 5, "skirts": 5})}
        specs = make_chart_specs(indices, SCOPE, config)
        assert {s.kind for s in specs} == {"category_mix_bar"}

    def test_empty_scope_raises_nodata(self, config):
        indices = {2023: _index(2023, {})}
        with pytest.raises(NoData):
            make_chart_specs(indices, SCOPE, config)

    def test_yoy_badges_for_new_entries(self, config):
        indices = {
            2022: _index(2022, {"skirts": 10}),
            2023: _index(2023, {"dresses": 5, "skirts": 5}),
        }
        specs = make_chart_specs(indices, SCOPE, config)
        yoy_bar = next(s for s in specs if s.kind == "yoy_bar")
        dress_slot = yoy_bar.labels.index("Dresses")
        assert yoy_bar.values[dress_slot] is None
        assert yoy_bar.badges[dress_slot] == "new_entry"


class TestSpecValidation:
    def test_mix_values_must_be_percentages(self):
        with pytest.raises(ValueError):
            _bar_spec([150.0])

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            _bar_spec([10.0], kind="pie")

    def test_data_required(self):
        with pytest.raises(ValueError):
            ChartSpec(
                chart_id="x", kind="trend_line", title="t", subject="s", series=()
            )

    def test_json_roundtrip(self):
        spec = ChartSpec(
            chart_id="09-trend-dresses",
            kind="trend_line",
            title="Trends",
            subject="s",
            years=(2022, 2023),
            series=(ChartSeries("Draped (style)", ((2022, 40.0), (2023, 60.0))),),
            category="dresses",
        )
        assert ChartSpec.from_json_dict(spec.to_json_dict()) == spec


class TestRenderChart:
    def test_deterministic_bytes(self):
        spec = _bar_spec([60.0, 40.0])
        assert render_chart(spec) == render_chart(spec)

    def test_bar_heights_in_value_ratio(self):
        svg = render_chart(_bar_spec([60.0, 40.0]))
        root = ET.fromstring(svg)
        bars = [
            el
            for el in root.iter(f"{SVG_NS}rect")
            if el.get("class") == "bar"
        ]
        assert len(bars) == 2
        h1, h2 = (float(b.get("height")) for b in bars)
        # coordinates are emitted with 2 decimals, so compare at that grain
        assert h1 / h2 == pytest.approx(60.0 / 40.0, rel=1e-3)

    def test_percent_labels_rendered(self):
        svg = render_chart(_bar_spec([60.0, 40.0]))
        assert "60.0%" in svg and "40.0%" in svg

    def test_badges_rendered_as_text(self):
        spec = _bar_spec([None, -100.0], kind="yoy_bar", badges=["new_entry", "dropped"])
        svg = render_chart(spec)
        assert "new entry" in svg
        assert "dropped" in svg

    def test_trend_gap_splits_polyline(self):
        spec = ChartSpec(
            chart_id="02-trend",
            kind="trend_line",
            title="Trend",
            subject="s",
            years=(2019, 2020, 2022, 2023),
            series=(
                ChartSeries(
                    "Draped (style)",
                    ((2019, 10.0), (2020, 20.0), (2022, 30.0), (2023, 25.0)),
                ),
            ),
        )
        svg = render_chart(spec)
        root = ET.fromstring(svg)
        polylines = list(root.iter(f"{SVG_NS}polyline"))
        assert len(polylines) == 2
        # every point still gets a marker
        assert len(list(root.iter(f"{SVG_NS}circle"))) == 4

    def test_svg_is_well_formed_for_all_kinds(self):
        ET.fromstring(render_chart(_bar_spec([30.0, 70.0])))
        ET.fromstring(render_chart(_bar_spec([12.5], kind="attribute_mix_bar")))
        ET.fromstring(render_chart(_bar_spec([-20.0, 35.0], kind="yoy_bar")))
        trend = ChartSpec(
            chart_id="03-trend",
            kind="trend_line",
            title="Trend & more",
            subject="s <escaped>",
            years=(2022, 2023),
            series=(ChartSeries("Silk (fabric)", ((2022, 50.0), (2023, 50.0))),),
        )
        ET.fromstring(render_chart(trend))
