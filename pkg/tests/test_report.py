import json
from html.parser import HTMLParser

import pytest

from gptfar.catalog import ScopeError, ingest
from gptfar.charts import ChartSpec
from gptfar.domain import ReportScope
from gptfar.gateway import ModelResponse, ScriptedBackend
from gptfar.pipeline import Workspace, ensure_report_inputs, run_stage
from gptfar.report import (
    PLACEHOLDER_TEXT,
    build_category_text_prompt,
    build_overall_text_prompt,
    enforce_paragraph_limit,
    enforce_sentence_limit,
    export_report,
    generate_report,
    load_report,
    render_html,
    select_images,
)

from support import build_toy_catalog, fake_model

SCOPE = ReportScope(
    years=(2022, 2023), season="SS", brands=("Chanel",), group="Dresses & Skirts"
)


def _charts(n=3, category=None):
    return [
        ChartSpec(
            chart_id=f"{i:02d}-mix",
            kind="attribute_mix_bar",
            title=f"Chart {i}",
            subject="Chanel · SS",
            labels=("Draped", "Modern"),
            values=(60.0, 40.0),
            badges=(None, None),
            years=(2023,),
            category=category,
        )
        for i in range(1, n + 1)
    ]


class TestTextPrompts:
    def test_overall_prompt_assembly(self):
        request = build_overall_text_prompt(
            _charts(3), SCOPE, ["example one", "example two"]
        )
        assert "less than FIVE" in request.user_text
        assert "around 250 characters" in request.user_text
        assert "Dresses & Skirts" in request.user_text
        assert "SS" in request.user_text and "Chanel" in request.user_text
        assert "example one" in request.user_text
        assert "example two" in request.user_text
        assert request.image_refs == ()  # text transport inlines summaries
        assert "[attribute_mix_bar] Chart 1" in request.user_text

    def test_overall_prompt_image_transport(self, tmp_path):
        charts = _charts(3)
        paths = {}
        for chart in charts:
            path = tmp_path / f"{chart.chart_id}.svg"
            path.write_text("<svg/>")
            paths[chart.chart_id] = str(path)
        request = build_overall_text_prompt(
            charts, SCOPE, [], chart_transport="image", chart_paths=paths
        )
        assert len(request.image_refs) == 3

    def test_zero_exemplars_omits_example_block(self):
        request = build_overall_text_prompt(_charts(1), SCOPE, [])
        assert "examples of textual analysis" not in request.user_text

    def test_category_prompt(self):
        request = build_category_text_prompt(_charts(2), "dresses", ["sample"])
        assert "MUST less than two sentences" in request.user_text
        assert "Dresses" in request.user_text
        assert "get the tone and style" in request.user_text

    def test_category_prompt_requires_charts(self):
        with pytest.raises(ValueError):
            build_category_text_prompt([], "dresses", [])


class TestTextLimits:
    def test_paragraph_truncation(self):
        text = "\n\n".join(f"Paragraph {i} " + "x" * 60 for i in range(7))
        paragraphs, warnings = enforce_paragraph_limit(text)
        assert len(paragraphs) == 5
        assert any("truncated" in w for w in warnings)

    def test_length_window_warning(self):
        paragraphs, warnings = enforce_paragraph_limit("Too short.")
        assert paragraphs == ("Too short.",)
        assert any("length" in w for w in warnings)

    def test_sentence_truncation(self):
        text = "One stays. Two stays. Three goes!"
        description, warnings = enforce_sentence_limit(text)
        assert description == "One stays. Two stays."
        assert warnings

    def test_two_sentences_untouched(self):
        text = "One stays. Two stays."
        description, warnings = enforce_sentence_limit(text)
        assert description == text
        assert warnings == []


@pytest.fixture
def pipeline_env(tmp_path, config):
    root = tmp_path / "catalog"
    build_toy_catalog(root)
    workspace = Workspace(tmp_path / "ws")
    run_stage("ingest", workspace, None, config, catalog_root=root)
    backend = ScriptedBackend(fake_model)
    return workspace, backend


class TestSelectImages:
    def test_selection_deterministic_and_truncated(self, pipeline_env, config):
        workspace, backend = pipeline_env
        ensure_report_inputs(workspace, backend, config, SCOPE)
        catalog = workspace.load_catalog()
        from gptfar.report import _categories_by_image

        lookup = _categories_by_image(workspace, catalog.collections_for(SCOPE))
        first = select_images(catalog, lookup, SCOPE, None, 3, config)
        second = select_images(catalog, lookup, SCOPE, None, 3, config)
        assert first == second
        assert len(first) <= 3
        assert all(brand == "Chanel" for brand, _ in first)

    def test_category_without_images_is_empty(self, pipeline_env, config):
        workspace, backend = pipeline_env
        ensure_report_inputs(workspace, backend, config, SCOPE)
        catalog = workspace.load_catalog()
        from gptfar.report import _categories_by_image

        lookup = _categories_by_image(workspace, catalog.collections_for(SCOPE))
        # the fake tagger never emits coats
        assert select_images(catalog, lookup, SCOPE, "coats", 5, config) == []


class _ColumnCounter(HTMLParser):
    def __init__(self):
        super().__init__()
        self.in_overall = False
        self.columns = 0
        self.pages = []

    def handle_starttag(self, tag, attrs):
        attr = dict(attrs)
        classes = attr.get("class", "").split()
        if tag == "section":
            self.pages.append(attr.get("id"))
            self.in_overall = attr.get("id") == "overall"
        if self.in_overall and "column" in classes:
            self.columns += 1


class TestGenerateReport:
    def test_full_document(self, pipeline_env, config):
        workspace, backend = pipeline_env
        document = generate_report(SCOPE, backend, workspace, config)
        assert document.cover.author == "GPT-FAR"
        assert 1 <= len(document.overall.paragraphs) <= 5
        assert document.overall.chart_ids
        assert document.category_pages
        for page in document.category_pages:
            assert page.category in ("dresses", "skirts")
            assert len(page.description.split(". ")) <= 2
        document.validate()

    def test_absent_brand_fails_before_model_calls(self, pipeline_env, config):
        workspace, backend = pipeline_env
        bad_scope = ReportScope(
            years=(2022,), season="SS", brands=("Dior",), group="Dresses & Skirts"
        )
        with pytest.raises(ScopeError):
            generate_report(bad_scope, backend, workspace, config)
        assert backend.calls == []

    def test_refusing_text_backend_degrades_to_placeholders(
        self, pipeline_env, config
    ):
        workspace, backend = pipeline_env
        ensure_report_inputs(workspace, backend, config, SCOPE)

        def refuse_text(request):
            if request.user_text.startswith("You are given several charts"):
                return ModelResponse(text="", finish_state="refused")
            return fake_model(request)

        refusing = ScriptedBackend(refuse_text)
        document = generate_report(SCOPE, refusing, workspace, config)
        assert document.overall.paragraphs == (PLACEHOLDER_TEXT,)
        assert all(p.description == PLACEHOLDER_TEXT for p in document.category_pages)
        assert document.chart_svgs  # charts intact
        assert any("refused" in w for w in document.warnings)


class TestExport:
    @pytest.fixture
    def document(self, pipeline_env, config):
        workspace, backend = pipeline_env
        return generate_report(SCOPE, backend, workspace, config), workspace

    def test_html_overall_page_has_exactly_three_columns(self, document):
        doc, _ = document
        counter = _ColumnCounter()
        counter.feed(render_html(doc))
        assert counter.columns == 3
        assert counter.pages[0] == "cover"
        assert counter.pages[1] == "overall"
        assert len(counter.pages) == 2 + len(doc.category_pages)

    def test_cover_fields_present(self, document):
        import html as html_mod

        doc, _ = document
        markup = render_html(doc)
        assert html_mod.escape(doc.cover.title) in markup
        assert "Author: GPT-FAR" in markup
        assert "Generated:" in markup

    def test_json_roundtrip(self, document, tmp_path):
        doc, _ = document
        out = tmp_path / "report"
        export_report(doc, out)
        assert load_report(out) == doc

    def test_manifest_assets_exist(self, document, tmp_path):
        doc, _ = document
        out = tmp_path / "report"
        export_report(doc, out)
        manifest = json.loads((out / "manifest.json").read_text())
        for rel in manifest["assets"]["charts"].values():
            assert (out / rel).is_file()
        for rel in manifest["assets"]["images"]:
            assert (out / rel).is_file()

    def test_every_chart_value_matches_manifest_spec(self, document, tmp_path):
        doc, _ = document
        out = tmp_path / "report"
        export_report(doc, out)
        manifest = json.loads((out / "manifest.json").read_text())
        for chart_id, spec in manifest["charts"].items():
            svg = (out / manifest["assets"]["charts"][chart_id]).read_text()
            for value in spec["values"]:
                if value is not None:
                    assert f"{value}%" in svg

    def test_unknown_format_rejected(self, document, tmp_path):
        doc, _ = document
        with pytest.raises(ValueError):
            export_report(doc, tmp_path / "report", formats=("pdf",))
