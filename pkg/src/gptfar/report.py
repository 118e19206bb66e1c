"""Multi-page report generation: charts, image selection, chart-conditioned
text, document assembly, and HTML/JSON export.

The exported tree is ``report_<scope-hash>/{manifest.json, index.html,
charts/*.svg, images/*}``. Under the replay backend the whole function is
deterministic: identical scope + catalog + fixtures produce byte-identical
manifests and SVGs.
"""

from __future__ import annotations

import html
import json
import re
import shutil
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .analytics import CollectionIndex, multi_brand_aggregate
from .catalog import Catalog
from .charts import ChartSpec, make_chart_specs, render_chart, slugify
from .domain import CollectionKey, DomainConfig, ReportScope
from .gateway import Backend, ModelRequest, ReplayBackend
from .pipeline import (
    Workspace,
    ensure_report_inputs,
    load_indices,
    load_tagged,
)
from .tagging import display_form

OVERALL_PROMPT = (
    "You are given several charts describing the fashion status specifically "
    "for {report_type} of {collection} and {season}. Each chart is about one "
    "specific aspect, e.g., fabric, silhouette. Try to generate several "
    "paragraphs (less than FIVE) in the format of an article. "
    "{examples_block}The length of the article should be around 250 "
    "characters. Do not use any key points or subtitles."
)

CATEGORY_PROMPT = (
    "You are given several charts describing the fashion status specifically "
    "for the category {category}. Try to generate a very short and neat piece "
    "of description (MUST less than two sentences) that can give an overview "
    "of the category or highlight the most significant trend. Please DO NOT "
    "make it too specific on specific aspects. {examples_block}Please try to "
    "get the tone and style of the descriptions from the examples and apply "
    "then in your generation."
)

EXAMPLES_BLOCK = (
    "You are also given several examples of textual analysis based on charts "
    "as follows: {examples}. "
)

MAX_OVERALL_PARAGRAPHS = 5
MAX_CATEGORY_SENTENCES = 2
OVERALL_LENGTH_WINDOW = (200, 2000)
OVERALL_IMAGE_COUNT = 6
CATEGORY_IMAGE_COUNT = 3

PLACEHOLDER_TEXT = "Analysis text is unavailable for this edition."

REPLAY_TIMESTAMP = "2024-01-01T00:00:00+00:00"

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")
_PARAGRAPH_SPLIT = re.compile(r"\n\s*\n")


@dataclass(frozen=True)
class CoverPage:
    title: str
    author: str
    generated_at: str


@dataclass(frozen=True)
class OverallPage:
    paragraphs: tuple[str, ...]
    chart_ids: tuple[str, ...]
    images: tuple[str, ...]


@dataclass(frozen=True)
class CategoryPage:
    category: str
    description: str
    chart_ids: tuple[str, ...]
    images: tuple[str, ...]


@dataclass
class ReportDocument:
    scope: ReportScope
    cover: CoverPage
    overall: OverallPage
    category_pages: tuple[CategoryPage, ...]
    charts: dict[str, ChartSpec]
    chart_svgs: dict[str, str]
    warnings: tuple[str, ...] = ()
    image_sources: dict[str, str] = field(default_factory=dict, compare=False)

    def validate(self) -> None:
        if len(self.overall.paragraphs) > MAX_OVERALL_PARAGRAPHS:
            raise ValueError("overall page exceeds the paragraph limit")
        for page in self.category_pages:
            if len(_split_sentences(page.description)) > MAX_CATEGORY_SENTENCES:
                raise ValueError(f"category {page.category} description too long")
        referenced = set(self.overall.chart_ids)
        for page in self.category_pages:
            referenced.update(page.chart_ids)
        missing = referenced - set(self.charts)
        if missing:
            raise ValueError(f"chart ids referenced but absent: {sorted(missing)}")
        missing_svgs = set(self.charts) - set(self.chart_svgs)
        if missing_svgs:
            raise ValueError(f"charts without rendered SVG: {sorted(missing_svgs)}")


# --------------------------------------------------------------------------
# text handling
# --------------------------------------------------------------------------


def _split_sentences(text: str) -> list[str]:
    return [s for s in _SENTENCE_SPLIT.split(text.strip()) if s]


def enforce_paragraph_limit(
    text: str, limit: int = MAX_OVERALL_PARAGRAPHS
) -> tuple[tuple[str, ...], list[str]]:
    """Clamp generated article text to the paragraph limit; warn on the
    length window rather than inventing or deleting prose."""
    paragraphs = [p.strip() for p in _PARAGRAPH_SPLIT.split(text.strip()) if p.strip()]
    warnings = []
    if len(paragraphs) > limit:
        warnings.append(
            f"overall text had {len(paragraphs)} paragraphs; truncated to {limit}"
        )
        paragraphs = paragraphs[:limit]
    total = sum(len(p) for p in paragraphs)
    low, high = OVERALL_LENGTH_WINDOW
    if paragraphs and not low <= total <= high:
        warnings.append(f"overall text length {total} outside window [{low}, {high}]")
    return tuple(paragraphs), warnings


def enforce_sentence_limit(
    text: str, limit: int = MAX_CATEGORY_SENTENCES
) -> tuple[str, list[str]]:
    sentences = _split_sentences(text)
    if len(sentences) <= limit:
        return " ".join(sentences), []
    return (
        " ".join(sentences[:limit]),
        [f"category description had {len(sentences)} sentences; truncated to {limit}"],
    )


def load_default_exemplars() -> dict[str, list[str]]:
    """Editable in-context examples shipped as package data."""
    base = resources.files("gptfar").joinpath("data/exemplars")
    out: dict[str, list[str]] = {"overall": [], "category": []}
    for entry in sorted(base.iterdir(), key=lambda e: e.name):
        if entry.name.startswith("overall_"):
            out["overall"].append(entry.read_text().strip())
        elif entry.name.startswith("category_"):
            out["category"].append(entry.read_text().strip())
    return out


def _examples_block(exemplars: Sequence[str]) -> str:
    if not exemplars:
        return ""
    joined = " | ".join(exemplars)
    return EXAMPLES_BLOCK.format(examples=joined)


def _charts_as_text(charts: Sequence[ChartSpec]) -> str:
    return "\n\nCharts:\n" + "\n".join(f"- {c.summary_text()}" for c in charts)


def build_overall_text_prompt(
    charts: Sequence[ChartSpec],
    scope: ReportScope,
    exemplars: Sequence[str],
    *,
    chart_transport: str = "text",
    chart_paths: Mapping[str, str] | None = None,
    model_hint: str = "report-text",
) -> ModelRequest:
    """Prompt for the overall article. Charts travel as attached images when
    the backend is vision-capable, else inlined as structured summaries."""
    if not charts:
        raise ValueError("overall text prompt requires at least one chart")
    collection = f"{', '.join(scope.brands)} {_year_span(scope)}"
    text = OVERALL_PROMPT.format(
        report_type=scope.group,
        collection=collection,
        season=scope.season,
        examples_block=_examples_block(exemplars),
    )
    image_refs: tuple[str, ...] = ()
    if chart_transport == "image":
        if chart_paths is None:
            raise ValueError("image transport requires rendered chart paths")
        image_refs = tuple(chart_paths[c.chart_id] for c in charts)
    else:
        text += _charts_as_text(charts)
    return ModelRequest(
        role_instructions="",
        user_text=text,
        image_refs=image_refs,
        model_hint=model_hint,
    )


def build_category_text_prompt(
    charts: Sequence[ChartSpec],
    category: str,
    exemplars: Sequence[str],
    *,
    chart_transport: str = "text",
    chart_paths: Mapping[str, str] | None = None,
    model_hint: str = "report-text",
) -> ModelRequest:
    if not charts:
        raise ValueError("category text prompt requires at least one chart")
    text = CATEGORY_PROMPT.format(
        category=display_form(category),
        examples_block=_examples_block(exemplars),
    )
    image_refs: tuple[str, ...] = ()
    if chart_transport == "image":
        if chart_paths is None:
            raise ValueError("image transport requires rendered chart paths")
        image_refs = tuple(chart_paths[c.chart_id] for c in charts)
    else:
        text += _charts_as_text(charts)
    return ModelRequest(
        role_instructions="",
        user_text=text,
        image_refs=image_refs,
        model_hint=model_hint,
    )


# --------------------------------------------------------------------------
# image selection
# --------------------------------------------------------------------------


def select_images(
    catalog: Catalog,
    categories_by_image: Mapping[tuple[str, str], set[str]],
    scope: ReportScope,
    category: str | None,
    k: int,
    config: DomainConfig | None = None,
) -> list[tuple[str, str]]:
    """Pick up to k catalog images whose garments include the category (or
    any group member for the overall page), ordered by (brand, image id).

    Returns (brand, catalog-relative path) pairs; may return fewer than k.
    """
    config = config or DomainConfig.default()
    wanted = (
        {category}
        if category is not None
        else set(config.group(scope.group).members)
    )
    candidates = []
    for key in sorted(catalog.collections_for(scope), key=lambda k: (k.brand, k.year)):
        for rel in catalog.entries[key]:
            tagged = categories_by_image.get((key.slug(), rel), set())
            if tagged & wanted:
                candidates.append((key.brand, rel))
    candidates.sort()
    return candidates[:k]


def _categories_by_image(
    workspace: Workspace, keys: Sequence[CollectionKey]
) -> dict[tuple[str, str], set[str]]:
    lookup: dict[tuple[str, str], set[str]] = {}
    for key in keys:
        for outfit in load_tagged(workspace, key):
            lookup[(key.slug(), outfit.image)] = {g.category for g in outfit.garments}
    return lookup


def _image_asset_name(rel: str) -> str:
    stem = slugify(str(Path(rel).with_suffix("")))
    return f"images/{stem}{Path(rel).suffix.lower()}"


# --------------------------------------------------------------------------
# generation
# --------------------------------------------------------------------------


def _year_span(scope: ReportScope) -> str:
    years = sorted(scope.years)
    if len(years) == 1:
        return str(years[0])
    return f"{years[0]}-{years[-1]}"


def default_clock_for(backend: Backend) -> Callable[[], str]:
    """Wall clock for live runs; a fixed instant under replay so reports are
    pure functions of their inputs."""
    if isinstance(backend, ReplayBackend):
        return lambda: REPLAY_TIMESTAMP
    return lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")


def generate_report(
    scope: ReportScope,
    backend: Backend,
    workspace: Workspace,
    config: DomainConfig | None = None,
    *,
    catalog: Catalog | None = None,
    exemplars: dict[str, list[str]] | None = None,
    chart_transport: str = "text",
    clock: Callable[[], str] | None = None,
    ensure_inputs: bool = True,
) -> ReportDocument:
    """Full report pipeline: analytics -> charts -> images -> text -> assembly.

    Refused text completions degrade to placeholder strings with warnings;
    chart and analytics failures (NoData, missing stages) propagate.
    """
    config = config or DomainConfig.default()
    catalog = catalog or workspace.load_catalog()
    catalog.validate_scope(scope, config)
    if exemplars is None:
        exemplars = load_default_exemplars()
    if clock is None:
        clock = default_clock_for(backend)

    if ensure_inputs:
        ensure_report_inputs(workspace, backend, config, scope)

    keys = catalog.collections_for(scope)
    indices = load_indices(workspace, keys)
    indices_by_year: dict[int, CollectionIndex] = {}
    for year in sorted({k.year for k in keys}):
        year_indices = [indices[k] for k in keys if k.year == year]
        indices_by_year[year] = multi_brand_aggregate(year_indices)

    charts = make_chart_specs(indices_by_year, scope, config)
    chart_svgs = {spec.chart_id: render_chart(spec) for spec in charts}
    group = config.group(scope.group)
    warnings: list[str] = []

    categories_by_image = _categories_by_image(workspace, keys)
    image_sources: dict[str, str] = {}

    def asset_images(selection: list[tuple[str, str]]) -> tuple[str, ...]:
        names = []
        for _, rel in selection:
            name = _image_asset_name(rel)
            image_sources[name] = str(catalog.image_path(rel))
            names.append(name)
        return tuple(names)

    overall_images = asset_images(
        select_images(
            catalog, categories_by_image, scope, None, OVERALL_IMAGE_COUNT, config
        )
    )

    def run_text(request: ModelRequest, label: str) -> str | None:
        response = backend.complete(request)
        if response.refused:
            warnings.append(f"{label}: model refused; placeholder used")
            return None
        return response.text

    overall_request = build_overall_text_prompt(
        charts, scope, exemplars.get("overall", ()), chart_transport=chart_transport
    )
    overall_text = run_text(overall_request, "overall text")
    if overall_text is None:
        paragraphs: tuple[str, ...] = (PLACEHOLDER_TEXT,)
    else:
        paragraphs, text_warnings = enforce_paragraph_limit(overall_text)
        warnings.extend(text_warnings)
        if not paragraphs:
            paragraphs = (PLACEHOLDER_TEXT,)

    group_chart_ids = tuple(c.chart_id for c in charts if c.category is None)
    category_pages: list[CategoryPage] = []
    for category in group.members:
        category_charts = [c for c in charts if c.category == category]
        has_data = any(
            index.category_counts.get(category, 0) > 0
            for index in indices_by_year.values()
        )
        if not category_charts and not has_data:
            continue
        if category_charts:
            request = build_category_text_prompt(
                category_charts,
                category,
                exemplars.get("category", ()),
                chart_transport=chart_transport,
            )
            text = run_text(request, f"category text ({category})")
        else:
            warnings.append(f"category {category}: no charts; placeholder used")
            text = None
        if text is None:
            description = PLACEHOLDER_TEXT
        else:
            description, sentence_warnings = enforce_sentence_limit(text)
            warnings.extend(sentence_warnings)
            if not description:
                description = PLACEHOLDER_TEXT
        category_images = asset_images(
            select_images(
                catalog,
                categories_by_image,
                scope,
                category,
                CATEGORY_IMAGE_COUNT,
                config,
            )
        )
        category_pages.append(
            CategoryPage(
                category=category,
                description=description,
                chart_ids=tuple(c.chart_id for c in category_charts),
                images=category_images,
            )
        )

    cover = CoverPage(
        title=f"{group.name} report — {scope.season} {_year_span(scope)} — "
        f"{', '.join(scope.brands)}",
        author="GPT-FAR",
        generated_at=clock(),
    )
    document = ReportDocument(
        scope=scope,
        cover=cover,
        overall=OverallPage(
            paragraphs=paragraphs, chart_ids=group_chart_ids, images=overall_images
        ),
        category_pages=tuple(category_pages),
        charts={c.chart_id: c for c in charts},
        chart_svgs=chart_svgs,
        warnings=tuple(warnings),
        image_sources=image_sources,
    )
    document.validate()
    return document


# --------------------------------------------------------------------------
# export / reload
# --------------------------------------------------------------------------


def _manifest_dict(doc: ReportDocument) -> dict:
    return {
        "scope": {
            "years": list(doc.scope.years),
            "season": doc.scope.season,
            "brands": list(doc.scope.brands),
            "group": doc.scope.group,
        },
        "cover": {
            "title": doc.cover.title,
            "author": doc.cover.author,
            "generated_at": doc.cover.generated_at,
        },
        "overall_page": {
            "paragraphs": list(doc.overall.paragraphs),
            "charts": list(doc.overall.chart_ids),
            "images": list(doc.overall.images),
        },
        "category_pages": [
            {
                "category": page.category,
                "description": page.description,
                "charts": list(page.chart_ids),
                "images": list(page.images),
            }
            for page in doc.category_pages
        ],
        "charts": {cid: spec.to_json_dict() for cid, spec in doc.charts.items()},
        "assets": {
            "charts": {cid: f"charts/{cid}.svg" for cid in sorted(doc.charts)},
            "images": sorted(set(doc.image_sources)),
        },
        "warnings": list(doc.warnings),
    }


def export_report(
    doc: ReportDocument, out_dir: str | Path, formats: Sequence[str] = ("json", "html")
) -> list[Path]:
    """Write the report tree; every asset the manifest references exists on
    disk afterwards."""
    for fmt in formats:
        if fmt not in ("json", "html"):
            raise ValueError(f"unknown export format {fmt!r}")
    out = Path(out_dir)
    charts_dir = out / "charts"
    images_dir = out / "images"
    charts_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    for chart_id, svg in sorted(doc.chart_svgs.items()):
        path = charts_dir / f"{chart_id}.svg"
        path.write_text(svg, "utf-8")
        written.append(path)

    if doc.image_sources:
        images_dir.mkdir(parents=True, exist_ok=True)
    for name, source in sorted(doc.image_sources.items()):
        target = out / name
        if Path(source).resolve() != target.resolve():
            shutil.copyfile(source, target)
        written.append(target)

    if "json" in formats:
        manifest_path = out / "manifest.json"
        manifest_path.write_text(
            json.dumps(_manifest_dict(doc), indent=2, sort_keys=True) + "\n", "utf-8"
        )
        written.append(manifest_path)
    if "html" in formats:
        html_path = out / "index.html"
        html_path.write_text(render_html(doc), "utf-8")
        written.append(html_path)
    return written


def load_report(report_dir: str | Path) -> ReportDocument:
    """Reload an exported report; inverse of the json export."""
    report_dir = Path(report_dir)
    data = json.loads((report_dir / "manifest.json").read_text("utf-8"))
    charts = {
        cid: ChartSpec.from_json_dict(spec) for cid, spec in data["charts"].items()
    }
    chart_svgs = {
        cid: (report_dir / rel).read_text("utf-8")
        for cid, rel in data["assets"]["charts"].items()
    }
    image_sources = {
        name: str(report_dir / name) for name in data["assets"]["images"]
    }
    scope = ReportScope(
        years=tuple(data["scope"]["years"]),
        season=data["scope"]["season"],
        brands=tuple(data["scope"]["brands"]),
        group=data["scope"]["group"],
    )
    return ReportDocument(
        scope=scope,
        cover=CoverPage(**data["cover"]),
        overall=OverallPage(
            paragraphs=tuple(data["overall_page"]["paragraphs"]),
            chart_ids=tuple(data["overall_page"]["charts"]),
            images=tuple(data["overall_page"]["images"]),
        ),
        category_pages=tuple(
            CategoryPage(
                category=page["category"],
                description=page["description"],
                chart_ids=tuple(page["charts"]),
                images=tuple(page["images"]),
            )
            for page in data["category_pages"]
        ),
        charts=charts,
        chart_svgs=chart_svgs,
        warnings=tuple(data.get("warnings", ())),
        image_sources=image_sources,
    )


_PAGE_CSS = """
body { font-family: Helvetica, Arial, sans-serif; margin: 0; color: #222; }
nav.report-nav { background: #1a1a2e; padding: 12px 24px; position: sticky; top: 0; }
nav.report-nav a { color: #eee; margin-right: 18px; text-decoration: none; font-size: 14px; }
section.page { min-height: 60vh; padding: 40px 48px; border-bottom: 2px solid #eee; }
section.cover h1 { font-size: 34px; margin-bottom: 8px; }
section.cover .meta { color: #666; }
.columns { display: flex; gap: 24px; align-items: flex-start; }
.column { flex: 1; min-width: 0; }
.column svg, .cat-charts svg { max-width: 100%; height: auto; display: block; margin-bottom: 16px; }
.column img, .cat-images img { max-width: 100%; display: block; margin-bottom: 12px; border: 1px solid #ddd; }
.cat-charts { display: flex; flex-wrap: wrap; gap: 16px; }
.cat-charts svg { flex: 1 1 300px; }
p.description { font-size: 17px; }
"""


def render_html(doc: ReportDocument) -> str:
    """Single self-contained multi-page document: cover, a three-column
    overall page (text | charts | images), then one page per category."""
    esc = html.escape
    nav = ['<a href="#cover">Cover</a>', '<a href="#overall">Overall</a>']
    for page in doc.category_pages:
        nav.append(
            f'<a href="#cat-{slugify(page.category)}">{esc(display_form(page.category))}</a>'
        )

    def img_tags(images: tuple[str, ...]) -> str:
        return "\n".join(
            f'<img src="{esc(name)}" alt="catwalk look {esc(Path(name).stem)}" />'
            for name in images
        )

    overall_charts = "\n".join(
        doc.chart_svgs[cid] for cid in doc.overall.chart_ids if cid in doc.chart_svgs
    )
    overall_paragraphs = "\n".join(f"<p>{esc(p)}</p>" for p in doc.overall.paragraphs)

    sections = [
        f'<section class="page cover" id="cover">'
        f"<h1>{esc(doc.cover.title)}</h1>"
        f'<p class="meta">Author: {esc(doc.cover.author)}</p>'
        f'<p class="meta">Generated: {esc(doc.cover.generated_at)}</p>'
        f"</section>",
        f'<section class="page overall" id="overall">'
        f"<h2>Overall analysis</h2>"
        f'<div class="columns">'
        f'<div class="column text-pane">{overall_paragraphs}</div>'
        f'<div class="column chart-pane">{overall_charts}</div>'
        f'<div class="column image-pane">{img_tags(doc.overall.images)}</div>'
        f"</div></section>",
    ]
    for page in doc.category_pages:
        charts_markup = "\n".join(
            doc.chart_svgs[cid] for cid in page.chart_ids if cid in doc.chart_svgs
        )
        sections.append(
            f'<section class="page category" id="cat-{slugify(page.category)}">'
            f"<h2>{esc(display_form(page.category))}</h2>"
            f'<p class="description">{esc(page.description)}</p>'
            f'<div class="cat-charts">{charts_markup}</div>'
            f'<div class="cat-images">{img_tags(page.images)}</div>'
            f"</section>"
        )

    return (
        "<!DOCTYPE html>\n"
        '<html lang="en">\n<head>\n<meta charset="utf-8" />\n'
        f"<title>{esc(doc.cover.title)}</title>\n"
        f"<style>{_PAGE_CSS}</style>\n</head>\n<body>\n"
        f'<nav class="report-nav">{"".join(nav)}</nav>\n'
        + "\n".join(sections)
        + "\n</body>\n</html>\n"
    )
