"""The ``far`` command line: batch pipeline runs and the HTTP service.

Usage errors exit 2 (click's default); pipeline errors exit 1 with a
structured diagnostic on stderr. Global flags (--workspace, --backend,
--fixtures, --script) are accepted both before and after the subcommand.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from .analytics import export_metrics_csv, multi_brand_aggregate
from .catalog import LayoutError, ScopeError
from .charts import NoData
from .domain import DomainConfig, DomainError, ReportScope
from .gateway import Backend, GatewayError, ModelResponse, ScriptedBackend
from .pipeline import (
    StageDependencyMissing,
    Workspace,
    WorkspaceLocked,
    load_indices,
    run_stage,
)
from .report import export_report, generate_report
from .service import BackendUnavailable, build_backend, create_app

_PIPELINE_ERRORS = (
    BackendUnavailable,
    DomainError,
    GatewayError,
    LayoutError,
    NoData,
    ScopeError,
    StageDependencyMissing,
    WorkspaceLocked,
    OSError,
)

BACKEND_KINDS = ("live", "replay", "scripted")


@dataclass
class AppContext:
    workspace_path: Path
    config: DomainConfig
    backend_kind: str = "replay"
    fixtures_path: Path | None = None
    script: Path | None = None
    model_url: str | None = None
    model_name: str = "gpt-4-vision"
    record: bool = False

    @property
    def workspace(self) -> Workspace:
        return Workspace(self.workspace_path)

    @property
    def fixtures(self) -> Path:
        return self.fixtures_path or self.workspace_path / "fixtures"

    def override(self, **updates) -> "AppContext":
        active = {k: v for k, v in updates.items() if v is not None}
        return dataclasses.replace(self, **active) if active else self

    def backend(self) -> Backend:
        if self.backend_kind == "scripted":
            if self.script is None:
                raise BackendUnavailable("scripted backend needs --script FILE")
            entries = json.loads(self.script.read_text("utf-8"))
            return ScriptedBackend(
                [
                    e
                    if isinstance(e, str)
                    else ModelResponse(
                        text=e.get("text", ""),
                        finish_state=e.get("finish_state", "complete"),
                    )
                    for e in entries
                ]
            )
        return build_backend(
            self.backend_kind,
            fixtures_dir=self.fixtures,
            model_url=self.model_url,
            model_name=self.model_name,
            record=self.record,
        )


def _fail(exc: Exception) -> None:
    click.echo(f"error[{type(exc).__name__}]: {exc}", err=True)
    sys.exit(1)


def _parse_scope(years: str, season: str, brands: str, group: str) -> ReportScope:
    try:
        year_list = tuple(int(y.strip()) for y in years.split(",") if y.strip())
    except ValueError:
        raise DomainError(f"--years must be comma-separated integers (got {years!r})")
    brand_list = tuple(b.strip() for b in brands.split(",") if b.strip())
    return ReportScope(years=year_list, season=season, brands=brand_list, group=group)


def _maybe_scope(
    config: DomainConfig,
    years: str | None,
    season: str | None,
    brands: str | None,
    group: str | None,
):
    """Stage scope from flags; None means the whole catalog. The group only
    matters for reports, so it defaults to the first configured group."""
    if not any((years, season, brands, group)):
        return None
    if not all((years, season, brands)):
        raise DomainError(
            "partial scopes need --years, --season and --brands together"
        )
    return _parse_scope(years, season, brands, group or config.groups[0].name)


def _add_options(fn, options):
    for option in reversed(options):
        fn = option(fn)
    return fn


def scope_options(fn):
    return _add_options(
        fn,
        [
            click.option("--years", help="Comma-separated years, e.g. 2022,2023"),
            click.option("--season", help="Season code (SS, AW, Pre-summer, Pre-fall)"),
            click.option("--brands", help="Comma-separated brand names"),
            click.option("--group", help="Category group name"),
        ],
    )


def global_options(fn):
    """Global flags repeated on subcommands so they work in either position."""
    return _add_options(
        fn,
        [
            click.option(
                "--workspace",
                "workspace_override",
                type=click.Path(path_type=Path),
                help="Workspace directory (also a global flag)",
            ),
            click.option(
                "--backend",
                "backend_override",
                type=click.Choice(BACKEND_KINDS),
                help="Model backend (also a global flag)",
            ),
            click.option(
                "--fixtures",
                "fixtures_override",
                type=click.Path(path_type=Path),
                help="Fixture directory for replay/recording (also a global flag)",
            ),
            click.option(
                "--script",
                "script_override",
                type=click.Path(path_type=Path, exists=True),
                help="Canned responses for the scripted backend (also a global flag)",
            ),
        ],
    )


def _resolved(app: AppContext, workspace_override, backend_override, fixtures_override, script_override) -> AppContext:
    return app.override(
        workspace_path=workspace_override,
        backend_kind=backend_override,
        fixtures_path=fixtures_override,
        script=script_override,
    )


@click.group()
@click.option(
    "--workspace",
    envvar="FAR_WORKSPACE",
    default="workspace",
    show_default=True,
    type=click.Path(path_type=Path),
)
@click.option(
    "--backend",
    "backend_kind",
    type=click.Choice(BACKEND_KINDS),
    default="replay",
    show_default=True,
)
@click.option("--fixtures", envvar="FAR_FIXTURES", type=click.Path(path_type=Path))
@click.option(
    "--script",
    type=click.Path(path_type=Path, exists=True),
    help="JSON array of canned responses for the scripted backend",
)
@click.option("--model-url", envvar="FAR_MODEL_URL")
@click.option("--model-name", default="gpt-4-vision", show_default=True)
@click.option("--record", is_flag=True, help="Record live responses as fixtures")
@click.option(
    "--config",
    "config_path",
    type=click.Path(path_type=Path, exists=True),
    help="Override the domain vocabulary config",
)
@click.pass_context
def main(ctx, workspace, backend_kind, fixtures, script, model_url, model_name, record, config_path):
    """Catwalk analytics and automated fashion report generation."""
    config = DomainConfig.load(config_path) if config_path else DomainConfig.default()
    ctx.obj = AppContext(
        workspace_path=workspace,
        config=config,
        backend_kind=backend_kind,
        fixtures_path=fixtures,
        script=script,
        model_url=model_url,
        model_name=model_name,
        record=record,
    )


@main.command()
@click.argument("root", type=click.Path(exists=True, path_type=Path))
@global_options
@click.pass_obj
def ingest(app: AppContext, root: Path, workspace_override, backend_override, fixtures_override, script_override):
    """Scan a catalog tree (root/<year>/<season>/<brand>/images)."""
    app = _resolved(app, workspace_override, backend_override, fixtures_override, script_override)
    try:
        report = run_stage("ingest", app.workspace, None, app.config, catalog_root=root)
    except _PIPELINE_ERRORS as exc:
        _fail(exc)
    click.echo(
        f"ingested {report.details['collections']} collections, "
        f"{report.details['images']} images"
    )
    for warning in report.details["warnings"]:
        click.echo(f"warning: {warning}", err=True)


@main.command()
@scope_options
@global_options
@click.pass_obj
def tag(app: AppContext, years, season, brands, group, workspace_override, backend_override, fixtures_override, script_override):
    """Tag catwalk images via the model gateway (stale items only)."""
    app = _resolved(app, workspace_override, backend_override, fixtures_override, script_override)
    try:
        scope = _maybe_scope(app.config, years, season, brands, group)
        report = run_stage("tag", app.workspace, app.backend(), app.config, scope)
    except _PIPELINE_ERRORS as exc:
        _fail(exc)
    click.echo(
        f"tagged {report.details['tagged_images']} images across "
        f"{report.details['collections']} collections"
    )


@main.command()
@scope_options
@global_options
@click.pass_obj
def clean(app: AppContext, years, season, brands, group, workspace_override, backend_override, fixtures_override, script_override):
    """Unify tag formats and group synonyms (workspace-wide)."""
    app = _resolved(app, workspace_override, backend_override, fixtures_override, script_override)
    try:
        report = run_stage("clean", app.workspace, app.backend(), app.config)
    except _PIPELINE_ERRORS as exc:
        _fail(exc)
    stale = report.details.get("stale", True)
    click.echo(
        f"cleaned {report.details['scopes']} scopes"
        + ("" if stale else " (up to date, nothing recomputed)")
    )


@main.command()
@scope_options
@click.option("--csv", "csv_path", type=click.Path(path_type=Path))
@global_options
@click.pass_obj
def analyze(app: AppContext, years, season, brands, group, csv_path, workspace_override, backend_override, fixtures_override, script_override):
    """Build per-collection count indices and optionally export metrics CSV."""
    app = _resolved(app, workspace_override, backend_override, fixtures_override, script_override)
    try:
        scope = _maybe_scope(app.config, years, season, brands, group)
        report = run_stage("index", app.workspace, None, app.config, scope)
        if csv_path is not None:
            if scope is None:
                raise DomainError("--csv needs a full scope (--years/--season/--brands)")
            workspace = app.workspace
            catalog = workspace.load_catalog()
            keys = catalog.collections_for(scope)
            indices = load_indices(workspace, keys)
            by_year = {}
            for year in sorted({k.year for k in keys}):
                by_year[year] = multi_brand_aggregate(
                    [indices[k] for k in keys if k.year == year]
                )
            export_metrics_csv(csv_path, by_year, app.config)
            click.echo(f"metrics csv written to {csv_path}")
    except _PIPELINE_ERRORS as exc:
        _fail(exc)
    click.echo(
        f"indexed {report.details['collections']} collections "
        f"({report.details['rebuilt']} rebuilt)"
    )


@main.command()
@click.option("--years", required=True, help="Comma-separated years, e.g. 2022,2023")
@click.option("--season", required=True)
@click.option("--brands", required=True, help="Comma-separated brand names")
@click.option("--group", required=True, help="Category group name")
@click.option("--out", type=click.Path(path_type=Path), help="Report output directory")
@global_options
@click.pass_obj
def report(app: AppContext, years, season, brands, group, out, workspace_override, backend_override, fixtures_override, script_override):
    """Generate the multi-page report for a scope."""
    app = _resolved(app, workspace_override, backend_override, fixtures_override, script_override)
    try:
        scope = _parse_scope(years, season, brands, group)
        backend = app.backend()
        document = generate_report(scope, backend, app.workspace, app.config)
        out_dir = out or app.workspace.report_dir(scope)
        written = export_report(document, out_dir)
    except _PIPELINE_ERRORS as exc:
        _fail(exc)
    click.echo(f"report written to {out_dir} ({len(written)} files)")
    for warning in document.warnings:
        click.echo(f"warning: {warning}", err=True)


@main.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--catalog-root", type=click.Path(path_type=Path, exists=True))
@click.option("--ui-dir", type=click.Path(path_type=Path))
@global_options
@click.pass_obj
def serve(app: AppContext, port, host, catalog_root, ui_dir, workspace_override, backend_override, fixtures_override, script_override):
    """Run the HTTP service for the browser UI."""
    import uvicorn

    app = _resolved(app, workspace_override, backend_override, fixtures_override, script_override)
    api = create_app(
        app.workspace,
        backend_factory=app.backend,
        catalog_root=catalog_root,
        config=app.config,
        fixtures_dir=app.fixtures,
        ui_dir=ui_dir,
    )
    uvicorn.run(api, host=host, port=port)


if __name__ == "__main__":
    main()
