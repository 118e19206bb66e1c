"""Catwalk image catalog: ingestion, validation, and scope resolution.

Expected layout: ``root/<year>/<season>/<brand>/<image files>``. Everything
else is either a LayoutError (unknown season, non-year directory) or a
warning (empty brand directory, stray files).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .domain import CollectionKey, DomainConfig, ReportScope, UnknownSeason

IMAGE_EXTENSIONS = {".jpg", ".jpeg", ".png", ".webp"}


class LayoutError(Exception):
    def __init__(self, path: Path, reason: str) -> None:
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class ScopeError(Exception):
    """The requested scope names collections the catalog does not have."""


@dataclass
class Catalog:
    root: Path
    entries: dict[CollectionKey, tuple[str, ...]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def years(self) -> list[int]:
        return sorted({k.year for k in self.entries})

    @property
    def seasons(self) -> list[str]:
        return sorted({k.season for k in self.entries})

    @property
    def brands(self) -> list[str]:
        return sorted({k.brand for k in self.entries})

    def image_count(self) -> int:
        return sum(len(paths) for paths in self.entries.values())

    def image_path(self, relative: str) -> Path:
        return self.root / relative

    def collections_for(self, scope: ReportScope) -> list[CollectionKey]:
        return [key for key in scope.collection_keys() if key in self.entries]

    def validate_scope(self, scope: ReportScope, config: DomainConfig) -> None:
        """Reject scopes naming absent brands/years/seasons or unknown groups
        before any model call happens."""
        config.group(scope.group)  # raises UnknownGroup
        try:
            season = config.season(scope.season)
        except UnknownSeason as exc:
            raise ScopeError(str(exc)) from exc
        if season not in self.seasons:
            raise ScopeError(f"season {season!r} not present in catalog")
        for brand in scope.brands:
            if brand not in self.brands:
                raise ScopeError(
                    f"brand {brand!r} not in catalog (have: {', '.join(self.brands)})"
                )
        for year in scope.years:
            if year not in self.years:
                raise ScopeError(f"year {year} not in catalog (have: {self.years})")
        if not self.collections_for(scope):
            raise ScopeError("scope matches no collections")

    def to_json_dict(self) -> dict:
        return {
            "root": str(self.root),
            "entries": {
                key.slug(): {
                    "year": key.year,
                    "season": key.season,
                    "brand": key.brand,
                    "images": list(paths),
                }
                for key, paths in sorted(
                    self.entries.items(), key=lambda kv: kv[0].slug()
                )
            },
            "warnings": self.warnings,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Catalog":
        entries = {}
        for entry in data["entries"].values():
            key = CollectionKey(
                year=entry["year"], season=entry["season"], brand=entry["brand"]
            )
            entries[key] = tuple(entry["images"])
        return cls(
            root=Path(data["root"]),
            entries=entries,
            warnings=list(data.get("warnings", ())),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n", "utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "Catalog":
        return cls.from_json_dict(json.loads(Path(path).read_text("utf-8")))


def ingest(root: str | Path, config: DomainConfig | None = None) -> Catalog:
    """Build a catalog from the directory tree, validating the layout."""
    config = config or DomainConfig.default()
    root = Path(root)
    if not root.exists():
        raise LayoutError(root, "catalog root does not exist")
    catalog = Catalog(root=root)
    if not any(root.iterdir()):
        catalog.warnings.append(f"catalog root {root} is empty")
        return catalog

    for year_dir in sorted(root.iterdir()):
        if not year_dir.is_dir():
            catalog.warnings.append(f"ignoring stray file {year_dir.name}")
            continue
        try:
            year = int(year_dir.name)
        except ValueError:
            raise LayoutError(year_dir, "expected a year directory")
        for season_dir in sorted(year_dir.iterdir()):
            if not season_dir.is_dir():
                catalog.warnings.append(f"ignoring stray file {season_dir}")
                continue
            try:
                season = config.season(season_dir.name)
            except UnknownSeason:
                raise LayoutError(season_dir, f"unknown season {season_dir.name!r}")
            for brand_dir in sorted(season_dir.iterdir()):
                if not brand_dir.is_dir():
                    catalog.warnings.append(f"ignoring stray file {brand_dir}")
                    continue
                images = sorted(
                    str(p.relative_to(root))
                    for p in brand_dir.iterdir()
                    if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
                )
                if not images:
                    catalog.warnings.append(f"empty brand directory {brand_dir}")
                    continue
                key = CollectionKey(year=year, season=season, brand=brand_dir.name)
                catalog.entries[key] = tuple(images)
    return catalog
