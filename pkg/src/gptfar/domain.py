"""Shared vocabulary: categories, aspects, seasons, collections, and groups.

The category set, aspect set, and group membership are data, not code: they
load from a versioned JSON config so the catalog can grow without touching
the library.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence


class DomainError(ValueError):
    """Invalid domain value (unknown category, aspect, season, or group)."""


class UnknownCategory(DomainError):
    pass


class UnknownAspect(DomainError):
    pass


class UnknownSeason(DomainError):
    pass


class UnknownGroup(DomainError):
    pass


@dataclass(frozen=True)
class CategoryGroup:
    """A report-level bundle of categories, e.g. "Dresses & Skirts"."""

    name: str
    members: tuple[str, ...]


@dataclass(frozen=True)
class CollectionKey:
    """One (year, season, brand) collection, the unit of analysis."""

    year: int
    season: str
    brand: str

    def slug(self) -> str:
        brand = re.sub(r"[^A-Za-z0-9]+", "-", self.brand).strip("-")
        return f"{self.year}-{self.season}-{brand}"


@dataclass(frozen=True)
class GarmentTagRecord:
    """One garment: its category plus raw tag lists per aspect."""

    category: str
    aspects: Mapping[str, tuple[str, ...]]
    source_image: str = ""

    def __post_init__(self) -> None:
        if not self.category:
            raise DomainError("garment record requires a category")
        for aspect, tags in self.aspects.items():
            if not tags:
                raise DomainError(f"aspect {aspect!r} present without tags")


@dataclass(frozen=True)
class ReportScope:
    """User selection driving one report: years, season, brands, group name."""

    years: tuple[int, ...]
    season: str
    brands: tuple[str, ...]
    group: str

    def __post_init__(self) -> None:
        if not self.years:
            raise DomainError("scope requires at least one year")
        if not self.brands:
            raise DomainError("scope requires at least one brand")
        if not self.season:
            raise DomainError("scope requires a season")
        if not self.group:
            raise DomainError("scope requires a category group")

    def collection_keys(self) -> list[CollectionKey]:
        return [
            CollectionKey(year, self.season, brand)
            for year in sorted(self.years)
            for brand in self.brands
        ]

    def scope_hash(self) -> str:
        payload = json.dumps(
            {
                "years": sorted(self.years),
                "season": self.season,
                "brands": sorted(self.brands),
                "group": self.group,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


class DomainConfig:
    """Validated domain vocabulary loaded from the versioned config file."""

    def __init__(
        self,
        categories: Sequence[str],
        aspects: Sequence[str],
        seasons: Sequence[str],
        category_groups: Mapping[str, Sequence[str]],
        version: int = 1,
    ) -> None:
        self.version = version
        self.categories: tuple[str, ...] = tuple(c.lower() for c in categories)
        self.aspects: tuple[str, ...] = tuple(a.lower() for a in aspects)
        self.seasons: tuple[str, ...] = tuple(seasons)
        self.groups: tuple[CategoryGroup, ...] = tuple(
            CategoryGroup(name, tuple(m.lower() for m in members))
            for name, members in category_groups.items()
        )
        self._check_partition()
        self._category_lookup = {c: c for c in self.categories}
        self._aspect_lookup = {a: a for a in self.aspects}
        self._season_lookup = {s.lower(): s for s in self.seasons}
        self._group_lookup = {g.name.lower(): g for g in self.groups}
        self._group_of = {m: g for g in self.groups for m in g.members}

    def _check_partition(self) -> None:
        seen: dict[str, str] = {}
        for group in self.groups:
            for member in group.members:
                if member not in self.categories:
                    raise DomainError(
                        f"group {group.name!r} names unknown category {member!r}"
                    )
                if member in seen:
                    raise DomainError(
                        f"category {member!r} appears in both {seen[member]!r} "
                        f"and {group.name!r}"
                    )
                seen[member] = group.name
        missing = set(self.categories) - set(seen)
        if missing:
            raise DomainError(f"categories not covered by any group: {sorted(missing)}")

    # -- canonicalizing lookups (case-insensitive in, canonical out) --------

    def category(self, name: str) -> str:
        key = name.strip().lower()
        if key not in self._category_lookup:
            raise UnknownCategory(f"unknown category {name!r}")
        return self._category_lookup[key]

    def aspect(self, name: str) -> str:
        key = name.strip().lower()
        if key not in self._aspect_lookup:
            raise UnknownAspect(f"unknown aspect {name!r}")
        return self._aspect_lookup[key]

    def season(self, name: str) -> str:
        key = name.strip().lower()
        if key not in self._season_lookup:
            raise UnknownSeason(f"unknown season {name!r}")
        return self._season_lookup[key]

    def group(self, name: str) -> CategoryGroup:
        key = name.strip().lower()
        if key not in self._group_lookup:
            valid = ", ".join(g.name for g in self.groups)
            raise UnknownGroup(f"unknown group {name!r}; valid groups: {valid}")
        return self._group_lookup[key]

    def category_group_of(self, category: str) -> CategoryGroup:
        return self._group_of[self.category(category)]

    def group_names(self) -> list[str]:
        return [g.name for g in self.groups]

    # -- construction --------------------------------------------------------

    @classmethod
    def from_dict(cls, data: Mapping) -> "DomainConfig":
        return cls(
            categories=data["categories"],
            aspects=data["aspects"],
            seasons=data["seasons"],
            category_groups=data["category_groups"],
            version=data.get("version", 1),
        )

    @classmethod
    def load(cls, path: str | Path) -> "DomainConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def default(cls) -> "DomainConfig":
        text = (
            resources.files("gptfar").joinpath("data/domain_config.json").read_text("utf-8")
        )
        return cls.from_dict(json.loads(text))


def validate_record(record: GarmentTagRecord, config: DomainConfig) -> None:
    """Check a record against the closed category and aspect sets."""
    config.category(record.category)
    for aspect in record.aspects:
        config.aspect(aspect)
