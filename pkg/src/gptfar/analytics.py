"""Collection-level statistics: count indices, Mix, YoY, and trend series.

All arithmetic is exact rational (``fractions.Fraction``); rounding happens
only at presentation via the ``display_*`` properties, which are the single
source of truth for every number printed in a chart or report.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .cleaning import SynonymDictionary, canonicalize
from .domain import CollectionKey, DomainConfig
from .tagging import TaggedOutfit

YOY_STATUSES = ("defined", "new_entry", "dropped", "undefined")

Subject = tuple  # ("category", c) or ("attribute", c, aspect, value)


class AnalyticsError(Exception):
    pass


class EmptyDenominator(AnalyticsError):
    """Mix requested over a scope with zero total."""


class ScopeMismatch(AnalyticsError):
    """YoY requested across two different subjects."""


class MixedSeason(AnalyticsError):
    """Aggregation requested across different seasons or years."""


@dataclass(frozen=True)
class MixValue:
    """A subject's share of its scope, held exact as numerator/denominator."""

    numerator: int
    denominator: int
    subject: Subject | None = None

    def __post_init__(self) -> None:
        if self.denominator <= 0:
            raise EmptyDenominator("mix denominator must be positive")

    @property
    def fraction(self) -> Fraction:
        """Percentage as an exact rational, e.g. Fraction(60) for 60%."""
        return Fraction(100 * self.numerator, self.denominator)

    @property
    def display_percent(self) -> float:
        return round(float(self.fraction), 1)


@dataclass(frozen=True)
class YoYValue:
    status: str
    ratio: Fraction | None = None
    subject: Subject | None = None

    def __post_init__(self) -> None:
        if self.status not in YOY_STATUSES:
            raise ValueError(f"unknown YoY status {self.status!r}")
        needs_ratio = self.status in ("defined", "dropped")
        if needs_ratio != (self.ratio is not None):
            raise ValueError("ratio present iff status is defined or dropped")

    @property
    def display_percent(self) -> float | None:
        if self.ratio is None:
            return None
        return round(float(self.ratio) * 100, 1)


@dataclass(frozen=True)
class TrendSeries:
    subject: Subject
    metric: str  # "mix" | "yoy"
    points: tuple[tuple[int, "MixValue | YoYValue"], ...]

    def __post_init__(self) -> None:
        years = [y for y, _ in self.points]
        if years != sorted(set(years)):
            raise ValueError("trend points must be strictly increasing in year")

    def to_json_dict(self) -> dict:
        points = []
        for year, value in self.points:
            if isinstance(value, MixValue):
                points.append({"year": year, "mix_percent": value.display_percent})
            else:
                points.append(
                    {
                        "year": year,
                        "yoy_percent": value.display_percent,
                        "status": value.status,
                    }
                )
        return {
            "subject": list(self.subject),
            "metric": self.metric,
            "points": points,
        }


@dataclass
class CollectionIndex:
    """Per-collection counts: garments per category, mentions per attribute value."""

    key: CollectionKey
    category_counts: dict[str, int] = field(default_factory=dict)
    attribute_counts: dict[tuple[str, str, str], int] = field(default_factory=dict)
    garment_total: int = 0

    def aspect_total(self, category: str, aspect: str) -> int:
        return sum(
            n
            for (c, a, _), n in self.attribute_counts.items()
            if c == category and a == aspect
        )

    def attribute_values(self, category: str, aspect: str) -> dict[str, int]:
        return {
            v: n
            for (c, a, v), n in self.attribute_counts.items()
            if c == category and a == aspect
        }

    def aspects_with_data(self, category: str) -> list[str]:
        return sorted({a for (c, a, _) in self.attribute_counts if c == category})

    def to_json_dict(self) -> dict:
        nested: dict[str, dict[str, dict[str, int]]] = {}
        for (c, a, v), n in sorted(self.attribute_counts.items()):
            nested.setdefault(c, {}).setdefault(a, {})[v] = n
        return {
            "key": {
                "year": self.key.year,
                "season": self.key.season,
                "brand": self.key.brand,
            },
            "category_counts": dict(sorted(self.category_counts.items())),
            "attribute_counts": nested,
            "garment_total": self.garment_total,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "CollectionIndex":
        attribute_counts = {
            (c, a, v): n
            for c, aspects in data["attribute_counts"].items()
            for a, values in aspects.items()
            for v, n in values.items()
        }
        return cls(
            key=CollectionKey(**data["key"]),
            category_counts=dict(data["category_counts"]),
            attribute_counts=attribute_counts,
            garment_total=data["garment_total"],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n", "utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "CollectionIndex":
        return cls.from_json_dict(json.loads(Path(path).read_text("utf-8")))


def build_index(
    tagged: Iterable[TaggedOutfit],
    dictionaries: Mapping[tuple[str, str], SynonymDictionary],
    key: CollectionKey,
    config: DomainConfig | None = None,
) -> CollectionIndex:
    """Count garments per category and canonical tag mentions per attribute.

    Synonyms within one garment collapse to a single increment: a dress
    tagged both "draped" and "draping" votes once for draped.
    """
    config = config or DomainConfig.default()
    index = CollectionIndex(key=key)
    for outfit in tagged:
        for garment in outfit.garments:
            category = garment.category
            if category not in config.categories:
                continue  # parser warnings already cover out-of-set categories
            index.category_counts[category] = index.category_counts.get(category, 0) + 1
            index.garment_total += 1
            for aspect, tags in garment.aspects.items():
                dictionary = dictionaries.get((category, aspect))
                canonicals = set()
                for tag in tags:
                    if dictionary is None:
                        canonicals.add(tag)
                    else:
                        canonicals.add(canonicalize(tag, dictionary))
                for canonical in canonicals:
                    slot = (category, aspect, canonical)
                    index.attribute_counts[slot] = index.attribute_counts.get(slot, 0) + 1
    return index


def mix_category(index: CollectionIndex, category: str) -> MixValue:
    """Category share of the whole collection (percentage)."""
    if index.garment_total == 0:
        raise EmptyDenominator(f"collection {index.key.slug()} has no garments")
    return MixValue(
        numerator=index.category_counts.get(category, 0),
        denominator=index.garment_total,
        subject=("category", category),
    )


def mix_attribute(
    index: CollectionIndex, category: str, aspect: str, value: str
) -> MixValue:
    """Attribute-value share of all mentions within (category, aspect)."""
    denominator = index.aspect_total(category, aspect)
    if denominator == 0:
        raise EmptyDenominator(
            f"no {aspect!r} mentions for {category!r} in {index.key.slug()}"
        )
    return MixValue(
        numerator=index.attribute_counts.get((category, aspect, value), 0),
        denominator=denominator,
        subject=("attribute", category, aspect, value),
    )


def yoy(current: MixValue, previous: MixValue | None) -> YoYValue:
    """Relative change of a Mix against the prior year's same subject.

    Zero denominators become explicit statuses instead of sentinel floats:
    new_entry (nothing last year), dropped (gone this year, ratio -1),
    undefined (absent both years).
    """
    if (
        previous is not None
        and current.subject is not None
        and previous.subject is not None
        and current.subject != previous.subject
    ):
        raise ScopeMismatch(
            f"YoY across subjects {current.subject!r} vs {previous.subject!r}"
        )
    subject = current.subject
    cur = current.fraction
    prev = previous.fraction if previous is not None else Fraction(0)
    if prev == 0 and cur == 0:
        return YoYValue(status="undefined", subject=subject)
    if prev == 0:
        return YoYValue(status="new_entry", subject=subject)
    if cur == 0:
        return YoYValue(status="dropped", ratio=Fraction(-1), subject=subject)
    return YoYValue(status="defined", ratio=(cur - prev) / prev, subject=subject)


def _subject_mix(index: CollectionIndex, subject: Subject) -> MixValue:
    if subject[0] == "category":
        return mix_category(index, subject[1])
    if subject[0] == "attribute":
        return mix_attribute(index, subject[1], subject[2], subject[3])
    raise ValueError(f"unknown subject kind {subject[0]!r}")


def trend(
    indices: Mapping[int, CollectionIndex], subject: Subject, metric: str
) -> TrendSeries:
    """Multi-year series of Mix points, or YoY points for consecutive pairs."""
    if not indices:
        raise ValueError("trend requires at least one year")
    if metric not in ("mix", "yoy"):
        raise ValueError(f"unknown metric {metric!r}")
    years = sorted(indices)
    points: list[tuple[int, MixValue | YoYValue]] = []
    if metric == "mix":
        for year in years:
            try:
                points.append((year, _subject_mix(indices[year], subject)))
            except EmptyDenominator:
                continue  # gap year
    else:
        for year in years:
            if year - 1 not in indices:
                continue
            try:
                current = _subject_mix(indices[year], subject)
                previous = _subject_mix(indices[year - 1], subject)
            except EmptyDenominator:
                continue
            points.append((year, yoy(current, previous)))
    return TrendSeries(subject=subject, metric=metric, points=tuple(points))


def multi_brand_aggregate(indices: Sequence[CollectionIndex]) -> CollectionIndex:
    """Pool counts across brands of one (year, season).

    Pooling is count-weighted: the aggregate Mix equals the Mix computed from
    the union of raw records, not the mean of per-brand Mix values.
    """
    if not indices:
        raise ValueError("nothing to aggregate")
    if len(indices) == 1:
        return indices[0]
    first = indices[0].key
    for index in indices[1:]:
        if index.key.year != first.year or index.key.season != first.season:
            raise MixedSeason(
                f"cannot aggregate {index.key.slug()} with {first.slug()}"
            )
    brand = "aggregate(" + ",".join(i.key.brand for i in indices) + ")"
    combined = CollectionIndex(
        key=CollectionKey(year=first.year, season=first.season, brand=brand)
    )
    for index in indices:
        combined.garment_total += index.garment_total
        for category, count in index.category_counts.items():
            combined.category_counts[category] = (
                combined.category_counts.get(category, 0) + count
            )
        for slot, count in index.attribute_counts.items():
            combined.attribute_counts[slot] = (
                combined.attribute_counts.get(slot, 0) + count
            )
    return combined


def export_metrics_csv(
    path: str | Path,
    indices_by_year: Mapping[int, CollectionIndex],
    config: DomainConfig | None = None,
) -> None:
    """Tabular (subject, year, mix, yoy, status) dump for external inspection."""
    config = config or DomainConfig.default()
    years = sorted(indices_by_year)
    subjects: list[Subject] = [("category", c) for c in config.categories]
    seen: set[Subject] = set()
    for index in indices_by_year.values():
        for (c, a, v) in index.attribute_counts:
            subject = ("attribute", c, a, v)
            if subject not in seen:
                seen.add(subject)
                subjects.append(subject)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject", "year", "mix_percent", "yoy_percent", "yoy_status"])
        for subject in subjects:
            for year in years:
                try:
                    current = _subject_mix(indices_by_year[year], subject)
                except EmptyDenominator:
                    continue
                yoy_percent = ""
                yoy_status = ""
                if year - 1 in indices_by_year:
                    try:
                        previous = _subject_mix(indices_by_year[year - 1], subject)
                        change = yoy(current, previous)
                        yoy_status = change.status
                        if change.display_percent is not None:
                            yoy_percent = f"{change.display_percent}"
                    except EmptyDenominator:
                        pass
                writer.writerow(
                    [
                        "/".join(str(s) for s in subject),
                        year,
                        f"{current.display_percent}",
                        yoy_percent,
                        yoy_status,
                    ]
                )
