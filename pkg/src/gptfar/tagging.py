"""Garment tagger: prompt construction, response parsing, image tagging.

The tagger output grammar is one ``{...}`` block per garment; inside a block,
semicolon-separated ``Key: v1, v2`` fields, where ``Category`` names the
garment and every other key is an aspect. Vision models do not reliably obey
the format, so parsing is lenient: case variance, trailing commas, a lone
record without braces, and unknown keys all degrade to structured warnings
instead of rejections.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .domain import DomainConfig, GarmentTagRecord, UnknownAspect, UnknownCategory
from .gateway import Backend, ModelRequest, RefusalError
from .textnorm import EmptyAfterNormalization, unify_format

PROMPT_TEMPLATE = (
    "Can you tag the outfit in the image at garment level, which including two "
    "main steps. 1. recognize garments in the image and label them with "
    "categories from the category set of {categories} and 2. for each garment, "
    "tag it from the the following aspects: {aspects}. You have to list as MANY "
    "tags as possible suitable for each aspect, not only one. Report the "
    "tagging results for each garment with a single line pattern, following "
    "the corresponding category. Do not output anything other than the "
    "category and tags for the mentioned aspects. Here is an example for your "
    "tagging, <image: {exemplar}>."
)

DEFAULT_EXEMPLAR = (
    "{Category: Top; Style: Layered, Modern; Silhouette: Relaxed}, "
    "{Category: Skirts; Style: Casual, Street}"
)

CORRECTIVE_SUFFIX = "\n\nOutput ONLY the pattern shown in the example."

SEMANTIC_RETRIES = 2

_BLOCK_RE = re.compile(r"\{([^{}]*)\}")
_WS_RE = re.compile(r"\s+")


class ParseError(Exception):
    def __init__(self, position: int, reason: str) -> None:
        super().__init__(f"at {position}: {reason}")
        self.position = position
        self.reason = reason


class TaggingFailed(Exception):
    """The model never produced parseable output within the retry budget."""


@dataclass(frozen=True)
class ParseWarning:
    kind: str
    detail: str
    block: int = -1


@dataclass
class ParsedTagging:
    records: list[GarmentTagRecord]
    warnings: list[ParseWarning]


@dataclass(frozen=True)
class TaggerPromptSpec:
    category_list: tuple[str, ...]
    aspect_list: tuple[str, ...]
    exemplar: str = DEFAULT_EXEMPLAR

    def __post_init__(self) -> None:
        if not self.category_list or not self.aspect_list:
            raise ValueError("category_list and aspect_list must be non-empty")

    @classmethod
    def from_config(cls, config: DomainConfig) -> "TaggerPromptSpec":
        return cls(category_list=config.categories, aspect_list=config.aspects)


@dataclass
class TaggedOutfit:
    image: str
    garments: list[GarmentTagRecord]
    raw_response: str
    warnings: list[ParseWarning] = field(default_factory=list)


def display_form(text: str) -> str:
    """Title-style display of a lowercase tag or category ("and" stays lower)."""
    words = text.split()
    out = []
    for i, word in enumerate(words):
        if word == "and" and i > 0:
            out.append(word)
        else:
            out.append(word[:1].upper() + word[1:])
    return " ".join(out)


def build_tagging_prompt(spec: TaggerPromptSpec) -> str:
    return PROMPT_TEMPLATE.format(
        categories=", ".join(spec.category_list),
        aspects=", ".join(spec.aspect_list),
        exemplar=spec.exemplar,
    )


def _clean_value(value: str) -> str:
    return _WS_RE.sub(" ", value).strip().lower()


def _category_resolver(config: DomainConfig):
    # Plural-insensitive fallback: "Skirt" should land on "skirts".
    unified = {}
    for cat in config.categories:
        try:
            unified[unify_format(cat)] = cat
        except EmptyAfterNormalization:  # pragma: no cover - config is sane
            pass

    def resolve(text: str) -> str | None:
        try:
            return config.category(text)
        except UnknownCategory:
            pass
        try:
            return unified.get(unify_format(text))
        except EmptyAfterNormalization:
            return None

    return resolve


def parse_tagger_output(raw: str, config: DomainConfig | None = None) -> ParsedTagging:
    """Parse tagger output into records plus structured warnings.

    Raises ParseError when no garment block is present at all or a block has
    no Category field; anything else salvageable becomes a warning.
    """
    if not raw:
        raise ParseError(0, "no garment block found (empty input)")
    config = config or DomainConfig.default()
    resolve_category = _category_resolver(config)

    blocks = [(m.start(), m.group(1)) for m in _BLOCK_RE.finditer(raw)]
    if not blocks:
        if ":" in raw and "category" in raw.lower():
            blocks = [(0, raw)]
        else:
            raise ParseError(0, "no garment block found")

    records: list[GarmentTagRecord] = []
    warnings: list[ParseWarning] = []
    for block_index, (position, body) in enumerate(blocks):
        category: str | None = None
        category_seen = False
        aspects: dict[str, list[str]] = {}
        for chunk in body.split(";"):
            if not chunk.strip():
                continue
            key_part, sep, value_part = chunk.partition(":")
            if not sep:
                warnings.append(
                    ParseWarning("malformed_field", chunk.strip(), block_index)
                )
                continue
            key = key_part.strip().lower()
            values = [v for v in (_clean_value(v) for v in value_part.split(",")) if v]
            if key == "category":
                category_seen = True
                if not values:
                    continue
                if len(values) > 1:
                    warnings.append(
                        ParseWarning(
                            "extra_category_values", ", ".join(values[1:]), block_index
                        )
                    )
                category = resolve_category(values[0])
                if category is None:
                    warnings.append(
                        ParseWarning("unknown_category", values[0], block_index)
                    )
                continue
            try:
                aspect = config.aspect(key)
            except UnknownAspect:
                warnings.append(ParseWarning("unknown_aspect", key, block_index))
                continue
            if not values:
                continue
            existing = aspects.setdefault(aspect, [])
            for value in values:
                if value not in existing:
                    existing.append(value)
        if not category_seen:
            raise ParseError(position, "garment block without a Category field")
        if category is None:
            # Category present but out of the closed set: warn, drop the record.
            continue
        records.append(
            GarmentTagRecord(
                category=category,
                aspects={k: tuple(v) for k, v in aspects.items()},
            )
        )
    return ParsedTagging(records=records, warnings=warnings)


def serialize_record(
    records: list[GarmentTagRecord], config: DomainConfig | None = None
) -> str:
    """Emit the single-line pattern; parse(serialize(x)) is identity on valid
    records up to canonical aspect ordering."""
    config = config or DomainConfig.default()
    blocks = []
    for record in records:
        fields = [f"Category: {display_form(record.category)}"]
        ordered = [a for a in config.aspects if a in record.aspects]
        ordered += sorted(set(record.aspects) - set(config.aspects))
        for aspect in ordered:
            tags = ", ".join(display_form(t) for t in record.aspects[aspect])
            fields.append(f"{display_form(aspect)}: {tags}")
        blocks.append("{" + "; ".join(fields) + "}")
    return ", ".join(blocks)


def tag_image(
    image: str,
    spec: TaggerPromptSpec,
    backend: Backend,
    config: DomainConfig | None = None,
    *,
    retries: int = SEMANTIC_RETRIES,
    model_hint: str = "tagger",
) -> TaggedOutfit:
    """Tag one catwalk image, re-prompting up to ``retries`` times on
    unparsable output. Refusals propagate immediately."""
    config = config or DomainConfig.default()
    prompt = build_tagging_prompt(spec)
    last_reason = "no attempt made"
    for attempt in range(retries + 1):
        text = prompt if attempt == 0 else prompt + CORRECTIVE_SUFFIX
        request = ModelRequest(
            role_instructions="",
            user_text=text,
            image_refs=(str(image),),
            model_hint=model_hint,
        )
        response = backend.complete(request)
        if response.refused:
            raise RefusalError(f"model refused to tag {image}")
        try:
            parsed = parse_tagger_output(response.text, config)
        except ParseError as exc:
            last_reason = str(exc)
            continue
        warnings = list(parsed.warnings)
        allowed = set(spec.category_list)
        garments = []
        for record in parsed.records:
            if record.category not in allowed:
                warnings.append(
                    ParseWarning("category_outside_prompt", record.category)
                )
                continue
            garments.append(record)
        if not garments:
            warnings.append(ParseWarning("no_garments", f"image {image}"))
        return TaggedOutfit(
            image=str(image),
            garments=garments,
            raw_response=response.text,
            warnings=warnings,
        )
    raise TaggingFailed(
        f"unparsable tagger output for {image} after {retries + 1} attempts: {last_reason}"
    )
