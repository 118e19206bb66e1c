"""Shared test support: a deterministic fake vision model and a tiny PNG
catalog builder. The replay fixture corpus under fixtures/ is recorded from
these same functions, so tests and fixtures stay in sync.
"""

from __future__ import annotations

import hashlib
import random
import struct
import zlib
from pathlib import Path

from gptfar.gateway import ModelRequest

TOY_YEARS = (2022, 2023)
TOY_BRANDS = ("Chanel", "Valentino")
TOY_IMAGES_PER_COLLECTION = 3

# Variants the fake model groups together (keys/values are unified forms).
SYNONYM_VARIANTS = {
    "draped": ("draped", "draping"),
    "ruffle": ("ruffle", "ruffled"),
    "floral": ("floral", "flowery"),
}


# ---------------------------------------------------------------------------
# toy catalog
# ---------------------------------------------------------------------------


def write_png(path: Path, rgb: bytes, size: tuple[int, int] = (8, 8)) -> None:
    """Minimal deterministic PNG writer (single solid color)."""
    width, height = size
    raw = b"".join(b"\x00" + bytes(rgb) * width for _ in range(height))

    def chunk(tag: bytes, data: bytes) -> bytes:
        return (
            struct.pack(">I", len(data))
            + tag
            + data
            + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)
        )

    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    png = (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", ihdr)
        + chunk(b"IDAT", zlib.compress(raw, 9))
        + chunk(b"IEND", b"")
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(png)


def build_toy_catalog(
    root: Path,
    years=TOY_YEARS,
    brands=TOY_BRANDS,
    images_per_collection: int = TOY_IMAGES_PER_COLLECTION,
) -> int:
    """Write the toy catalog tree; image bytes derive from (year, brand, n)."""
    count = 0
    for year in years:
        for brand in brands:
            for n in range(1, images_per_collection + 1):
                rgb = hashlib.sha256(f"{year}-{brand}-{n}".encode()).digest()[:3]
                write_png(root / str(year) / "SS" / brand / f"look_{n}.png", rgb)
                count += 1
    return count


# ---------------------------------------------------------------------------
# fake model
# ---------------------------------------------------------------------------

_STYLES = ("Romantic", "Modern", "Minimalist", "Bohemian", "Casual")
_SILHOUETTES = ("Fit-and-flare", "A-line", "Relaxed", "Column")
_FABRICS = ("Silk", "Cotton", "Tweed", "Satin")
_DETAILS = ("Draped", "Draping", "Ruffle", "Ruffled", "Ruffles", "Pocket", "Floral", "Flowery")
_TOP_CATEGORIES = ("Top", "Sweater", "Blouses and Woven Tops")
_TOP_FABRICS = ("Cotton", "Knit", "Silk")

_OVERALL_OPENERS = (
    "Dresses set the pace this season, expanding their share of the group while "
    "skirts consolidate around fuller shapes.",
    "The group tilts decisively toward fluid volume this season, with relaxed "
    "silhouettes displacing sharper tailoring.",
)
_OVERALL_MIDDLES = (
    "Fabric tells the softness story: silk and satin climb together, and draped "
    "detailing spreads across nearly every look on the runway.",
    "Detail work does the heavy lifting, as ruffles and draped panels reappear "
    "house after house while hardware stays minimal.",
)
_OVERALL_CLOSERS = (
    "Expect the momentum to hold: the year-on-year movers all point toward ease, "
    "romance, and unlined construction for the seasons ahead.",
    "The trend list favors continuity over rupture, so buyers can back the "
    "leaders in this mix with confidence.",
)


def _fake_tagging(request: ModelRequest) -> str:
    image_bytes = Path(request.image_refs[0]).read_bytes()
    rng = random.Random(hashlib.sha256(image_bytes).hexdigest())
    first_category = rng.choice(("Dresses", "Skirts"))
    style = ", ".join(rng.sample(_STYLES, k=2))
    silhouette = rng.choice(_SILHOUETTES)
    details = ", ".join(rng.sample(_DETAILS, k=2))
    fabric = ", ".join(rng.sample(_FABRICS, k=2))
    blocks = [
        "{Category: %s; Style: %s; Silhouette: %s; Detail: %s; Fabric: %s}"
        % (first_category, style, silhouette, details, fabric)
    ]
    if rng.random() < 0.7:
        blocks.append(
            "{Category: %s; Style: %s; Fabric: %s}"
            % (rng.choice(_TOP_CATEGORIES), rng.choice(_STYLES), rng.choice(_TOP_FABRICS))
        )
    return ", ".join(blocks)


def _extract_corpus(prompt: str) -> list[str]:
    _, _, rest = prompt.partition("as follows ")
    for terminator in (". Candidate", ". Make sure"):
        cut = rest.find(terminator)
        if cut != -1:
            rest = rest[:cut]
            break
    return [t.strip() for t in rest.split(",") if t.strip()]


def _fake_grouping(prompt: str) -> str:
    tags = _extract_corpus(prompt)
    variant_of = {v: canon for canon, vs in SYNONYM_VARIANTS.items() for v in vs}
    groups: dict[str, set[str]] = {}
    for tag in tags:
        groups.setdefault(variant_of.get(tag, tag), set()).add(tag)
    # repr() gives the single-quoted dict literal shape the parser expects
    return repr({k: sorted(v) for k, v in sorted(groups.items())})


def _fake_overall_text(prompt: str) -> str:
    rng = random.Random(hashlib.sha256(prompt.encode()).hexdigest())
    return "\n\n".join(
        (
            rng.choice(_OVERALL_OPENERS),
            rng.choice(_OVERALL_MIDDLES),
            rng.choice(_OVERALL_CLOSERS),
        )
    )


def _fake_category_text(prompt: str) -> str:
    _, _, rest = prompt.partition("specifically for the category ")
    name = rest.split(".", 1)[0].strip() or "The category"
    return (
        f"{name} lean into softer construction this season. "
        "Draped details and fluid fabrics lead the mix."
    )


def fake_model(request: ModelRequest) -> str:
    """Deterministic responder covering every pipeline prompt family."""
    text = request.user_text
    if text.startswith("Can you tag the outfit"):
        return _fake_tagging(request)
    if text.startswith("You are an assistant to help group"):
        return _fake_grouping(text)
    if "very short and neat piece" in text:
        return _fake_category_text(text)
    if text.startswith("You are given several charts"):
        return _fake_overall_text(text)
    raise AssertionError(f"fake model got an unexpected prompt: {text[:80]!r}")


# ---------------------------------------------------------------------------
# random record generation for round-trip properties
# ---------------------------------------------------------------------------

SAFE_TAG_ALPHABET = "abcdefghijklmnopqrstuvwxyz-"


def random_record(rng: random.Random, config):
    """A valid garment record with grammar-safe lowercase tags."""
    from gptfar.domain import GarmentTagRecord

    category = rng.choice(config.categories)
    aspects = {}
    for aspect in rng.sample(config.aspects, k=rng.randint(1, 4)):
        tags = []
        for _ in range(rng.randint(1, 3)):
            tag = "".join(
                rng.choice(SAFE_TAG_ALPHABET) for _ in range(rng.randint(2, 10))
            )
            tag = tag.strip("-") or "plain"
            if tag not in tags:
                tags.append(tag)
        aspects[aspect] = tuple(tags)
    return GarmentTagRecord(category=category, aspects=aspects)
