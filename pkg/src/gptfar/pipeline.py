"""Workspace layout, pipeline stages, and digest-based incremental recompute.

Stages: ingest -> tag -> clean -> index. Each stage records content digests
of its inputs; re-running with unchanged inputs performs no model calls and
rewrites nothing semantically. Tagging is item-granular: one new image means
exactly one new tagging call.

Workspace tree::

    workspace/
      catalog.json
      state.json
      tags/<year>-<season>-<brand>.jsonl
      dicts/<category>_<aspect>.json
      indices/<year>-<season>-<brand>.json
      reports/<scope-hash>/...
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from filelock import FileLock, Timeout

from .catalog import Catalog, ingest
from .charts import slugify
from .cleaning import (
    SynonymDictionary,
    build_corpus,
    iterate_grouping,
)
from .domain import CollectionKey, DomainConfig, GarmentTagRecord, ReportScope
from .gateway import Backend
from .tagging import (
    TaggedOutfit,
    TaggerPromptSpec,
    ParseWarning,
    build_tagging_prompt,
    tag_image,
)
from .analytics import CollectionIndex, build_index

STAGES = ("ingest", "tag", "clean", "index")


class WorkspaceLocked(Exception):
    """Another writer holds the workspace lock."""


class StageDependencyMissing(Exception):
    """A stage was requested before its prerequisite stage produced output."""


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class Workspace:
    """Paths, advisory single-writer lock, and the pipeline state document."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self._lock = FileLock(str(self.root / ".lock"))

    @contextmanager
    def lock(self, timeout: float = 10.0):
        self.root.mkdir(parents=True, exist_ok=True)
        try:
            with self._lock.acquire(timeout=timeout):
                yield self
        except Timeout as exc:
            raise WorkspaceLocked(f"workspace {self.root} is locked") from exc

    # -- paths ---------------------------------------------------------------

    @property
    def catalog_path(self) -> Path:
        return self.root / "catalog.json"

    @property
    def state_path(self) -> Path:
        return self.root / "state.json"

    def tags_path(self, key: CollectionKey) -> Path:
        return self.root / "tags" / f"{key.slug()}.jsonl"

    def dict_path(self, category: str, aspect: str) -> Path:
        return self.root / "dicts" / f"{slugify(category)}_{slugify(aspect)}.json"

    def index_path(self, key: CollectionKey) -> Path:
        return self.root / "indices" / f"{key.slug()}.json"

    def report_dir(self, scope: ReportScope) -> Path:
        return self.root / "reports" / f"report_{scope.scope_hash()}"

    # -- state ---------------------------------------------------------------

    def load_state(self) -> dict:
        if not self.state_path.exists():
            return {"collections": {}, "cleaned": {}}
        return json.loads(self.state_path.read_text("utf-8"))

    def save_state(self, state: dict) -> None:
        self.state_path.write_text(
            json.dumps(state, indent=2, sort_keys=True) + "\n", "utf-8"
        )

    def load_catalog(self) -> Catalog:
        if not self.catalog_path.exists():
            raise StageDependencyMissing(
                f"no catalog at {self.catalog_path}; run ingest first"
            )
        return Catalog.load(self.catalog_path)


# --------------------------------------------------------------------------
# tag persistence
# --------------------------------------------------------------------------


def _record_to_json(record: GarmentTagRecord) -> dict:
    return {
        "category": record.category,
        "aspects": {a: list(t) for a, t in sorted(record.aspects.items())},
    }


def _record_from_json(data: dict, image: str) -> GarmentTagRecord:
    return GarmentTagRecord(
        category=data["category"],
        aspects={a: tuple(t) for a, t in data["aspects"].items()},
        source_image=image,
    )


def _outfit_to_line(outfit: TaggedOutfit, task_digest: str) -> dict:
    return {
        "image": outfit.image,
        "digest": task_digest,
        "garments": [_record_to_json(g) for g in outfit.garments],
        "warnings": [
            {"kind": w.kind, "detail": w.detail, "block": w.block}
            for w in outfit.warnings
        ],
        "raw_digest": _sha256(outfit.raw_response.encode("utf-8")),
    }


def load_tagged(workspace: Workspace, key: CollectionKey) -> list[TaggedOutfit]:
    path = workspace.tags_path(key)
    if not path.exists():
        raise StageDependencyMissing(f"no tags for {key.slug()}; run the tag stage")
    outfits = []
    for line in path.read_text("utf-8").splitlines():
        if not line.strip():
            continue
        data = json.loads(line)
        outfits.append(
            TaggedOutfit(
                image=data["image"],
                garments=[_record_from_json(g, data["image"]) for g in data["garments"]],
                raw_response="",
                warnings=[
                    ParseWarning(w["kind"], w["detail"], w.get("block", -1))
                    for w in data.get("warnings", ())
                ],
            )
        )
    return outfits


def load_dictionaries(
    workspace: Workspace,
) -> dict[tuple[str, str], SynonymDictionary]:
    dicts_dir = workspace.root / "dicts"
    if not dicts_dir.exists():
        return {}
    out = {}
    for path in sorted(dicts_dir.glob("*.json")):
        dictionary = SynonymDictionary.load(path)
        out[(dictionary.category, dictionary.aspect)] = dictionary
    return out


def load_indices(
    workspace: Workspace, keys: list[CollectionKey]
) -> dict[CollectionKey, CollectionIndex]:
    out = {}
    for key in keys:
        path = workspace.index_path(key)
        if not path.exists():
            raise StageDependencyMissing(
                f"no index for {key.slug()}; run the index stage"
            )
        out[key] = CollectionIndex.load(path)
    return out


# --------------------------------------------------------------------------
# stages
# --------------------------------------------------------------------------


@dataclass
class StageReport:
    stage: str
    details: dict = field(default_factory=dict)


def stage_ingest(
    workspace: Workspace, catalog_root: str | Path, config: DomainConfig
) -> StageReport:
    with workspace.lock():
        catalog = ingest(catalog_root, config)
        workspace.catalog_path.parent.mkdir(parents=True, exist_ok=True)
        catalog.save(workspace.catalog_path)
    return StageReport(
        stage="ingest",
        details={
            "collections": len(catalog.entries),
            "images": catalog.image_count(),
            "warnings": catalog.warnings,
        },
    )


def _image_task_digest(image_path: Path, prompt: str, model_hint: str) -> str:
    try:
        content = image_path.read_bytes()
    except OSError as exc:
        raise StageDependencyMissing(f"unreadable catalog image {image_path}: {exc}")
    return _sha256(content + prompt.encode("utf-8") + model_hint.encode("utf-8"))


def stage_tag(
    workspace: Workspace,
    backend: Backend,
    config: DomainConfig,
    scope: ReportScope | None = None,
    *,
    model_hint: str = "tagger",
) -> StageReport:
    """Tag every image in scope whose (image bytes, prompt) digest is new."""
    with workspace.lock():
        catalog = workspace.load_catalog()
        keys = catalog.collections_for(scope) if scope else sorted(
            catalog.entries, key=lambda k: k.slug()
        )
        spec = TaggerPromptSpec.from_config(config)
        prompt = build_tagging_prompt(spec)
        state = workspace.load_state()
        calls = 0
        for key in keys:
            path = workspace.tags_path(key)
            existing: dict[str, dict] = {}
            if path.exists():
                for line in path.read_text("utf-8").splitlines():
                    if line.strip():
                        data = json.loads(line)
                        existing[data["image"]] = data
            lines = []
            for rel in catalog.entries[key]:
                digest = _image_task_digest(catalog.image_path(rel), prompt, model_hint)
                cached = existing.get(rel)
                if cached is not None and cached.get("digest") == digest:
                    lines.append(cached)
                    continue
                outfit = tag_image(
                    str(catalog.image_path(rel)),
                    spec,
                    backend,
                    config,
                    model_hint=model_hint,
                )
                outfit.image = rel
                lines.append(_outfit_to_line(outfit, digest))
                calls += 1
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(
                "".join(json.dumps(line, sort_keys=True) + "\n" for line in lines),
                "utf-8",
            )
            slot = state["collections"].setdefault(key.slug(), {})
            slot["tagged"] = _sha256(path.read_bytes())
        workspace.save_state(state)
    return StageReport(stage="tag", details={"collections": len(keys), "tagged_images": calls})


def _tags_input_digest(workspace: Workspace) -> str:
    tags_dir = workspace.root / "tags"
    parts = []
    for path in sorted(tags_dir.glob("*.jsonl")):
        parts.append(path.name)
        parts.append(_sha256(path.read_bytes()))
    return _sha256("\n".join(parts).encode("utf-8"))


def stage_clean(
    workspace: Workspace,
    backend: Backend,
    config: DomainConfig,
    *,
    max_iters: int = 5,
    model_hint: str = "grouping",
    workers: int = 4,
) -> StageReport:
    """Build the corpus over all tagged collections and group synonyms.

    Dictionaries are global to the workspace so canonical tags agree across
    every report scope. Distinct (category, aspect) scopes group in parallel;
    iterations within one scope stay strictly sequential.
    """
    with workspace.lock():
        tags_dir = workspace.root / "tags"
        if not tags_dir.exists() or not any(tags_dir.glob("*.jsonl")):
            raise StageDependencyMissing("no tagged collections; run the tag stage")
        state = workspace.load_state()
        input_digest = _tags_input_digest(workspace)
        cleaned = state.get("cleaned", {})
        files = cleaned.get("files", [])
        if cleaned.get("input_digest") == input_digest and all(
            (workspace.root / "dicts" / name).exists() for name in files
        ):
            return StageReport(
                stage="clean", details={"scopes": len(files), "model_calls": 0, "stale": False}
            )
        records: list[GarmentTagRecord] = []
        catalog = workspace.load_catalog()
        for key in sorted(catalog.entries, key=lambda k: k.slug()):
            if workspace.tags_path(key).exists():
                for outfit in load_tagged(workspace, key):
                    records.extend(outfit.garments)
        corpus_map = build_corpus(records)
        (workspace.root / "dicts").mkdir(parents=True, exist_ok=True)
        scope_keys = sorted(corpus_map)

        def group_one(scope_key):
            return iterate_grouping(
                corpus_map[scope_key], backend, max_iters, model_hint=model_hint
            )

        written = []
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            for scope_key, (dictionary, log) in zip(
                scope_keys, pool.map(group_one, scope_keys)
            ):
                path = workspace.dict_path(*scope_key)
                dictionary.save(path, log)
                written.append(path.name)
        state["cleaned"] = {"input_digest": input_digest, "files": written}
        workspace.save_state(state)
    return StageReport(
        stage="clean", details={"scopes": len(written), "stale": True}
    )


def stage_index(
    workspace: Workspace,
    config: DomainConfig,
    scope: ReportScope | None = None,
) -> StageReport:
    """Materialize per-collection count indices from tags + dictionaries."""
    with workspace.lock():
        catalog = workspace.load_catalog()
        state = workspace.load_state()
        cleaned = state.get("cleaned", {})
        if not cleaned.get("files") and not cleaned.get("input_digest"):
            raise StageDependencyMissing("dictionaries missing; run the clean stage")
        dictionaries = load_dictionaries(workspace)
        keys = catalog.collections_for(scope) if scope else sorted(
            catalog.entries, key=lambda k: k.slug()
        )
        built = 0
        for key in keys:
            tags_path = workspace.tags_path(key)
            if not tags_path.exists():
                raise StageDependencyMissing(
                    f"no tags for {key.slug()}; run the tag stage"
                )
            input_digest = _sha256(
                tags_path.read_bytes() + cleaned.get("input_digest", "").encode()
            )
            slot = state["collections"].setdefault(key.slug(), {})
            if slot.get("indexed") == input_digest and workspace.index_path(key).exists():
                continue
            outfits = load_tagged(workspace, key)
            index = build_index(outfits, dictionaries, key, config)
            workspace.index_path(key).parent.mkdir(parents=True, exist_ok=True)
            index.save(workspace.index_path(key))
            slot["indexed"] = input_digest
            built += 1
        workspace.save_state(state)
    return StageReport(stage="index", details={"collections": len(keys), "rebuilt": built})


def run_stage(
    stage: str,
    workspace: Workspace,
    backend: Backend,
    config: DomainConfig,
    scope: ReportScope | None = None,
    *,
    catalog_root: str | Path | None = None,
) -> StageReport:
    if stage == "ingest":
        if catalog_root is None:
            raise ValueError("ingest requires a catalog root")
        return stage_ingest(workspace, catalog_root, config)
    if stage == "tag":
        return stage_tag(workspace, backend, config, scope)
    if stage == "clean":
        return stage_clean(workspace, backend, config)
    if stage == "index":
        return stage_index(workspace, config, scope)
    raise ValueError(f"unknown stage {stage!r}; valid stages: {', '.join(STAGES)}")


def ensure_report_inputs(
    workspace: Workspace,
    backend: Backend,
    config: DomainConfig,
    scope: ReportScope,
) -> None:
    """Run only the stale parts of tag, clean, and index.

    Tagging and indexing cover the whole catalog, not just ``scope``:
    synonym dictionaries are workspace-global, so their corpus must not
    depend on which report scope happened to run first.
    """
    del scope  # reports need the full corpus; see docstring
    stage_tag(workspace, backend, config, None)
    stage_clean(workspace, backend, config)
    stage_index(workspace, config, None)
