import pytest

from gptfar.domain import ReportScope
from gptfar.gateway import ScriptedBackend
from gptfar.pipeline import (
    StageDependencyMissing,
    Workspace,
    load_dictionaries,
    load_tagged,
    run_stage,
    stage_clean,
    stage_index,
    stage_tag,
)
from gptfar.domain import CollectionKey

from support import build_toy_catalog, fake_model, write_png


@pytest.fixture
def env(tmp_path, config):
    """Ingested toy catalog + empty workspace + counting fake backend."""
    root = tmp_path / "catalog"
    build_toy_catalog(root)
    workspace = Workspace(tmp_path / "ws")
    run_stage("ingest", workspace, None, config, catalog_root=root)
    return workspace, root, ScriptedBackend(fake_model)


class TestTagStage:
    def test_tags_every_image_once(self, env, config):
        workspace, _, backend = env
        report = stage_tag(workspace, backend, config)
        assert report.details["tagged_images"] == 12
        assert len(backend.calls) == 12

    def test_rerun_is_idempotent_zero_calls(self, env, config):
        workspace, _, backend = env
        stage_tag(workspace, backend, config)
        first_calls = len(backend.calls)
        report = stage_tag(workspace, backend, config)
        assert report.details["tagged_images"] == 0
        assert len(backend.calls) == first_calls

    def test_one_new_image_one_call(self, env, config):
        workspace, root, backend = env
        stage_tag(workspace, backend, config)
        before = len(backend.calls)
        write_png(root / "2023" / "SS" / "Chanel" / "look_9.png", b"\x09\x09\x09")
        run_stage("ingest", workspace, None, config, catalog_root=root)
        stage_tag(workspace, backend, config)
        assert len(backend.calls) == before + 1

    def test_scoped_tagging_only_touches_scope(self, env, config):
        workspace, _, backend = env
        scope = ReportScope(
            years=(2022,), season="SS", brands=("Chanel",), group="Dresses & Skirts"
        )
        report = stage_tag(workspace, backend, config, scope)
        assert report.details["collections"] == 1
        assert len(backend.calls) == 3

    def test_tags_readable_back(self, env, config):
        workspace, _, backend = env
        stage_tag(workspace, backend, config)
        outfits = load_tagged(workspace, CollectionKey(2022, "SS", "Chanel"))
        assert len(outfits) == 3
        assert all(outfit.garments for outfit in outfits)


class TestCleanStage:
    def test_requires_tags(self, env, config):
        workspace, _, backend = env
        with pytest.raises(StageDependencyMissing):
            stage_clean(workspace, backend, config)

    def test_builds_total_partitions(self, env, config):
        workspace, _, backend = env
        stage_tag(workspace, backend, config)
        stage_clean(workspace, backend, config)
        dictionaries = load_dictionaries(workspace)
        assert dictionaries
        for dictionary in dictionaries.values():
            assert dictionary.ungrouped == frozenset()

    def test_rerun_skips_when_unchanged(self, env, config):
        workspace, _, backend = env
        stage_tag(workspace, backend, config)
        stage_clean(workspace, backend, config)
        calls_after_first = len(backend.calls)
        report = stage_clean(workspace, backend, config)
        assert report.details["stale"] is False
        assert len(backend.calls) == calls_after_first

    def test_new_tags_invalidate_dictionaries(self, env, config):
        workspace, root, backend = env
        stage_tag(workspace, backend, config)
        stage_clean(workspace, backend, config)
        calls_after_first = len(backend.calls)
        write_png(root / "2023" / "SS" / "Chanel" / "look_9.png", b"\x09\x09\x09")
        run_stage("ingest", workspace, None, config, catalog_root=root)
        stage_tag(workspace, backend, config)
        report = stage_clean(workspace, backend, config)
        assert report.details["stale"] is True
        assert len(backend.calls) > calls_after_first + 1


class TestIndexStage:
    def test_index_before_clean_fails(self, env, config):
        workspace, _, backend = env
        stage_tag(workspace, backend, config)
        with pytest.raises(StageDependencyMissing):
            stage_index(workspace, config)

    def test_index_after_clean(self, env, config):
        workspace, _, backend = env
        stage_tag(workspace, backend, config)
        stage_clean(workspace, backend, config)
        report = stage_index(workspace, config)
        assert report.details["rebuilt"] == 4
        second = stage_index(workspace, config)
        assert second.details["rebuilt"] == 0

    def test_index_totals_match_tagged_garments(self, env, config):
        workspace, _, backend = env
        stage_tag(workspace, backend, config)
        stage_clean(workspace, backend, config)
        stage_index(workspace, config)
        from gptfar.pipeline import load_indices

        key = CollectionKey(2022, "SS", "Chanel")
        index = load_indices(workspace, [key])[key]
        garments = sum(len(o.garments) for o in load_tagged(workspace, key))
        assert index.garment_total == garments


def test_unknown_stage_rejected(tmp_path, config):
    with pytest.raises(ValueError):
        run_stage("polish", Workspace(tmp_path / "ws"), None, config)
