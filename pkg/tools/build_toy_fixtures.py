#!/usr/bin/env python3
"""Build the committed test fixtures: the toy catwalk catalog and the replay
fixture corpus recorded from the deterministic fake model.

Run from the repository root:

    python tools/build_toy_fixtures.py

Regenerating from scratch produces identical bytes, so the fixtures can be
rebuilt at any time without churning the repository.
"""

from __future__ import annotations

import os
import shutil
import sys
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO_ROOT / "tests"))
# record repo-relative image paths so regeneration is checkout-independent
os.chdir(REPO_ROOT)

from support import build_toy_catalog, fake_model  # noqa: E402

from gptfar.domain import DomainConfig, ReportScope  # noqa: E402
from gptfar.gateway import FixtureStore, RecordingBackend, ScriptedBackend  # noqa: E402
from gptfar.pipeline import Workspace, run_stage  # noqa: E402
from gptfar.report import generate_report  # noqa: E402

TOY_CATALOG = Path("fixtures") / "toy_catalog"
REPLAY_DIR = Path("fixtures") / "replay"

RECORDED_SCOPES = [
    ReportScope(
        years=(2022, 2023), season="SS", brands=("Chanel",), group="Dresses & Skirts"
    ),
    ReportScope(
        years=(2022, 2023),
        season="SS",
        brands=("Chanel", "Valentino"),
        group="Topweights",
    ),
]


def main() -> None:
    if TOY_CATALOG.exists():
        shutil.rmtree(TOY_CATALOG)
    image_count = build_toy_catalog(TOY_CATALOG)
    print(f"toy catalog: {image_count} images under {TOY_CATALOG}")

    if REPLAY_DIR.exists():
        shutil.rmtree(REPLAY_DIR)
    config = DomainConfig.default()
    store = FixtureStore(REPLAY_DIR)
    backend = RecordingBackend(ScriptedBackend(fake_model), store)

    with tempfile.TemporaryDirectory() as tmp:
        workspace = Workspace(Path(tmp) / "ws")
        run_stage("ingest", workspace, backend, config, catalog_root=TOY_CATALOG)
        for scope in RECORDED_SCOPES:
            document = generate_report(scope, backend, workspace, config)
            print(
                f"recorded scope {scope.group} ({', '.join(scope.brands)}): "
                f"{len(document.charts)} charts, "
                f"{len(document.category_pages)} category pages"
            )
    print(f"replay fixtures: {len(store)} under {REPLAY_DIR}")


if __name__ == "__main__":
    main()
