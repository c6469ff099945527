"""Shared fixture: the golden kit produced by the bundle's producer.

The producer is exercised strictly as an external process; nothing in
this suite imports it. The kit holds a scene, a full synthetic-preset
bundle (4 originals + 156 generated frames), a checksum table from the
producer's validate command, and golden loss values for a spread of
trainer-render stand-ins.
"""

import subprocess
import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[2]
GOLDEN_SCRIPT = REPO_ROOT / "scripts" / "make_golden.py"


@pytest.fixture(scope="session")
def kit(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("golden_kit")
    result = subprocess.run(
        [sys.executable, str(GOLDEN_SCRIPT), str(root), "--size", "48", "--seed", "0"],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, f"golden kit build failed:\n{result.stderr[-2000:]}"
    return root


@pytest.fixture(scope="session")
def bundle_dir(kit) -> Path:
    return kit / "bundle"
