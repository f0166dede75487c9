#!/usr/bin/env python3
"""Regenerate committed golden CLI artifacts from the fixture data.

Goldens pin the byte-exact CLI output for the fixture configs; regenerate
them only when an intentional output change is made, and review the diff.
The manifest is not a golden (it carries a timestamp).
"""

import shutil
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from riskalloc.cli import main  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"
GOLDENS = ROOT / "tests" / "goldens"


def refresh(name: str, args: list) -> None:
    out = GOLDENS / name
    if out.exists():
        shutil.rmtree(out)
    status = main(args + ["--data-dir", str(FIXTURES), "--out-dir", str(out)])
    if status != 0:
        raise SystemExit(f"{name}: CLI exited {status}")
    (out / "manifest.json").unlink()
    print(f"refreshed {out}")


def cfg(name: str) -> str:
    return str(FIXTURES / "configs" / name)


def run() -> None:
    refresh("combined_cra", ["backtest", "--config", cfg("combined_cra.yaml")])
    refresh("synthetic_cra", ["backtest", "--config", cfg("synthetic_cra.yaml")])
    refresh(
        "compare",
        [
            "compare",
            "--config", cfg("combined_cra.yaml"),
            "--config", cfg("dd_ewma.yaml"),
        ],
    )


if __name__ == "__main__":
    run()
