"""Run manifests: what a command produced and how to re-check it."""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

TOOL_VERSION = "0.1.0"
MANIFEST_NAME = "manifest.json"


def file_sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, scenario_hash: str, seeds: list[int],
                   summary: dict) -> Path:
    """Hash every artifact in out_dir and write the manifest last.

    A missing or stale manifest therefore signals an interrupted run.
    """
    out_dir = Path(out_dir)
    files = {}
    for p in sorted(out_dir.rglob("*")):
        if p.is_file() and p.name != MANIFEST_NAME:
            files[str(p.relative_to(out_dir))] = file_sha256(p)
    manifest = {
        "tool_version": TOOL_VERSION,
        "scenario_hash": scenario_hash,
        "seeds": seeds,
        "created_unix": time.time(),
        "files": files,
        "summary": summary,
    }
    path = out_dir / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def load_manifest(out_dir: Path) -> dict:
    path = Path(out_dir) / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"no manifest in {out_dir}")
    return json.loads(path.read_text())


def validate_manifest(out_dir: Path) -> dict:
    """Re-hash the listed artifacts; raises on any mismatch."""
    out_dir = Path(out_dir)
    manifest = load_manifest(out_dir)
    for rel, digest in manifest["files"].items():
        p = out_dir / rel
        if not p.exists():
            raise FileNotFoundError(f"artifact listed in manifest missing: {rel}")
        actual = file_sha256(p)
        if actual != digest:
            raise ValueError(f"artifact hash mismatch for {rel}")
    return manifest
