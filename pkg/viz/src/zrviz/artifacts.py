"""Reading and validating zrlab run directories.

The manifest lists a sha256 per artifact; a mismatch means the run is
corrupt or was interrupted, and plotting aborts.
"""

from __future__ import annotations

import csv
import hashlib
import json
from collections import defaultdict
from pathlib import Path

import numpy as np

MANIFEST_NAME = "manifest.json"


class ArtifactError(RuntimeError):
    pass


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def validate_run(run_dir) -> dict:
    """Load the manifest and re-hash every artifact it lists."""
    run_dir = Path(run_dir)
    mpath = run_dir / MANIFEST_NAME
    if not mpath.exists():
        raise ArtifactError(f"missing manifest in {run_dir}")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as e:
        raise ArtifactError(f"corrupt manifest in {run_dir}: {e}") from None
    for rel, digest in manifest.get("files", {}).items():
        p = run_dir / rel
        if not p.exists():
            raise ArtifactError(f"artifact missing: {rel}")
        if _sha256(p) != digest:
            raise ArtifactError(f"artifact hash mismatch: {rel}")
    return manifest


def load_density_csv(path) -> dict[float, tuple[np.ndarray, np.ndarray]]:
    """density.csv (time,x,rho) -> {time: (x, rho)} keeping row order."""
    times: dict[float, list[tuple[float, float]]] = defaultdict(list)
    with open(path) as f:
        for row in csv.DictReader(f):
            times[float(row["time"])].append((float(row["x"]), float(row["rho"])))
    out = {}
    for t, rows in times.items():
        arr = np.asarray(rows)
        out[t] = (arr[:, 0], arr[:, 1])
    return out


def load_profiles_csv(path):
    """profiles.csv (kind,N,time,x,value) -> {(kind, time): (x, value)}."""
    groups: dict[tuple[str, float], list[tuple[float, float]]] = defaultdict(list)
    with open(path) as f:
        for row in csv.DictReader(f):
            key = (row["kind"], float(row["time"]))
            groups[key].append((float(row["x"]), float(row["value"])))
    out = {}
    for key, rows in groups.items():
        arr = np.asarray(rows)
        out[key] = (arr[:, 0], arr[:, 1])
    return out


def load_json(path) -> dict:
    return json.loads(Path(path).read_text())


def load_report_csv(path) -> list[dict]:
    with open(path) as f:
        return list(csv.DictReader(f))
