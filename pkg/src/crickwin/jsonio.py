"""Canonical JSON: stable key order, compact separators, exact float round-trips.

Every artifact this package writes (manifests, checkpoints, boosted-model
bundles, reports) goes through :func:`canonical_dumps` so that re-serializing
a loaded document reproduces it byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path


def canonical_dumps(obj) -> str:
    # repr-based float formatting (json's default) is shortest round-trip exact
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def dump_path(path, obj) -> None:
    Path(path).write_text(canonical_dumps(obj) + "\n", encoding="utf-8")


def load_path(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def sha256_of(obj) -> str:
    """Hash of the canonical serialization, used for reproducibility stamps."""
    return hashlib.sha256(canonical_dumps(obj).encode("utf-8")).hexdigest()
