"""Snapshot manifests: the unit of deployment for the search service.

A manifest is a JSON file listing the corpus, vocabulary, and model
checkpoint paths (relative to the manifest's directory) plus the
configuration needed to rebuild the models around them. Its digest is a
SHA-256 over the canonical manifest JSON and the bytes of every referenced
file — stable across restarts, changing iff any listed artifact changes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

_REQUIRED_KEYS = ("corpus", "vocab", "checkpoints", "config")
_CHECKPOINT_KEYS = ("retriever", "reader_integrated", "reader_baseline", "dense_index")


@dataclass(frozen=True)
class Manifest:
    root: Path
    data: dict

    def path(self, key: str) -> Path:
        """Resolve a top-level file entry ('corpus', 'vocab')."""
        return self.root / self.data[key]

    def checkpoint(self, name: str) -> Path | None:
        rel = self.data["checkpoints"].get(name)
        return None if rel is None else self.root / rel

    @property
    def config(self) -> dict:
        return self.data["config"]

    def referenced_files(self) -> list[Path]:
        files = [self.path("corpus"), self.path("vocab")]
        for name in _CHECKPOINT_KEYS:
            p = self.checkpoint(name)
            if p is not None:
                files.append(p)
        return files


def _validate(data: dict) -> None:
    missing = [k for k in _REQUIRED_KEYS if k not in data]
    if missing:
        raise ConfigError(f"manifest lacks keys {missing}")
    if not isinstance(data["checkpoints"], dict) or "retriever" not in data["checkpoints"]:
        raise ConfigError("manifest checkpoints must be an object with a 'retriever' entry")
    unknown = [k for k in data["checkpoints"] if k not in _CHECKPOINT_KEYS]
    if unknown:
        raise ConfigError(f"unknown checkpoint entries {unknown}")
    if not isinstance(data["config"], dict):
        raise ConfigError("manifest config must be an object")


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    _validate(data)
    return Manifest(root=path.parent.resolve(), data=data)


def save_manifest(path: str | Path, data: dict) -> None:
    _validate(data)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def manifest_digest(manifest: Manifest) -> str:
    """SHA-256 over the canonical manifest JSON plus every referenced file."""
    h = hashlib.sha256()
    h.update(
        json.dumps(manifest.data, sort_keys=True, separators=(",", ":")).encode("utf-8")
    )
    for p in sorted(manifest.referenced_files()):
        h.update(p.name.encode("utf-8"))
        with open(p, "rb") as fh:
            h.update(hashlib.sha256(fh.read()).digest())
    return h.hexdigest()
