"""Locating and loading named instances."""
from __future__ import annotations

import hashlib
import os
from pathlib import Path

from .pooling import PoolingInstance, load_instance

DATA_ENV = "RSBB_DATA_DIR"
PACKAGE_DATA = Path(__file__).with_name("data")

# every instance named in the benchmark tables; only some ship with data
KNOWN = ("haverly1", "haverly2", "haverly3", "foulds2", "bental4", "bental5",
         "adhya1", "adhya2", "adhya3", "adhya4")


class InstanceNotFound(FileNotFoundError):
    pass


def data_dir() -> Path:
    env = os.environ.get(DATA_ENV)
    return Path(env) if env else PACKAGE_DATA


def resolve(name_or_path: str) -> Path:
    p = Path(name_or_path)
    if p.suffix == ".json" or p.exists():
        if not p.is_file():
            raise InstanceNotFound(f"data file not found: {p}")
        return p
    cand = data_dir() / f"{name_or_path}.json"
    if not cand.is_file():
        raise InstanceNotFound(f"data file not found: {cand} (instance {name_or_path!r})")
    return cand


def load(name_or_path: str) -> PoolingInstance:
    return load_instance(resolve(name_or_path))


def available() -> list[str]:
    return sorted(p.stem for p in data_dir().glob("*.json"))


def verify_manifest(directory: Path | None = None) -> dict[str, bool]:
    """Check ``MANIFEST.sha256`` entries against the files next to it."""
    d = directory or data_dir()
    out = {}
    manifest = d / "MANIFEST.sha256"
    if not manifest.is_file():
        return out
    for line in manifest.read_text().splitlines():
        if not line.strip():
            continue
        digest, fname = line.split(maxsplit=1)
        f = d / fname.strip()
        out[fname.strip()] = f.is_file() and hashlib.sha256(f.read_bytes()).hexdigest() == digest
    return out
