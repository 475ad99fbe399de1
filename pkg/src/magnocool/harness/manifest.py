"""Run manifests: what produced a directory of outputs, and how to redo it."""
from __future__ import annotations

import datetime as _dt
import hashlib
import json
from pathlib import Path

import magnocool

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"


def code_version() -> str:
    """Package version plus a digest of the installed source files."""
    root = Path(magnocool.__file__).parent
    h = hashlib.sha256()
    for f in sorted(root.rglob("*.py")):
        h.update(f.relative_to(root).as_posix().encode())
        h.update(f.read_bytes())
    return f"{magnocool.__version__}+src.{h.hexdigest()[:12]}"


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def content_hash(command: str, config: dict, extra: dict | None = None) -> str:
    blob = json.dumps({"command": command, "config": config, "extra": extra or {}, "code": code_version()},
                      sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(out_dir, command: str, config: dict, outputs, extra: dict | None = None,
                   started: str | None = None) -> Path:
    """Record ``config``, seed, code version and output digests in ``out_dir/manifest.json``.

    ``extra`` holds command inputs that are not part of the config (mode,
    schedule file digest, teacher digest); it enters the content hash.
    """
    out_dir = Path(out_dir)
    now = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "command": command,
        "seed": config.get("seed"),
        "code_version": code_version(),
        "content_hash": content_hash(command, config, extra),
        "started_utc": started or now,
        "finished_utc": now,
        "extra": extra or {},
        "outputs": {Path(p).name: file_digest(p) for p in outputs},
        "config": config,
    }
    path = out_dir / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=False, default=str) + "\n", encoding="utf-8")
    return path


def read_manifest(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    m = json.loads(path.read_text(encoding="utf-8"))
    if m.get("manifest_version") != MANIFEST_VERSION:
        raise ValueError(f"{path}: manifest version {m.get('manifest_version')} not supported")
    return m


def utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
