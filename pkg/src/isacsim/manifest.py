"""Run manifests: reproducibility records for every CLI invocation.

A manifest lists the command, its inputs (config reference and seed), and
the content hash of every artifact the run produced.  Identical inputs
must reproduce identical manifests byte for byte, so no volatile data
(timestamps, hostnames) is recorded.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

MANIFEST_NAME = "manifest.json"


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: str
    seed: int
    out_dir: str
    artifacts: list[dict]

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


def write_manifest(
    out_dir, command: str, config_ref: str, seed: int, files
) -> Path:
    """Hash ``files`` (paths under ``out_dir``) and write manifest.json."""
    out_dir = Path(out_dir)
    artifacts = sorted(
        (
            {"file": Path(f).name, "sha256": file_sha256(f)}
            for f in files
        ),
        key=lambda a: a["file"],
    )
    manifest = RunManifest(
        command=command,
        config=str(config_ref),
        seed=int(seed),
        out_dir=str(out_dir),
        artifacts=artifacts,
    )
    path = out_dir / MANIFEST_NAME
    path.write_text(manifest.to_json(), encoding="utf-8")
    return path


def read_manifest(path) -> RunManifest:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return RunManifest(**data)
