"""Atomic artifact writing and run manifests.

Every CLI artifact gets a sidecar <artifact>.manifest.json recording the
tool version, command, seed, config digest, and parameter overrides, so a
run can be reproduced exactly. Manifests contain no timestamps: re-running
a manifest must reproduce primary outputs byte for byte.
"""

from __future__ import annotations

import json
import os
import tempfile

from . import __version__


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-artifact-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_metadata(command: str, seed: int | None, config_digest: str, params: dict) -> dict:
    return {
        "tool_version": __version__,
        "command": command,
        "seed": seed,
        "config_digest": config_digest,
        "params": params,
    }


def write_manifest(artifact_path: str, meta: dict) -> None:
    atomic_write_text(artifact_path + ".manifest.json", json.dumps(meta, sort_keys=True) + "\n")


def write_json_artifact(path: str, payload: dict, meta: dict) -> None:
    doc = dict(payload)
    doc["meta"] = meta
    atomic_write_text(path, json.dumps(doc, sort_keys=True) + "\n")
    write_manifest(path, meta)
