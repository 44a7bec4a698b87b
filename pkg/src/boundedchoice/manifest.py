"""Run manifests: what command ran, on what, producing what.

A manifest is written next to every CLI output so a run can be audited
and reproduced.  Output hashes make byte-level reproducibility checks
one-line diffs; the timestamps are the only fields expected to differ
between identical reruns.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

TOOL_NAME = "boundedchoice"
MANIFEST_SCHEMA_VERSION = 1


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    command: str
    arguments: dict
    seed: int | None = None
    inputs: dict[str, str] = field(default_factory=dict)   # path -> sha256
    outputs: dict[str, str] = field(default_factory=dict)  # path -> sha256
    started_at: float = field(default_factory=time.time)
    finished_at: float | None = None

    def add_input(self, path: str | Path) -> None:
        self.inputs[str(path)] = file_sha256(path)

    def add_output(self, path: str | Path) -> None:
        self.outputs[str(path)] = file_sha256(path)

    def finish(self) -> None:
        self.finished_at = time.time()

    def to_dict(self) -> dict:
        from . import __version__

        return {
            "kind": "run-manifest",
            "schema_version": MANIFEST_SCHEMA_VERSION,
            "tool": TOOL_NAME,
            "tool_version": __version__,
            "command": self.command,
            "arguments": self.arguments,
            "seed": self.seed,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": dict(sorted(self.outputs.items())),
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    def write(self, path: str | Path) -> None:
        self.finish()
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
