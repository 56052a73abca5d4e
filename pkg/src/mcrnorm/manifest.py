"""Run manifests: enough to re-run a CLI command and check that it
reproduces the same output bytes."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .csvio import write_json

MANIFEST_NAME = "manifest.json"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    argv: list  # command line without --out-dir, input paths made absolute
    params: dict
    seed: int
    inputs: dict = field(default_factory=dict)  # absolute path -> sha256
    outputs: dict = field(default_factory=dict)  # file name in out dir -> sha256
    version: str = __version__

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, out_dir) -> Path:
        return write_json(Path(out_dir) / MANIFEST_NAME, self.to_dict())

    @classmethod
    def read(cls, path) -> "RunManifest":
        doc = json.loads(Path(path).read_text())
        missing = {"command", "argv", "params", "seed"} - set(doc)
        if missing:
            raise ValueError(f"manifest {path} lacks {sorted(missing)}")
        return cls(doc["command"], list(doc["argv"]), dict(doc["params"]), int(doc["seed"]),
                   dict(doc.get("inputs", {})), dict(doc.get("outputs", {})), doc.get("version", ""))

    def changed_inputs(self) -> list[str]:
        """Inputs that are missing or whose content differs from the recorded hash."""
        bad = []
        for path, digest in self.inputs.items():
            p = Path(path)
            if not p.is_file() or sha256_file(p) != digest:
                bad.append(path)
        return bad

    def compare_outputs(self, out_dir) -> list[str]:
        """Recorded outputs that are missing or differ in ``out_dir``."""
        bad = []
        for name, digest in self.outputs.items():
            p = Path(out_dir) / name
            if not p.is_file() or sha256_file(p) != digest:
                bad.append(name)
        return bad
