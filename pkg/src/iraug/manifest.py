"""Augmentation provenance records.

One JSON object per line, keys sorted, floats serialized at full precision,
so a manifest is byte-stable across reruns of the same seeded config and
every sample is re-derivable from its record (the full quantizer spec is
embedded, and its digest recomputes identically from the stored values).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError
from .squeezer import QuantSpec


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True)
class AugmentationRecord:
    source_id: str
    stage_seeds: dict  # stage label -> stream id
    quant_spec_digest: str
    backend_name: str
    output_path: str  # relative to the output root
    quant_spec: dict  # edges + replacements, full precision
    num_intervals: int
    backend_chain: tuple = ()
    stage_digests: tuple = ()  # sha256 per backend stage output
    output_digest: str = ""
    mask_path: str = ""
    minmax_scope: str = "full_image"  # intensity range includes target pixels
    status: str = "ok"

    def to_json_line(self) -> str:
        d = asdict(self)
        d["backend_chain"] = list(self.backend_chain)
        d["stage_digests"] = list(self.stage_digests)
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json_line(cls, line: str) -> "AugmentationRecord":
        d = json.loads(line)
        d["backend_chain"] = tuple(d.get("backend_chain", ()))
        d["stage_digests"] = tuple(d.get("stage_digests", ()))
        return cls(**d)

    def spec(self) -> QuantSpec:
        return QuantSpec.from_json_dict(self.quant_spec)

    def verify_digest(self) -> bool:
        return self.spec().digest() == self.quant_spec_digest


def write_manifest(records, path) -> None:
    text = "".join(r.to_json_line() + "\n" for r in records)
    Path(path).write_text(text, "utf-8")


def read_manifest(path) -> list[AugmentationRecord]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"manifest not found: {path}")
    records = []
    for line in path.read_text("utf-8").splitlines():
        if not line.strip():
            continue
        if "marker" in json.loads(line):  # abort markers from partial runs
            continue
        records.append(AugmentationRecord.from_json_line(line))
    return records
