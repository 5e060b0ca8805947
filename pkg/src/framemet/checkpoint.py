"""Single-file checkpoints: a JSON manifest followed by raw parameter bytes.

Layout: an 8-byte magic, an 8-byte little-endian header length, the UTF-8
JSON header, then every parameter as little-endian float64 in manifest
order. The header carries the vocabulary, the frame inventory, and both
encoder configurations, so a checkpoint alone reconstructs the model. The
encoding has no timestamps and sorts all keys, so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .data import CLS_TOKEN, PAD_TOKEN, UNK_TOKEN, Vocabulary
from .concepts import FrameInventory
from .encoder import EncoderConfig
from .errors import CheckpointError
from .model import MetaphorModel

MAGIC = b"FMCK0001"
FORMAT_VERSION = 1


def save_checkpoint(model: MetaphorModel, path) -> None:
    params = model.parameters()
    manifest = []
    payload = bytearray()
    for name in sorted(params):
        arr = params[name].data
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        manifest.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "offset": len(payload),
                "nbytes": len(raw),
            }
        )
        payload.extend(raw)
    header = {
        "format": "framemet-checkpoint",
        "version": FORMAT_VERSION,
        "vocab": model.vocab.id_to_word,
        "frames": model.inventory.names,
        "sentence_config": model.sentence_encoder.config.to_dict(),
        "concept_config": model.concept.encoder.config.to_dict(),
        "params": manifest,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(bytes(payload))


def load_checkpoint(path) -> MetaphorModel:
    path = Path(path)
    raw = path.read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a framemet checkpoint")
    (header_len,) = struct.unpack("<Q", raw[8:16])
    try:
        header = json.loads(raw[16 : 16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})")
    if header.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {header.get('version')}")
    words = header["vocab"]
    if words[:3] != [CLS_TOKEN, PAD_TOKEN, UNK_TOKEN]:
        raise CheckpointError(f"{path}: reserved vocabulary ids are damaged")
    model = MetaphorModel.build(
        vocab=Vocabulary(words[3:]),
        inventory=FrameInventory(header["frames"]),
        sentence_config=EncoderConfig(**header["sentence_config"]),
        concept_config=EncoderConfig(**header["concept_config"]),
        seed=0,
    )
    params = model.parameters()
    listed = {entry["name"] for entry in header["params"]}
    if listed != set(params):
        missing = sorted(set(params) - listed)[:3]
        extra = sorted(listed - set(params))[:3]
        raise CheckpointError(
            f"{path}: parameter names disagree (missing {missing}, extra {extra})"
        )
    payload = raw[16 + header_len :]
    for entry in header["params"]:
        target = params[entry["name"]]
        values = np.frombuffer(
            payload, dtype="<f8",
            count=entry["nbytes"] // 8, offset=entry["offset"],
        ).reshape(entry["shape"])
        if values.shape != target.data.shape:
            raise CheckpointError(
                f"{path}: {entry['name']} has shape {values.shape}, "
                f"expected {target.data.shape}"
            )
        target.data[...] = values
    return model
