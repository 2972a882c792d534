"""Flat binary checkpoints for networks.

Layout (all integers little-endian):

    bytes 0..7    magic ``b"MAECKPT\\0"``
    bytes 8..11   format version (u32, currently 1)
    bytes 12..15  length of the metadata blob (u32)
    ...           metadata, UTF-8 JSON with sorted keys
    ...           parameter values, raw float64 little-endian, in block
                  order, per block in layer order, per layer weights then
                  bias

The metadata JSON holds the named blocks (each a list of layer specs) plus
a free-form ``extra`` dict for whatever the caller wants to pin to the
file (autoencoder configs, translator direction/stamp, ...).  Writing the
same networks twice produces byte-identical files.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import CheckpointError
from .layers import LayerSpec, Network, init_params
from .rng import Rng

MAGIC = b"MAECKPT\x00"
VERSION = 1


def _spec_to_dict(spec: LayerSpec) -> dict:
    d = {"kind": spec.kind, "in": list(spec.in_shape), "out": list(spec.out_shape)}
    if spec.kind == "conv1d":
        d["kernel"] = spec.kernel
    return d


def _spec_from_dict(d: dict) -> LayerSpec:
    return LayerSpec(d["kind"], tuple(d["in"]), tuple(d["out"]),
                     kernel=d.get("kernel", 0))


def _param_order(spec: LayerSpec):
    return sorted(init_params(spec, Rng(0)).keys())


def save_checkpoint(path, blocks: dict[str, Network], extra: dict | None = None) -> None:
    """Write named networks plus metadata; deterministic byte-for-byte."""
    meta = {
        "blocks": [{"name": name, "specs": [_spec_to_dict(s) for s in net.specs]}
                   for name, net in blocks.items()],
        "extra": extra or {},
    }
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(blob)))
        f.write(blob)
        for net in blocks.values():
            for spec, p in zip(net.specs, net.params):
                for key in _param_order(spec):
                    f.write(np.ascontiguousarray(p[key], dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict[str, Network], dict]:
    """Read a checkpoint back into (blocks, extra)."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    version, meta_len = struct.unpack("<II", raw[8:16])
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    try:
        meta = json.loads(raw[16:16 + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt metadata: {exc}") from exc

    offset = 16 + meta_len
    blocks: dict[str, Network] = {}
    for block in meta["blocks"]:
        specs = [_spec_from_dict(d) for d in block["specs"]]
        params = []
        for spec in specs:
            ref = init_params(spec, Rng(0))
            p = {}
            for key in sorted(ref):
                shape = ref[key].shape
                end = offset + 8 * int(np.prod(shape))
                if end > len(raw):
                    raise CheckpointError(f"{path}: truncated parameter data")
                p[key] = np.frombuffer(raw[offset:end], dtype="<f8").reshape(shape).copy()
                offset = end
            params.append(p)
        blocks[block["name"]] = Network(specs, params=params)
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")
    return blocks, meta.get("extra", {})
