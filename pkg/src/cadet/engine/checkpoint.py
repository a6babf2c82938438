"""Parameter checkpointing: JSON manifest plus raw little-endian arrays.

Round-tripping is bit-exact: each parameter is dumped untouched as '<f4' or
'<f8' into its own file, and the manifest records name, shape, dtype and
trainability.  Arbitrary JSON metadata rides along in the manifest.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

import numpy as np

from .tensor import Parameter

_DTYPE_TAG = {np.dtype(np.float32): "f32", np.dtype(np.float64): "f64"}
_TAG_DTYPE = {"f32": "<f4", "f64": "<f8"}


def save_checkpoint(path, params: Mapping[str, Parameter], meta: dict | None = None):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, name in enumerate(sorted(params)):
        p = params[name]
        tag = _DTYPE_TAG[p.data.dtype]
        fname = f"p{i:04d}.bin"
        p.data.astype(_TAG_DTYPE[tag], copy=False).tofile(out / fname)
        entries.append({
            "name": name,
            "shape": list(p.data.shape),
            "dtype": tag,
            "trainable": bool(p.trainable),
            "file": fname,
        })
    manifest = {"format": "cadet-checkpoint-v1", "params": entries, "meta": meta or {}}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict, dict[str, bool]]:
    """Returns (name -> array, metadata, name -> trainable flag)."""
    root = Path(path)
    manifest = json.loads((root / "manifest.json").read_text())
    arrays: dict[str, np.ndarray] = {}
    trainable: dict[str, bool] = {}
    for entry in manifest["params"]:
        raw = np.fromfile(root / entry["file"], dtype=_TAG_DTYPE[entry["dtype"]])
        arrays[entry["name"]] = raw.astype(raw.dtype.newbyteorder("=")).reshape(entry["shape"])
        trainable[entry["name"]] = bool(entry.get("trainable", True))
    return arrays, manifest.get("meta", {}), trainable
