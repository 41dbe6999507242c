"""Versioned checkpoint container.

Layout: the ASCII magic line ``HKGE1`` followed by a numpy ``.npz`` archive
with one array per parameter table (``entity.embedding`` ...) and a
``__meta__`` entry holding JSON (model config, vocabulary hashes, extras).
"""
from __future__ import annotations

import hashlib
import io
import json
import os
import zipfile
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .model import PARAM_KEYS, KGParams, ModelConfig

MAGIC = b"HKGE1\n"


def vocab_hash(names) -> str:
    h = hashlib.sha256()
    for name in names:
        h.update(name.encode("utf-8"))
        h.update(b"\0")
    return h.hexdigest()


def save_checkpoint(path, params: KGParams, config: ModelConfig, meta: dict | None = None):
    path = Path(path)
    payload = dict(meta or {})
    payload["model"] = config.to_dict()
    buf = io.BytesIO()
    arrays = params.arrays()
    np.savez(buf, __meta__=np.frombuffer(json.dumps(payload, sort_keys=True).encode(), dtype=np.uint8),
             **arrays)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(buf.getvalue())
    os.replace(tmp, path)
    return path


def load_checkpoint(path):
    """Return ``(params, model_config, meta)``; raises CheckpointError on bad files."""
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
        if head != MAGIC:
            raise CheckpointError(f"{path}: not an HKGE1 checkpoint")
        body = fh.read()
    try:
        with np.load(io.BytesIO(body), allow_pickle=False) as npz:
            meta = json.loads(npz["__meta__"].tobytes().decode())
            tables = {k: npz[k] for k in PARAM_KEYS}
    except (KeyError, ValueError, OSError, zipfile.BadZipFile) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from exc
    config = ModelConfig(**meta.pop("model"))
    params = KGParams(tables)
    if params.dim != config.dim:
        raise CheckpointError(f"{path}: tables have dim {params.dim}, config says {config.dim}")
    return params, config, meta
