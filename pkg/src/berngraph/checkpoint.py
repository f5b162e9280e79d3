"""Versioned binary checkpoints.

Layout::

    magic        8 bytes  b"BERNGCK\\x00"
    header_len   uint32 little-endian
    header       UTF-8 JSON (format_version, model_kind, dims, hyper,
                 arrays [{name, shape}], adam {step, beta1, beta2, eps},
                 dtype, payload_bytes, sha256)
    payload      float64 little-endian: every parameter array in header
                 order, then the Adam first moments, then second moments
                 (moments omitted when no optimiser state was saved)

For the GNN the array order is W_in, b_in, W_m1, b_m1, W_u1, b_u1, ...,
W_out, b_out, W_read, b_read.
"""

from __future__ import annotations

import hashlib
import json
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ._io import atomic_write_bytes
from .baselines import LinearModel, MlpModel
from .gnn import GNNModel, GNNParams
from .optim import AdamState

__all__ = [
    "FORMAT_VERSION",
    "CheckpointError",
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
    "model_from_checkpoint",
]

MAGIC = b"BERNGCK\x00"
FORMAT_VERSION = 1
_LE_F64 = np.dtype("<f8")


class CheckpointError(ValueError):
    """Unreadable, corrupted or incompatible checkpoint."""


@dataclass
class Checkpoint:
    kind: str
    arrays: "OrderedDict[str, np.ndarray]"
    dims: dict
    state: Optional[AdamState] = None
    hyper: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


def _model_dims(model) -> dict:
    if isinstance(model, GNNParams):
        return model.dims()
    return model.meta()["dims"]


def save_checkpoint(model, state: Optional[AdamState], path, hyper=None, extra=None) -> dict:
    """Write ``model`` (a GNNModel, GNNParams or baseline) and its Adam state.

    Returns the header that was written.
    """
    params = model.params if isinstance(model, GNNModel) else model
    kind = params.kind
    arrays = params.arrays
    dtype = next(iter(arrays.values())).dtype
    chunks = [np.ascontiguousarray(a, dtype=_LE_F64).tobytes() for a in arrays.values()]
    adam = None
    if state is not None:
        if state.m.keys() != arrays.keys():
            raise CheckpointError("optimiser state does not match the parameter names")
        for moments in (state.m, state.v):
            chunks += [np.ascontiguousarray(moments[k], dtype=_LE_F64).tobytes() for k in arrays]
        adam = {"step": state.step, "beta1": state.beta1, "beta2": state.beta2, "eps": state.eps}
    payload = b"".join(chunks)
    hyper = dict(hyper or {})
    if kind == "gnn":
        hyper.setdefault("activation", params.activation)
    if kind == "lr":
        hyper.setdefault("l2", params.l2)
    header = {
        "format_version": FORMAT_VERSION,
        "model_kind": kind,
        "dims": _model_dims(params),
        "hyper": hyper,
        "extra": dict(extra or {}),
        "arrays": [{"name": k, "shape": list(a.shape)} for k, a in arrays.items()],
        "adam": adam,
        "dtype": str(dtype),
        "payload_bytes": len(payload),
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    atomic_write_bytes(path, MAGIC + struct.pack("<I", len(blob)) + blob + payload)
    return header


def _read_header(data: bytes, path) -> tuple:
    if len(data) < len(MAGIC) + 4 or not data.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    (n,) = struct.unpack_from("<I", data, len(MAGIC))
    start = len(MAGIC) + 4
    if len(data) < start + n:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(data[start:start + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from None
    return header, data[start + n:]


def load_checkpoint(path, expected_dims: Optional[dict] = None) -> Checkpoint:
    """Read and verify a checkpoint.

    ``expected_dims`` (e.g. ``{"M": 40, "C": 6}``) is compared against the
    stored dimensions; any disagreement raises :class:`CheckpointError`.
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"{path}: checkpoint not found")
    header, payload = _read_header(path.read_bytes(), path)
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: format version {version} is not supported "
                              f"(expected {FORMAT_VERSION})")
    if len(payload) != header["payload_bytes"]:
        raise CheckpointError(f"{path}: payload is {len(payload)} bytes, header says "
                              f"{header['payload_bytes']} (truncated or padded file)")
    if hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise CheckpointError(f"{path}: payload checksum mismatch")
    dims = header["dims"]
    for key, want in (expected_dims or {}).items():
        if dims.get(key) != want:
            raise CheckpointError(f"{path}: shape mismatch, checkpoint has {key}={dims.get(key)} "
                                  f"but the current config needs {key}={want}")

    specs = [(a["name"], tuple(a["shape"])) for a in header["arrays"]]
    flat = np.frombuffer(payload, dtype=_LE_F64)
    dtype = np.dtype(header.get("dtype", "float64"))
    offset = 0

    def take():
        nonlocal offset
        out = OrderedDict()
        for name, shape in specs:
            size = int(np.prod(shape))
            if offset + size > flat.size:
                raise CheckpointError(f"{path}: payload too short for array {name}")
            out[name] = flat[offset:offset + size].reshape(shape).astype(dtype)
            offset += size
        return out

    arrays = take()
    state = None
    if header.get("adam") is not None:
        m, v = take(), take()
        a = header["adam"]
        state = AdamState(m, v, a["step"], a["beta1"], a["beta2"], a["eps"])
    if offset != flat.size:
        raise CheckpointError(f"{path}: trailing data after the declared arrays")
    ckpt = Checkpoint(header["model_kind"], arrays, dims, state, header.get("hyper", {}),
                      header.get("extra", {}))
    _check_shapes(ckpt, path)
    return ckpt


def _expected_shapes(ckpt: Checkpoint) -> "OrderedDict[str, tuple]":
    d = ckpt.dims
    if ckpt.kind == "gnn":
        return GNNParams(d["M"], d["C"], d["d"], d["K"]).shapes()
    if ckpt.kind == "lr":
        return OrderedDict(W=(d["C"], d["M"]), b=(d["C"],))
    if ckpt.kind == "mlp":
        return OrderedDict(W1=(d["H"], d["M"]), b1=(d["H"],), W2=(d["C"], d["H"]), b2=(d["C"],))
    raise CheckpointError(f"unknown model kind {ckpt.kind!r}")


def _check_shapes(ckpt: Checkpoint, path) -> None:
    want = _expected_shapes(ckpt)
    got = OrderedDict((k, a.shape) for k, a in ckpt.arrays.items())
    if got != want:
        raise CheckpointError(f"{path}: stored arrays {dict(got)} do not match dims {ckpt.dims}")


def model_from_checkpoint(ckpt: Checkpoint, edges=None):
    """Rebuild a model object; the GNN additionally needs its edge set."""
    if ckpt.kind == "gnn":
        if edges is None:
            raise CheckpointError("a GNN checkpoint needs the edge set to be rebuilt")
        d = ckpt.dims
        if edges.n_nodes != d["M"]:
            raise CheckpointError(f"edge set has {edges.n_nodes} nodes, checkpoint M={d['M']}")
        params = GNNParams(d["M"], d["C"], d["d"], d["K"], OrderedDict(ckpt.arrays),
                           ckpt.hyper.get("activation", "relu"))
        params.validate()
        return GNNModel(params, edges)
    if ckpt.kind == "lr":
        return LinearModel(ckpt.arrays, l2=ckpt.hyper.get("l2", 0.0))
    return MlpModel(ckpt.arrays)
