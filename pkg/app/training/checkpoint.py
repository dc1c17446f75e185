"""Binary checkpoint format.

Layout::

    b"HCMENCK1"                       8-byte magic
    uint64 little-endian              header length in bytes
    UTF-8 JSON header                 {"version", "config", "dims", "tensors": {name: {"shape", "offset", "len"}}}
    float32 little-endian payload     tensors concatenated in header order

``offset`` and ``len`` count float32 elements from the start of the payload.
"""

import json
import struct
from pathlib import Path
from typing import Dict, NamedTuple, Optional, Union

import numpy as np
from loguru import logger
from pydantic import ValidationError

from app.exceptions import CheckpointError, ConfigurationError, DimensionError
from app.model.network import HCMEN
from app.model.schemas import ModelConfig
from app.tensor import ParamStore

MAGIC = b"HCMENCK1"
VERSION = 1
_LENGTH = struct.Struct("<Q")

PathLike = Union[str, Path]


class Checkpoint(NamedTuple):
    params: ParamStore
    config: ModelConfig
    dims: Dict[str, int]


def save_checkpoint(
    params: ParamStore,
    config: ModelConfig,
    path: PathLike,
    dims: Optional[Dict[str, int]] = None,
) -> Path:
    """Write ``params`` as float32 with the model config and feature dims.

    Raises:
        CheckpointError: If the file cannot be written.
    """
    path = Path(path)
    tensors, chunks, offset = {}, [], 0
    for name, tensor in params.items():
        tensors[name] = {"shape": list(tensor.shape), "offset": offset, "len": tensor.size}
        chunks.append(np.ascontiguousarray(tensor.data, dtype="<f4").tobytes())
        offset += tensor.size
    header = json.dumps(
        {"version": VERSION, "config": config.model_dump(), "dims": dims, "tensors": tensors},
        sort_keys=True,
    ).encode("utf-8")

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(_LENGTH.pack(len(header)))
            f.write(header)
            for chunk in chunks:
                f.write(chunk)
    except OSError as e:
        raise CheckpointError(f"could not write checkpoint {path}: {e}") from e
    logger.debug(f"Saved {len(tensors)} tensors ({offset} values) to {path}")
    return path


def load_checkpoint(path: PathLike, config: Optional[ModelConfig] = None) -> Checkpoint:
    """Read a checkpoint written by ``save_checkpoint``.

    When ``config`` is given the stored tensors are checked against the
    architecture it describes and that config is returned in place of the
    stored one.

    Raises:
        CheckpointError: Unreadable file, bad magic or version, malformed
            header, truncated payload, or tensors that do not fit ``config``.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"could not read checkpoint {path}: {e}") from e

    prefix = len(MAGIC) + _LENGTH.size
    if len(raw) < prefix or raw[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} is not an HCMEN checkpoint (bad magic)")
    (header_len,) = _LENGTH.unpack_from(raw, len(MAGIC))
    if len(raw) < prefix + header_len:
        raise CheckpointError(f"{path} is truncated inside the header")
    try:
        header = json.loads(raw[prefix:prefix + header_len].decode("utf-8"))
        version = header["version"]
        tensors = header["tensors"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise CheckpointError(f"{path} has a malformed header: {e}") from e
    if version != VERSION:
        raise CheckpointError(f"{path} has checkpoint version {version}, expected {VERSION}")

    payload_bytes = len(raw) - prefix - header_len
    if payload_bytes % 4:
        raise CheckpointError(f"{path} is truncated: payload of {payload_bytes} bytes is not a whole number of float32 values")
    try:
        layout = {
            name: (int(entry["offset"]), int(entry["len"]), tuple(int(d) for d in entry["shape"]))
            for name, entry in tensors.items()
        }
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise CheckpointError(f"{path} has a malformed tensor table: {e}") from e
    expected = sum(count for _, count, _ in layout.values())
    if payload_bytes // 4 != expected:
        kind = "truncated" if payload_bytes // 4 < expected else "followed by trailing bytes"
        raise CheckpointError(f"{path} is {kind}: header declares {expected} values, payload has {payload_bytes // 4}")

    payload = np.frombuffer(raw, dtype="<f4", offset=prefix + header_len)
    store = ParamStore(dtype=np.float32)
    for name, (start, count, shape) in layout.items():
        if start < 0 or count < 0 or start + count > payload.size:
            raise CheckpointError(f"{path}: tensor '{name}' spans values {start}..{start + count}, payload has {payload.size}")
        if int(np.prod(shape)) != count:
            raise CheckpointError(f"{path}: tensor '{name}' shape {shape} does not hold {count} values")
        store.declare(name, payload[start:start + count].reshape(shape).astype(np.float32))

    try:
        stored_config = ModelConfig(**header["config"])
    except (ValidationError, KeyError, TypeError) as e:
        raise CheckpointError(f"{path} stores an invalid config: {e}") from e
    dims = header.get("dims") or {}

    resolved = config or stored_config
    try:
        HCMEN(resolved, dims=dims or None, params=store)
    except (DimensionError, ConfigurationError) as e:
        raise CheckpointError(f"{path} does not match the model config: {e}") from e
    logger.info(f"Loaded checkpoint {path} with {store.num_parameters()} parameters")
    return Checkpoint(store, resolved, {k: int(v) for k, v in dims.items()})


def load_model(path: PathLike, config: Optional[ModelConfig] = None) -> HCMEN:
    checkpoint = load_checkpoint(path, config)
    return HCMEN(checkpoint.config, dims=checkpoint.dims or None, params=checkpoint.params)
