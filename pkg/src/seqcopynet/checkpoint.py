"""Binary checkpoint format.

Layout::

    SEQCOPY1
    key=value            (one line per model hyperparameter)
    name<TAB>d0,d1<TAB>f32   (one line per tensor, in store order)
    <blank line>
    raw little-endian float32 data, row-major, in header order
"""

from __future__ import annotations

from dataclasses import asdict, fields

import numpy as np

from .errors import CheckpointCorruptError, CheckpointFormatError, IncompatibleCheckpointError
from .model import ModelConfig, SeqCopyNet, parameter_shapes
from .numcore import ParameterStore

MAGIC = b"SEQCOPY1"
FORMAT_VERSION = 1


def save_checkpoint(store: ParameterStore, config: ModelConfig, path) -> None:
    lines = [MAGIC.decode(), f"format_version={FORMAT_VERSION}"]
    lines += [f"{k}={v}" for k, v in asdict(config).items()]
    for name, p in store.params.items():
        lines.append(f"{name}\t{','.join(str(s) for s in p.shape)}\tf32")
    header = ("\n".join(lines) + "\n\n").encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        for p in store.params.values():
            f.write(np.ascontiguousarray(p, dtype="<f4").tobytes())


def _parse_header(blob: bytes):
    if not blob.startswith(MAGIC + b"\n"):
        raise CheckpointFormatError("bad magic: not a SEQCOPY1 checkpoint")
    end = blob.find(b"\n\n")
    if end < 0:
        raise CheckpointCorruptError("header is not terminated by a blank line")
    try:
        lines = blob[: end].decode("ascii").split("\n")[1:]
    except UnicodeDecodeError:
        raise CheckpointFormatError("header is not ASCII") from None
    hyper, tensors = {}, []
    for line in lines:
        if "\t" in line:
            parts = line.split("\t")
            if len(parts) != 3 or parts[2] != "f32":
                raise CheckpointFormatError(f"malformed tensor header {line!r}")
            try:
                shape = tuple(int(s) for s in parts[1].split(","))
            except ValueError:
                raise CheckpointFormatError(f"malformed shape in {line!r}") from None
            tensors.append((parts[0], shape))
        elif "=" in line:
            key, value = line.split("=", 1)
            hyper[key] = value
        else:
            raise CheckpointFormatError(f"unrecognized header line {line!r}")
    return hyper, tensors, end + 2


def load_checkpoint(path) -> tuple[ParameterStore, ModelConfig]:
    with open(path, "rb") as f:
        blob = f.read()
    hyper, tensors, offset = _parse_header(blob)
    if hyper.pop("format_version", None) != str(FORMAT_VERSION):
        raise CheckpointFormatError("unsupported checkpoint format version")
    names = {f.name for f in fields(ModelConfig)}
    if set(hyper) != names:
        raise CheckpointFormatError(f"hyperparameters {sorted(hyper)} do not match {sorted(names)}")
    try:
        config = ModelConfig(**{k: int(v) for k, v in hyper.items()})
    except ValueError as exc:
        raise CheckpointFormatError(f"bad hyperparameter value: {exc}") from None

    arrays = []
    for name, shape in tensors:
        nbytes = 4 * int(np.prod(shape))
        if offset + nbytes > len(blob):
            have = max(len(blob) - offset, 0) // 4
            raise CheckpointCorruptError(
                f"tensor {name!r} declares {nbytes // 4} values but only {have} are present")
        arrays.append((name, np.frombuffer(blob, dtype="<f4", count=nbytes // 4, offset=offset).reshape(shape)))
        offset += nbytes
    if offset != len(blob):
        raise CheckpointCorruptError(f"{len(blob) - offset} trailing bytes after the last tensor")

    store = ParameterStore()
    for name, arr in arrays:
        store.add(name, arr.astype(np.float64))
    return store, config


def load_model(path, expected: ModelConfig | None = None) -> SeqCopyNet:
    """Load a checkpoint and check it against the model layout (and ``expected``)."""
    store, config = load_checkpoint(path)
    if expected is not None and expected != config:
        raise IncompatibleCheckpointError(f"checkpoint config {config} differs from expected {expected}")
    want = parameter_shapes(config)
    got = {name: store.params[name].shape for name in store}
    if list(want) != list(got) or any(tuple(want[k]) != got[k] for k in want):
        bad = [k for k in set(want) | set(got) if tuple(want.get(k, ())) != got.get(k)]
        raise IncompatibleCheckpointError(f"tensor layout mismatch: {sorted(bad)}")
    return SeqCopyNet(config, store)
