"""
Checkpoint directories.

    params.bin      model state (parameters and BatchNorm buffers)
    params.txt      name<TAB>shape per line, same order as params.bin
    optimizer.bin   Adam moments and step counts
    meta.json       role, epoch, config hash, model switches, optimizer
                    hyper-parameters and the per-epoch training history

Binary entries are `[u32 name_len][name utf-8][u32 ndim][u32 dims...]`
followed by the little-endian float32 payload. Writing identical content
produces identical bytes.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from canonslr.backbone import Recognizer
from canonslr.errors import ArtifactIOError, DataIntegrityError, InvalidArgumentError

PARAMS_FILE = "params.bin"
PARAMS_MANIFEST_FILE = "params.txt"
OPTIMIZER_FILE = "optimizer.bin"
META_FILE = "meta.json"
ROLES = ("teacher", "student")

_U32 = np.dtype("<u4")
_F32 = np.dtype("<f4")


@dataclass
class Checkpoint:
    """A trained recognizer together with everything needed to rebuild it."""

    role: str
    epoch: int
    config_hash: str
    num_classes: int
    tme_stages: tuple[int, ...]
    tme_k: int
    params: dict[str, np.ndarray]
    optimizer_state: dict[str, np.ndarray] = field(default_factory=dict)
    param_groups: list[dict] = field(default_factory=list)
    history: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if self.role not in ROLES:
            raise InvalidArgumentError(f"Checkpoint role must be one of {ROLES}, got {self.role!r}")

    def build_model(self) -> Recognizer:
        """Instantiate the recognizer and load the stored state into it."""
        model = Recognizer(self.num_classes, tme_stages=self.tme_stages, tme_top_k=self.tme_k)
        load_params(model, self.params)
        return model

    def optimizer_state_dict(self) -> dict:
        """Rebuild a `torch.optim.Adam.state_dict()` from the stored arrays."""
        state = {}
        for name, array in self.optimizer_state.items():
            _, index, key = name.split(".")
            state.setdefault(int(index), {})[key] = torch.from_numpy(array.copy())
        return {"state": state, "param_groups": [dict(group) for group in self.param_groups]}


def encode_entries(arrays: dict) -> bytes:
    """Serialise an ordered name -> array mapping into the binary entry format."""
    chunks = []
    for name, array in arrays.items():
        encoded = name.encode("utf-8")
        array = np.asarray(array, dtype=_F32)
        chunks.append(np.array([len(encoded)], dtype=_U32).tobytes())
        chunks.append(encoded)
        chunks.append(np.array([array.ndim, *array.shape], dtype=_U32).tobytes())
        chunks.append(array.tobytes())
    return b"".join(chunks)


def decode_entries(raw: bytes, source="<bytes>") -> dict[str, np.ndarray]:
    """Inverse of `encode_entries`."""
    arrays = {}
    offset = 0

    def take(count: int) -> bytes:
        nonlocal offset
        if offset + count > len(raw):
            raise DataIntegrityError(f"{source}: truncated checkpoint entry")
        chunk = raw[offset:offset + count]
        offset += count
        return chunk

    while offset < len(raw):
        name_len = int(np.frombuffer(take(4), dtype=_U32)[0])
        name = take(name_len).decode("utf-8")
        ndim = int(np.frombuffer(take(4), dtype=_U32)[0])
        shape = tuple(int(d) for d in np.frombuffer(take(4 * ndim), dtype=_U32)) if ndim else ()
        count = int(np.prod(shape)) if shape else 1
        arrays[name] = np.frombuffer(take(4 * count), dtype=_F32).reshape(shape).copy()
    return arrays


def model_params(model: torch.nn.Module) -> dict[str, np.ndarray]:
    """State dict of `model` as float32 numpy arrays, in state-dict order."""
    return {name: tensor.detach().cpu().float().numpy().copy() for name, tensor in model.state_dict().items()}


def load_params(model: torch.nn.Module, params: dict[str, np.ndarray]) -> None:
    """Copy stored arrays into `model`; DataIntegrityError if the shape manifests differ."""
    expected = {name: tuple(t.shape) for name, t in model.state_dict().items()}
    stored = {name: tuple(a.shape) for name, a in params.items()}
    if expected != stored:
        missing = sorted(set(expected) - set(stored))
        unexpected = sorted(set(stored) - set(expected))
        mismatched = sorted(n for n in set(expected) & set(stored) if expected[n] != stored[n])
        raise DataIntegrityError(
            f"Checkpoint does not fit the model (missing={missing[:3]}, unexpected={unexpected[:3]}, "
            f"shape mismatch={mismatched[:3]})"
        )
    state = {name: torch.from_numpy(array.copy()) for name, array in params.items()}
    model.load_state_dict(state)


def optimizer_arrays(optimizer: torch.optim.Optimizer) -> tuple[dict[str, np.ndarray], list[dict]]:
    """Flatten an optimizer state dict into named arrays plus JSON-able param groups."""
    state_dict = optimizer.state_dict()
    arrays = {}
    for index in sorted(state_dict["state"]):
        for key in sorted(state_dict["state"][index]):
            value = state_dict["state"][index][key]
            value = value.detach().cpu().float().numpy() if torch.is_tensor(value) else np.float32(value)
            arrays[f"state.{index}.{key}"] = np.asarray(value, dtype=np.float32)
    groups = json.loads(json.dumps(state_dict["param_groups"], default=list))
    return arrays, groups


def save_checkpoint(checkpoint: Checkpoint, directory) -> Path:
    """Write `checkpoint` into `directory` (created if missing)."""
    directory = Path(directory)
    manifest = "".join(
        f"{name}\t{','.join(str(d) for d in array.shape)}\n" for name, array in checkpoint.params.items()
    )
    meta = {
        "role": checkpoint.role,
        "epoch": checkpoint.epoch,
        "config_hash": checkpoint.config_hash,
        "model": {
            "num_classes": checkpoint.num_classes,
            "tme_stages": list(checkpoint.tme_stages),
            "tme_k": checkpoint.tme_k,
        },
        "param_groups": checkpoint.param_groups,
        "history": checkpoint.history,
    }
    try:
        directory.mkdir(parents=True, exist_ok=True)
        (directory / PARAMS_FILE).write_bytes(encode_entries(checkpoint.params))
        (directory / PARAMS_MANIFEST_FILE).write_text(manifest, encoding="utf-8")
        (directory / OPTIMIZER_FILE).write_bytes(encode_entries(checkpoint.optimizer_state))
        (directory / META_FILE).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise ArtifactIOError(directory, f"Failed to write checkpoint ({e.strerror})") from e
    return directory


def load_checkpoint(directory) -> Checkpoint:
    """Read a checkpoint directory written by `save_checkpoint`."""
    directory = Path(directory)
    try:
        meta = json.loads((directory / META_FILE).read_text(encoding="utf-8"))
        params_raw = (directory / PARAMS_FILE).read_bytes()
        optimizer_raw = (directory / OPTIMIZER_FILE).read_bytes()
    except OSError as e:
        raise ArtifactIOError(directory, f"Failed to read checkpoint ({e.strerror})") from e
    except json.JSONDecodeError as e:
        raise DataIntegrityError(f"{directory / META_FILE}: invalid JSON") from e

    try:
        model_meta = meta["model"]
        return Checkpoint(
            role=meta["role"],
            epoch=int(meta["epoch"]),
            config_hash=meta["config_hash"],
            num_classes=int(model_meta["num_classes"]),
            tme_stages=tuple(int(s) for s in model_meta["tme_stages"]),
            tme_k=int(model_meta["tme_k"]),
            params=decode_entries(params_raw, directory / PARAMS_FILE),
            optimizer_state=decode_entries(optimizer_raw, directory / OPTIMIZER_FILE),
            param_groups=meta.get("param_groups", []),
            history=meta.get("history", []),
        )
    except KeyError as e:
        raise DataIntegrityError(f"{directory / META_FILE}: missing field {e}") from e
