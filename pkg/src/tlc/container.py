"""Model container: manifest.json plus weights.bin of little-endian float32.

Shared by every trainable module. Tensors are concatenated in manifest order;
loading restores them into float64 torch modules.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import torch

FORMAT_VERSION = 1


class ContainerError(RuntimeError):
    pass


def save_container(directory: str | Path, kind: str, config: dict,
                   tensors: dict[str, torch.Tensor | np.ndarray]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    blobs = []
    for name, tensor in tensors.items():
        if isinstance(tensor, torch.Tensor):
            array = tensor.detach().cpu().numpy()
        else:
            array = np.asarray(tensor)
        blob = np.ascontiguousarray(array, dtype="<f4").tobytes()
        entries.append(
            {
                "name": name,
                "shape": list(array.shape),
                "dtype": "f32le",
                "offset": offset,
                "length": len(blob),
            }
        )
        offset += len(blob)
        blobs.append(blob)
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "config": config,
        "tensors": entries,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=1))
    (directory / "weights.bin").write_bytes(b"".join(blobs))


def load_container(directory: str | Path) -> tuple[str, dict, dict[str, np.ndarray]]:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise ContainerError(f"no manifest.json under {directory}")
    manifest = json.loads(manifest_path.read_text())
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise ContainerError(
            f"container format version {version} unsupported (expected {FORMAT_VERSION})"
        )
    raw = (directory / "weights.bin").read_bytes()
    tensors = {}
    for entry in manifest["tensors"]:
        chunk = raw[entry["offset"]: entry["offset"] + entry["length"]]
        array = np.frombuffer(chunk, dtype="<f4").reshape(entry["shape"])
        tensors[entry["name"]] = array.astype(np.float64)
    return manifest["kind"], manifest["config"], tensors


def manifest_digest(directory: str | Path) -> str:
    return hashlib.sha256((Path(directory) / "manifest.json").read_bytes()).hexdigest()


def save_module(directory: str | Path, kind: str, config: dict, module: torch.nn.Module) -> None:
    save_container(directory, kind, config, dict(module.state_dict()))


def load_into_module(directory: str | Path, module: torch.nn.Module) -> dict:
    _, config, tensors = load_container(directory)
    state = {name: torch.from_numpy(arr.copy()) for name, arr in tensors.items()}
    module.load_state_dict(state)
    module.to(torch.float64)
    return config
