"""Parameter checkpoints: a flat named-array archive plus a JSON manifest.

``<dir>/<name>.npz`` holds one array per state-dict entry; ``<dir>/<name>.json`` records the
entry names, shapes and dtypes, the network spec and free-form metadata.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from loguru import logger
from pydantic import BaseModel, Field
from torch import nn

from .exceptions import DimensionMismatchError, ImageIOError
from .models import NetworkSpec
from .types import JSONObject


class ArrayEntry(BaseModel):
    """One named parameter array."""

    name: str = Field(..., description="State-dict key")
    shape: list[int] = Field(..., description="Array shape")
    dtype: str = Field(..., description="numpy dtype name")


class CheckpointManifest(BaseModel):
    """Sidecar description of a checkpoint archive."""

    name: str = Field(..., description="Checkpoint name (archive stem)")
    kind: str = Field(..., description="Module class name")
    spec: NetworkSpec = Field(..., description="Network architecture")
    entries: list[ArrayEntry] = Field(default_factory=list)
    metadata: JSONObject = Field(default_factory=dict)


def checkpoint_paths(directory: Path, name: str) -> tuple[Path, Path]:
    """Archive and manifest paths of checkpoint ``name``."""
    return directory / f"{name}.npz", directory / f"{name}.json"


def save_checkpoint(
    module: nn.Module,
    directory: Path,
    name: str,
    spec: NetworkSpec,
    metadata: JSONObject | None = None,
) -> CheckpointManifest:
    """Write a module's state dict and manifest.

    Raises:
        ImageIOError: If the directory is not writable
    """
    arrays = {key: value.detach().to("cpu").numpy() for key, value in module.state_dict().items()}
    manifest = CheckpointManifest(
        name=name,
        kind=type(module).__name__,
        spec=spec,
        entries=[
            ArrayEntry(name=key, shape=list(a.shape), dtype=str(a.dtype)) for key, a in arrays.items()
        ],
        metadata=metadata or {},
    )
    archive, manifest_path = checkpoint_paths(directory, name)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        with archive.open("wb") as f:
            np.savez(f, **arrays)  # pyright: ignore[reportArgumentType]
        _ = manifest_path.write_text(manifest.model_dump_json(indent=2))
    except OSError as e:
        raise ImageIOError(archive, str(e)) from e
    logger.debug(f"Saved checkpoint {archive} ({len(arrays)} arrays)")
    return manifest


def load_checkpoint(directory: Path, name: str) -> tuple[dict[str, torch.Tensor], CheckpointManifest]:
    """Read a checkpoint written by :func:`save_checkpoint`.

    Returns:
        Tuple of (state dict, manifest)

    Raises:
        ImageIOError: If either file is missing or unreadable
        DimensionMismatchError: If an archived array disagrees with the manifest
    """
    archive, manifest_path = checkpoint_paths(directory, name)
    try:
        manifest = CheckpointManifest.model_validate_json(manifest_path.read_text())
        with np.load(archive) as data:
            state = {key: torch.from_numpy(np.array(data[key])) for key in data.files}
    except (OSError, ValueError) as e:
        raise ImageIOError(archive, str(e)) from e

    for entry in manifest.entries:
        if entry.name not in state:
            raise DimensionMismatchError(f"checkpoint entry {entry.name}", entry.shape, None)
        actual = list(state[entry.name].shape)
        if actual != entry.shape:
            raise DimensionMismatchError(f"checkpoint entry {entry.name}", entry.shape, actual)
    return state, manifest


def restore_into(module: nn.Module, directory: Path, name: str) -> CheckpointManifest:
    """Load checkpoint ``name`` into an already built module."""
    state, manifest = load_checkpoint(directory, name)
    _ = module.load_state_dict(state)
    return manifest
