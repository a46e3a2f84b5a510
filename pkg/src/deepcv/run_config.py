"""Replayable run configuration stored as flat dotted-key TOML.

Example file::

    command = "segment"
    seed = 0
    paths.input = "disk.png"
    hp.nu = 1.0
    hp.priors.0.mean = [10.0]
    solver.max_iters = 1000

Lists of objects use numeric key segments. ``None`` values are omitted and fall back to defaults.
"""

from __future__ import annotations

import json
import math
import tomllib
from collections.abc import Mapping
from pathlib import Path

from pydantic import BaseModel, Field

from .exceptions import ImageIOError, InvalidInputError
from .models import DatasetTrainerConfig, Hyperparams, SolverConfig

type FlatValue = str | int | float | bool | list[str | int | float | bool]
type FlatConfig = dict[str, FlatValue]


class RunConfig(BaseModel):
    """Everything needed to replay one CLI command."""

    command: str = Field(..., description="CLI command name")
    seed: int = Field(0, description="Seed shared by every random stream of the run")
    reproducible: bool = Field(False, description="Deterministic kernels, single thread")
    paths: dict[str, str] = Field(default_factory=dict, description="Input/output paths")
    options: dict[str, str | int | float | bool] = Field(
        default_factory=dict, description="Command-specific scalar options"
    )
    hp: Hyperparams | None = Field(None, description="Energy hyperparameters")
    solver: SolverConfig | None = Field(None, description="Single-image / multi-phase settings")
    trainer: DatasetTrainerConfig | None = Field(None, description="Dataset trainer settings")


# ============================================================================
# Flattening
# ============================================================================


def flatten(data: Mapping[str, object], prefix: str = "") -> FlatConfig:
    """Nested dict → {"a.b.c": scalar or list of scalars}; None values are dropped."""
    flat: FlatConfig = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if value is None:
            continue
        if isinstance(value, Mapping):
            flat.update(flatten(value, f"{name}."))  # pyright: ignore[reportUnknownArgumentType]
        elif isinstance(value, list | tuple) and any(isinstance(v, Mapping) for v in value):  # pyright: ignore[reportUnknownVariableType]
            for index, item in enumerate(value):  # pyright: ignore[reportUnknownVariableType, reportUnknownArgumentType]
                flat.update(flatten(item, f"{name}.{index}."))  # pyright: ignore[reportUnknownArgumentType]
        elif isinstance(value, list | tuple):
            flat[name] = list(value)  # pyright: ignore[reportUnknownArgumentType]
        elif isinstance(value, str | int | float | bool):
            flat[name] = value
        else:
            flat[name] = str(value)
    return flat


def _listify(node: object) -> object:
    if not isinstance(node, dict):
        return node
    children = {k: _listify(v) for k, v in node.items()}  # pyright: ignore[reportUnknownVariableType]
    if children and all(isinstance(k, str) and k.isdigit() for k in children):
        return [children[k] for k in sorted(children, key=int)]
    return children


def unflatten(flat: Mapping[str, object]) -> dict[str, object]:
    """Inverse of :func:`flatten`; numeric segments become list indices."""
    root: dict[str, object] = {}
    for dotted, value in flat.items():
        node = root
        *parents, leaf = dotted.split(".")
        for part in parents:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise InvalidInputError(f"Config key {dotted!r} conflicts with a scalar")
            node = child  # pyright: ignore[reportUnknownVariableType]
        node[leaf] = value
    result = _listify(root)
    assert isinstance(result, dict)
    return result  # pyright: ignore[reportUnknownVariableType]


def _toml_scalar(value: str | int | float | bool) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return json.dumps(value, ensure_ascii=False)


def _toml_key(dotted: str) -> str:
    return ".".join(
        part if part.replace("_", "").replace("-", "").isalnum() else json.dumps(part)
        for part in dotted.split(".")
    )


def dumps(flat: FlatConfig) -> str:
    lines: list[str] = []
    for key, value in flat.items():
        rendered = (
            "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
            if isinstance(value, list)
            else _toml_scalar(value)
        )
        lines.append(f"{_toml_key(key)} = {rendered}")
    return "\n".join(lines) + "\n"


# ============================================================================
# File I/O
# ============================================================================


def to_flat(config: RunConfig) -> FlatConfig:
    return flatten(config.model_dump(mode="json"))


def from_flat(flat: Mapping[str, object]) -> RunConfig:
    """Validate a flat mapping as a RunConfig (raises pydantic ValidationError)."""
    return RunConfig.model_validate(unflatten(flat))


def save_run_config(config: RunConfig, path: Path) -> None:
    """Write the resolved configuration (defaults included)."""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        _ = path.write_text(dumps(to_flat(config)))
    except OSError as e:
        raise ImageIOError(path, str(e)) from e


def load_flat(path: Path) -> FlatConfig:
    """Read a config file into its flat dotted form.

    Raises:
        ImageIOError: If the file cannot be read
        InvalidInputError: If it is not valid TOML
    """
    try:
        with path.open("rb") as f:
            data = tomllib.load(f)
    except OSError as e:
        raise ImageIOError(path, str(e)) from e
    except tomllib.TOMLDecodeError as e:
        raise InvalidInputError(f"{path}: invalid config file ({e})") from e
    return flatten(data)


def load_run_config(path: Path) -> RunConfig:
    return from_flat(load_flat(path))
