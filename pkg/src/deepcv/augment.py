"""Rotation/flip augmentations acting on the last two (spatial) dimensions."""

from __future__ import annotations

from typing import Literal

import torch
from pydantic import BaseModel, ConfigDict, Field

type Flip = Literal["none", "h", "v"]

_FLIPS: tuple[Flip, ...] = ("none", "h", "v")


class Augmentation(BaseModel):
    """A quarter-turn rotation followed by an optional horizontal or vertical flip."""

    model_config = ConfigDict(frozen=True)  # pyright: ignore[reportUnannotatedClassAttribute]

    quarter_turns: int = Field(0, ge=0, le=3, description="Counter-clockwise 90° turns")
    flip: Flip = Field("none", description="Flip applied after the rotation")

    @property
    def is_identity(self) -> bool:
        return self.quarter_turns == 0 and self.flip == "none"

    @classmethod
    def sample(cls, generator: torch.Generator) -> Augmentation:
        """Draw a non-identity augmentation uniformly from the 11 remaining combinations."""
        index = int(torch.randint(1, 12, (1,), generator=generator).item())
        return cls(quarter_turns=index % 4, flip=_FLIPS[index // 4])

    def apply(self, x: torch.Tensor) -> torch.Tensor:
        y = torch.rot90(x, k=self.quarter_turns, dims=(-2, -1))
        if self.flip == "h":
            y = torch.flip(y, dims=(-1,))
        elif self.flip == "v":
            y = torch.flip(y, dims=(-2,))
        return y

    def invert(self, x: torch.Tensor) -> torch.Tensor:
        y = x
        if self.flip == "h":
            y = torch.flip(y, dims=(-1,))
        elif self.flip == "v":
            y = torch.flip(y, dims=(-2,))
        return torch.rot90(y, k=-self.quarter_turns, dims=(-2, -1))

    def describe(self) -> str:
        parts = [f"rot{90 * self.quarter_turns}"] if self.quarter_turns else []
        if self.flip != "none":
            parts.append(f"{self.flip}flip")
        return "+".join(parts) or "identity"
