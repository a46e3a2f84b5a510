"""Type definitions for deep Chan-Vese segmentation."""

from typing import Literal

import numpy as np
import numpy.typing as npt
import torch

# JSON type hierarchy for reports and diagnostic dumps
type JSONPrimitive = str | int | float | bool | None
type JSONValue = JSONPrimitive | list["JSONValue"] | dict[str, "JSONValue"]
type JSONObject = dict[str, JSONValue]

type FloatArray = npt.NDArray[np.float64]
type IntArray = npt.NDArray[np.int64]
type BoolArray = npt.NDArray[np.bool_]

# Per-pixel relaxation variables: φ is (H, W), Φ is (N, H, W)
type LevelField = torch.Tensor
# Per-pixel 2-vectors shaped (..., 2, H, W); index 0 vertical, 1 horizontal
type SplitField = torch.Tensor

type SyntheticKind = Literal["two_gaussian_disk", "three_region_stripes", "texture_overlap"]
type Activation = Literal["silu", "softplus", "sigmoid", "relu"]
type Normalization = Literal["none", "instance"]
type OptimizerName = Literal["adam", "sgd"]
type MatchMethod = Literal["exhaustive", "hungarian"]
