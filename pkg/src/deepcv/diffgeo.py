"""Discrete gradient, isotropic total variation and the shrinkage (proximal) operator.

Split fields are tensors shaped (..., 2, H, W): index 0 holds the vertical difference
v[i, j] − v[i−1, j], index 1 the horizontal difference v[i, j] − v[i, j−1]. The first row
(vertical) and first column (horizontal) are zero.
"""

import torch

from .exceptions import InvalidInputError
from .types import SplitField


def forward_grad(field: torch.Tensor) -> SplitField:
    """Backward-indexed differences of a (..., H, W) field with zero first row/column.

    Args:
        field: Real tensor whose last two dimensions are H×W (H, W ≥ 2)

    Returns:
        Split field shaped (..., 2, H, W)

    Raises:
        InvalidInputError: If the field has fewer than two rows or columns
    """
    if field.dim() < 2 or field.shape[-2] < 2 or field.shape[-1] < 2:
        raise InvalidInputError(
            f"forward_grad needs an H×W field with H, W >= 2, got shape {tuple(field.shape)}"
        )
    vertical = torch.zeros_like(field)
    horizontal = torch.zeros_like(field)
    vertical[..., 1:, :] = field[..., 1:, :] - field[..., :-1, :]
    horizontal[..., :, 1:] = field[..., :, 1:] - field[..., :, :-1]
    return torch.stack((vertical, horizontal), dim=-3)


def pixel_norm(g: SplitField) -> torch.Tensor:
    """Per-pixel Euclidean norm of a split field, shaped (..., H, W)."""
    return torch.linalg.vector_norm(g, dim=-3)


def tv_norm(g: SplitField) -> torch.Tensor:
    """Isotropic ‖g‖_{1,2}: the sum over pixels of the per-pixel 2-norms."""
    return pixel_norm(g).sum()


def shrinkage(g: SplitField, nu: float, lam: float) -> SplitField:
    """Exact minimizer of ν‖w‖_{1,2} + (λ/2)‖w − g‖² over w.

    Per pixel ``w = max(‖g‖ − ν/λ, 0) · g / ‖g‖`` and ``w = 0`` where ``‖g‖ = 0``.

    Args:
        g: Split field to shrink
        nu: TV weight ν (> 0)
        lam: Coupling weight λ (> 0)

    Returns:
        Split field of the same shape as ``g``

    Raises:
        InvalidInputError: If ν or λ is not positive
    """
    if nu <= 0 or lam <= 0:
        raise InvalidInputError(f"shrinkage needs nu > 0 and lambda > 0, got nu={nu}, lam={lam}")
    threshold = nu / lam
    norm = torch.linalg.vector_norm(g, dim=-3, keepdim=True)
    safe = torch.where(norm > 0, norm, torch.ones_like(norm))
    scale = torch.where(norm > 0, torch.clamp(norm - threshold, min=0.0) / safe, torch.zeros_like(norm))
    return scale * g


def coupling_energy(w: SplitField, g: SplitField, nu: float, lam: float) -> torch.Tensor:
    """ν‖w‖_{1,2} + (λ/2)‖w − g‖², the part of the split energy that depends on w."""
    return nu * tv_norm(w) + 0.5 * lam * torch.sum((w - g) ** 2)
