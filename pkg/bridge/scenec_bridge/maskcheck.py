"""Instance-mask agreement between the compiler's rasterizer and a Blender
object-index pass. Pure numpy; rendering happens elsewhere."""
from __future__ import annotations

import numpy as np


def edge_pixels(mask: np.ndarray) -> np.ndarray:
    """Pixels whose 4-neighborhood crosses an instance boundary."""
    edges = np.zeros(mask.shape, dtype=bool)
    edges[:-1, :] |= mask[:-1, :] != mask[1:, :]
    edges[1:, :] |= mask[:-1, :] != mask[1:, :]
    edges[:, :-1] |= mask[:, :-1] != mask[:, 1:]
    edges[:, 1:] |= mask[:, :-1] != mask[:, 1:]
    return edges


def mask_agreement(a: np.ndarray, b: np.ndarray, ignore_edges: bool = True) -> float:
    """Fraction of (non-edge) pixels on which the two instance masks agree."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    consider = np.ones(a.shape, dtype=bool)
    if ignore_edges:
        consider &= ~(edge_pixels(a) | edge_pixels(b))
    total = int(consider.sum())
    if total == 0:
        return 1.0
    return float(np.count_nonzero((a == b) & consider)) / total
