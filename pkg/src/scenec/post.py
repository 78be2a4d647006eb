"""Dataset post-processing: statistical color transfer in CIE L*a*b* and
class-diversity curation.

The transfer adjusts per-channel mean and spread of a source image toward a
target's statistics, blended by alpha (alpha = 1 moves fully to the target,
alpha = 0 is the identity). Conversions run sRGB (IEC 61966-2-1) -> linear ->
XYZ (D65) -> L*a*b* and back, in float64.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyImage, SchemaViolation
from .taxonomy import DEFAULT_TAXONOMY, ClassTaxonomy

# sRGB <-> XYZ (D65) primaries
_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])
_DELTA = 6.0 / 29.0

DEFAULT_ALPHA = 0.8
FLAT_SIGMA = 1e-9   # channel spread below this counts as flat (sigma_s = 0 rule)


@dataclass(frozen=True)
class LabStats:
    mean: np.ndarray   # (L*, a*, b*)
    std: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=np.float64).reshape(3)
        s = np.asarray(self.std, dtype=np.float64).reshape(3)
        if np.any(s < 0):
            raise SchemaViolation("std must be non-negative")
        # small slack: the sRGB primaries matrix maps white to Y = 1 + ~4e-8
        if not -1e-2 <= m[0] <= 100.0 + 1e-2:
            raise SchemaViolation(f"L* mean out of range: {m[0]}")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "std", s)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @staticmethod
    def from_dict(d: dict) -> "LabStats":
        return LabStats(mean=np.array(d["mean"]), std=np.array(d["std"]))


def srgb_to_linear(srgb01: np.ndarray) -> np.ndarray:
    s = np.asarray(srgb01, dtype=np.float64)
    return np.where(s <= 0.04045, s / 12.92, ((s + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(lin: np.ndarray) -> np.ndarray:
    l = np.clip(np.asarray(lin, dtype=np.float64), 0.0, 1.0)
    return np.where(l <= 0.0031308, l * 12.92, 1.055 * l ** (1.0 / 2.4) - 0.055)


def srgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """8-bit (or 0..1 float) sRGB -> CIE L*a*b*."""
    arr = np.asarray(rgb)
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float64) / 255.0
    lin = srgb_to_linear(arr)
    xyz = lin @ _RGB_TO_XYZ.T
    t = xyz / _WHITE_D65
    f = np.where(t > _DELTA ** 3, np.cbrt(t), t / (3 * _DELTA ** 2) + 4.0 / 29.0)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([L, a, b], axis=-1)


def lab_to_srgb(lab: np.ndarray) -> np.ndarray:
    """CIE L*a*b* -> 8-bit sRGB, clamped to gamut."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    t = np.where(f > _DELTA, f ** 3, 3 * _DELTA ** 2 * (f - 4.0 / 29.0))
    xyz = t * _WHITE_D65
    lin = xyz @ _XYZ_TO_RGB.T
    srgb = linear_to_srgb(lin)
    return np.clip(np.rint(srgb * 255.0), 0, 255).astype(np.uint8)


def lab_stats(image: np.ndarray) -> LabStats:
    """Per-channel mean and population std in L*a*b*."""
    arr = np.asarray(image)
    if arr.size == 0:
        raise EmptyImage("cannot take statistics of an empty image")
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise SchemaViolation(f"expected (H, W, 3) RGB, got {arr.shape}")
    lab = srgb_to_lab(arr).reshape(-1, 3)
    return LabStats(mean=lab.mean(axis=0), std=lab.std(axis=0))


def transfer_lab(lab: np.ndarray, target_stats: LabStats, alpha: float) -> np.ndarray:
    """Lab-space core of the transfer: out = (src - mu_s) * (sigma_hat / sigma_s)
    + mu_hat with mu_hat, sigma_hat linear blends of source and target stats.
    A flat source channel (sigma_s = 0) snaps to mu_hat."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    flat = lab.reshape(-1, 3)
    mu_s = flat.mean(axis=0)
    sigma_s = flat.std(axis=0)
    mu_hat = (1.0 - alpha) * mu_s + alpha * target_stats.mean
    sigma_hat = (1.0 - alpha) * sigma_s + alpha * target_stats.std
    live = sigma_s > FLAT_SIGMA
    ratio = np.where(live, sigma_hat / np.where(live, sigma_s, 1.0), 0.0)
    return (lab - mu_s) * ratio + mu_hat


def color_transfer(source: np.ndarray, target_stats: LabStats, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Move source Lab statistics toward the target's, blended by alpha,
    returning 8-bit sRGB clamped to gamut."""
    lab = srgb_to_lab(np.asarray(source))
    return lab_to_srgb(transfer_lab(lab, target_stats, alpha))


# --- curation -----------------------------------------------------------------

@dataclass(frozen=True)
class SampleReport:
    image_id: str
    distinct_class_count: int
    fractions: np.ndarray   # per 13-class pixel fraction, sums to 1
    kept: bool


@dataclass(frozen=True)
class CurationReport:
    samples: tuple[SampleReport, ...]
    aggregate: np.ndarray   # per-class pixel counts over the kept set
    min_classes: int
    pixel_floor: float

    def kept_ids(self) -> list[str]:
        return [s.image_id for s in self.samples if s.kept]


def curate(rasters, min_classes: int = 6, pixel_floor: float = 0.001,
           taxonomy: ClassTaxonomy = DEFAULT_TAXONOMY,
           count_void: bool = False) -> CurationReport:
    """Keep samples whose present-class count reaches min_classes.

    `rasters` iterates (image_id, 13-class raster). A class is present when
    its pixel fraction reaches pixel_floor; void is excluded from the count
    unless count_void is set.
    """
    n_classes = len(taxonomy.names13)
    void_id = taxonomy.id13("void")
    samples = []
    aggregate = np.zeros(n_classes, dtype=np.int64)
    for image_id, raster in rasters:
        raster = np.asarray(raster)
        counts = np.bincount(raster.ravel(), minlength=n_classes).astype(np.int64)
        total = counts.sum()
        if total == 0:
            raise EmptyImage(f"raster {image_id!r} has no pixels")
        fractions = counts / total
        present = fractions >= pixel_floor
        if not count_void:
            present[void_id] = False
        distinct = int(np.count_nonzero(present))
        kept = distinct >= min_classes
        if kept:
            aggregate += counts
        samples.append(SampleReport(
            image_id=str(image_id),
            distinct_class_count=distinct,
            fractions=fractions,
            kept=kept,
        ))
    return CurationReport(samples=tuple(samples), aggregate=aggregate,
                          min_classes=min_classes, pixel_floor=pixel_floor)


def write_curation_csv(report: CurationReport, path,
                       taxonomy: ClassTaxonomy = DEFAULT_TAXONOMY) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["image_id", "distinct_class_count", "kept"]
                        + [f"frac_{n.replace(' ', '_')}" for n in taxonomy.names13])
        for s in report.samples:
            writer.writerow([s.image_id, s.distinct_class_count, int(s.kept)]
                            + [f"{v:.6f}" for v in s.fractions])


def write_curation_aggregate(report: CurationReport, path,
                             taxonomy: ClassTaxonomy = DEFAULT_TAXONOMY) -> None:
    doc = {
        "min_classes": report.min_classes,
        "pixel_floor": report.pixel_floor,
        "kept": len(report.kept_ids()),
        "total": len(report.samples),
        "pixel_histogram": {
            name: int(report.aggregate[i]) for i, name in enumerate(taxonomy.names13)
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))
