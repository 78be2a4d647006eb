"""Class taxonomy: the native 20-label set, its 13-class reduction, and colors.

The 20-class list order defines the integer ids used in rasters and LiDAR
labels. The 13-class remap ships as data and can be overridden; it must stay
total over the 20 labels and surjective onto the 13.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import SchemaViolation

CLASS_NAMES_20 = (
    "sky",
    "car",
    "bus",
    "jeep",
    "truck",
    "van",
    "human",
    "building",
    "road",
    "barrier",
    "ground",
    "cycle rider",
    "construction (vehicle)",
    "bushes",
    "trees",
    "motorcycle rider",
    "traffic cone",
    "traffic sign",
    "sidewalk",
    "void",
)

CLASS_NAMES_13 = (
    "void",
    "car",
    "bus",
    "truck",
    "person",
    "rider",
    "road",
    "sidewalk",
    "building",
    "traffic poles",
    "vegetation",
    "terrain",
    "sky",
)

DEFAULT_REMAP_13 = {
    "sky": "sky",
    "car": "car",
    "bus": "bus",
    "jeep": "car",
    "truck": "truck",
    "van": "car",
    "human": "person",
    "building": "building",
    "road": "road",
    "barrier": "void",
    "ground": "terrain",
    "cycle rider": "rider",
    "construction (vehicle)": "truck",
    "bushes": "vegetation",
    "trees": "vegetation",
    "motorcycle rider": "rider",
    "traffic cone": "traffic poles",
    "traffic sign": "traffic poles",
    "sidewalk": "sidewalk",
    "void": "void",
}

# Visualization palette (RGB), one entry per 20-class label.
DEFAULT_COLORS = {
    "sky": (70, 130, 180),
    "car": (0, 0, 142),
    "bus": (0, 60, 100),
    "jeep": (0, 0, 90),
    "truck": (0, 0, 70),
    "van": (0, 0, 110),
    "human": (220, 20, 60),
    "building": (70, 70, 70),
    "road": (128, 64, 128),
    "barrier": (190, 153, 153),
    "ground": (152, 251, 152),
    "cycle rider": (255, 0, 0),
    "construction (vehicle)": (0, 80, 100),
    "bushes": (107, 142, 35),
    "trees": (80, 120, 30),
    "motorcycle rider": (255, 0, 100),
    "traffic cone": (250, 170, 30),
    "traffic sign": (220, 220, 0),
    "sidewalk": (244, 35, 232),
    "void": (0, 0, 0),
}


@dataclass(frozen=True)
class ClassTaxonomy:
    """Ordered 20-label set plus a total, surjective 20 -> 13 reduction."""

    names: tuple = CLASS_NAMES_20
    names13: tuple = CLASS_NAMES_13
    remap13: dict = field(default_factory=lambda: dict(DEFAULT_REMAP_13))
    colors: dict = field(default_factory=lambda: dict(DEFAULT_COLORS))

    def __post_init__(self):
        missing = [n for n in self.names if n not in self.remap13]
        if missing:
            raise SchemaViolation(f"remap13 not total; missing {missing}")
        targets = set(self.remap13[n] for n in self.names)
        if targets != set(self.names13):
            raise SchemaViolation(
                f"remap13 not surjective onto the 13-class set; covers {sorted(targets)}"
            )
        if self.remap13["void"] != "void":
            raise SchemaViolation("'void' must map to 'void'")

    def id20(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaViolation(f"unknown class name {name!r}") from None

    def id13(self, name: str) -> int:
        return self.names13.index(name)

    def remap_table(self):
        """20-entry array: 20-class id -> 13-class id."""
        import numpy as np

        return np.array([self.id13(self.remap13[n]) for n in self.names], dtype=np.uint8)

    @property
    def void_id20(self) -> int:
        return self.names.index("void")

    @property
    def sky_id20(self) -> int:
        return self.names.index("sky")


DEFAULT_TAXONOMY = ClassTaxonomy()

# Annotated categories that count as vehicles for camera mounting.
VEHICLE_CLASSES = frozenset({"car", "jeep", "van", "bus", "truck", "construction (vehicle)"})
