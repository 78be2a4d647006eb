"""Pointwise 20-class -> 13-class raster reduction."""
from __future__ import annotations

import numpy as np

from ..errors import UnknownClassId
from ..taxonomy import DEFAULT_TAXONOMY, ClassTaxonomy


def remap_semantic(raster20: np.ndarray, taxonomy: ClassTaxonomy = DEFAULT_TAXONOMY) -> np.ndarray:
    table = taxonomy.remap_table()
    raster = np.asarray(raster20)
    if raster.size and int(raster.max()) >= len(table):
        raise UnknownClassId(f"class id {int(raster.max())} outside the 20-class set")
    return table[raster]
