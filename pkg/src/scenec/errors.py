"""Typed errors raised across the pipeline.

Every parser and stage failure maps to one of these classes so callers can
distinguish bad input (schema, bytes) from bad configuration or internal
inconsistency.
"""


class SceneCompilerError(Exception):
    """Base class for all scenec errors."""


# --- ingest ---------------------------------------------------------------

class MissingFile(SceneCompilerError):
    pass


class SchemaViolation(SceneCompilerError):
    """Input violates the documented schema; message names the offending field."""


class EmptyScene(SceneCompilerError):
    """Scene record carries no ego poses."""


class XmlMalformed(SceneCompilerError):
    pass


class UnresolvedNodeRef(SceneCompilerError):
    """OSM way references a node id absent from the extract."""


class DegenerateFootprint(SceneCompilerError):
    """Building way with fewer than 3 distinct vertices."""


class TruncatedRecord(SceneCompilerError):
    """Binary point stream ends mid-record or fails its header check."""


class NonFinitePoint(TruncatedRecord):
    """Point with NaN/inf coordinate."""


# --- geometry -------------------------------------------------------------

class DegenerateInput(SceneCompilerError):
    """Geometric input without enough rank (e.g. all points collinear)."""


class TriangulationFailure(SceneCompilerError):
    pass


# --- placement ------------------------------------------------------------

class NoAssetForCategory(SceneCompilerError):
    """Catalog has no asset compatible with an annotated category."""


class NoCameraRig(SceneCompilerError):
    pass


# --- background -----------------------------------------------------------

class EmptyDensity(SceneCompilerError):
    """Sampling requested from an all-zero density grid."""


# --- scene ----------------------------------------------------------------

class DanglingAssetRef(SceneCompilerError):
    pass


class CameraBelowGround(SceneCompilerError):
    pass


class SchemaVersionMismatch(SceneCompilerError):
    pass


class CorruptStream(SceneCompilerError):
    pass


class MeshLoadFailure(SceneCompilerError):
    pass


# --- annotate -------------------------------------------------------------

class DegenerateCamera(SceneCompilerError):
    """Camera intrinsics are not invertible."""


class UnknownClassId(SceneCompilerError):
    pass


# --- post -----------------------------------------------------------------

class EmptyImage(SceneCompilerError):
    pass


# --- cli ------------------------------------------------------------------

class OsmUnavailable(SceneCompilerError):
    """No cached OSM extract and fetching is disabled."""


class ConfigError(SceneCompilerError):
    pass


class StageFailure(SceneCompilerError):
    """A pipeline stage failed; carries the scene id for context."""

    def __init__(self, scene_id: str, stage: str, cause: Exception):
        super().__init__(f"scene {scene_id!r}: stage {stage!r} failed: {cause}")
        self.scene_id = scene_id
        self.stage = stage
        self.cause = cause
