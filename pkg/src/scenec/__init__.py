"""scenec: compile real road-scene annotations into virtual scenes with exact ground truth."""

__version__ = "0.1.0"

SCENE_SCHEMA = "trove-scene/1"
INPUT_SCHEMA = "trove-in/1"
ASSET_SCHEMA = "trove-assets/1"
