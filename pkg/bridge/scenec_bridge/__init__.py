"""Blender bridge: import scenec interchange scenes and render RGB with Cycles.

The bridge consumes only the exported glTF file (plus an asset directory);
it never touches the compiler's internals. Run it headless:

    blender --background --python bridge.py -- scene.gltf out/ [flags]
"""

__version__ = "0.1.0"
