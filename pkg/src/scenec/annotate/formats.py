"""Raster file formats for ground-truth outputs.

PNG is written by hand (filter 0, fixed zlib level) so output bytes are stable
across library versions — the determinism contract covers raster files.
Supported layouts: 8-bit gray (semantic ids), 16-bit gray (instance ids),
16-bit RGB (normals). Depth uses PFM (little-endian, scale -1.0, bottom-up
rows); flow uses the Middlebury .flo layout.
"""
from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import CorruptStream

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
FLO_MAGIC = 202021.25
ZLIB_LEVEL = 6


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
    )


def _write_png(path, raw_rows: bytes, width: int, height: int, bit_depth: int,
               color_type: int) -> None:
    ihdr = struct.pack(">IIBBBBB", width, height, bit_depth, color_type, 0, 0, 0)
    idat = zlib.compress(raw_rows, ZLIB_LEVEL)
    data = PNG_SIGNATURE + _chunk(b"IHDR", ihdr) + _chunk(b"IDAT", idat) + _chunk(b"IEND", b"")
    Path(path).write_bytes(data)


def write_png_gray8(path, img: np.ndarray) -> None:
    a = np.ascontiguousarray(img, dtype=np.uint8)
    h, w = a.shape
    rows = b"".join(b"\x00" + a[y].tobytes() for y in range(h))
    _write_png(path, rows, w, h, 8, 0)


def write_png_rgb8(path, img: np.ndarray) -> None:
    a = np.ascontiguousarray(img, dtype=np.uint8)
    h, w, c = a.shape
    if c != 3:
        raise ValueError(f"expected (H, W, 3), got {a.shape}")
    rows = b"".join(b"\x00" + a[y].tobytes() for y in range(h))
    _write_png(path, rows, w, h, 8, 2)


def write_png_gray16(path, img: np.ndarray) -> None:
    a = np.ascontiguousarray(img, dtype=">u2")
    h, w = a.shape
    rows = b"".join(b"\x00" + a[y].tobytes() for y in range(h))
    _write_png(path, rows, w, h, 16, 0)


def write_png_rgb16(path, img: np.ndarray) -> None:
    a = np.ascontiguousarray(img, dtype=">u2")
    h, w, c = a.shape
    if c != 3:
        raise ValueError(f"expected (H, W, 3), got {a.shape}")
    rows = b"".join(b"\x00" + a[y].tobytes() for y in range(h))
    _write_png(path, rows, w, h, 16, 2)


def read_png(path) -> np.ndarray:
    """Minimal reader for the PNG subset this package writes (plus filters 0-4)."""
    data = Path(path).read_bytes()
    if data[:8] != PNG_SIGNATURE:
        raise CorruptStream(f"{path}: not a PNG")
    pos = 8
    width = height = bit_depth = color_type = None
    idat = b""
    while pos < len(data):
        if pos + 8 > len(data):
            raise CorruptStream(f"{path}: truncated chunk header")
        length = struct.unpack(">I", data[pos:pos + 4])[0]
        tag = data[pos + 4:pos + 8]
        payload = data[pos + 8:pos + 8 + length]
        pos += 12 + length
        if tag == b"IHDR":
            width, height, bit_depth, color_type, _, _, interlace = struct.unpack(
                ">IIBBBBB", payload)
            if interlace:
                raise CorruptStream(f"{path}: interlaced PNG unsupported")
        elif tag == b"IDAT":
            idat += payload
        elif tag == b"IEND":
            break
    if width is None:
        raise CorruptStream(f"{path}: missing IHDR")
    channels = {0: 1, 2: 3}.get(color_type)
    if channels is None or bit_depth not in (8, 16):
        raise CorruptStream(f"{path}: unsupported color type/bit depth")
    bpp = channels * bit_depth // 8
    stride = width * bpp
    raw = zlib.decompress(idat)
    if len(raw) != (stride + 1) * height:
        raise CorruptStream(f"{path}: bad scanline payload size")
    out = np.empty((height, stride), dtype=np.uint8)
    prev = np.zeros(stride, dtype=np.uint8)
    for y in range(height):
        ftype = raw[y * (stride + 1)]
        line = np.frombuffer(raw, dtype=np.uint8,
                             count=stride, offset=y * (stride + 1) + 1).copy()
        out[y] = _unfilter(line, prev, ftype, bpp, path)
        prev = out[y]
    if bit_depth == 16:
        arr = out.reshape(height, width, channels, 2)
        img = (arr[..., 0].astype(np.uint16) << 8) | arr[..., 1]
    else:
        img = out.reshape(height, width, channels)
    return img[:, :, 0] if channels == 1 else img


def _unfilter(line, prev, ftype, bpp, path):
    if ftype == 0:
        return line
    if ftype == 2:
        return (line.astype(np.int32) + prev).astype(np.uint8)
    out = np.zeros_like(line, dtype=np.int32)
    for i in range(len(line)):
        a = out[i - bpp] if i >= bpp else 0
        b = int(prev[i])
        c = int(prev[i - bpp]) if i >= bpp else 0
        x = int(line[i])
        if ftype == 1:
            out[i] = (x + a) & 0xFF
        elif ftype == 3:
            out[i] = (x + (a + b) // 2) & 0xFF
        elif ftype == 4:
            p = a + b - c
            pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
            pred = a if (pa <= pb and pa <= pc) else (b if pb <= pc else c)
            out[i] = (x + pred) & 0xFF
        else:
            raise CorruptStream(f"{path}: unknown filter type {ftype}")
    return out.astype(np.uint8)


def write_pfm(path, depth: np.ndarray) -> None:
    """Grayscale PFM, little-endian (scale -1.0), rows bottom-up per the format."""
    a = np.ascontiguousarray(depth, dtype="<f4")
    h, w = a.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    Path(path).write_bytes(header + a[::-1].tobytes())


def read_pfm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"Pf":
        raise CorruptStream(f"{path}: not a grayscale PFM")
    w, h = (int(t) for t in parts[1].split())
    scale = float(parts[2])
    dtype = "<f4" if scale < 0 else ">f4"
    img = np.frombuffer(parts[3], dtype=dtype, count=w * h).reshape(h, w)
    return img[::-1].astype(np.float32)


def write_flo(path, flow: np.ndarray) -> None:
    """Middlebury .flo: magic float, width, height, interleaved (u, v) float32."""
    a = np.ascontiguousarray(flow, dtype="<f4")
    h, w, c = a.shape
    if c != 2:
        raise ValueError(f"expected (H, W, 2), got {a.shape}")
    with open(path, "wb") as f:
        f.write(struct.pack("<fii", FLO_MAGIC, w, h))
        f.write(a.tobytes())


def read_flo(path) -> np.ndarray:
    data = Path(path).read_bytes()
    magic, w, h = struct.unpack("<fii", data[:12])
    if abs(magic - FLO_MAGIC) > 1e-3:
        raise CorruptStream(f"{path}: bad .flo magic {magic}")
    return np.frombuffer(data[12:], dtype="<f4", count=w * h * 2).reshape(h, w, 2).copy()


def write_palette(path, taxonomy) -> None:
    """JSON sidecar mapping class ids to names and display colors."""
    doc = {
        "classes20": [
            {"id": i, "name": n, "color": list(taxonomy.colors[n])}
            for i, n in enumerate(taxonomy.names)
        ],
        "classes13": [{"id": i, "name": n} for i, n in enumerate(taxonomy.names13)],
        "remap13": {n: taxonomy.remap13[n] for n in taxonomy.names},
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))
