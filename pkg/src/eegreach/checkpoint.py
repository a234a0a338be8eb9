"""Tagged-section container for model checkpoints.

Same conventions as the dataset format (little-endian, CRC-32 trailer,
located errors)::

    "EEGM" | u16 version=1 | u32 n_sections
    | n_sections x ( u16 tag length, ASCII tag | u8 kind | u8 ndim | ndim x u32 extent
                     | payload )
    | u32 CRC-32 of everything before it

``kind`` is 0 for float64 arrays, 1 for int64 arrays and 2 for UTF-8 text.
Float arrays are stored as 64-bit so a resumed run continues bit-exactly.
"""
import os
import struct
import zlib
from pathlib import Path

import numpy as np

from .dataset import _Reader
from .errors import FormatError, InputError

MAGIC = b"EEGM"
VERSION = 1
_KINDS = {0: "<f8", 1: "<i8"}
TEXT = 2


def encode(sections):
    """Serialize an ordered ``{tag: ndarray | str}`` mapping."""
    out = bytearray(MAGIC)
    out += struct.pack("<HI", VERSION, len(sections))
    for tag, value in sections.items():
        raw_tag = tag.encode("ascii")
        out += struct.pack("<H", len(raw_tag)) + raw_tag
        if isinstance(value, str):
            raw = value.encode("utf-8")
            out += struct.pack("<BBI", TEXT, 1, len(raw)) + raw
            continue
        arr = np.asarray(value)
        if arr.dtype.kind in "iub":
            kind, data = 1, np.ascontiguousarray(arr, dtype="<i8")
        elif arr.dtype.kind == "f":
            kind, data = 0, np.ascontiguousarray(arr, dtype="<f8")
        else:
            raise InputError(f"section {tag!r}: unsupported dtype {arr.dtype}")
        out += struct.pack("<BB", kind, arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += data.tobytes()
    out += struct.pack("<I", zlib.crc32(out) & 0xFFFFFFFF)
    return bytes(out)


def decode(buf):
    buf = bytes(buf)
    if buf[:4] != MAGIC:
        raise FormatError(f"bad magic {buf[:4]!r}, expected {MAGIC!r}", 0)
    if len(buf) < 14:
        raise FormatError("truncated checkpoint header", len(buf))
    stored, = struct.unpack("<I", buf[-4:])
    if zlib.crc32(buf[:-4]) & 0xFFFFFFFF != stored:
        raise FormatError("CRC-32 mismatch", len(buf) - 4)
    r = _Reader(buf[:-4])
    r.take(4, "magic")
    version, n = r.unpack("<HI", "header")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", 4)
    sections = {}
    for k in range(n):
        pos = r.pos
        length, = r.unpack("<H", f"tag length of section {k}")
        tag = r.take(length, f"tag of section {k}").decode("ascii")
        kind, ndim = r.unpack("<BB", f"kind of section {tag!r}")
        shape = r.unpack(f"<{ndim}I", f"shape of section {tag!r}")
        if kind == TEXT:
            sections[tag] = r.take(shape[0], f"text of section {tag!r}").decode("utf-8")
        elif kind in _KINDS:
            count = int(np.prod(shape)) if ndim else 1
            raw = r.take(8 * count, f"payload of section {tag!r}")
            sections[tag] = np.frombuffer(raw, dtype=_KINDS[kind]).reshape(shape).copy()
        else:
            raise FormatError(f"unknown section kind {kind}", pos)
    if r.pos != len(r.buf):
        raise FormatError("trailing bytes after last section", r.pos)
    return sections


def save(sections, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode(sections))
    os.replace(tmp, path)


def load(path):
    return decode(Path(path).read_bytes())


def prefixed(sections, prefix):
    """Sub-mapping of the sections under ``prefix/`` with the prefix stripped."""
    head = prefix + "/"
    return {k[len(head):]: v for k, v in sections.items() if k.startswith(head)}


def text_to_dict(text):
    """Parse ``key = value`` lines (``#`` comments allowed) into strings."""
    out = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out
