"""Reader/writer for the subset of NBT used by structure-template files.

Every tag type is decoded (so unknown fields can be skipped), but only
``size``, ``palette``/``palettes`` and ``blocks`` are interpreted.
"""

from __future__ import annotations

import gzip
import io
import struct
from dataclasses import dataclass

TAG_END, TAG_BYTE, TAG_SHORT, TAG_INT, TAG_LONG = 0, 1, 2, 3, 4
TAG_FLOAT, TAG_DOUBLE, TAG_BYTE_ARRAY, TAG_STRING, TAG_LIST = 5, 6, 7, 8, 9
TAG_COMPOUND, TAG_INT_ARRAY, TAG_LONG_ARRAY = 10, 11, 12

_SCALARS = {
    TAG_BYTE: ">b",
    TAG_SHORT: ">h",
    TAG_INT: ">i",
    TAG_LONG: ">q",
    TAG_FLOAT: ">f",
    TAG_DOUBLE: ">d",
}


class NbtParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.reason = message
        self.offset = offset


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.buf):
            raise NbtParseError(f"unexpected end of data (wanted {n} bytes)", self.pos)
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))[0]

    def string(self) -> str:
        n = self.unpack(">H")
        start = self.pos
        raw = self.take(n)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise NbtParseError("invalid utf-8 string", start) from exc

    def payload(self, tag: int):
        if tag in _SCALARS:
            return self.unpack(_SCALARS[tag])
        if tag == TAG_STRING:
            return self.string()
        if tag == TAG_BYTE_ARRAY:
            n = self.unpack(">i")
            return list(struct.unpack(f">{n}b", self.take(n)))
        if tag == TAG_INT_ARRAY:
            n = self.unpack(">i")
            return list(struct.unpack(f">{n}i", self.take(4 * n)))
        if tag == TAG_LONG_ARRAY:
            n = self.unpack(">i")
            return list(struct.unpack(f">{n}q", self.take(8 * n)))
        if tag == TAG_LIST:
            elem = self.unpack(">b")
            n = self.unpack(">i")
            if n > 0 and elem == TAG_END:
                raise NbtParseError("non-empty list of TAG_End", self.pos)
            return [self.payload(elem) for _ in range(max(n, 0))]
        if tag == TAG_COMPOUND:
            out = {}
            while True:
                at = self.pos
                child = self.unpack(">b")
                if child == TAG_END:
                    return out
                if child not in _ALL_TAGS:
                    raise NbtParseError(f"unknown tag type {child}", at)
                name = self.string()
                out[name] = self.payload(child)
        raise NbtParseError(f"unknown tag type {tag}", self.pos)


_ALL_TAGS = set(range(1, 13))


def parse_nbt(data: bytes) -> tuple[str, dict]:
    """Decode a (possibly gzipped) NBT blob into ``(root_name, compound)``."""
    if data[:2] == b"\x1f\x8b":
        try:
            data = gzip.decompress(data)
        except (OSError, EOFError) as exc:
            raise NbtParseError(f"corrupt gzip stream: {exc}", 0) from exc
    r = _Reader(data)
    tag = r.unpack(">b")
    if tag != TAG_COMPOUND:
        raise NbtParseError(f"root tag must be a compound, got type {tag}", 0)
    name = r.string()
    return name, r.payload(TAG_COMPOUND)


@dataclass
class StructureTemplate:
    size: tuple[int, int, int]  # Minecraft (x, y, z), y is height
    palette: list[str]
    blocks: list[tuple[int, int, int, int]]  # (x, y, z, state)


def read_structure_template(data: bytes) -> StructureTemplate:
    _, root = parse_nbt(data)
    try:
        size = tuple(int(v) for v in root["size"])
        if "palette" in root:
            palette_tags = root["palette"]
        else:
            palette_tags = root["palettes"][0]
        palette = [str(p["Name"]) for p in palette_tags]
        blocks = [(int(b["pos"][0]), int(b["pos"][1]), int(b["pos"][2]), int(b["state"])) for b in root["blocks"]]
    except (KeyError, IndexError, TypeError) as exc:
        raise NbtParseError(f"missing or malformed structure field: {exc}", 0) from exc
    if len(size) != 3:
        raise NbtParseError(f"size must have 3 entries, got {len(size)}", 0)
    return StructureTemplate(size=size, palette=palette, blocks=blocks)


# ---------------------------------------------------------------- writing


def _w_string(out: io.BytesIO, s: str) -> None:
    raw = s.encode("utf-8")
    out.write(struct.pack(">H", len(raw)))
    out.write(raw)


def _tag_of(value) -> int:
    if isinstance(value, dict):
        return TAG_COMPOUND
    if isinstance(value, str):
        return TAG_STRING
    if isinstance(value, list):
        return TAG_LIST
    if isinstance(value, float):
        return TAG_DOUBLE
    if isinstance(value, int):
        return TAG_INT
    raise TypeError(f"cannot encode {type(value).__name__} as NBT")


def _w_payload(out: io.BytesIO, tag: int, value) -> None:
    if tag in _SCALARS:
        out.write(struct.pack(_SCALARS[tag], value))
    elif tag == TAG_STRING:
        _w_string(out, value)
    elif tag == TAG_LIST:
        elem = _tag_of(value[0]) if value else TAG_END
        out.write(struct.pack(">bi", elem, len(value)))
        for v in value:
            _w_payload(out, elem, v)
    elif tag == TAG_COMPOUND:
        for k, v in value.items():
            t = _tag_of(v)
            out.write(struct.pack(">b", t))
            _w_string(out, k)
            _w_payload(out, t, v)
        out.write(b"\x00")
    else:
        raise TypeError(f"writer does not emit tag type {tag}")


def write_structure_template(tpl: StructureTemplate, compress: bool = True) -> bytes:
    """Encode a template the way structure blocks save them (gzip by default)."""
    root = {
        "DataVersion": 2586,
        "size": list(tpl.size),
        "palette": [{"Name": name} for name in tpl.palette],
        "blocks": [{"pos": [x, y, z], "state": s} for x, y, z, s in tpl.blocks],
        "entities": [],
    }
    out = io.BytesIO()
    out.write(struct.pack(">b", TAG_COMPOUND))
    _w_string(out, "")
    _w_payload(out, TAG_COMPOUND, root)
    raw = out.getvalue()
    return gzip.compress(raw, mtime=0) if compress else raw
