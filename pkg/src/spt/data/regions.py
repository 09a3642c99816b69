"""Region-structured SDRAM data images.

Layout (all little-endian ``uint32``)::

    magic, version, n_regions, (offset, size) * n_regions, region bytes...

Offsets are relative to the start of the image.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

from ..errors import DataGenerationError

MAGIC = 0x53504E54
VERSION = 1
_HEADER = struct.Struct("<III")
_ENTRY = struct.Struct("<II")


@dataclass
class DataImage:
    vertex: str
    regions: List[bytes] = field(default_factory=list)

    @property
    def header_size(self) -> int:
        return _HEADER.size + _ENTRY.size * len(self.regions)

    @property
    def region_table(self) -> List[Tuple[int, int]]:
        out, offset = [], self.header_size
        for r in self.regions:
            out.append((offset, len(r)))
            offset += len(r)
        return out

    def __len__(self):
        return self.header_size + sum(len(r) for r in self.regions)

    def to_bytes(self) -> bytes:
        parts = [_HEADER.pack(MAGIC, VERSION, len(self.regions))]
        parts += [_ENTRY.pack(off, size) for off, size in self.region_table]
        parts += [bytes(r) for r in self.regions]
        return b"".join(parts)


def parse_image(blob: bytes, vertex: str = "") -> DataImage:
    if len(blob) < _HEADER.size:
        raise DataGenerationError("image shorter than its header")
    magic, version, count = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise DataGenerationError(f"bad image magic {magic:#010x}")
    if version != VERSION:
        raise DataGenerationError(f"unsupported image version {version}")
    regions = []
    end_of_header = _HEADER.size + _ENTRY.size * count
    spans = []
    for i in range(count):
        off, size = _ENTRY.unpack_from(blob, _HEADER.size + i * _ENTRY.size)
        if off < end_of_header or off + size > len(blob):
            raise DataGenerationError(f"region {i} ({off}, {size}) lies outside the image")
        spans.append((off, size))
        regions.append(bytes(blob[off:off + size]))
    ordered = sorted(s for s in spans if s[1])
    for (a_off, a_size), (b_off, _) in zip(ordered, ordered[1:]):
        if a_off + a_size > b_off:
            raise DataGenerationError("image regions overlap")
    return DataImage(vertex, regions)


def read_image_regions(blob: bytes) -> List[bytes]:
    return parse_image(blob).regions


def region_sizes(images: Dict[str, DataImage]) -> Dict[str, int]:
    return {vid: len(img) for vid, img in images.items()}


def pack_words(values: Sequence[int]) -> bytes:
    return struct.pack(f"<{len(values)}I", *values)


def unpack_words(blob: bytes) -> Tuple[int, ...]:
    return struct.unpack(f"<{len(blob) // 4}I", blob[:len(blob) // 4 * 4])
