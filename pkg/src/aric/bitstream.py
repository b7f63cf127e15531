"""``ARIC`` container: fixed little-endian header followed by the coder payload.

Layout::

    magic "ARIC" | version u8 | mode u8 | width u32 | height u32 | patch u8
    | channels u8 | model_id u8 | num_scales u8 | num_scales x (tw u16, th u16)
    | codebook_id u64 | payload_len u32 | payload
"""

import struct
from dataclasses import dataclass, field

from .errors import FormatError, HashMismatchError, MagicError, TruncationError, VersionError

MAGIC = b"ARIC"
VERSION = 1
_FIXED = struct.Struct("<4sBBIIBBBB")
_TAIL = struct.Struct("<QI")
_RES = struct.Struct("<HH")


@dataclass
class Header:
    mode: int
    width: int
    height: int
    patch_size: int
    channels: int
    model_id: int
    codebook_id: int
    resolutions: list = field(default_factory=list)  # (tw, th) per scale, mode 1 only
    payload_len: int = 0
    version: int = VERSION

    @property
    def num_scales(self):
        return len(self.resolutions)

    @property
    def size(self):
        return _FIXED.size + _RES.size * self.num_scales + _TAIL.size

    def validate(self):
        if self.mode not in (0, 1):
            raise FormatError(f"unknown mode {self.mode}", offset=5)
        if self.patch_size == 0 or self.channels not in (1, 3):
            raise FormatError("bad patch size or channel count", offset=14)
        if self.width % self.patch_size or self.height % self.patch_size or not self.width or not self.height:
            raise FormatError("image size not a positive multiple of the patch size", offset=6)
        grid = (self.width // self.patch_size, self.height // self.patch_size)
        if self.mode == 0 and self.resolutions:
            raise FormatError("mode 0 carries no scales", offset=17)
        if self.mode == 1:
            if not self.resolutions:
                raise FormatError("mode 1 needs at least one scale", offset=17)
            if tuple(self.resolutions[-1]) != grid:
                raise FormatError(f"final scale {self.resolutions[-1]} != token grid {grid}", offset=18)

    def to_bytes(self):
        self.validate()
        out = [_FIXED.pack(MAGIC, self.version, self.mode, self.width, self.height,
                           self.patch_size, self.channels, self.model_id, self.num_scales)]
        out += [_RES.pack(*r) for r in self.resolutions]
        out.append(_TAIL.pack(self.codebook_id, self.payload_len))
        return b"".join(out)


def write_stream(header, payload):
    header.payload_len = len(payload)
    return header.to_bytes() + bytes(payload)


def parse_stream(data):
    """Split a container into ``(Header, payload)``; every failure is a FormatError."""
    data = bytes(data)
    if len(data) < 4:
        raise TruncationError("stream shorter than magic", offset=len(data))
    if data[:4] != MAGIC:
        raise MagicError(f"bad magic {data[:4]!r}", offset=0)
    if len(data) < _FIXED.size:
        raise TruncationError("header truncated", offset=len(data))
    _, version, mode, width, height, patch, channels, model_id, num_scales = _FIXED.unpack_from(data)
    if version != VERSION:
        raise VersionError(f"unsupported version {version}", offset=4)
    pos = _FIXED.size
    if len(data) < pos + _RES.size * num_scales + _TAIL.size:
        raise TruncationError("header truncated", offset=len(data))
    resolutions = [_RES.unpack_from(data, pos + _RES.size * k) for k in range(num_scales)]
    pos += _RES.size * num_scales
    codebook_id, payload_len = _TAIL.unpack_from(data, pos)
    pos += _TAIL.size
    header = Header(mode, width, height, patch, channels, model_id, codebook_id,
                    resolutions, payload_len, version)
    header.validate()
    if len(data) - pos < payload_len:
        raise TruncationError(f"payload has {len(data) - pos} of {payload_len} bytes", offset=len(data))
    if len(data) - pos > payload_len:
        raise FormatError("trailing bytes after payload", offset=pos + payload_len)
    return header, data[pos:]


def check_codebook(header, cb):
    if header.codebook_id != cb.id:
        raise HashMismatchError(
            f"stream was coded with codebook {header.codebook_id:016x}, got {cb.id:016x}"
        )
    if header.patch_size != cb.patch_size or header.channels != cb.channels:
        raise HashMismatchError("codebook geometry does not match the stream")
