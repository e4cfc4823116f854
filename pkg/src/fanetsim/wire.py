"""Bit-exact codecs for original (OLSRd) and modified (P-OLSRd) messages.

Byte layouts (all multi-byte integers big-endian):

Hello, original variant, 8-byte header::

    [0] msg-type  [1] reserved=0  [2] htime  [3] willingness
    [4..5] seq    [6..7] reserved=0

Hello, modified variant, 16-byte header::

    [0] msg-type  [1] reserved=0  [2] htime  [3] willingness
    [4..5] seq    [6..7] altitude (signed int16, meters)
    [8..11] latitude (IEEE-754 float32, degrees)
    [12..15] longitude (IEEE-754 float32, degrees)

Per-neighbor block, 8 bytes in both variants::

    [0..3] address  [4] lq  [5] nlq
    [6..7] reserved=0 (original) or relative speed (signed Q8.8 m/s, modified)

TC, both variants, 4-byte header::

    [0..1] ANSN  [2..3] reserved=0

followed by the same 8-byte blocks. The modified Hello is therefore exactly
8 bytes longer than the original for any neighbor count, and modified and
original TC messages have identical length.

The originating address (and, for TC, the per-emission flooding sequence
number) travel in the dissemination envelope, not in these payloads; decode
accepts them as pass-through arguments.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field

from .geo import GeoPosition

HELLO_MSG_TYPE = 201
HELLO_HEADER_ORIGINAL = 8
HELLO_HEADER_MODIFIED = 16
TC_HEADER = 4
NEIGHBOR_BLOCK = 8

_HELLO_ORIG_HDR = struct.Struct(">BBBBHH")
_HELLO_MOD_HDR = struct.Struct(">BBBBHhff")
_TC_HDR = struct.Struct(">HH")
_BLOCK_RESERVED = struct.Struct(">IBBH")
_BLOCK_SPEED = struct.Struct(">IBBh")


class WireError(Exception):
    """Base class for codec failures."""


class EncodeError(WireError):
    """Field outside its wire representation range."""


class DecodeError(WireError):
    """Buffer too short, ill-formed length or bad message type."""


class Variant(enum.Enum):
    ORIGINAL = "original"
    MODIFIED = "modified"


def quantize_ratio(r: float) -> int:
    """Map a receiving ratio in [0, 1] to one byte, round half up."""
    if not (0.0 <= r <= 1.0):
        raise EncodeError(f"ratio {r!r} outside [0, 1]")
    return int(math.floor(r * 255.0 + 0.5))


def dequantize_ratio(b: int) -> float:
    if not (0 <= b <= 255):
        raise DecodeError(f"ratio byte {b!r} outside [0, 255]")
    return b / 255.0


def quantize_speed(v: float) -> int:
    """Signed Q8.8 fixed point, resolution 1/256 m/s, range (-128, 128)."""
    q = int(math.floor(v * 256.0 + 0.5))
    if not (-32768 <= q <= 32767):
        raise EncodeError(f"speed {v!r} m/s outside Q8.8 range")
    return q


def dequantize_speed(q: int) -> float:
    return q / 256.0


def quantize_altitude(alt: float) -> int:
    """Signed 16-bit integer meters."""
    q = int(math.floor(alt + 0.5))
    if not (-32768 <= q <= 32767):
        raise EncodeError(f"altitude {alt!r} m outside int16 range")
    return q


def quantize_interval(seconds: float) -> int:
    """Emission-interval byte in 1/16-second ticks, saturating."""
    if seconds < 0:
        raise EncodeError(f"interval {seconds!r} s is negative")
    return min(255, int(math.floor(seconds * 16.0 + 0.5)))


def dequantize_interval(b: int) -> float:
    return b / 16.0


@dataclass
class NeighborBlock:
    """One advertised link: used by both Hello and TC messages.

    lq is the sender's measured receive ratio for this neighbor, nlq the
    ratio the neighbor reported back, both already quantized to one byte.
    speed is the averaged relative speed in m/s (modified variant only).
    """

    addr: int
    lq: int
    nlq: int
    speed: float = 0.0


@dataclass
class HelloMessage:
    variant: Variant
    seq: int
    htime: int = 0
    willingness: int = 3
    position: GeoPosition | None = None
    neighbors: list[NeighborBlock] = field(default_factory=list)
    originator: int = 0

    def encoded_size(self) -> int:
        header = HELLO_HEADER_MODIFIED if self.variant is Variant.MODIFIED else HELLO_HEADER_ORIGINAL
        return header + NEIGHBOR_BLOCK * len(self.neighbors)


@dataclass
class TcMessage:
    variant: Variant
    ansn: int
    advertised: list[NeighborBlock] = field(default_factory=list)
    originator: int = 0
    seq: int = 0

    def encoded_size(self) -> int:
        return TC_HEADER + NEIGHBOR_BLOCK * len(self.advertised)


def _check_byte(value: int, name: str) -> int:
    if not (0 <= value <= 255):
        raise EncodeError(f"{name} {value!r} outside [0, 255]")
    return value


def _check_u16(value: int, name: str) -> int:
    if not (0 <= value <= 0xFFFF):
        raise EncodeError(f"{name} {value!r} outside [0, 65535]")
    return value


def _check_u32(value: int, name: str) -> int:
    if not (0 <= value <= 0xFFFFFFFF):
        raise EncodeError(f"{name} {value!r} outside 32-bit range")
    return value


def _encode_block(blk: NeighborBlock, modified: bool) -> bytes:
    _check_u32(blk.addr, "address")
    _check_byte(blk.lq, "lq")
    _check_byte(blk.nlq, "nlq")
    if modified:
        return _BLOCK_SPEED.pack(blk.addr, blk.lq, blk.nlq, quantize_speed(blk.speed))
    if blk.speed != 0.0:
        raise EncodeError("original-variant block carries a nonzero speed")
    return _BLOCK_RESERVED.pack(blk.addr, blk.lq, blk.nlq, 0)


def _decode_block(buf: bytes, offset: int, modified: bool) -> NeighborBlock:
    if modified:
        addr, lq, nlq, q = _BLOCK_SPEED.unpack_from(buf, offset)
        return NeighborBlock(addr=addr, lq=lq, nlq=nlq, speed=dequantize_speed(q))
    addr, lq, nlq, _ = _BLOCK_RESERVED.unpack_from(buf, offset)
    return NeighborBlock(addr=addr, lq=lq, nlq=nlq, speed=0.0)


def encode_hello(m: HelloMessage) -> bytes:
    modified = m.variant is Variant.MODIFIED
    if modified and m.position is None:
        raise EncodeError("modified Hello requires a position")
    if not modified and m.position is not None:
        raise EncodeError("original Hello must not carry a position")
    _check_byte(m.htime, "htime")
    _check_byte(m.willingness, "willingness")
    _check_u16(m.seq, "seq")
    if modified:
        pos = m.position
        header = _HELLO_MOD_HDR.pack(
            HELLO_MSG_TYPE, 0, m.htime, m.willingness, m.seq,
            quantize_altitude(pos.alt), pos.lat, pos.lon,
        )
    else:
        header = _HELLO_ORIG_HDR.pack(HELLO_MSG_TYPE, 0, m.htime, m.willingness, m.seq, 0)
    return header + b"".join(_encode_block(b, modified) for b in m.neighbors)


def decode_hello(buf: bytes, variant: Variant, originator: int = 0) -> HelloMessage:
    modified = variant is Variant.MODIFIED
    header = HELLO_HEADER_MODIFIED if modified else HELLO_HEADER_ORIGINAL
    if len(buf) < header:
        raise DecodeError(f"Hello buffer of {len(buf)} bytes shorter than {header}-byte header")
    if (len(buf) - header) % NEIGHBOR_BLOCK:
        raise DecodeError(f"Hello length {len(buf)} not header plus whole neighbor blocks")
    if buf[0] != HELLO_MSG_TYPE:
        raise DecodeError(f"unexpected message type byte {buf[0]}")
    position: GeoPosition | None = None
    if modified:
        _, _, htime, will, seq, alt, lat, lon = _HELLO_MOD_HDR.unpack_from(buf, 0)
        try:
            position = GeoPosition(lat=lat, lon=lon, alt=float(alt))
        except ValueError as exc:
            raise DecodeError(f"invalid position in Hello: {exc}") from exc
    else:
        _, _, htime, will, seq, _ = _HELLO_ORIG_HDR.unpack_from(buf, 0)
    neighbors = [
        _decode_block(buf, off, modified)
        for off in range(header, len(buf), NEIGHBOR_BLOCK)
    ]
    return HelloMessage(
        variant=variant, seq=seq, htime=htime, willingness=will,
        position=position, neighbors=neighbors, originator=originator,
    )


def encode_tc(m: TcMessage) -> bytes:
    _check_u16(m.ansn, "ansn")
    modified = m.variant is Variant.MODIFIED
    header = _TC_HDR.pack(m.ansn, 0)
    return header + b"".join(_encode_block(b, modified) for b in m.advertised)


def decode_tc(buf: bytes, variant: Variant, originator: int = 0, seq: int = 0) -> TcMessage:
    if len(buf) < TC_HEADER:
        raise DecodeError(f"TC buffer of {len(buf)} bytes shorter than {TC_HEADER}-byte header")
    if (len(buf) - TC_HEADER) % NEIGHBOR_BLOCK:
        raise DecodeError(f"TC length {len(buf)} not header plus whole blocks")
    ansn, _ = _TC_HDR.unpack_from(buf, 0)
    modified = variant is Variant.MODIFIED
    advertised = [
        _decode_block(buf, off, modified)
        for off in range(TC_HEADER, len(buf), NEIGHBOR_BLOCK)
    ]
    return TcMessage(variant=variant, ansn=ansn, advertised=advertised,
                     originator=originator, seq=seq)
