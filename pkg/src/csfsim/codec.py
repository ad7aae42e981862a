"""Compressed sparse filter streams: encode, decode, pack to bytes.

A stream covers a stack of filters processed together. For every weight
position (channel, kernel row, kernel column for convolution; one flat
index per input element for fully connected) it stores a count followed by
(relative index, weight) pairs for the nonzero weights among the stacked
filters at that position. Filter indices ascend within a position and are
delta coded: the first entry's relative index is its absolute filter index,
each later entry's is the gap from the previous nonzero filter. Zero weights
are never encoded.

Byte layout (little endian throughout):

    offset  size  field
    0       4     magic "CSF1"
    4       2     format version, currently 1
    6       1     profile: 0 = fc, 1 = conv
    7       1     weight dtype: 0 = float32, 1 = shift quantized float32
    8       4     filters stacked in the stream (m)
    12      4     channels
    16      4     kernel extent (1 for fc)
    20      4     position count
    24      ...   per position: u16 count, then count x (u16 rel, f32 weight)
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"CSF1"
VERSION = 1
HEADER_LEN = 24
_PROFILES = {"fc": 0, "conv": 1}
_PROFILE_NAMES = {code: name for name, code in _PROFILES.items()}


class CsfFormatError(ValueError):
    """Malformed stream bytes or inconsistent stream structure."""


class CsfRangeError(ValueError):
    """A count or index exceeds what the format's fields can carry."""


@dataclass(frozen=True)
class CsfEntry:
    """One nonzero weight: filter-index delta plus the value itself."""

    rel_index: int
    weight: float


@dataclass(frozen=True)
class CsfPosition:
    """All nonzero entries at one weight position, in ascending filter order."""

    entries: tuple[CsfEntry, ...]

    @property
    def count(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class CsfStream:
    """A stack of filters encoded position by position.

    For the conv profile position_count is channels * kernel**2 and positions
    run channel-major, kernel row, kernel column. For the fc profile the
    kernel extent is 1 and the flattened input length is carried in the
    channels field, so position_count == channels.
    """

    profile: str
    filters: int
    channels: int
    kernel: int
    position_count: int
    positions: tuple[CsfPosition, ...] = field(repr=False)
    quantized: bool = False

    def __post_init__(self):
        if self.profile not in _PROFILES:
            raise CsfFormatError(f"unknown profile {self.profile!r}")
        if len(self.positions) != self.position_count:
            raise CsfFormatError(
                f"position_count {self.position_count} but "
                f"{len(self.positions)} positions present"
            )

    @property
    def total_nnz(self) -> int:
        return sum(p.count for p in self.positions)


def stack_filters(bank: np.ndarray, start: int, size: int) -> np.ndarray:
    """Slice `size` filters from a bank and move the filter axis innermost.

    Input bank is (filters, ...spatial); result is (...spatial, size), laid
    out contiguously so a position index walks the spatial axes in C order.
    """
    if start < 0 or size < 1 or start + size > bank.shape[0]:
        raise ValueError(
            f"stack [{start}, {start + size}) outside bank of {bank.shape[0]}"
        )
    return np.ascontiguousarray(np.moveaxis(bank[start:start + size], 0, -1))


def encode_csf(stacked: np.ndarray, profile: str, quantized: bool = False) -> CsfStream:
    """Encode a stacked filter block (...spatial, m) into a stream.

    Conv stacks must be (channels, kernel, kernel, m); fc stacks may carry
    any spatial shape, which is flattened to one position per input element.
    """
    if profile not in _PROFILES:
        raise CsfFormatError(f"unknown profile {profile!r}")
    arr = np.asarray(stacked, dtype=np.float32)
    if arr.ndim < 2:
        raise CsfFormatError("stacked block needs spatial axes plus a filter axis")
    m = arr.shape[-1]
    if profile == "conv":
        if arr.ndim != 4 or arr.shape[1] != arr.shape[2]:
            raise CsfFormatError(
                f"conv stack must be (channels, kernel, kernel, m), got {arr.shape}"
            )
        channels, kernel = arr.shape[0], arr.shape[1]
    else:
        channels = int(np.prod(arr.shape[:-1]))
        kernel = 1
    if m > 0xFFFF:
        raise CsfRangeError(f"{m} stacked filters exceeds the u16 index field")
    flat = arr.reshape(-1, m)
    positions = []
    for row in flat:
        nz = np.flatnonzero(row)
        if nz.size > 0xFFFF:
            raise CsfRangeError(f"{nz.size} entries exceeds the u16 count field")
        prev = 0
        entries = []
        for idx in nz:
            entries.append(CsfEntry(int(idx) - prev, float(row[idx])))
            prev = int(idx)
        positions.append(CsfPosition(tuple(entries)))
    return CsfStream(
        profile=profile,
        filters=m,
        channels=channels,
        kernel=kernel,
        position_count=flat.shape[0],
        positions=tuple(positions),
        quantized=quantized,
    )


def absolute_indices(position: CsfPosition, filters: int) -> list[int]:
    """Undo the delta coding for one position; validates monotonic range."""
    out = []
    prev = 0
    for i, entry in enumerate(position.entries):
        idx = entry.rel_index if i == 0 else prev + entry.rel_index
        if i > 0 and entry.rel_index < 1:
            raise CsfFormatError(f"non-ascending filter index at entry {i}")
        if not 0 <= idx < filters:
            raise CsfFormatError(f"filter index {idx} outside stack of {filters}")
        out.append(idx)
        prev = idx
    return out


def decode_csf(stream: CsfStream) -> np.ndarray:
    """Expand a stream back to a dense stacked block (...spatial, m)."""
    if stream.profile == "conv":
        shape = (stream.channels, stream.kernel, stream.kernel, stream.filters)
    else:
        shape = (stream.channels, stream.filters)
    out = np.zeros((stream.position_count, stream.filters), np.float32)
    for p, position in enumerate(stream.positions):
        for idx, entry in zip(absolute_indices(position, stream.filters),
                              position.entries):
            out[p, idx] = entry.weight
    return out.reshape(shape)


def serialize_csf(stream: CsfStream) -> bytes:
    """Pack a stream into its byte representation."""
    parts = [
        MAGIC,
        struct.pack("<HBB", VERSION, _PROFILES[stream.profile],
                    1 if stream.quantized else 0),
        struct.pack("<IIII", stream.filters, stream.channels,
                    stream.kernel, stream.position_count),
    ]
    for position in stream.positions:
        # validate before packing so bad streams never hit struct errors
        absolute_indices(position, stream.filters)
        parts.append(struct.pack("<H", position.count))
        for entry in position.entries:
            if not 0 <= entry.rel_index <= 0xFFFF:
                raise CsfRangeError(f"relative index {entry.rel_index} outside u16")
            parts.append(struct.pack("<Hf", entry.rel_index, entry.weight))
    return b"".join(parts)


def deserialize_csf(data: bytes) -> CsfStream:
    """Parse stream bytes; raises CsfFormatError on any malformation."""
    if len(data) < HEADER_LEN:
        raise CsfFormatError(f"{len(data)} bytes is shorter than the header")
    if data[:4] != MAGIC:
        raise CsfFormatError(f"bad magic {data[:4]!r}")
    version, profile_code, dtype_code = struct.unpack_from("<HBB", data, 4)
    if version != VERSION:
        raise CsfFormatError(f"unsupported version {version}")
    if profile_code not in _PROFILE_NAMES:
        raise CsfFormatError(f"unknown profile code {profile_code}")
    if dtype_code not in (0, 1):
        raise CsfFormatError(f"unknown dtype code {dtype_code}")
    filters, channels, kernel, position_count = struct.unpack_from("<IIII", data, 8)
    profile = _PROFILE_NAMES[profile_code]
    expected = channels * kernel * kernel if profile == "conv" else channels
    if position_count != expected:
        raise CsfFormatError(
            f"position count {position_count} does not match shape "
            f"(expected {expected})"
        )
    offset = HEADER_LEN
    positions = []
    for p in range(position_count):
        if offset + 2 > len(data):
            raise CsfFormatError(f"truncated at position {p} count field")
        (count,) = struct.unpack_from("<H", data, offset)
        offset += 2
        entries = []
        for e in range(count):
            if offset + 6 > len(data):
                raise CsfFormatError(f"truncated at position {p} entry {e}")
            rel, weight = struct.unpack_from("<Hf", data, offset)
            offset += 6
            if not math.isfinite(weight):
                raise CsfFormatError(f"non-finite weight at position {p} entry {e}")
            entries.append(CsfEntry(rel, weight))
        position = CsfPosition(tuple(entries))
        absolute_indices(position, filters)
        positions.append(position)
    if offset != len(data):
        raise CsfFormatError(f"{len(data) - offset} trailing bytes after stream")
    return CsfStream(
        profile=profile,
        filters=filters,
        channels=channels,
        kernel=kernel,
        position_count=position_count,
        positions=tuple(positions),
        quantized=dtype_code == 1,
    )


def quantize_shift(bank: np.ndarray, exp_min: int, exp_max: int) -> np.ndarray:
    """Round nonzero weights to signed powers of two for shift arithmetic.

    Each nonzero w becomes sign(w) * 2**e with e = ceil(log2|w| - 0.5),
    which picks the nearest exponent and resolves exact midpoints toward
    the smaller one; e is clamped to [exp_min, exp_max]. Zeros stay zero,
    so sparsity is preserved exactly.
    """
    if exp_min > exp_max:
        raise ValueError(f"exponent range [{exp_min}, {exp_max}] is empty")
    arr = np.asarray(bank, dtype=np.float32)
    out = np.zeros_like(arr)
    nz = arr != 0
    mags = np.abs(arr[nz]).astype(np.float64)
    exps = np.ceil(np.log2(mags) - 0.5)
    exps = np.clip(exps, exp_min, exp_max)
    out[nz] = np.sign(arr[nz]) * np.exp2(exps).astype(np.float32)
    return out
