"""
Binary photon time-tag stream.

Layout (all little-endian)::

    offset  size  field
    0       8     magic "QEFLIM01" (last two bytes are the format version)
    8       8     sync_rate            float64, Hz
    16      8     micro_resolution     float64, ps per micro unit
    24      8     macro_resolution     float64, ns per macro unit
    32      8     cantilever_freq      float64, Hz
    40      8     cantilever_amplitude float64, nm
    48      4     marker_divisor       uint32
    52      2     nx                   uint16
    54      2     ny                   uint16
    56      8     pixel_pitch          float64, nm
    64      ...   8-byte records

    record:
    bits 31-30 of word 0   kind (0 photon, 1 pixel marker,
                                 2 cantilever marker, 3 overflow)
    bits 29-28 of word 0   channel
    bits 27-0  of word 0   macro-time delta to the previous record
                           (overflow: number of 2**28 wraps)
    bytes 4-5              micro time (photons and cantilever markers)
    bytes 6-7              payload (pixel index of pixel markers)

Overflow records are framing only. `encode_stream` inserts them whenever a
delta needs more than 28 bits and `decode_stream` folds them back into the
macro-time clock without yielding them.
"""

import enum
import itertools
import struct
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..exceptions import (FieldRangeError, FormatError, StreamOrderError,
                          TruncatedStreamWarning, UnsupportedVersionError)

MAGIC = b"QEFLIM01"
_MAGIC_STEM = MAGIC[:6]
HEADER_SIZE = 64
RECORD_SIZE = 8
_HEADER_STRUCT = struct.Struct("<8s5dI2Hd")
_RECORD_DTYPE = np.dtype([("word", "<u4"), ("micro", "<u2"), ("payload", "<u2")])

_DELTA_BITS = 28
_DELTA_MASK = (1 << _DELTA_BITS) - 1
_FIELD_MAX = (1 << 16) - 1

assert _HEADER_STRUCT.size == HEADER_SIZE
assert _RECORD_DTYPE.itemsize == RECORD_SIZE


class TagKind(enum.IntEnum):
    PHOTON = 0
    PIXEL_MARKER = 1
    CANTILEVER_MARKER = 2
    OVERFLOW = 3


class TagRecord(NamedTuple):
    kind: int
    channel: int
    macro_time: int
    micro_time: int = 0
    pixel_index: int = 0


@dataclass(frozen=True)
class StreamHeader:
    sync_rate: float = 10e6
    micro_resolution: float = 256.0
    macro_resolution: float = 100.0
    cantilever_freq: float = 70e3
    cantilever_amplitude: float = 128.0
    marker_divisor: int = 4096
    scan_dims: tuple = (1, 1)
    pixel_pitch: float = 10.0

    def __post_init__(self):
        if not self.sync_rate > 0:
            raise FieldRangeError("sync_rate must be > 0")
        if not (self.micro_resolution > 0 and self.macro_resolution > 0):
            raise FieldRangeError("time resolutions must be > 0")
        if int(self.marker_divisor) < 1:
            raise FieldRangeError("marker_divisor must be >= 1")
        nx, ny = (int(n) for n in self.scan_dims)
        if not (0 < nx <= _FIELD_MAX and 0 < ny <= _FIELD_MAX):
            raise FieldRangeError("scan dims must lie in [1, 65535]")
        object.__setattr__(self, "scan_dims", (nx, ny))
        object.__setattr__(self, "marker_divisor", int(self.marker_divisor))

    @property
    def sync_period_ns(self):
        return 1e9 / self.sync_rate

    @property
    def cantilever_period_ns(self):
        return 1e9 / self.cantilever_freq

    @property
    def n_pixels(self):
        return self.scan_dims[0] * self.scan_dims[1]

    @property
    def micro_limit(self):
        """Photon micro times must stay below this many units."""
        return self.sync_period_ns * 1e3 / self.micro_resolution

    @property
    def n_micro_channels(self):
        """Number of micro-time channels inside one sync period."""
        return int(np.ceil(self.sync_period_ns * 1e3 / self.micro_resolution))

    def pack(self):
        nx, ny = self.scan_dims
        return _HEADER_STRUCT.pack(
            MAGIC, self.sync_rate, self.micro_resolution,
            self.macro_resolution, self.cantilever_freq,
            self.cantilever_amplitude, self.marker_divisor, nx, ny,
            self.pixel_pitch)

    @classmethod
    def unpack(cls, data):
        if len(data) < len(MAGIC) or bytes(data[:6]) != _MAGIC_STEM:
            raise FormatError("not a tag stream: bad magic")
        if bytes(data[:8]) != MAGIC:
            raise UnsupportedVersionError("unsupported stream version {!r}".format(
                bytes(data[6:8])))
        if len(data) < HEADER_SIZE:
            raise FormatError("stream ends inside the header")
        (_, sync_rate, micro_res, macro_res, cant_freq, cant_amp, divisor,
         nx, ny, pitch) = _HEADER_STRUCT.unpack(bytes(data[:HEADER_SIZE]))
        return cls(sync_rate, micro_res, macro_res, cant_freq, cant_amp,
                   divisor, (nx, ny), pitch)


class TagTable:
    """
    Columnar record sequence. Iterating yields TagRecord values; the numpy
    columns are there for vectorized consumers.
    """

    def __init__(self, kind, channel, macro_time, micro_time=None,
                 pixel_index=None, truncated_bytes=0):
        n = len(kind)
        self.kind = np.asarray(kind, dtype=np.uint8)
        self.channel = np.asarray(channel, dtype=np.uint8)
        self.macro_time = np.asarray(macro_time, dtype=np.int64)
        if micro_time is None:
            micro_time = np.zeros(n, dtype=np.int64)
        if pixel_index is None:
            pixel_index = np.zeros(n, dtype=np.int64)
        self.micro_time = np.asarray(micro_time, dtype=np.int64)
        self.pixel_index = np.asarray(pixel_index, dtype=np.int64)
        self.truncated_bytes = truncated_bytes

    @classmethod
    def empty(cls):
        return cls(np.zeros(0), np.zeros(0), np.zeros(0))

    @classmethod
    def from_records(cls, records):
        records = list(records)
        if not records:
            return cls.empty()
        cols = list(zip(*records))
        return cls(*cols)

    @classmethod
    def concatenate(cls, tables):
        tables = list(tables)
        if not tables:
            return cls.empty()
        return cls(*(np.concatenate([getattr(t, name) for t in tables])
                     for name in ("kind", "channel", "macro_time",
                                  "micro_time", "pixel_index")))

    def __len__(self):
        return len(self.kind)

    def __iter__(self):
        for row in zip(self.kind.tolist(), self.channel.tolist(),
                       self.macro_time.tolist(), self.micro_time.tolist(),
                       self.pixel_index.tolist()):
            yield TagRecord(*row)

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return TagRecord(int(self.kind[idx]), int(self.channel[idx]),
                             int(self.macro_time[idx]), int(self.micro_time[idx]),
                             int(self.pixel_index[idx]))
        return TagTable(self.kind[idx], self.channel[idx], self.macro_time[idx],
                        self.micro_time[idx], self.pixel_index[idx])

    def __eq__(self, other):
        if not isinstance(other, TagTable):
            return NotImplemented
        return all(np.array_equal(getattr(self, name), getattr(other, name))
                   for name in ("kind", "channel", "macro_time", "micro_time",
                                "pixel_index"))

    def sorted(self):
        """Stable sort by macro time, then micro time."""
        order = np.lexsort((self.micro_time, self.macro_time))
        return self[order]

    def of_kind(self, kind):
        return self[self.kind == kind]

    @property
    def photons(self):
        return self.of_kind(TagKind.PHOTON)

    @property
    def pixel_markers(self):
        return self.of_kind(TagKind.PIXEL_MARKER)

    @property
    def cantilever_markers(self):
        return self.of_kind(TagKind.CANTILEVER_MARKER)


class TagStream(NamedTuple):
    header: StreamHeader
    records: TagTable


def absolute_times_ns(table, header):
    """Arrival time since acquisition start, macro plus micro part, in ns."""
    return (table.macro_time * header.macro_resolution
            + table.micro_time * (header.micro_resolution * 1e-3))


def _iter_chunks(records, chunk_size):
    if isinstance(records, TagTable):
        for start in range(0, len(records), chunk_size):
            yield records[start:start + chunk_size]
        return
    it = iter(records)
    while True:
        chunk = list(itertools.islice(it, chunk_size))
        if not chunk:
            return
        yield TagTable.from_records(chunk)


def _pack_chunk(table, header, prev_macro, offset):
    """
    Validate one chunk and turn it into raw records. `offset` is the index
    of the chunk's first record in the whole stream, for error messages.
    """
    keep = table.kind != TagKind.OVERFLOW
    index = offset + np.flatnonzero(keep)
    table = table[keep]
    if len(table) == 0:
        return np.zeros(0, dtype=_RECORD_DTYPE), prev_macro

    def fail(mask, message):
        bad = int(index[np.flatnonzero(mask)[0]])
        raise FieldRangeError("record {}: {}".format(bad, message), index=bad)

    if np.any(table.kind > TagKind.CANTILEVER_MARKER):
        fail(table.kind > TagKind.CANTILEVER_MARKER, "unknown record kind")
    if np.any(table.channel > 3):
        fail(table.channel > 3, "channel does not fit in 2 bits")
    for name in ("micro_time", "pixel_index"):
        col = getattr(table, name)
        out_of_range = (col < 0) | (col > _FIELD_MAX)
        if np.any(out_of_range):
            fail(out_of_range, "{} does not fit in 16 bits".format(name))
    late = (table.kind == TagKind.PHOTON) & (table.micro_time >= header.micro_limit)
    if np.any(late):
        fail(late, "micro time exceeds the sync period")

    deltas = np.diff(table.macro_time, prepend=prev_macro)
    if np.any(deltas < 0):
        bad = int(index[np.flatnonzero(deltas < 0)[0]])
        raise StreamOrderError("record {} is out of macro-time order".format(bad),
                               index=bad)
    wraps = deltas >> _DELTA_BITS
    if np.any(wraps > _DELTA_MASK):
        fail(wraps > _DELTA_MASK, "macro-time gap too large to encode")

    nibble = (table.kind.astype(np.uint32) << 2) | table.channel.astype(np.uint32)
    words = (nibble << _DELTA_BITS) | (deltas & _DELTA_MASK).astype(np.uint32)
    micro = table.micro_time.astype(np.uint16)
    payload = np.where(table.kind == TagKind.PIXEL_MARKER,
                       table.pixel_index, 0).astype(np.uint16)

    need_overflow = np.flatnonzero(wraps > 0)
    if len(need_overflow):
        ovf_words = ((np.uint32(TagKind.OVERFLOW << 2) << _DELTA_BITS)
                     | wraps[need_overflow].astype(np.uint32))
        words = np.insert(words, need_overflow, ovf_words)
        micro = np.insert(micro, need_overflow, 0)
        payload = np.insert(payload, need_overflow, 0)

    raw = np.empty(len(words), dtype=_RECORD_DTYPE)
    raw["word"] = words
    raw["micro"] = micro
    raw["payload"] = payload
    return raw, int(table.macro_time[-1])


def encode_stream(header, records, fp=None, *, chunk_size=1 << 16):
    """
    Serialize `records` (a TagTable or any iterable of TagRecord, sorted by
    macro time) after `header`. Works in a single pass over bounded chunks.
    Writes to the binary file object `fp` if given, otherwise returns bytes.
    """
    parts = [] if fp is None else None

    def emit(blob):
        if fp is None:
            parts.append(blob)
        else:
            fp.write(blob)

    emit(header.pack())
    prev_macro = 0
    offset = 0
    for chunk in _iter_chunks(records, chunk_size):
        raw, prev_macro = _pack_chunk(chunk, header, prev_macro, offset)
        offset += len(chunk)
        emit(raw.tobytes())

    if fp is None:
        return b"".join(parts)


def _decode_chunk(raw, header, macro_start, first_index):
    """
    Turn raw records into a TagTable, continuing the macro-time clock from
    `macro_start`. `first_index` is the file position of the first record,
    for error messages. Returns (table, clock after the chunk, overflows).
    """
    words = raw["word"].astype(np.int64)
    kind = (words >> 30).astype(np.uint8)
    channel = ((words >> _DELTA_BITS) & 3).astype(np.uint8)
    field = words & _DELTA_MASK
    micro = raw["micro"]

    late = (kind == TagKind.PHOTON) & (micro >= header.micro_limit)
    if np.any(late):
        bad = int(np.flatnonzero(late)[0])
        raise FormatError("record {}: micro time {} lies beyond the sync "
                          "period".format(first_index + bad, int(micro[bad])),
                          index=first_index + bad)

    is_overflow = kind == TagKind.OVERFLOW
    increments = np.where(is_overflow, field << _DELTA_BITS, field)
    macro = macro_start + np.cumsum(increments)

    keep = ~is_overflow
    table = TagTable(kind[keep], channel[keep], macro[keep],
                     micro[keep], raw["payload"][keep])
    clock = int(macro[-1]) if len(macro) else macro_start
    return table, clock, int(is_overflow.sum())


def _warn_truncated(n_extra, n_records):
    warnings.warn("stream truncated: dropped {} trailing bytes after "
                  "record {}".format(n_extra, n_records),
                  TruncatedStreamWarning)


def decode_stream(data, *, verbose=False):
    """
    Parse a whole in-memory stream into a TagStream (header, TagTable).
    This is eager; `iter_stream` decodes a file chunk by chunk. A tail
    shorter than one record is dropped with a TruncatedStreamWarning; the
    table's `truncated_bytes` says how much was lost.
    """
    data = memoryview(data)
    header = StreamHeader.unpack(data)
    body = data[HEADER_SIZE:]
    n_records, n_extra = divmod(len(body), RECORD_SIZE)
    if n_extra:
        _warn_truncated(n_extra, n_records)

    raw = np.frombuffer(body[:n_records * RECORD_SIZE], dtype=_RECORD_DTYPE)
    table, _, n_overflow = _decode_chunk(raw, header, 0, 0)
    table.truncated_bytes = n_extra
    if verbose:
        print("decoded", len(table), "records,", n_overflow, "overflow records")
    return TagStream(header, table)


def iter_stream(fp, *, chunk_size=1 << 16):
    """
    Lazy decoding of the binary file object `fp`. Returns the header and a
    generator of TagTables holding up to `chunk_size` records each, in file
    order. Memory stays bounded by one chunk.
    """
    header = StreamHeader.unpack(fp.read(HEADER_SIZE))
    return header, _iter_tables(fp, header, chunk_size)


def _iter_tables(fp, header, chunk_size):
    clock, index = 0, 0
    while True:
        blob = fp.read(chunk_size * RECORD_SIZE)
        n_records, n_extra = divmod(len(blob), RECORD_SIZE)
        if n_records:
            raw = np.frombuffer(blob[:n_records * RECORD_SIZE], dtype=_RECORD_DTYPE)
            table, clock, _ = _decode_chunk(raw, header, clock, index)
            index += n_records
            yield table
        if n_extra:
            _warn_truncated(n_extra, index)
        if len(blob) < chunk_size * RECORD_SIZE:
            return


def write_stream(path, header, records):
    with open(path, "wb") as f:
        encode_stream(header, records, f)


def read_stream(path, *, verbose=False):
    with open(path, "rb") as f:
        return decode_stream(f.read(), verbose=verbose)
