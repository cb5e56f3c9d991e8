"""Binary timestamp files.

Layout (little endian): magic ``b"CGTS"``, uint32 version (1), uint64 record
count, then 16-byte records of uint64 time [ps], uint8 channel, uint8 origin
(0 signal, 1 dark) and 6 zero bytes. Records are written in (time, channel)
order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .coincidence import merge_streams
from .streams import TimestampStream

MAGIC = b"CGTS"
VERSION = 1
HEADER = struct.Struct("<4sIQ")
RECORD = np.dtype([("time", "<u8"), ("channel", "u1"), ("origin", "u1"), ("pad", "V6")])
assert RECORD.itemsize == 16


def encode_timestamps(streams) -> bytes:
    times, chans, origins = merge_streams(streams)
    if chans.size and (chans.min() < 0 or chans.max() > 255):
        raise ValueError("channel ids must fit in one byte")
    rec = np.zeros(times.size, dtype=RECORD)
    rec["time"] = times
    rec["channel"] = chans
    rec["origin"] = origins
    return HEADER.pack(MAGIC, VERSION, times.size) + rec.tobytes()


def decode_timestamps(data: bytes) -> list[TimestampStream]:
    if len(data) < HEADER.size:
        raise ValueError("file too short for a timestamp header")
    magic, version, n = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")
    body = data[HEADER.size:]
    if len(body) != n * RECORD.itemsize:
        raise ValueError(f"expected {n} records, found {len(body) / RECORD.itemsize:g}")
    rec = np.frombuffer(body, dtype=RECORD)
    out = []
    for c in np.unique(rec["channel"]):
        sel = rec[rec["channel"] == c]
        out.append(TimestampStream(int(c), sel["time"].astype(np.int64), sel["origin"].copy()))
    return out


def write_timestamps(path, streams) -> None:
    Path(path).write_bytes(encode_timestamps(streams))


def read_timestamps(path) -> list[TimestampStream]:
    return decode_timestamps(Path(path).read_bytes())
