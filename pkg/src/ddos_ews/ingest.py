"""Packet-capture and CSV ingestion into columnar packet traces.

Two readers feed the rest of the pipeline:

* :func:`iter_pcap` / :func:`read_pcap` parse classic tcpdump savefiles
  (microsecond or nanosecond, either byte order) without third-party
  dependencies.
* :func:`read_csv` / :func:`write_csv` handle the text interchange format
  ``relative_time_seconds,dest_id,size_bytes``.

Destination addresses are replaced by small opaque integers via
:func:`map_destination`.
"""
from __future__ import annotations

import csv
import os
import struct
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Optional

import numpy as np

from .exceptions import (
    NonMonotoneTime,
    SchemaError,
    TooManyDestinations,
    UnreadableFile,
)

CSV_HEADER = ("relative_time_seconds", "dest_id", "size_bytes")
MAX_SIZE = 65535
DEFAULT_MAX_DESTS = 65536

_MAGIC_USEC = 0xA1B2C3D4
_MAGIC_NSEC = 0xA1B23C4D

# link types
_LINK_ETHERNET = 1
_LINK_RAW = (12, 14, 101)
_LINK_IPV4 = 228
_LINK_IPV6 = 229
_LINK_SLL = 113

_ETH_IPV4 = 0x0800
_ETH_IPV6 = 0x86DD
_ETH_VLAN = (0x8100, 0x88A8, 0x9100)


class PacketRecord(NamedTuple):
    t: float
    dest: int
    size: int


def max_dests_from_env() -> int:
    raw = os.environ.get("EWS_MAX_DESTS")
    if raw is None or raw == "":
        return DEFAULT_MAX_DESTS
    try:
        value = int(raw)
    except ValueError:
        raise TooManyDestinations(f"EWS_MAX_DESTS is not an integer: {raw!r}")
    if value < 1:
        raise TooManyDestinations("EWS_MAX_DESTS must be positive")
    return value


def map_destination(raw: bytes, table: dict, max_dests: Optional[int] = None) -> int:
    """Return the stable integer ID for a destination address.

    New addresses receive the next unused ID, starting at 0. ``table`` is
    updated in place.
    """
    raw = bytes(raw)
    if len(raw) not in (4, 16):
        raise ValueError(f"address must be 4 or 16 bytes, got {len(raw)}")
    dest = table.get(raw)
    if dest is None:
        if max_dests is not None and len(table) >= max_dests:
            raise TooManyDestinations(
                f"more than {max_dests} distinct destinations (EWS_MAX_DESTS)"
            )
        dest = len(table)
        table[raw] = dest
    return dest


class PacketTrace:
    """Columnar, time-ordered packet trace.

    Iterating yields :class:`PacketRecord` values; the numpy columns ``t``,
    ``dest`` and ``size`` are what the analysis code works on.
    ``duration`` is the nominal trace length when known (synthetic traces),
    otherwise ``None``.
    """

    def __init__(self, t, dest, size, duration=None, meta=None):
        t = np.ascontiguousarray(t, dtype=np.float64)
        dest = np.ascontiguousarray(dest, dtype=np.int64)
        size = np.ascontiguousarray(size, dtype=np.int64)
        if not (t.ndim == dest.ndim == size.ndim == 1):
            raise ValueError("trace columns must be one-dimensional")
        if not (len(t) == len(dest) == len(size)):
            raise ValueError("trace columns differ in length")
        if len(t):
            if not np.all(np.isfinite(t)) or t[0] < 0:
                raise ValueError("timestamps must be finite and non-negative")
            bad = np.flatnonzero(np.diff(t) < 0)
            if len(bad):
                raise NonMonotoneTime(int(bad[0]) + 2)
            if dest.min() < 0:
                raise ValueError("destination ids must be non-negative")
            if size.min() < 1 or size.max() > MAX_SIZE:
                raise ValueError(f"packet sizes must lie in [1, {MAX_SIZE}]")
        for arr in (t, dest, size):
            arr.setflags(write=False)
        self.t = t
        self.dest = dest
        self.size = size
        self.duration = None if duration is None else float(duration)
        self.meta = dict(meta or {})

    @classmethod
    def from_records(cls, records: Iterable[PacketRecord], duration=None, meta=None):
        rows = list(records)
        if not rows:
            return cls.empty(duration=duration, meta=meta)
        t, dest, size = zip(*rows)
        return cls(t, dest, size, duration=duration, meta=meta)

    @classmethod
    def empty(cls, duration=None, meta=None):
        return cls(np.empty(0), np.empty(0, np.int64), np.empty(0, np.int64),
                   duration=duration, meta=meta)

    def __len__(self):
        return len(self.t)

    def __iter__(self) -> Iterator[PacketRecord]:
        for t, d, s in zip(self.t.tolist(), self.dest.tolist(), self.size.tolist()):
            yield PacketRecord(t, d, s)

    def __eq__(self, other):
        if not isinstance(other, PacketTrace):
            return NotImplemented
        return (np.array_equal(self.t, other.t)
                and np.array_equal(self.dest, other.dest)
                and np.array_equal(self.size, other.size))

    def __repr__(self):
        return f"PacketTrace(n={len(self)}, end={self.end_time:.6f})"

    @property
    def end_time(self) -> float:
        """Nominal end of the trace: ``duration`` if set, else the last timestamp."""
        last = float(self.t[-1]) if len(self.t) else 0.0
        if self.duration is not None:
            return max(self.duration, last)
        return last


# --- pcap ----------------------------------------------------------------

@dataclass
class PcapSummary:
    """Frame accounting for one capture.

    ``yielded + malformed + non_ip + filtered == total`` always holds.
    """

    total: int = 0
    yielded: int = 0
    malformed: int = 0
    non_ip: int = 0
    filtered: int = 0
    link_type: int = -1
    nanosecond: bool = False
    table: dict = field(default_factory=dict, repr=False)

    def as_dict(self):
        return {
            "total": self.total,
            "yielded": self.yielded,
            "malformed": self.malformed,
            "non_ip": self.non_ip,
            "filtered": self.filtered,
            "link_type": self.link_type,
        }


class _FrameSkip(Exception):
    def __init__(self, kind):
        self.kind = kind


def _ip_addresses(link_type: int, data: bytes):
    """Return (src, dst) raw addresses for a frame, or raise _FrameSkip."""
    if link_type == _LINK_ETHERNET:
        if len(data) < 14:
            raise _FrameSkip("malformed")
        ethertype = struct.unpack_from("!H", data, 12)[0]
        offset = 14
        while ethertype in _ETH_VLAN:
            if len(data) < offset + 4:
                raise _FrameSkip("malformed")
            ethertype = struct.unpack_from("!H", data, offset + 2)[0]
            offset += 4
        if ethertype not in (_ETH_IPV4, _ETH_IPV6):
            raise _FrameSkip("non_ip")
        payload = data[offset:]
    elif link_type == _LINK_SLL:
        if len(data) < 16:
            raise _FrameSkip("malformed")
        ethertype = struct.unpack_from("!H", data, 14)[0]
        if ethertype not in (_ETH_IPV4, _ETH_IPV6):
            raise _FrameSkip("non_ip")
        payload = data[16:]
    else:
        payload = data

    if not payload:
        raise _FrameSkip("malformed")
    version = payload[0] >> 4
    if link_type == _LINK_IPV4 and version != 4 or link_type == _LINK_IPV6 and version != 6:
        raise _FrameSkip("malformed")
    if version == 4:
        if len(payload) < 20 or (payload[0] & 0x0F) < 5:
            raise _FrameSkip("malformed")
        return payload[12:16], payload[16:20]
    if version == 6:
        if len(payload) < 40:
            raise _FrameSkip("malformed")
        return payload[8:24], payload[24:40]
    if link_type == _LINK_ETHERNET or link_type == _LINK_SLL:
        raise _FrameSkip("malformed")
    raise _FrameSkip("non_ip")


def _read_global_header(fh):
    header = fh.read(24)
    if len(header) < 24:
        raise UnreadableFile("truncated pcap global header")
    for endian in ("<", ">"):
        magic = struct.unpack(endian + "I", header[:4])[0]
        if magic in (_MAGIC_USEC, _MAGIC_NSEC):
            _, _, _, _, _, link_type = struct.unpack(endian + "HHiIII", header[4:])
            return endian, magic == _MAGIC_NSEC, link_type & 0x0FFFFFFF
    raise UnreadableFile(f"bad pcap magic {header[:4].hex()}")


def iter_pcap(path, dest_filter=None, both_directions=False, table=None,
              summary: Optional[PcapSummary] = None, max_dests=None):
    """Stream :class:`PacketRecord` values from a pcap savefile.

    ``dest_filter`` is an optional collection of destination IDs to keep.
    With ``both_directions`` a packet whose *source* is a monitored
    destination is kept as well and attributed to that destination.
    Pass a :class:`PcapSummary` to collect frame counters; its ``table``
    holds the address-to-ID mapping unless ``table`` is given explicitly.
    """
    if summary is None:
        summary = PcapSummary()
    if table is None:
        table = summary.table
    else:
        summary.table = table
    if max_dests is None:
        max_dests = max_dests_from_env()
    allowed = None if dest_filter is None else frozenset(int(d) for d in dest_filter)

    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc.strerror or exc}") from exc
    with fh:
        endian, nanos, link_type = _read_global_header(fh)
        supported = (_LINK_ETHERNET, _LINK_SLL, _LINK_IPV4, _LINK_IPV6) + _LINK_RAW
        if link_type not in supported:
            raise UnreadableFile(f"unsupported link type {link_type}")
        summary.link_type = link_type
        summary.nanosecond = nanos
        rec_fmt = endian + "IIII"
        frac_per_sec = 1_000_000_000 if nanos else 1_000_000
        first_ns = None

        while True:
            rec = fh.read(16)
            if not rec:
                break
            summary.total += 1
            if len(rec) < 16:
                summary.malformed += 1
                break
            ts_sec, ts_frac, incl_len, orig_len = struct.unpack(rec_fmt, rec)
            data = fh.read(incl_len)
            if len(data) < incl_len or ts_frac >= frac_per_sec:
                summary.malformed += 1
                if len(data) < incl_len:
                    break
                continue
            ts_ns = ts_sec * 1_000_000_000 + (ts_frac if nanos else ts_frac * 1000)
            if first_ns is None:
                first_ns = ts_ns
            try:
                src, dst = _ip_addresses(link_type, data)
            except _FrameSkip as skip:
                setattr(summary, skip.kind, getattr(summary, skip.kind) + 1)
                continue
            if orig_len < 1 or orig_len > MAX_SIZE:
                summary.malformed += 1
                continue

            dest = map_destination(dst, table, max_dests)
            if allowed is not None and dest not in allowed:
                src_id = table.get(bytes(src))
                if both_directions and src_id is not None and src_id in allowed:
                    dest = src_id
                else:
                    summary.filtered += 1
                    continue

            rel_us = (ts_ns - first_ns + 500) // 1000
            summary.yielded += 1
            yield PacketRecord(rel_us / 1e6, dest, int(orig_len))


def read_pcap(path, dest_filter=None, both_directions=False, table=None, max_dests=None):
    """Read a whole capture into a :class:`PacketTrace`.

    Frames whose timestamps run backwards are reordered (stable sort) and
    the origin moves to the earliest frame; the number of backward steps is
    kept in ``trace.meta['ingest']['reordered']``.
    """
    summary = PcapSummary()
    records = list(iter_pcap(path, dest_filter=dest_filter, both_directions=both_directions,
                             table=table, summary=summary, max_dests=max_dests))
    if records:
        t = np.array([r.t for r in records])
        dest = np.array([r.dest for r in records], dtype=np.int64)
        size = np.array([r.size for r in records], dtype=np.int64)
        reordered = int(np.count_nonzero(np.diff(t) < 0))
        if reordered:
            order = np.argsort(t, kind="stable")
            t, dest, size = t[order], dest[order], size[order]
            t = np.round(t - t[0], 6)
    else:
        t = np.empty(0)
        dest = size = np.empty(0, dtype=np.int64)
        reordered = 0
    ingest = summary.as_dict()
    ingest["reordered"] = reordered
    ingest["destinations"] = len(summary.table)
    return PacketTrace(t, dest, size, meta={"source": str(path), "format": "pcap",
                                            "ingest": ingest})


# --- csv -----------------------------------------------------------------

def read_csv(path, max_dests=None):
    """Read a trace in ``relative_time_seconds,dest_id,size_bytes`` format."""
    if max_dests is None:
        max_dests = max_dests_from_env()
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc.strerror or exc}") from exc
    t, dest, size = [], [], []
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file: header row required")
        except (csv.Error, UnicodeDecodeError) as exc:
            raise SchemaError(f"unreadable header: {exc}") from exc
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise SchemaError(f"expected header {','.join(CSV_HEADER)}, got {','.join(header)}")
        prev = -np.inf
        try:
            for row_no, row in enumerate(reader, start=1):
                if not row:
                    continue
                if len(row) != 3:
                    raise SchemaError(f"row {row_no}: expected 3 columns, got {len(row)}")
                try:
                    ti = float(row[0])
                    di = int(row[1])
                    si = int(row[2])
                except ValueError as exc:
                    raise SchemaError(f"row {row_no}: {exc}") from exc
                if not np.isfinite(ti) or ti < 0:
                    raise SchemaError(f"row {row_no}: bad time {row[0]!r}")
                if di < 0:
                    raise SchemaError(f"row {row_no}: negative dest_id")
                if not 1 <= si <= MAX_SIZE:
                    raise SchemaError(f"row {row_no}: size {si} out of range")
                if ti < prev:
                    raise NonMonotoneTime(row_no)
                prev = ti
                t.append(ti)
                dest.append(di)
                size.append(si)
        except (csv.Error, UnicodeDecodeError) as exc:
            raise SchemaError(str(exc)) from exc
    if len(set(dest)) > max_dests:
        raise TooManyDestinations(f"more than {max_dests} distinct destinations (EWS_MAX_DESTS)")
    return PacketTrace(np.array(t, dtype=np.float64), np.array(dest, dtype=np.int64),
                       np.array(size, dtype=np.int64),
                       meta={"source": str(path), "format": "csv"})


def write_csv(trace, path):
    """Write a trace (or any iterable of records) in the CSV interchange format."""
    if not isinstance(trace, PacketTrace):
        trace = PacketTrace.from_records(trace)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        if len(trace):
            body = np.column_stack([trace.t, trace.dest, trace.size])
            np.savetxt(fh, body, fmt=("%.6f", "%d", "%d"), delimiter=",")


def read_trace(path, fmt=None, **kwargs):
    """Dispatch on ``fmt`` ('pcap' or 'csv'); guessed from the suffix if omitted."""
    if fmt is None:
        fmt = "csv" if str(path).lower().endswith(".csv") else "pcap"
    if fmt == "pcap":
        return read_pcap(path, **kwargs)
    if fmt == "csv":
        return read_csv(path, max_dests=kwargs.get("max_dests"))
    raise ValueError(f"unknown trace format {fmt!r}")
