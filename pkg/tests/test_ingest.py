import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import arp_frame, ipv4_frame, ipv6_frame, write_pcap
from ddos_ews.exceptions import NonMonotoneTime, SchemaError, TooManyDestinations, UnreadableFile
from ddos_ews.ingest import (
    PacketRecord,
    PacketTrace,
    PcapSummary,
    iter_pcap,
    map_destination,
    read_csv,
    read_pcap,
    write_csv,
)

A = b"\x0a\x00\x00\x02"
B = b"\x0a\x00\x00\x03"
VICTIM = b"\xc0\xa8\x00\x01"
CLIENT = b"\x0a\x09\x09\x09"


# --- map_destination --------------------------------------------------------

def test_map_destination_sequence():
    table = {}
    assert map_destination(A, table) == 0
    assert map_destination(A, table) == 0
    assert map_destination(B, table) == 1
    assert map_destination(b"\x00" * 16, table) == 2


def test_map_destination_replay_is_deterministic():
    seq = [A, B, A, b"\x01" * 16, B, b"\x02\x02\x02\x02"]
    t1, t2 = {}, {}
    assert [map_destination(x, t1) for x in seq] == [map_destination(x, t2) for x in seq]


def test_map_destination_rejects_bad_length_and_cap():
    with pytest.raises(ValueError):
        map_destination(b"\x01\x02", {})
    table = {}
    map_destination(A, table, max_dests=1)
    assert map_destination(A, table, max_dests=1) == 0
    with pytest.raises(TooManyDestinations):
        map_destination(B, table, max_dests=1)


# --- pcap -------------------------------------------------------------------

def test_pcap_relative_time_and_size(tmp_path):
    path = write_pcap(tmp_path / "a.pcap", [(100.0, ipv4_frame(), 60), (100.5, ipv4_frame(), 60)])
    trace = read_pcap(path)
    assert trace.t.tolist() == [0.0, 0.5]
    assert trace.size.tolist() == [60, 60]
    assert trace.dest.tolist() == [0, 0]


@pytest.mark.parametrize("endian", ["<", ">"])
@pytest.mark.parametrize("nanos", [False, True])
def test_pcap_byte_orders_and_resolution(tmp_path, endian, nanos):
    frames = [(5.000001, ipv4_frame(dst=A), 1500), (5.25, ipv4_frame(dst=B), 60),
              (6.0, ipv6_frame(), 90)]
    trace = read_pcap(write_pcap(tmp_path / "x.pcap", frames, endian=endian, nanos=nanos))
    assert trace.t.tolist() == [0.0, 0.249999, 0.999999]
    assert trace.size.tolist() == [1500, 60, 90]
    assert trace.dest.tolist() == [0, 1, 2]


def test_pcap_size_is_original_length_not_captured(tmp_path):
    # 60 captured bytes of a 1500-byte frame (snaplen truncation)
    trace = read_pcap(write_pcap(tmp_path / "s.pcap", [(1.0, ipv4_frame(), 1500)]))
    assert trace.size.tolist() == [1500]


def test_pcap_bad_magic(tmp_path):
    path = tmp_path / "bad.pcap"
    path.write_bytes(b"\x00" * 40)
    with pytest.raises(UnreadableFile):
        read_pcap(path)


def test_pcap_truncated_header(tmp_path):
    path = tmp_path / "short.pcap"
    path.write_bytes(b"\xd4\xc3\xb2\xa1" + b"\x00" * 6)
    with pytest.raises(UnreadableFile):
        read_pcap(path)


def test_pcap_missing_file(tmp_path):
    with pytest.raises(UnreadableFile):
        read_pcap(tmp_path / "nope.pcap")


def test_pcap_unsupported_link_type(tmp_path):
    with pytest.raises(UnreadableFile):
        read_pcap(write_pcap(tmp_path / "w.pcap", [(0.0, ipv4_frame(), None)], link_type=105))


def test_pcap_counters_balance(tmp_path):
    frames = [
        (1.0, ipv4_frame(dst=A), None),
        (1.1, arp_frame(), None),                  # non-IP
        (1.2, b"\x00" * 10, None),                 # too short for Ethernet
        (1.3, ipv4_frame(dst=B), None),
        (1.4, ipv4_frame(dst=A)[:20], None),       # Ethernet ok, IPv4 header cut
        (1.5, ipv4_frame(dst=A), None),
    ]
    path = write_pcap(tmp_path / "m.pcap", frames, truncate_last=True)
    summary = PcapSummary()
    records = list(iter_pcap(path, dest_filter=[0], summary=summary))
    assert summary.total == 6
    assert summary.non_ip == 1
    assert summary.malformed == 3   # short frame, cut header, truncated last record
    assert summary.filtered == 1    # dest B
    assert summary.yielded == len(records) == 1
    assert summary.yielded + summary.malformed + summary.non_ip + summary.filtered == summary.total


def test_pcap_direction_flag(tmp_path):
    frames = [(0.0, ipv4_frame(src=CLIENT, dst=VICTIM), 60),
              (0.1, ipv4_frame(src=VICTIM, dst=CLIENT), 1500),
              (0.2, ipv4_frame(src=CLIENT, dst=VICTIM), 60)]
    path = write_pcap(tmp_path / "d.pcap", frames)
    to_victim = read_pcap(path, dest_filter=[0])
    assert to_victim.size.tolist() == [60, 60]
    both = read_pcap(path, dest_filter=[0], both_directions=True)
    assert both.size.tolist() == [60, 1500, 60]
    assert both.dest.tolist() == [0, 0, 0]


def test_pcap_env_cap(tmp_path, monkeypatch):
    frames = [(0.0, ipv4_frame(dst=A), None), (0.1, ipv4_frame(dst=B), None)]
    path = write_pcap(tmp_path / "c.pcap", frames)
    monkeypatch.setenv("EWS_MAX_DESTS", "1")
    with pytest.raises(TooManyDestinations):
        read_pcap(path)
    monkeypatch.setenv("EWS_MAX_DESTS", "2")
    assert len(read_pcap(path)) == 2


def test_pcap_reordered_frames_are_sorted(tmp_path):
    frames = [(10.0, ipv4_frame(), 100), (10.5, ipv4_frame(), 200), (10.2, ipv4_frame(), 300)]
    trace = read_pcap(write_pcap(tmp_path / "r.pcap", frames))
    assert trace.t.tolist() == [0.0, 0.2, 0.5]
    assert trace.size.tolist() == [100, 300, 200]
    assert trace.meta["ingest"]["reordered"] == 1


# --- csv --------------------------------------------------------------------

def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_csv_basic(tmp_path):
    p = _write(tmp_path / "a.csv", "relative_time_seconds,dest_id,size_bytes\n0.0,1,60\n0.1,1,60\n")
    trace = read_csv(p)
    assert list(trace) == [PacketRecord(0.0, 1, 60), PacketRecord(0.1, 1, 60)]


def test_csv_missing_column(tmp_path):
    p = _write(tmp_path / "b.csv", "relative_time_seconds,dest_id\n0.0,1\n")
    with pytest.raises(SchemaError):
        read_csv(p)


def test_csv_wrong_column_count(tmp_path):
    p = _write(tmp_path / "c.csv", "relative_time_seconds,dest_id,size_bytes\n0.0,1\n")
    with pytest.raises(SchemaError):
        read_csv(p)


def test_csv_non_monotone(tmp_path):
    p = _write(tmp_path / "d.csv", "relative_time_seconds,dest_id,size_bytes\n0.2,1,60\n0.1,1,60\n")
    with pytest.raises(NonMonotoneTime) as info:
        read_csv(p)
    assert info.value.row == 2


def test_csv_empty_body(tmp_path):
    p = _write(tmp_path / "e.csv", "relative_time_seconds,dest_id,size_bytes\n")
    assert len(read_csv(p)) == 0


@st.composite
def record_streams(draw):
    n = draw(st.integers(0, 40))
    gaps = draw(st.lists(st.integers(0, 5_000_000), min_size=n, max_size=n))
    t_us = np.cumsum(gaps) if n else np.empty(0, np.int64)
    dests = draw(st.lists(st.integers(0, 1000), min_size=n, max_size=n))
    sizes = draw(st.lists(st.integers(1, 65535), min_size=n, max_size=n))
    return PacketTrace(np.asarray(t_us, dtype=np.int64) / 1e6, dests, sizes)


@settings(max_examples=60, deadline=None)
@given(trace=record_streams())
def test_csv_round_trip(tmp_path_factory, trace):
    path = tmp_path_factory.mktemp("rt") / "t.csv"
    write_csv(trace, path)
    back = read_csv(path)
    assert back == trace
    assert list(back) == list(trace)


def test_trace_rejects_decreasing_time():
    with pytest.raises(NonMonotoneTime):
        PacketTrace([0.5, 0.1], [0, 0], [60, 60])
