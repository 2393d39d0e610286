import struct
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_RESULTS = []


def ipv4_frame(src=b"\x0a\x00\x00\x01", dst=b"\x0a\x00\x00\x02", pad_to=60):
    eth = b"\x00\x11\x22\x33\x44\x55" + b"\x66\x77\x88\x99\xaa\xbb" + struct.pack("!H", 0x0800)
    ip = bytes([0x45, 0]) + struct.pack("!H", 46) + b"\x00" * 4 + bytes([64, 6]) + b"\x00\x00" + src + dst
    frame = eth + ip
    return frame + b"\x00" * max(0, pad_to - len(frame))


def ipv6_frame(src=b"\x20\x01" + b"\x00" * 13 + b"\x01", dst=b"\x20\x01" + b"\x00" * 13 + b"\x02"):
    eth = b"\x00" * 12 + struct.pack("!H", 0x86DD)
    ip = bytes([0x60, 0, 0, 0]) + struct.pack("!H", 0) + bytes([59, 64]) + src + dst
    return eth + ip


def arp_frame():
    return b"\xff" * 6 + b"\x00" * 6 + struct.pack("!H", 0x0806) + b"\x00" * 28


def write_pcap(path, frames, endian="<", nanos=False, link_type=1, truncate_last=False):
    """frames: iterable of (timestamp_seconds, bytes, orig_len or None)."""
    magic = 0xA1B23C4D if nanos else 0xA1B2C3D4
    out = bytearray(struct.pack(endian + "IHHiIII", magic, 2, 4, 0, 0, 65535, link_type))
    for ts, data, orig in frames:
        sec = int(ts)
        frac = round((ts - sec) * (1e9 if nanos else 1e6))
        orig = len(data) if orig is None else orig
        out += struct.pack(endian + "IIII", sec, frac, len(data), orig)
        out += data
    if truncate_last:
        out = out[:-5]
    Path(path).write_bytes(bytes(out))
    return path


@pytest.fixture
def acceptance():
    """Record one acceptance line; printed in the terminal summary."""

    def record(number, name, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {name} ({detail})"
        ACCEPTANCE_RESULTS.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(line)
