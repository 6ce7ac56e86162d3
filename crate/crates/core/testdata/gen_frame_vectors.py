#!/usr/bin/env python3
"""Writes frame_vectors.txt from the byte layout, independently of the Rust codec.

Run from this directory: python3 gen_frame_vectors.py > frame_vectors.txt
"""
import struct
from decimal import Decimal, ROUND_HALF_UP


def crc16(data: bytes) -> int:
    crc = 0xFFFF
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) if crc & 0x8000 else (crc << 1)
            crc &= 0xFFFF
    return crc


def quantize(value: str, scale: int) -> int:
    # half away from zero on the exact decimal, as the layout specifies
    return int((Decimal(value) * scale).to_integral_value(rounding=ROUND_HALF_UP))


def beacon(vid, lat, lon, heading, ts):
    la = quantize(lat, 10**6)
    lo = quantize(lon, 10**6)
    if lo == 180_000_000:
        lo = -180_000_000
    h = quantize(heading, 100) % 36000
    body = struct.pack("<BBIiiHI", 1, 1, vid, la, lo, h, ts)
    return body + struct.pack(">H", crc16(body))


def telemetry(bump_id, state, speed_cms, ts):
    body = struct.pack("<BBIBHI", 1, 2, bump_id, state, speed_cms, ts)
    return body + struct.pack(">H", crc16(body))


BEACONS = [
    (1, "0", "0", "0", 0),
    (7, "32.6546", "51.668", "90", 3600),
    (0xFFFFFFFF, "-89.999999", "-179.999999", "359.99", 0xFFFFFFFF),
    (42, "35.700001", "-0.0000005", "180.005", 12),
    (3, "90", "179.9999995", "0.004", 5),
    (1234567, "-33.8688", "151.2093", "271.5", 86400),
]

TELEMETRY = [
    (1, 0, 0, 0),
    (2, 1, 833, 17),
    (3, 2, 0, 3600),
    (0xFFFFFFFF, 3, 65535, 0xFFFFFFFF),
    (9, 4, 1389, 120),
]

print("# kind fields... hex")
print("# beacon: id lat_deg lon_deg heading_deg ts; fields are the decoded values")
print("# telemetry: bump_id state_code speed_cms ts")
for vid, lat, lon, heading, ts in BEACONS:
    frame = beacon(vid, lat, lon, heading, ts)
    _, _, _, la, lo, h, _ = struct.unpack("<BBIiiHI", frame[:20])
    print(f"beacon {vid} {la / 1e6:.6f} {lo / 1e6:.6f} {h / 100:.2f} {ts} {frame.hex()}")
for row in TELEMETRY:
    print("telemetry " + " ".join(str(v) for v in row) + " " + telemetry(*row).hex())
print(f"crc 313233343536373839 {crc16(b'123456789'):04x}")
print(f"crc - {crc16(b''):04x}")
