#!/usr/bin/env python3
"""Reference external despeckler: writes the 1-look intensity |s|^2.

Usage: ref_identity_despeckler.py <input.mcslc> <output.refl>
"""
import struct
import sys


def read_mcslc(path):
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != b"MCSL":
            raise SystemExit("not an MCSLC file")
        (version,) = struct.unpack("<B", f.read(1))
        if version != 1:
            raise SystemExit("unsupported version")
        d, h, w = struct.unpack("<III", f.read(12))
        payload = f.read(8 * d * h * w)
        if len(payload) != 8 * d * h * w:
            raise SystemExit("truncated payload")
        values = struct.unpack("<%df" % (2 * d * h * w), payload)
    return d, h, w, values


def write_refl(path, h, w, values):
    with open(path, "wb") as f:
        f.write(b"MCCV")
        f.write(struct.pack("<B", 1))
        f.write(struct.pack("<III", 1, h, w))
        f.write(struct.pack("<%df" % (h * w), *values))


def main():
    if len(sys.argv) != 3:
        raise SystemExit(__doc__)
    d, h, w, values = read_mcslc(sys.argv[1])
    if d != 1:
        raise SystemExit("expected a single-channel image")
    intensity = [
        values[2 * i] * values[2 * i] + values[2 * i + 1] * values[2 * i + 1]
        for i in range(h * w)
    ]
    write_refl(sys.argv[2], h, w, intensity)


if __name__ == "__main__":
    main()
