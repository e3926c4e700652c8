#!/usr/bin/env python3
"""Reference external despeckler: 5x5 boxcar average of |s|^2 with mirror
boundary handling.

Usage: ref_boxcar_despeckler.py <input.mcslc> <output.refl>
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
        values = struct.unpack("<%df" % (2 * d * h * w), payload)
    return d, h, w, values


def write_refl(path, h, w, values):
    with open(path, "wb") as f:
        f.write(b"MCCV")
        f.write(struct.pack("<B", 1))
        f.write(struct.pack("<III", 1, h, w))
        f.write(struct.pack("<%df" % (h * w), *values))


def mirror(i, n):
    while i < 0 or i >= n:
        if i < 0:
            i = -i
        if i >= n:
            i = 2 * n - 2 - i
    return i


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
    out = []
    for r in range(h):
        for c in range(w):
            acc = 0.0
            for u in range(-2, 3):
                rm = mirror(r + u, h)
                for v in range(-2, 3):
                    acc += intensity[rm * w + mirror(c + v, w)]
            out.append(acc / 25.0)
    write_refl(sys.argv[2], h, w, out)


if __name__ == "__main__":
    main()
