#!/usr/bin/env python3
"""Write the per-attribute object listing for a KB file.

Reads `name | attribute | value | source` lines on its own, without the C++
loader, so tests can compare the loader's index against it.
"""
import sys
from collections import defaultdict

ATTRS = ["length", "area", "volume", "weight", "density", "speed", "time", "data", "cost", "calories"]


def main(kb_path, out_path):
    index = defaultdict(set)
    with open(kb_path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            name, attr, _value, _source = [p.strip() for p in line.split("|")]
            index["weight" if attr == "mass" else attr].add(name)
    with open(out_path, "w", encoding="utf-8") as out:
        out.write("# objects per attribute, generated by tools/kb_manifest.py\n")
        for attr in ATTRS:
            for name in sorted(index[attr]):
                out.write(f"{attr}\t{name}\n")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit("usage: kb_manifest.py KB_FILE OUT_FILE")
    main(sys.argv[1], sys.argv[2])
