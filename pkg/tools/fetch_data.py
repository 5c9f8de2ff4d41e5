#!/usr/bin/env python3
"""Download the UCI Adult and Bank Marketing files and pin their checksums.

    python tools/fetch_data.py --dest data/uci          # download, write checksums.json
    python tools/fetch_data.py --dest data/uci --verify # re-hash and compare

The first successful download records a SHA-256 per file in
``<dest>/checksums.json``; later runs refuse files whose hash changed.
The library itself never touches the network.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
import urllib.request
import zipfile
from pathlib import Path

UCI = "https://archive.ics.uci.edu/ml/machine-learning-databases"
SOURCES = {
    "adult.data": f"{UCI}/adult/adult.data",
    "adult.test": f"{UCI}/adult/adult.test",
    # bank-full.csv ships inside the zip
    "bank-full.csv": f"{UCI}/00222/bank.zip",
}


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def fetch(name: str, url: str, dest: Path) -> Path:
    target = dest / name
    if target.exists():
        return target
    print(f"downloading {url}")
    with urllib.request.urlopen(url, timeout=60) as resp:
        blob = resp.read()
    if url.endswith(".zip"):
        with zipfile.ZipFile(io.BytesIO(blob)) as zf:
            blob = zf.read(name)
    target.write_bytes(blob)
    return target


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--dest", type=Path, default=Path("data/uci"))
    ap.add_argument("--verify", action="store_true", help="only check existing files against checksums.json")
    args = ap.parse_args(argv)
    args.dest.mkdir(parents=True, exist_ok=True)
    record = args.dest / "checksums.json"
    known = json.loads(record.read_text()) if record.exists() else {}

    bad = []
    for name, url in SOURCES.items():
        path = args.dest / name
        if not args.verify:
            path = fetch(name, url, args.dest)
        if not path.exists():
            bad.append(f"{name}: missing")
            continue
        digest = sha256(path)
        if name in known and known[name] != digest:
            bad.append(f"{name}: sha256 {digest} does not match recorded {known[name]}")
        known.setdefault(name, digest)
        print(f"{name}  {digest}")
    if not args.verify:
        record.write_text(json.dumps(known, indent=2, sort_keys=True) + "\n")
    if bad:
        print("\n".join(bad), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
