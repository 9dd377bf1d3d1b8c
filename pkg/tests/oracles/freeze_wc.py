"""Freeze `wc -w` counts for the whitespace fixture (whole file and per line)."""

import json
import subprocess
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "data"


def wc_words(data: bytes) -> int:
    out = subprocess.run(["wc", "-w"], input=data, capture_output=True, check=True,
                         env={"LC_ALL": "C.UTF-8"})
    return int(out.stdout.split()[0])


def main():
    raw = (DATA / "wc_fixture.txt").read_bytes()
    lines = raw.split(b"\n")
    result = {"total": wc_words(raw), "per_line": [wc_words(line) for line in lines]}
    (DATA / "wc_fixture.expected.json").write_text(json.dumps(result) + "\n")
    print(result)


if __name__ == "__main__":
    main()
