"""Regenerate tests/golden/pairing_R1.csv and pairing_R2.csv."""

from pathlib import Path

from flatsym.cli import PAIRING_HEADER, pairing_rows
from flatsym.exact import READINGS
from flatsym.fmt import write_csv

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"

if __name__ == "__main__":
    rows = pairing_rows(3, 10)
    for reading in READINGS:
        path = write_csv(GOLDEN / f"pairing_{reading}.csv", PAIRING_HEADER, [r for r in rows if r[1] == reading])
        print(path)
