"""Write data/pendigits.csv from a local copy of the PenDigits table.

The UCI PenDigits data (10992 rows, 16 integer features, digit label) is
distributed by several mirrors. This script accepts either a headerless
comma-separated file with the label last (UCI ``pendigits.tra``/``.tes``
layout or KEEL ``penbased.dat``), or a ``keel_ds`` wheel, which bundles
``keel_ds/data/balanced/raw/penbased.dat``.

    python scripts/prepare_pendigits.py keel_ds-0.2.5-py3-none-any.whl
    python scripts/prepare_pendigits.py pendigits.tra pendigits.tes
"""
import argparse
import csv
import zipfile
from pathlib import Path

KEEL_MEMBER = "keel_ds/data/balanced/raw/penbased.dat"


def read_rows(path):
    path = Path(path)
    if path.suffix == ".whl":
        with zipfile.ZipFile(path) as z:
            text = z.read(KEEL_MEMBER).decode()
    else:
        text = path.read_text()
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        rows.append([v.strip() for v in line.split(",")])
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("sources", nargs="+")
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data" / "pendigits.csv"))
    args = ap.parse_args()
    rows = [r for src in args.sources for r in read_rows(src)]
    if any(len(r) != 17 for r in rows):
        raise SystemExit("expected 16 features plus a label on every row")
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{i}" for i in range(16)] + ["digit"])
        w.writerows(rows)
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
