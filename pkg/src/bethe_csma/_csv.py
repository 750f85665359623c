"""CSV conventions: UTF-8, header row, ``.`` decimals, 17 significant digits."""
from __future__ import annotations

import contextlib
import csv


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_rows(target, header, rows) -> None:
    with open_out(target) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, float) else v for v in row])


def read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


@contextlib.contextmanager
def open_out(target):
    """Yield a text handle for a path, or pass an open file object through."""
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", encoding="utf-8", newline="") as fh:
            yield fh


def csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")
