"""Versioned delimited-text files.

Every file starts with a metadata line such as::

    # format=reshi-traces version=1

followed by an ordinary CSV header and rows.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .errors import EmptyDataset, ParseError


def read_versioned_csv(path, fmt: str, version: int = 1):
    """Return ``(header, rows)``; rows are ``(line_number, values)`` pairs."""
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ParseError("missing '# format=... version=...' line", row=1, path=path)
    meta = dict(tok.split("=", 1) for tok in lines[0][1:].split() if "=" in tok)
    if meta.get("format") != fmt:
        raise ParseError(f"expected format {fmt!r}, got {meta.get('format')!r}", row=1, path=path)
    if meta.get("version") != str(version):
        raise ParseError(f"unsupported version {meta.get('version')!r}", row=1, path=path)
    reader = csv.reader(io.StringIO("\n".join(lines[1:])))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise EmptyDataset(f"{path}: no header row") from None
    rows = []
    for offset, values in enumerate(reader, start=3):
        if not values or all(not v.strip() for v in values):
            continue
        if len(values) != len(header):
            raise ParseError(f"expected {len(header)} columns, got {len(values)}", row=offset, path=path)
        rows.append((offset, [v.strip() for v in values]))
    return header, rows


def write_versioned_csv(path, fmt: str, header, rows, version: int = 1) -> None:
    buf = io.StringIO()
    buf.write(f"# format={fmt} version={version}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue())


def parse_float(value: str, row: int, column: str, path=None) -> float:
    try:
        return float(value)
    except ValueError:
        raise ParseError(f"not a number: {value!r}", row=row, column=column, path=path) from None


def fmt_float(x: float) -> str:
    return repr(float(x))
