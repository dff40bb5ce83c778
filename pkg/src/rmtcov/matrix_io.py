"""CSV input and output for matrices and result tables."""
import csv
import io
import json
import os

import numpy as np

from .errors import DataIOError, ParseError


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def parse_matrix(text, source="<string>"):
    """Parse rectangular numeric CSV text, skipping an optional header row.

    Lines starting with ``#`` and blank lines are ignored.

    Raises
    ------
    ParseError
        On ragged rows or non-numeric cells, naming the offending line.
    """
    rows = []
    width = None
    seen_data = False
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not any(cell.strip() for cell in row):
            continue
        if row[0].lstrip().startswith("#"):
            continue
        cells = [c.strip() for c in row]
        if not seen_data and not all(_is_number(c) for c in cells):
            if rows or width is not None:
                raise ParseError(f"{source}:{lineno}: non-numeric row")
            width = len(cells)
            continue
        seen_data = True
        if width is None:
            width = len(cells)
        if len(cells) != width:
            raise ParseError(
                f"{source}:{lineno}: expected {width} columns, found {len(cells)}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            bad = next(i for i, c in enumerate(cells) if not _is_number(c))
            raise ParseError(f"{source}:{lineno}: column {bad + 1} is not numeric") from exc
    if not rows:
        raise ParseError(f"{source}: no numeric rows")
    return np.array(rows, dtype=float)


def read_matrix(path):
    """Read a numeric CSV file into a 2-D array."""
    try:
        with open(path, newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    return parse_matrix(text, str(path))


def format_matrix(A):
    """CSV text with 17 significant digits, enough for an exact round trip."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return "".join(",".join(format(v, ".17g") for v in row) + "\n" for row in A)


def _write_text(path, text):
    try:
        parent = os.path.dirname(os.fspath(path))
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc


def write_matrix(path, A):
    _write_text(path, format_matrix(A))


def write_text(path, text):
    _write_text(path, text)


def format_table(columns, rows, metadata=None):
    """CSV with an optional ``# {json}`` metadata line above the header."""
    buf = io.StringIO()
    if metadata is not None:
        buf.write("# " + json.dumps(metadata, sort_keys=True, default=str) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return v


def read_table(path):
    """Read a CSV table with header into ``(metadata, list of dict rows)``."""
    try:
        with open(path, newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    meta = None
    body = []
    for line in lines:
        if line.startswith("#"):
            if meta is None:
                try:
                    meta = json.loads(line[1:].strip())
                except json.JSONDecodeError:
                    meta = {}
            continue
        if line.strip():
            body.append(line)
    if not body:
        raise ParseError(f"{path}: empty table")
    reader = csv.DictReader(io.StringIO("\n".join(body)))
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if None in row or any(v is None for v in row.values()):
            raise ParseError(f"{path}:{lineno}: ragged row")
        rows.append(row)
    return meta, rows
