"""Text file formats for point sets, coreset indices and sweep results.

Floats are written with 17 significant digits, which round-trips every
double exactly.
"""
import csv
import io as _io

import numpy as np

from .bench import ResultRow

RESULTS_HEADER = ("method", "n", "coreset_size", "mean_mmd", "stderr_mmd", "wall_time_s")


def _fmt(x):
    return format(float(x), ".17g")


def _is_number(token):
    try:
        float(token)
    except ValueError:
        return False
    return True


def _data_lines(text):
    return [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def parse_points(text):
    """Parse CSV or whitespace-delimited point text into an (n, d) array.

    A first line containing any non-numeric token is treated as a header.
    """
    lines = _data_lines(text)
    if not lines:
        raise ValueError("no points found")
    delimiter = "," if "," in lines[0] else None
    split = (lambda ln: [t.strip() for t in ln.split(",")]) if delimiter else str.split
    if not all(_is_number(t) for t in split(lines[0])):
        lines = lines[1:]
        if not lines:
            raise ValueError("file has a header but no points")
    rows = []
    for lineno, ln in enumerate(lines, 1):
        fields = split(ln)
        try:
            rows.append([float(t) for t in fields])
        except ValueError:
            raise ValueError(f"non-numeric field on data line {lineno}: {ln!r}") from None
        if len(rows[-1]) != len(rows[0]):
            raise ValueError(f"data line {lineno} has {len(rows[-1])} fields, expected {len(rows[0])}")
    X = np.array(rows, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ValueError("points contain non-finite values")
    return X


def read_points(path):
    with open(path, encoding="utf-8") as fh:
        return parse_points(fh.read())


def format_points(X, delimiter=","):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return "".join(delimiter.join(_fmt(v) for v in row) + "\n" for row in X)


def write_points(path, X, delimiter=","):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_points(X, delimiter))


def format_indices(indices, meta=None):
    """One 0-based index per line, preceded by an optional ``# meta:`` line."""
    out = []
    if meta is not None:
        out.append("# meta: " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    out.extend(f"{int(i)}\n" for i in indices)
    return "".join(out)


def read_indices(path):
    with open(path, encoding="utf-8") as fh:
        return np.array([int(ln) for ln in _data_lines(fh.read())], dtype=np.int64)


def format_results(rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULTS_HEADER)
    for r in rows:
        w.writerow([r.method, r.n, r.coreset_size, _fmt(r.mean_mmd), _fmt(r.stderr_mmd), _fmt(r.wall_time)])
    return buf.getvalue()


def write_results(path, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_results(rows))


def read_results(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RESULTS_HEADER:
            raise ValueError(f"unexpected results header {reader.fieldnames}")
        return [
            ResultRow(r["method"], int(r["n"]), int(r["coreset_size"]), float(r["mean_mmd"]),
                      float(r["stderr_mmd"]), float(r["wall_time_s"]))
            for r in reader
        ]
