"""Readers and writers for the on-disk formats used by the CLI.

Floats are written with ``repr`` so every value round-trips bit-exactly.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import InputError
from .graph import Dag, from_edge_list


class FormatError(InputError):
    def __init__(self, path, line, msg):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {msg}")
        self.path = str(path)
        self.line = line


def fmt(x: float) -> str:
    return repr(float(x))


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise FormatError(path, None, f"cannot read file ({exc.strerror})") from None


def read_graph(path, n_vertices: int | None = None) -> Dag:
    """Read a graph from ``.json`` (``{"n_vertices", "edges"}``) or CSV (``source,target``)."""
    path = Path(path)
    text = _read_text(path)
    if path.suffix.lower() == ".json":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict) or "edges" not in obj:
            raise FormatError(path, None, 'expected an object with "n_vertices" and "edges"')
        n = obj.get("n_vertices", n_vertices)
        edges = obj["edges"]
        if n is None:
            raise FormatError(path, None, '"n_vertices" missing')
        try:
            return from_edge_list(int(n), [tuple(e) for e in edges])
        except (TypeError, ValueError) as exc:
            raise FormatError(path, None, str(exc)) from None

    rows = list(csv.reader(text.splitlines()))
    if not rows or [c.strip() for c in rows[0]] != ["source", "target"]:
        raise FormatError(path, 1, 'header must be "source,target"')
    edges = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise FormatError(path, lineno, f"expected 2 fields, got {len(row)}")
        try:
            edges.append((int(row[0]), int(row[1])))
        except ValueError:
            raise FormatError(path, lineno, f"non-integer vertex id in {row!r}") from None
    if n_vertices is None:
        if not edges:
            raise FormatError(path, None, "no edges; pass the vertex count explicitly")
        n_vertices = max(max(e) for e in edges) + 1
    try:
        return from_edge_list(n_vertices, edges)
    except InputError as exc:
        raise FormatError(path, None, str(exc)) from None


def write_graph(path, dag: Dag) -> None:
    Path(path).write_text(json.dumps(dag.to_dict()) + "\n")


def read_signal(path, n_vertices: int | None = None) -> np.ndarray:
    """Read a ``vertex,value`` CSV; every vertex must appear exactly once."""
    rows = list(csv.reader(_read_text(path).splitlines()))
    if not rows or [c.strip() for c in rows[0]] != ["vertex", "value"]:
        raise FormatError(path, 1, 'header must be "vertex,value"')
    values: dict[int, float] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise FormatError(path, lineno, f"expected 2 fields, got {len(row)}")
        try:
            v, x = int(row[0]), float(row[1])
        except ValueError:
            raise FormatError(path, lineno, f"cannot parse {row!r}") from None
        if v in values:
            raise FormatError(path, lineno, f"vertex {v} listed twice")
        if not np.isfinite(x):
            raise FormatError(path, lineno, "value is not finite")
        values[v] = x
    n = n_vertices if n_vertices is not None else (max(values) + 1 if values else 0)
    if sorted(values) != list(range(n)):
        raise FormatError(path, None, f"vertices must be exactly 0..{n - 1}")
    return np.array([values[v] for v in range(n)])


def write_signal(path, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["vertex", "value"])
        for v, x in enumerate(np.asarray(values, dtype=float)):
            w.writerow([v, fmt(x)])


def read_samples(path) -> list[int]:
    """Outcome ids, one per line, or a CSV with an ``outcome`` column."""
    lines = _read_text(path).splitlines()
    out: list[int] = []
    if lines and "outcome" in [c.strip() for c in lines[0].split(",")]:
        rows = list(csv.reader(lines))
        col = [c.strip() for c in rows[0]].index("outcome")
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            try:
                out.append(int(row[col]))
            except (ValueError, IndexError):
                raise FormatError(path, lineno, f"bad outcome in {row!r}") from None
        return out
    for lineno, line in enumerate(lines, start=1):
        s = line.strip()
        if not s:
            continue
        try:
            out.append(int(s))
        except ValueError:
            raise FormatError(path, lineno, f"outcome {s!r} is not an integer") from None
    return out


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise FormatError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None


def write_matrix_csv(path, samples: np.ndarray, prefix: str = "v") -> None:
    samples = np.atleast_2d(samples)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{prefix}{j}" for j in range(samples.shape[1])])
        for row in samples:
            w.writerow([fmt(x) for x in row])


def read_matrix_csv(path) -> np.ndarray:
    rows = list(csv.reader(_read_text(path).splitlines()))
    if not rows:
        raise FormatError(path, 1, "empty file")
    try:
        return np.array([[float(x) for x in r] for r in rows[1:] if r])
    except ValueError as exc:
        raise FormatError(path, None, str(exc)) from None


def write_law(path, law, extra_meta: dict | None = None) -> Path:
    """Write an empirical law as CSV plus a ``.json`` sidecar; returns the sidecar path."""
    path = Path(path)
    write_matrix_csv(path, law.samples)
    sidecar = path.with_name(path.name + ".json")
    meta = {"seed": law.seed, **law.meta, **(extra_meta or {})}
    write_json(sidecar, meta)
    return sidecar
