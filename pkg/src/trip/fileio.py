"""Plain-text file formats.

measurements   ``i j dx dy dz``
points         ``i x y z``        (ground truth and estimated locations)
labels         ``i j flag``       (flag 1 = corrupted)
node sets      ``i``              (one id per line)

Whitespace separated, ``#`` starts a comment, floats written with 17
significant digits so that a write/read round trip is exact. Node ids are
arbitrary non-negative integers; :class:`NodeIndex` maps them to the dense
ordinals used internally.
"""
import json
from dataclasses import dataclass

import numpy as np

FLOAT_FMT = "%.17g"


class ParseError(ValueError):
    def __init__(self, path, lineno, msg):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {msg}")


def _rows(path, ncols, kinds):
    """Yield (lineno, parsed fields) for every data line."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != ncols:
                raise ParseError(path, lineno, f"expected {ncols} fields, found {len(parts)}")
            out = []
            for p, kind in zip(parts, kinds):
                try:
                    v = kind(p)
                except ValueError:
                    raise ParseError(path, lineno, f"cannot parse {p!r} as {kind.__name__}") from None
                if kind is int and v < 0:
                    raise ParseError(path, lineno, f"negative node id {v}")
                if kind is float and not np.isfinite(v):
                    raise ParseError(path, lineno, f"non-finite value {p!r}")
                out.append(v)
            yield lineno, out


@dataclass
class NodeIndex:
    """Sorted external ids <-> dense ordinals."""

    ids: np.ndarray

    @classmethod
    def from_ids(cls, *groups):
        parts = [np.asarray(g, dtype=np.int64).ravel() for g in groups if g is not None]
        return cls(np.unique(np.concatenate(parts)) if parts else np.zeros(0, dtype=np.int64))

    def __len__(self):
        return len(self.ids)

    def local(self, ext):
        ext = np.asarray(ext, dtype=np.int64)
        pos = np.searchsorted(self.ids, ext)
        pos = np.minimum(pos, max(len(self.ids) - 1, 0))
        if len(self.ids) == 0 or np.any(self.ids[pos] != ext):
            raise KeyError("unknown node id")
        return pos

    def external(self, loc):
        return self.ids[np.asarray(loc, dtype=np.int64)]


def read_measurements(path):
    """(ij external ids (m, 2), directions (m, 3))."""
    ij, vec = [], []
    for lineno, (i, j, dx, dy, dz) in _rows(path, 5, (int, int, float, float, float)):
        if i == j:
            raise ParseError(path, lineno, f"self-loop on node {i}")
        if dx == 0 and dy == 0 and dz == 0:
            raise ParseError(path, lineno, "zero direction vector")
        ij.append((i, j))
        vec.append((dx, dy, dz))
    return np.array(ij, dtype=np.int64).reshape(-1, 2), np.array(vec, dtype=np.float64).reshape(-1, 3)


def write_measurements(path, ij, vec):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# i j dx dy dz\n")
        for (i, j), v in zip(np.asarray(ij), np.asarray(vec)):
            fh.write(f"{int(i)} {int(j)} " + " ".join(FLOAT_FMT % c for c in v) + "\n")


def read_points(path):
    """{external id: xyz}; duplicate ids are rejected."""
    out = {}
    for lineno, (i, x, y, z) in _rows(path, 4, (int, float, float, float)):
        if i in out:
            raise ParseError(path, lineno, f"duplicate node id {i}")
        out[i] = np.array([x, y, z])
    return out


def write_points(path, ids, xyz, header="i x y z"):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {header}\n")
        for i, p in zip(np.asarray(ids), np.asarray(xyz)):
            fh.write(f"{int(i)} " + " ".join(FLOAT_FMT % c for c in p) + "\n")


def read_labels(path):
    ij, flag = [], []
    for lineno, (i, j, f) in _rows(path, 3, (int, int, int)):
        if f not in (0, 1):
            raise ParseError(path, lineno, f"label must be 0 or 1, found {f}")
        ij.append((i, j))
        flag.append(bool(f))
    return np.array(ij, dtype=np.int64).reshape(-1, 2), np.array(flag, dtype=bool)


def write_labels(path, ij, corrupt):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# i j corrupt\n")
        for (i, j), c in zip(np.asarray(ij), np.asarray(corrupt)):
            fh.write(f"{int(i)} {int(j)} {int(bool(c))}\n")


def read_node_set(path):
    return [i for _, (i,) in _rows(path, 1, (int,))]


def write_node_set(path, ids):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# i\n")
        for i in ids:
            fh.write(f"{int(i)}\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def dumps_json(obj):
    return json.dumps(obj, indent=2, sort_keys=False, default=_json_default, allow_nan=True)


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_json(obj) + "\n")
