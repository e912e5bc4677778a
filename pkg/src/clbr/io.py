"""Readers and writers for every on-disk format.

Edge lists     ``<src>\\t<dst>`` per line, ``#`` comments ignored.
View deltas    ``<+|->\\t<relation>\\t<src>\\t<dst>`` with a ``#`` header.
Embeddings     ``<node_type>\\t<local_id>\\t<d_0>...\\t<d_{D-1}>``.
Training log   CSV ``epoch,view_index,l_task,l_u,l_b,total,lr``.
Metrics        CSV ``metric,k,value,n_users,seed``.

Floats are written with 17 significant digits so reloading is exact.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import tomli_w

from .errors import DataError
from .graph import RELATIONS, NodeSpace, RelationKind, ViewDelta

NODE_TYPES = ("user", "item", "bundle")


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def read_edge_list(path) -> np.ndarray:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected '<src>\\t<dst>', got {line!r}")
            try:
                pairs.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer id in {line!r}") from None
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def write_edge_list(path, pairs, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for s, d in np.asarray(pairs, dtype=np.int64).reshape(-1, 2).tolist():
            fh.write(f"{s}\t{d}\n")


def infer_space(ub, ui, bi, num_users=None, num_items=None, num_bundles=None) -> NodeSpace:
    def top(*cols):
        vals = [int(c.max()) + 1 for c in cols if len(c)]
        return max(vals) if vals else 1

    return NodeSpace(
        num_users or top(ub[:, 0], ui[:, 0]),
        num_items or top(ui[:, 1], bi[:, 1]),
        num_bundles or top(ub[:, 1], bi[:, 0]),
    )


def write_view_delta(path, delta: ViewDelta, header: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key in sorted(header):
            fh.write(f"# {key}={header[key]}\n")
        for sign, store in (("+", delta.added), ("-", delta.dropped)):
            for kind in RELATIONS:
                for s, d in store[kind].tolist():
                    fh.write(f"{sign}\t{kind.value}\t{s}\t{d}\n")


def read_view_delta(path) -> tuple[ViewDelta, dict]:
    added = {k: [] for k in RELATIONS}
    dropped = {k: [] for k in RELATIONS}
    header = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                header[key] = value
                continue
            parts = line.split("\t")
            if len(parts) != 4 or parts[0] not in "+-" or parts[1] not in {k.value for k in RELATIONS}:
                raise DataError(f"{path}:{lineno}: malformed delta line {line!r}")
            store = added if parts[0] == "+" else dropped
            store[RelationKind(parts[1])].append((int(parts[2]), int(parts[3])))
    return ViewDelta(added=added, dropped=dropped), header


def write_embeddings(path, space: NodeSpace, table: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for node_type in NODE_TYPES:
            off = space.offset(node_type)
            for i in range(space.count(node_type)):
                fh.write(node_type + "\t" + str(i) + "\t" + "\t".join(map(fmt, table[off + i])) + "\n")


def read_embeddings(path, space: NodeSpace) -> np.ndarray:
    rows = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 3 or parts[0] not in NODE_TYPES:
                raise DataError(f"{path}:{lineno}: malformed embedding row")
            vec = [float(x) for x in parts[2:]]
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise DataError(f"{path}:{lineno}: expected {dim} values, got {len(vec)}")
            local = int(parts[1])
            if not 0 <= local < space.count(parts[0]):
                raise DataError(f"{path}:{lineno}: {parts[0]} id {local} out of range")
            rows[space.offset(parts[0]) + local] = vec
    if len(rows) != space.num_nodes:
        raise DataError(f"{path}: expected {space.num_nodes} rows, found {len(rows)}")
    return np.array([rows[i] for i in range(space.num_nodes)], dtype=np.float64)


def write_csv(path, fields, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([fmt(row[f]) if isinstance(row[f], float) else row[f] for f in fields])


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_toml(path, obj: dict) -> None:
    with open(path, "wb") as fh:
        tomli_w.dump(obj, fh)
