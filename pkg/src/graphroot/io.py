"""File formats: GRD tables, edge lists, embeddings and scree tables."""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedding import Embedding, SignedSpectrum
from .krein import DiscreteGRD
from .sampling import AdjacencyMatrix

log = logging.getLogger(__name__)

_HEADER = re.compile(r"#\s*n\s*=\s*(\d+)\s*$")


class DataError(ValueError):
    """Malformed input data."""


def fmt(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


def grd_header(p1: int, p2: int) -> list[str]:
    return ["weight"] + [f"x{j + 1}" for j in range(p1)] + [f"y{j + 1}" for j in range(p2)]


def write_grd(F: DiscreteGRD, path, canonical: bool = False) -> tuple[Path, Path]:
    """CSV of ``weight,x1..,y1..`` rows plus a ``.json`` sidecar with dims."""
    path = Path(path)
    p1, p2 = F.dims
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(grd_header(p1, p2))
        for wt, x, y in zip(F.weights, F.X, F.Y):
            w.writerow([fmt(wt)] + [fmt(v) for v in x] + [fmt(v) for v in y])
    side = path.with_suffix(".json")
    side.write_text(json.dumps({"p1": p1, "p2": p2, "canonical": bool(canonical)}) + "\n")
    return path, side


def read_grd(path) -> tuple[DiscreteGRD, dict]:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    p1, p2 = int(meta["p1"]), int(meta["p2"])
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != grd_header(p1, p2):
        raise DataError(f"{path}: header does not match dims ({p1}, {p2})")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, 1 + p1 + p2)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    F = DiscreteGRD(data[:, 1 : 1 + p1], data[:, 1 + p1 :], data[:, 0])
    return F, meta


def write_edge_list(A: AdjacencyMatrix, path) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"# n={A.n}\n")
        for i, j in A.edges():
            fh.write(f"{i} {j}\n")
    return path


@dataclass
class EdgeListReport:
    duplicates: int = 0
    self_loops: int = 0


def read_edge_list(path, n: int | None = None) -> tuple[AdjacencyMatrix, EdgeListReport]:
    """Parse a whitespace-separated edge list.

    Accepts ``#`` comments, blank lines and either orientation of a pair.
    A ``# n=<count>`` header fixes the node count; otherwise it is one more
    than the largest id.  Duplicate edges and self-loops are dropped and
    counted in the report.
    """
    path = Path(path)
    report = EdgeListReport()
    seen: set[tuple[int, int]] = set()
    header_n = None
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _HEADER.match(line)
            if m and header_n is None:
                header_n = int(m.group(1))
            continue
        toks = line.split()
        if len(toks) != 2:
            raise DataError(f"{path}:{lineno}: expected two node ids, got {len(toks)} tokens")
        try:
            i, j = int(toks[0]), int(toks[1])
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-integer node id in {line!r}") from None
        if i < 0 or j < 0:
            raise DataError(f"{path}:{lineno}: negative node id")
        if i == j:
            report.self_loops += 1
            continue
        key = (min(i, j), max(i, j))
        if key in seen:
            report.duplicates += 1
            continue
        seen.add(key)
    if n is None:
        n = header_n
    top = max((j for _, j in seen), default=-1)
    if n is None:
        n = top + 1
    if top >= n:
        raise DataError(f"{path}: node id {top} out of range for n={n}")
    if n < 1:
        raise DataError(f"{path}: graph has no nodes")
    if report.duplicates:
        log.warning("%s: dropped %d duplicate edges", path, report.duplicates)
    if report.self_loops:
        log.warning("%s: dropped %d self-loops", path, report.self_loops)
    return AdjacencyMatrix.from_edges(n, sorted(seen)), report


def parse_edge_list(path) -> AdjacencyMatrix:
    return read_edge_list(path)[0]


def read_labels(path) -> dict[int, str]:
    labels = {}
    with Path(path).open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].startswith("#"):
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected node_id,label")
            try:
                labels[int(row[0])] = row[1]
            except ValueError:
                if lineno == 1:
                    continue  # header line
                raise DataError(f"{path}:{lineno}: non-integer node id {row[0]!r}") from None
    return labels


def write_embedding(emb: Embedding, path, labels: dict[int, str] | None = None) -> Path:
    path = Path(path)
    p1, p2 = emb.dims
    header = ["node_id"] + [f"x{j + 1}" for j in range(p1)] + [f"y{j + 1}" for j in range(p2)]
    if labels is not None:
        header.append("label")
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, (x, y) in enumerate(zip(emb.X, emb.Y)):
            row = [str(i)] + [fmt(v) for v in x] + [fmt(v) for v in y]
            if labels is not None:
                row.append(labels.get(i, ""))
            w.writerow(row)
    return path


def write_scree(spec: SignedSpectrum, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "abs_eigenvalue", "sign"])
        for r, v, s in spec.scree():
            w.writerow([r, fmt(v), s])
    return path
