"""File formats: embeddings, relations, LCH sets, trees and CSV curves."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import ROOT_LABEL, Arborescence, EmbeddingSet, RelationSet, validate_embedding
from .exceptions import (
    CountMismatch,
    DuplicateLabel,
    InconsistentDimension,
    MalformedLine,
    ReservedLabel,
)

EMBEDDING_FORMATS = {"glove_text": "glove_text", "glove": "glove_text",
                     "word2vec_text": "word2vec_text", "word2vec": "word2vec_text"}


def _lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            yield lineno, line.rstrip("\n").rstrip("\r")


def load_embedding(path, format: str = "glove_text") -> EmbeddingSet:
    """Read a text embedding; line order is taken as frequency rank."""
    try:
        fmt = EMBEDDING_FORMATS[format]
    except KeyError:
        raise ValueError(f"unknown embedding format {format!r}") from None
    labels, rows = [], []
    seen = set()
    header = None
    d = None
    for lineno, line in _lines(path):
        if not line.strip():
            continue
        parts = line.split()
        if fmt == "word2vec_text" and header is None:
            if len(parts) != 2 or not all(t.isdigit() for t in parts):
                raise MalformedLine(path, lineno, "expected a header line 'n d'")
            header = (int(parts[0]), int(parts[1]))
            d = header[1]
            continue
        if len(parts) < 2:
            raise MalformedLine(path, lineno, "expected a label followed by coordinates")
        label = parts[0]
        if d is None:
            d = len(parts) - 1
        if len(parts) - 1 != d:
            raise InconsistentDimension(path, lineno, f"{len(parts) - 1} coordinates, expected {d}")
        try:
            vec = [float(t) for t in parts[1:]]
        except ValueError:
            raise MalformedLine(path, lineno, "non-numeric coordinate") from None
        if label == ROOT_LABEL:
            raise ReservedLabel(f"{path}:{lineno}: {ROOT_LABEL!r} is reserved")
        if label in seen:
            raise DuplicateLabel(f"{path}:{lineno}: duplicate label {label!r}")
        seen.add(label)
        labels.append(label)
        rows.append(vec)
    if header is not None and header[0] != len(rows):
        raise CountMismatch(f"{path}: header announces {header[0]} rows, found {len(rows)}")
    return validate_embedding(labels, np.array(rows, dtype=np.float64).reshape(len(rows), d or 0))


def _tsv_fields(path, expected, allow_more=False):
    for lineno, line in _lines(path):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < expected or (len(parts) > expected and not allow_more):
            raise MalformedLine(path, lineno, f"expected {expected} tab-separated fields")
        yield lineno, parts


def load_relations(path, kind: str = "relation") -> RelationSet:
    """``child<TAB>parent`` lines; ``#`` comments and duplicates are ignored."""
    pairs = []
    for lineno, parts in _tsv_fields(path, 2):
        child, par = parts[0].strip(), parts[1].strip()
        if not child or not par:
            raise MalformedLine(path, lineno, "empty label")
        pairs.append((child, par))
    return RelationSet.from_pairs(pairs, kind)


class LchTable(dict):
    """Unordered-pair lookup: ``table[a, b]`` and ``table[b, a]`` agree."""

    def get(self, key, default=None):
        a, b = key
        if (a, b) in self:
            return self[(a, b)]
        return super().get((b, a), default)

    def __call__(self, a, b):
        return self.get((a, b), set())


def load_lch(path) -> LchTable:
    """``w1<TAB>w2<TAB>l1,l2,...`` lines; an empty third field means no LCH."""
    table = LchTable()
    for lineno, parts in _tsv_fields(path, 3):
        w1, w2 = parts[0].strip(), parts[1].strip()
        if not w1 or not w2:
            raise MalformedLine(path, lineno, "empty word")
        labels = {t.strip() for t in parts[2].split(",") if t.strip()}
        table[(w1, w2)] = labels
    return table


def load_power_file(path) -> dict[str, float]:
    out = {}
    for lineno, parts in _tsv_fields(path, 2):
        try:
            out[parts[0].strip()] = float(parts[1])
        except ValueError:
            raise MalformedLine(path, lineno, "power is not a number") from None
    return out


def load_rank_file(path) -> list[str]:
    """One label per line, most frequent first."""
    return [line.strip() for _, line in _lines(path) if line.strip() and not line.startswith("#")]


def _parent_label(T: Arborescence, node: int):
    par = int(T.parent[node])
    return None if par == 0 else T.labels[par - 1]


def tree_to_dict(T: Arborescence) -> dict:
    nodes = []
    for node in range(1, T.n_nodes):
        nodes.append({
            "label": T.labels[node - 1],
            "parent": _parent_label(T, node),
            "edge_length": float(T.edge_length[node]),
            "insertion_rank": int(T.insertion_rank[node]),
            "level": int(T.node_level[node]),
            "power": float(T.powers[node - 1]),
        })
    return {
        "format": "orient-tree",
        "version": 1,
        "distance": T.distance,
        "p": T.p,
        "root_vector": [float(x) for x in T.root_vector],
        "nodes": nodes,
    }


def export_tree(T: Arborescence, path, format: str | None = None) -> None:
    """Write ``json``, ``dot`` or ``tsv`` (format defaults to the file suffix)."""
    path = Path(path)
    format = format or path.suffix.lstrip(".").lower() or "json"
    by_rank = np.argsort(T.insertion_rank[1:], kind="stable") + 1
    if format == "json":
        text = json.dumps(tree_to_dict(T), indent=1) + "\n"
    elif format == "tsv":
        rows = []
        for node in by_rank:
            par = _parent_label(T, node)
            rows.append(f"{T.labels[node - 1]}\t{ROOT_LABEL if par is None else par}\t{float(T.edge_length[node])!r}")
        text = "\n".join(rows) + "\n"
    elif format == "dot":
        lines = ["digraph arborescence {", f'  "{ROOT_LABEL}";']
        for node in by_rank:
            par = _parent_label(T, node)
            child = T.labels[node - 1].replace('"', '\\"')
            par = ROOT_LABEL if par is None else par.replace('"', '\\"')
            lines.append(f'  "{child}" -> "{par}" [length={float(T.edge_length[node])!r}];')
        lines.append("}")
        text = "\n".join(lines) + "\n"
    else:
        raise ValueError(f"unknown tree format {format!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _arborescence(labels, parents, lengths, ranks, powers, root_vector, distance, p):
    n = len(labels)
    node_of = {lab: i + 1 for i, lab in enumerate(labels)}
    parent = np.empty(n + 1, dtype=np.int64)
    parent[0] = -1
    for i, par in enumerate(parents):
        if par is None or par == ROOT_LABEL:
            parent[i + 1] = 0
        elif par in node_of:
            parent[i + 1] = node_of[par]
        else:
            raise ValueError(f"parent {par!r} of {labels[i]!r} is not a tree node")
    rank = np.concatenate([[-1], np.asarray(ranks, dtype=np.int64)])
    level = np.zeros(n + 1, dtype=np.int64)
    for node in np.argsort(rank[1:], kind="stable") + 1:
        level[node] = level[parent[node]] + 1
    T = Arborescence(parent, np.concatenate([[0.0], np.asarray(lengths, dtype=np.float64)]),
                     rank, level, np.asarray(root_vector, dtype=np.float64), tuple(labels),
                     np.asarray(powers, dtype=np.float64), distance, p)
    T.check()
    return T


def load_tree(path, format: str | None = None) -> Arborescence:
    path = Path(path)
    format = format or path.suffix.lstrip(".").lower() or "json"
    if format == "json":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("format") != "orient-tree":
            raise ValueError(f"{path} is not a tree file")
        nodes = doc["nodes"]
        return _arborescence(
            [nd["label"] for nd in nodes], [nd["parent"] for nd in nodes],
            [nd["edge_length"] for nd in nodes], [nd["insertion_rank"] for nd in nodes],
            [nd.get("power", 1.0) for nd in nodes], doc.get("root_vector", []),
            doc.get("distance", "euclidean"), doc.get("p"))
    if format == "tsv":
        labels, parents, lengths = [], [], []
        for lineno, parts in _tsv_fields(path, 3):
            labels.append(parts[0])
            parents.append(parts[1])
            try:
                lengths.append(float(parts[2]))
            except ValueError:
                raise MalformedLine(path, lineno, "edge length is not a number") from None
        # lines are written in insertion order
        return _arborescence(labels, parents, lengths, range(len(labels)),
                             np.ones(len(labels)), [], "euclidean", None)
    raise ValueError(f"cannot read trees in {format!r} format")


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    if v is None:
        return ""
    return v
