"""Typed graph storage, meta-path enumeration, and neighbor-set pooling.

A dataset lives in a directory of UTF-8 text files:

    schema.json          node types, relations (with inverses), target type,
                         class count
    nodes-<type>.tsv     one node per line: dense 0-based id, then features
    edges-<relation>.tsv "src_id<TAB>dst_id" per line
    labels.tsv           "node_id<TAB>class_index"; absent ids are unlabeled
    splits.json          optional {"train": [...], "val": [...], "test": [...]}

If an inverse relation has no edge file on disk, its edges are synthesized
by reversing the forward relation's.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, LoadError

UNLABELED = -1


@dataclass(frozen=True)
class Relation:
    name: str
    src: str
    dst: str
    inverse: str


@dataclass
class Schema:
    """Type-level graph: node types plus directed relations with inverses."""

    node_types: list[str]
    relations: list[Relation]
    target_type: str
    num_classes: int

    def __post_init__(self):
        if len(set(self.node_types)) != len(self.node_types):
            raise LoadError("duplicate node type names in schema")
        names = [r.name for r in self.relations]
        if len(set(names)) != len(names):
            raise LoadError("duplicate relation names in schema")
        by_name = {r.name: r for r in self.relations}
        for r in self.relations:
            if r.src not in self.node_types or r.dst not in self.node_types:
                raise LoadError(f"relation {r.name!r} references unknown node type")
            inv = by_name.get(r.inverse)
            if inv is None:
                raise LoadError(f"relation {r.name!r} names missing inverse {r.inverse!r}")
            if inv.inverse != r.name or inv.src != r.dst or inv.dst != r.src:
                raise LoadError(f"relations {r.name!r} and {r.inverse!r} are not mutual inverses")
        if self.target_type not in self.node_types:
            raise LoadError(f"target type {self.target_type!r} not among node types")
        if self.num_classes < 2:
            raise LoadError("num_classes must be at least 2")

    def relation(self, name: str) -> Relation:
        for r in self.relations:
            if r.name == name:
                return r
        raise KeyError(name)

    def relations_from(self, node_type: str) -> list[Relation]:
        return [r for r in self.relations if r.src == node_type]


@dataclass(frozen=True)
class MetaPath:
    """A composable relation sequence starting at the target node type."""

    relations: tuple[str, ...]
    source_type: str
    terminal_type: str
    name: str

    def __len__(self) -> int:
        return len(self.relations)


def _type_initial(node_type: str) -> str:
    return node_type[0].upper()


def metapath_name(schema: Schema, relations: list[Relation]) -> str:
    """Node-type-initial naming, with a lowercase relation initial inserted
    for relations whose endpoints share a type (the PcP / PrP convention)."""
    parts = [_type_initial(relations[0].src)]
    for r in relations:
        if r.src == r.dst:
            parts.append(r.name[0].lower())
        parts.append(_type_initial(r.dst))
    return "".join(parts)


def enumerate_metapaths(schema: Schema, target_type: str, max_len: int, forward_only: bool = False) -> list[MetaPath]:
    """All composable relation sequences of length 1..max_len from target_type.

    Breadth-first over length; within a frontier, paths are extended by
    relations in schema declaration order, which makes the output
    deterministic. With ``forward_only`` only non-inverse relations (those
    declared before their inverse) extend paths.
    """
    if target_type not in schema.node_types:
        raise ContractError(f"unknown target type {target_type!r}")
    if max_len < 1:
        raise ContractError("max_len must be at least 1")
    declared = {r.name: i for i, r in enumerate(schema.relations)}
    def allowed(r: Relation) -> bool:
        if not forward_only:
            return True
        return declared[r.name] < declared[r.inverse]

    out: list[MetaPath] = []
    frontier: list[list[Relation]] = [[]]
    for _ in range(max_len):
        next_frontier: list[list[Relation]] = []
        for path in frontier:
            tip = path[-1].dst if path else target_type
            for r in schema.relations_from(tip):
                if not allowed(r):
                    continue
                extended = path + [r]
                out.append(
                    MetaPath(
                        relations=tuple(x.name for x in extended),
                        source_type=target_type,
                        terminal_type=r.dst,
                        name=metapath_name(schema, extended),
                    )
                )
                next_frontier.append(extended)
        frontier = next_frontier
    return out


@dataclass
class HeteroGraph:
    """Immutable-after-load typed graph with per-type dense features."""

    schema: Schema
    features: dict[str, np.ndarray]            # type -> (n_type, D_type) float64
    edges: dict[str, np.ndarray]               # relation -> (m, 2) int64
    labels: np.ndarray                         # over target type; UNLABELED sentinel
    adjacency: dict[str, list[list[int]]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for t in self.schema.node_types:
            if t not in self.features:
                raise LoadError(f"missing feature matrix for node type {t!r}")
        for r in self.schema.relations:
            e = self.edges.get(r.name)
            if e is None:
                raise LoadError(f"missing edge list for relation {r.name!r}")
            n_src = self.num_nodes(r.src)
            n_dst = self.num_nodes(r.dst)
            if e.size and (e[:, 0].min() < 0 or e[:, 0].max() >= n_src):
                raise LoadError(f"relation {r.name!r} has a source index out of range")
            if e.size and (e[:, 1].min() < 0 or e[:, 1].max() >= n_dst):
                raise LoadError(f"relation {r.name!r} has a destination index out of range")
        n_target = self.num_nodes(self.schema.target_type)
        if self.labels.shape != (n_target,):
            raise LoadError("label vector length does not match target node count")
        valid = (self.labels == UNLABELED) | (
            (self.labels >= 0) & (self.labels < self.schema.num_classes)
        )
        if not valid.all():
            raise LoadError("label values must lie in [0, num_classes) or be unlabeled")
        if not self.adjacency:
            for r in self.schema.relations:
                rows: list[list[int]] = [[] for _ in range(self.num_nodes(r.src))]
                for s, d in self.edges[r.name]:
                    rows[int(s)].append(int(d))
                self.adjacency[r.name] = rows

    def num_nodes(self, node_type: str) -> int:
        return self.features[node_type].shape[0]

    @property
    def total_nodes(self) -> int:
        return sum(self.num_nodes(t) for t in self.schema.node_types)

    @property
    def total_edges(self) -> int:
        return sum(e.shape[0] for e in self.edges.values())

    def feature_dim(self, node_type: str) -> int:
        return self.features[node_type].shape[1]

    def labeled_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.labels != UNLABELED)

    def degree(self, relation: str, node: int) -> int:
        return len(self.adjacency[relation][node])


def neighbor_set(graph: HeteroGraph, node: int, metapath: MetaPath, exclude_self: bool = False) -> set[int]:
    """Terminal-type nodes reachable from ``node`` along the metapath.

    Set semantics: each reachable node appears once however many paths lead
    to it. The origin node is kept when reachable, unless ``exclude_self``.
    """
    frontier = {int(node)}
    for rel in metapath.relations:
        adj = graph.adjacency[rel]
        frontier = {d for s in frontier for d in adj[s]}
        if not frontier:
            break
    if exclude_self:
        frontier.discard(int(node))
    return frontier


def _path_counts(graph: HeteroGraph, node: int, metapath: MetaPath) -> dict[int, int]:
    counts = {int(node): 1}
    for rel in metapath.relations:
        adj = graph.adjacency[rel]
        nxt: dict[int, int] = {}
        for s, c in counts.items():
            for d in adj[s]:
                nxt[d] = nxt.get(d, 0) + c
        counts = nxt
        if not counts:
            break
    return counts


def pooled_neighbor_features(
    graph: HeteroGraph,
    nodes,
    metapath: MetaPath,
    multiset: bool = False,
    exclude_self: bool = False,
) -> np.ndarray:
    """Mean terminal-node features per query node; zero row for empty sets.

    With ``multiset`` the mean is weighted by the number of distinct paths
    reaching each terminal node instead of treating the pool as a set.
    """
    feats = graph.features[metapath.terminal_type]
    out = np.zeros((len(nodes), feats.shape[1]))
    for i, node in enumerate(nodes):
        if multiset:
            counts = _path_counts(graph, int(node), metapath)
            if exclude_self:
                counts.pop(int(node), None)
            if counts:
                idx = sorted(counts)
                w = np.array([counts[j] for j in idx], dtype=np.float64)
                out[i] = (w @ feats[idx]) / w.sum()
        else:
            pool = neighbor_set(graph, int(node), metapath, exclude_self=exclude_self)
            if pool:
                idx = sorted(pool)
                out[i] = feats[idx].mean(axis=0)
    return out


# ---------------------------------------------------------------------------
# disk format

def _read_tsv_rows(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            yield lineno, line.split("\t")


def load_graph(dataset_dir: str) -> HeteroGraph:
    """Load and validate a dataset directory."""
    schema_path = os.path.join(dataset_dir, "schema.json")
    if not os.path.isfile(schema_path):
        raise LoadError(f"missing schema file: {schema_path}")
    with open(schema_path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        relations = [Relation(r["name"], r["src"], r["dst"], r["inverse"]) for r in raw["relations"]]
        schema = Schema(
            node_types=list(raw["node_types"]),
            relations=relations,
            target_type=raw["target_type"],
            num_classes=int(raw["num_classes"]),
        )
    except (KeyError, TypeError) as exc:
        raise LoadError(f"malformed schema.json: {exc}") from exc

    features: dict[str, np.ndarray] = {}
    for t in schema.node_types:
        path = os.path.join(dataset_dir, f"nodes-{t}.tsv")
        if not os.path.isfile(path):
            raise LoadError(f"missing node file: {path}")
        rows: list[tuple[int, list[float]]] = []
        seen = set()
        width = None
        for lineno, cells in _read_tsv_rows(path):
            try:
                node_id = int(cells[0])
                values = [float(c) for c in cells[1:]]
            except ValueError as exc:
                raise LoadError(f"{path}:{lineno}: {exc}") from exc
            if node_id in seen:
                raise LoadError(f"{path}:{lineno}: duplicate node id {node_id}")
            seen.add(node_id)
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise LoadError(
                    f"{path}:{lineno}: feature width {len(values)} differs from {width}"
                )
            rows.append((node_id, values))
        if not rows:
            raise LoadError(f"{path}: node file is empty")
        n = len(rows)
        if seen != set(range(n)):
            raise LoadError(f"{path}: node ids must be dense 0..{n - 1}")
        mat = np.zeros((n, width if width else 0))
        for node_id, values in rows:
            mat[node_id] = values
        features[t] = mat

    edges: dict[str, np.ndarray] = {}
    for r in schema.relations:
        path = os.path.join(dataset_dir, f"edges-{r.name}.tsv")
        if not os.path.isfile(path):
            continue
        pairs = []
        for lineno, cells in _read_tsv_rows(path):
            if len(cells) != 2:
                raise LoadError(f"{path}:{lineno}: expected 'src<TAB>dst'")
            try:
                pairs.append((int(cells[0]), int(cells[1])))
            except ValueError as exc:
                raise LoadError(f"{path}:{lineno}: {exc}") from exc
        edges[r.name] = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    for r in schema.relations:
        if r.name not in edges:
            if r.inverse not in edges:
                raise LoadError(
                    f"no edge file for relation {r.name!r} or its inverse {r.inverse!r}"
                )
            edges[r.name] = edges[r.inverse][:, ::-1].copy()

    labels_path = os.path.join(dataset_dir, "labels.tsv")
    if not os.path.isfile(labels_path):
        raise LoadError(f"missing labels file: {labels_path}")
    labels = np.full(features[schema.target_type].shape[0], UNLABELED, dtype=np.int64)
    for lineno, cells in _read_tsv_rows(labels_path):
        if len(cells) != 2:
            raise LoadError(f"{labels_path}:{lineno}: expected 'node_id<TAB>class'")
        try:
            node_id, cls = int(cells[0]), int(cells[1])
        except ValueError as exc:
            raise LoadError(f"{labels_path}:{lineno}: {exc}") from exc
        if not 0 <= node_id < labels.shape[0]:
            raise LoadError(f"{labels_path}:{lineno}: node id {node_id} out of range")
        if not 0 <= cls < schema.num_classes:
            raise LoadError(f"{labels_path}:{lineno}: class {cls} out of range")
        labels[node_id] = cls

    return HeteroGraph(schema=schema, features=features, edges=edges, labels=labels)


def _format_float(x: float) -> str:
    return repr(float(x))


def write_dataset(graph: HeteroGraph, out_dir: str) -> None:
    """Write a graph back to the on-disk dataset format (byte-stable)."""
    os.makedirs(out_dir, exist_ok=True)
    schema = graph.schema
    payload = {
        "node_types": schema.node_types,
        "relations": [
            {"name": r.name, "src": r.src, "dst": r.dst, "inverse": r.inverse}
            for r in schema.relations
        ],
        "target_type": schema.target_type,
        "num_classes": schema.num_classes,
    }
    with open(os.path.join(out_dir, "schema.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for t in schema.node_types:
        with open(os.path.join(out_dir, f"nodes-{t}.tsv"), "w", encoding="utf-8") as fh:
            for i, row in enumerate(graph.features[t]):
                fh.write("\t".join([str(i)] + [_format_float(v) for v in row]) + "\n")
    for r in schema.relations:
        with open(os.path.join(out_dir, f"edges-{r.name}.tsv"), "w", encoding="utf-8") as fh:
            for s, d in graph.edges[r.name]:
                fh.write(f"{int(s)}\t{int(d)}\n")
    with open(os.path.join(out_dir, "labels.tsv"), "w", encoding="utf-8") as fh:
        for i, y in enumerate(graph.labels):
            if y != UNLABELED:
                fh.write(f"{i}\t{int(y)}\n")
