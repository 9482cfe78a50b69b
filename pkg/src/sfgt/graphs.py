"""Graph containers, validation, and file ingestion.

Two on-disk layouts are supported:

* single-graph edge lists: one ``i j`` pair per line, ``#`` comments, an
  optional ``#features`` sentinel followed by ``n`` rows of ``d`` reals.
  A ``# n <count>`` comment makes files with trailing isolated nodes
  self-describing.
* TU-style batched datasets: ``<name>_A.txt``, ``<name>_graph_indicator.txt``,
  ``<name>_graph_labels.txt`` and optional ``<name>_node_attributes.txt``,
  plus an invented ``edge-list-dir`` layout (``meta.csv`` + one edge-list
  file per graph) for round-tripping.

Node ids are 0-based internally; TU files (1-based) are shifted on ingest.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

FEATURES_SENTINEL = "#features"


class GraphParseError(ValueError):
    """A graph or dataset file violates its format or invariants."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph with optional node features and class label.

    ``edges`` is a frozenset of (i, j) pairs with i < j; the adjacency
    derived from it is symmetric with zero diagonal by construction.
    """

    n: int
    edges: frozenset[tuple[int, int]]
    features: np.ndarray | None = None
    label: int | None = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise GraphParseError(f"node count must be >= 1, got {self.n}")
        normalized = set()
        for edge in self.edges:
            i, j = int(edge[0]), int(edge[1])
            if i == j:
                raise GraphParseError(f"self-loop on node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise GraphParseError(
                    f"edge ({i}, {j}) out of range for n={self.n}"
                )
            normalized.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(normalized))
        if self.features is not None:
            feats = np.asarray(self.features, dtype=np.float64)
            if feats.ndim != 2 or feats.shape[0] != self.n:
                raise GraphParseError(
                    f"feature matrix must be {self.n} x d, got shape {feats.shape}"
                )
            feats.setflags(write=False)
            object.__setattr__(self, "features", feats)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        if (self.n, self.edges, self.label) != (other.n, other.edges, other.label):
            return False
        if (self.features is None) != (other.features is None):
            return False
        if self.features is None:
            return True
        return self.features.shape == other.features.shape and bool(
            np.array_equal(self.features, other.features)
        )

    @property
    def feature_dim(self) -> int | None:
        return None if self.features is None else self.features.shape[1]


@dataclass(frozen=True)
class Split:
    """Disjoint train/val/test index lists into a dataset's graph list."""

    train: tuple[int, ...]
    val: tuple[int, ...]
    test: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class GraphDataset:
    """Ordered list of labeled graphs with a train/val/test split."""

    graphs: tuple[Graph, ...]
    num_classes: int
    split: Split

    def __post_init__(self) -> None:
        object.__setattr__(self, "graphs", tuple(self.graphs))
        count = len(self.graphs)
        indices = list(self.split.train) + list(self.split.val) + list(self.split.test)
        if len(set(indices)) != len(indices):
            raise GraphParseError("split index lists overlap")
        if any(not (0 <= i < count) for i in indices):
            raise GraphParseError("split index out of bounds")
        dims = {g.feature_dim for g in self.graphs}
        if len(dims) > 1:
            raise GraphParseError(f"graphs disagree on feature dimension: {dims}")
        for g in self.graphs:
            if g.label is not None and not (0 <= g.label < self.num_classes):
                raise GraphParseError(
                    f"label {g.label} outside [0, {self.num_classes})"
                )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GraphDataset):
            return NotImplemented
        return (
            self.graphs == other.graphs
            and self.num_classes == other.num_classes
            and self.split == other.split
        )

    @property
    def feature_dim(self) -> int | None:
        return self.graphs[0].feature_dim if self.graphs else None


def adjacency(g: Graph) -> np.ndarray:
    """Dense 0/1 adjacency matrix; symmetric with zero diagonal."""
    a = np.zeros((g.n, g.n), dtype=np.float64)
    for i, j in g.edges:
        a[i, j] = 1.0
        a[j, i] = 1.0
    return a


def degrees(g: Graph) -> np.ndarray:
    """Number of neighbors of each node, as an integer vector."""
    deg = np.zeros(g.n, dtype=np.int64)
    for i, j in g.edges:
        deg[i] += 1
        deg[j] += 1
    return deg


def component_count(g: Graph) -> int:
    """Connected components via union-find on the edge set."""
    parent = list(range(g.n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in g.edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
    return len({find(i) for i in range(g.n)})


def isolated_count(g: Graph) -> int:
    """Number of zero-degree nodes."""
    return int(np.count_nonzero(degrees(g) == 0))


def parse_edge_list(text: str, n: int, d: int = 0) -> Graph:
    """Parse an edge-list document into a Graph with ``n`` nodes.

    ``d`` is the expected feature dimension of the optional ``#features``
    block; ``d == 0`` means the block must be absent. Duplicate edge lines
    and reversed pairs collapse to one edge.
    """
    edges: set[tuple[int, int]] = set()
    feature_rows: list[list[float]] = []
    in_features = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.split()[0] == FEATURES_SENTINEL:
                if in_features:
                    raise GraphParseError(f"line {lineno}: repeated {FEATURES_SENTINEL}")
                in_features = True
            continue
        if in_features:
            tokens = line.split()
            try:
                row = [float(t) for t in tokens]
            except ValueError:
                raise GraphParseError(f"line {lineno}: malformed feature row {line!r}") from None
            if d and len(row) != d:
                raise GraphParseError(
                    f"line {lineno}: expected {d} features per row, got {len(row)}"
                )
            feature_rows.append(row)
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise GraphParseError(f"line {lineno}: malformed edge row {line!r}")
        try:
            i, j = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise GraphParseError(f"line {lineno}: malformed edge row {line!r}") from None
        if i == j:
            raise GraphParseError(f"line {lineno}: self-loop on node {i}")
        if not (0 <= i < n and 0 <= j < n):
            raise GraphParseError(f"line {lineno}: edge ({i}, {j}) out of range for n={n}")
        edges.add((min(i, j), max(i, j)))

    features = None
    if in_features:
        if d == 0:
            raise GraphParseError(f"unexpected {FEATURES_SENTINEL} block (d=0)")
        if len(feature_rows) != n:
            raise GraphParseError(
                f"feature block has {len(feature_rows)} rows, expected {n}"
            )
        features = np.array(feature_rows, dtype=np.float64)
    elif d:
        raise GraphParseError(f"missing {FEATURES_SENTINEL} block (expected d={d})")
    return Graph(n=n, edges=frozenset(edges), features=features)


def serialize_edge_list(g: Graph) -> str:
    """Render a Graph as an edge-list document that :func:`read_graph_file`
    and :func:`parse_edge_list` reproduce exactly (floats via repr)."""
    lines = [f"# n {g.n}"]
    for i, j in sorted(g.edges):
        lines.append(f"{i} {j}")
    if g.features is not None:
        lines.append(FEATURES_SENTINEL)
        for row in g.features:
            lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def read_graph_file(path: str | Path) -> Graph:
    """Load a single graph from an edge-list file.

    The node count comes from a ``# n <count>`` comment when present,
    otherwise from the feature block length or the largest edge endpoint.
    """
    text = Path(path).read_text(encoding="utf-8")
    n_declared: int | None = None
    max_endpoint = -1
    feature_rows = 0
    feature_dim = 0
    in_features = False
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            tokens = line.split()
            if tokens[0] == FEATURES_SENTINEL:
                in_features = True
            elif len(tokens) == 3 and tokens[0] == "#" and tokens[1] == "n":
                try:
                    n_declared = int(tokens[2])
                except ValueError:
                    raise GraphParseError(f"malformed node-count comment {line!r}") from None
            continue
        tokens = line.split()
        if in_features:
            feature_rows += 1
            feature_dim = max(feature_dim, len(tokens))
            continue
        if len(tokens) == 2:
            try:
                max_endpoint = max(max_endpoint, int(tokens[0]), int(tokens[1]))
            except ValueError:
                pass  # parse_edge_list reports the malformed row
    n = n_declared
    if n is None:
        n = feature_rows if feature_rows else max_endpoint + 1
    if n < 1:
        raise GraphParseError(f"cannot determine node count of {path}")
    return parse_edge_list(text, n=n, d=feature_dim if in_features else 0)


def _default_split(count: int) -> Split:
    """Deterministic split for datasets whose files carry none."""
    rng = np.random.default_rng(0)
    order = [int(i) for i in rng.permutation(count)]
    n_val = count // 5
    n_test = count // 5
    return Split(
        train=tuple(order[: count - n_val - n_test]),
        val=tuple(order[count - n_val - n_test : count - n_test]),
        test=tuple(order[count - n_test :]),
    )


def _read_numbers(path: Path, kind: str) -> list[list[float]]:
    rows = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.replace(",", " ").split()
        try:
            rows.append([float(t) for t in tokens])
        except ValueError:
            raise GraphParseError(
                f"{path.name} line {lineno}: malformed {kind} row {line!r}"
            ) from None
    return rows


def _parse_tu_batch(root: Path) -> GraphDataset:
    a_files = sorted(root.glob("*_A.txt"))
    if len(a_files) != 1:
        raise GraphParseError(f"expected exactly one *_A.txt under {root}, found {len(a_files)}")
    stem = a_files[0].name[: -len("_A.txt")]
    indicator_path = root / f"{stem}_graph_indicator.txt"
    labels_path = root / f"{stem}_graph_labels.txt"
    attrs_path = root / f"{stem}_node_attributes.txt"
    if not indicator_path.exists() or not labels_path.exists():
        raise GraphParseError(f"missing indicator or labels file for {stem}")

    indicator = [int(r[0]) for r in _read_numbers(indicator_path, "indicator")]
    ids = sorted(set(indicator))
    if ids != list(range(1, len(ids) + 1)):
        raise GraphParseError(f"graph ids not contiguous from 1: {ids[:5]}...")
    num_graphs = len(ids)

    raw_labels = [r[0] for r in _read_numbers(labels_path, "label")]
    if len(raw_labels) != num_graphs:
        raise GraphParseError(
            f"{len(raw_labels)} labels for {num_graphs} graphs"
        )
    label_values = sorted(set(raw_labels))
    label_map = {v: k for k, v in enumerate(label_values)}

    # global node id (1-based) -> (graph index, local 0-based id)
    local_of: dict[int, tuple[int, int]] = {}
    sizes = [0] * num_graphs
    for global_id, gid in enumerate(indicator, start=1):
        local_of[global_id] = (gid - 1, sizes[gid - 1])
        sizes[gid - 1] += 1

    edge_sets: list[set[tuple[int, int]]] = [set() for _ in range(num_graphs)]
    for row in _read_numbers(root / f"{stem}_A.txt", "edge"):
        if len(row) != 2:
            raise GraphParseError(f"edge rows must have two entries, got {row}")
        u, v = int(row[0]), int(row[1])
        if u not in local_of or v not in local_of:
            raise GraphParseError(f"edge ({u}, {v}) references unknown node id")
        (gu, lu), (gv, lv) = local_of[u], local_of[v]
        if gu != gv:
            raise GraphParseError(f"edge ({u}, {v}) crosses graphs {gu + 1} and {gv + 1}")
        if lu == lv:
            raise GraphParseError(f"self-loop on global node {u}")
        edge_sets[gu].add((min(lu, lv), max(lu, lv)))

    features: list[np.ndarray | None] = [None] * num_graphs
    if attrs_path.exists():
        attr_rows = _read_numbers(attrs_path, "attribute")
        if len(attr_rows) != len(indicator):
            raise GraphParseError(
                f"{len(attr_rows)} attribute rows for {len(indicator)} nodes"
            )
        dims = {len(r) for r in attr_rows}
        if len(dims) != 1:
            raise GraphParseError(f"attribute rows disagree on dimension: {dims}")
        per_graph: list[list[list[float]]] = [[] for _ in range(num_graphs)]
        for global_id, row in enumerate(attr_rows, start=1):
            per_graph[local_of[global_id][0]].append(row)
        features = [np.array(rows, dtype=np.float64) for rows in per_graph]

    graphs = tuple(
        Graph(
            n=sizes[k],
            edges=frozenset(edge_sets[k]),
            features=features[k],
            label=label_map[raw_labels[k]],
        )
        for k in range(num_graphs)
    )
    return GraphDataset(graphs=graphs, num_classes=len(label_values), split=_default_split(num_graphs))


def _parse_edge_list_dir(root: Path) -> GraphDataset:
    meta_path = root / "meta.csv"
    if not meta_path.exists():
        raise GraphParseError(f"missing meta.csv under {root}")
    lines = [l for l in meta_path.read_text(encoding="utf-8").splitlines() if l.strip()]
    if not lines or lines[0].strip() != "graph_id,n,label":
        raise GraphParseError("meta.csv must start with header 'graph_id,n,label'")
    graphs = []
    labels = []
    for line in lines[1:]:
        tokens = line.split(",")
        if len(tokens) != 3:
            raise GraphParseError(f"malformed meta row {line!r}")
        gid, n, label = int(tokens[0]), int(tokens[1]), int(tokens[2])
        graph_path = root / f"graph_{gid}.txt"
        if not graph_path.exists():
            raise GraphParseError(f"missing {graph_path.name} listed in meta.csv")
        g = read_graph_file(graph_path)
        if g.n != n:
            raise GraphParseError(f"graph_{gid}.txt has n={g.n}, meta says {n}")
        graphs.append(Graph(n=g.n, edges=g.edges, features=g.features, label=label))
        labels.append(label)
    if not graphs:
        raise GraphParseError("meta.csv lists no graphs")
    return GraphDataset(
        graphs=tuple(graphs),
        num_classes=max(labels) + 1,
        split=_default_split(len(graphs)),
    )


def parse_dataset(path: str | Path, format: str = "tu-batch") -> GraphDataset:
    """Load a labeled graph dataset from ``path``.

    ``format`` is ``tu-batch`` or ``edge-list-dir``. Datasets parsed from
    disk get a deterministic default split (files carry no split info).
    """
    root = Path(path)
    if not root.is_dir():
        raise GraphParseError(f"dataset path {root} is not a directory")
    if format == "tu-batch":
        return _parse_tu_batch(root)
    if format == "edge-list-dir":
        return _parse_edge_list_dir(root)
    raise GraphParseError(f"unknown dataset format {format!r}")


def detect_dataset_format(path: str | Path) -> str:
    """Pick the dataset layout from the files present under ``path``."""
    root = Path(path)
    if not root.is_dir():
        raise GraphParseError(f"dataset path {root} is not a directory")
    if list(root.glob("*_A.txt")):
        return "tu-batch"
    if (root / "meta.csv").exists():
        return "edge-list-dir"
    raise GraphParseError(f"{root} holds neither *_A.txt nor meta.csv")


def serialize_dataset(ds: GraphDataset, path: str | Path, format: str = "tu-batch", name: str = "DS") -> None:
    """Write ``ds`` under directory ``path`` in the given layout.

    The split is not written; re-parsing assigns the deterministic default,
    so parse -> serialize -> parse is the identity.
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    if format == "edge-list-dir":
        meta_lines = ["graph_id,n,label"]
        for gid, g in enumerate(ds.graphs):
            label = g.label if g.label is not None else 0
            meta_lines.append(f"{gid},{g.n},{label}")
            (root / f"graph_{gid}.txt").write_text(serialize_edge_list(g), encoding="utf-8")
        (root / "meta.csv").write_text("\n".join(meta_lines) + "\n", encoding="utf-8")
        return
    if format != "tu-batch":
        raise GraphParseError(f"unknown dataset format {format!r}")

    offsets = []
    total = 0
    for g in ds.graphs:
        offsets.append(total)
        total += g.n
    edge_lines = []
    for k, g in enumerate(ds.graphs):
        base = offsets[k] + 1
        directed = set()
        for i, j in g.edges:
            directed.add((base + i, base + j))
            directed.add((base + j, base + i))
        edge_lines.extend(f"{u}, {v}" for u, v in sorted(directed))
    (root / f"{name}_A.txt").write_text("\n".join(edge_lines) + ("\n" if edge_lines else ""), encoding="utf-8")
    indicator_lines = []
    for k, g in enumerate(ds.graphs):
        indicator_lines.extend([str(k + 1)] * g.n)
    (root / f"{name}_graph_indicator.txt").write_text("\n".join(indicator_lines) + "\n", encoding="utf-8")
    label_lines = [str(g.label if g.label is not None else 0) for g in ds.graphs]
    (root / f"{name}_graph_labels.txt").write_text("\n".join(label_lines) + "\n", encoding="utf-8")
    if ds.feature_dim is not None:
        attr_lines = []
        for g in ds.graphs:
            for row in g.features:  # type: ignore[union-attr]
                attr_lines.append(", ".join(repr(float(v)) for v in row))
        (root / f"{name}_node_attributes.txt").write_text("\n".join(attr_lines) + "\n", encoding="utf-8")


def features_or_zeros(g: Graph, d: int = 1) -> np.ndarray:
    """Node features of ``g``, or an all-zero ``n x d`` matrix when absent."""
    if g.features is not None:
        return np.asarray(g.features, dtype=np.float64)
    return np.zeros((g.n, d), dtype=np.float64)
