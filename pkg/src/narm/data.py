"""Network and attribute ingestion, and train/test splitting.

File formats are whitespace-separated text with ``#`` comment lines and
an optional ``%`` header line carrying dimensions.  Node and attribute
ids are dense 0-based integers.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DataError",
    "SparseBinaryMatrix",
    "AttributeMatrix",
    "SplitSpec",
    "EvalSet",
    "load_edge_list",
    "load_attributes",
    "load_hierarchy",
    "encode_categorical",
    "make_split",
    "write_manifest",
    "read_manifest",
]

# Above this many candidate pairs the negative sampler switches from
# full enumeration to rejection sampling.
ENUMERATION_LIMIT = 10**6


class DataError(Exception):
    """Malformed or inconsistent input data."""


@dataclass
class SparseBinaryMatrix:
    """Binary adjacency matrix stored as deduplicated index pairs.

    Undirected matrices keep only pairs with row < col; queries for
    (j, i) are answered through (i, j).  Self-loops are never stored.
    """

    n_rows: int
    n_cols: int
    directed: bool
    rows: np.ndarray
    cols: np.ndarray
    _pairs: set = field(default=None, repr=False, compare=False)

    @classmethod
    def from_pairs(cls, pairs, n_rows, n_cols, directed):
        dropped_loops = 0
        seen = set()
        for i, j in pairs:
            i, j = int(i), int(j)
            if not (0 <= i < n_rows and 0 <= j < n_cols):
                raise DataError(f"entry ({i}, {j}) out of bounds for "
                                f"{n_rows}x{n_cols} matrix")
            if i == j:
                dropped_loops += 1
                continue
            if not directed and i > j:
                i, j = j, i
            seen.add((i, j))
        if dropped_loops:
            warnings.warn(f"dropped {dropped_loops} self-loop(s)")
        if seen:
            arr = np.array(sorted(seen), dtype=np.int64)
            rows, cols = arr[:, 0], arr[:, 1]
        else:
            rows = cols = np.empty(0, dtype=np.int64)
        return cls(n_rows, n_cols, directed, rows, cols, seen)

    @property
    def n_entries(self):
        return self.rows.size

    @property
    def pairs(self):
        if self._pairs is None:
            self._pairs = set(zip(self.rows.tolist(), self.cols.tolist()))
        return self._pairs

    def has_edge(self, i, j):
        if not self.directed and i > j:
            i, j = j, i
        return (i, j) in self.pairs

    def write_edge_list(self, path):
        from narm.snapshots import atomic_open

        with atomic_open(path) as fh:
            fh.write(f"% {self.n_rows}\n")
            for i, j in zip(self.rows, self.cols):
                fh.write(f"{i}\t{j}\n")


@dataclass
class AttributeMatrix:
    """Binary node-attribute incidence with row and column adjacency."""

    n_nodes: int
    n_attrs: int
    row_index: list  # per node: array of active attribute ids
    col_index: list  # per attribute: array of nodes it is active with

    @classmethod
    def from_pairs(cls, pairs, n_nodes, n_attrs):
        rows = [set() for _ in range(n_nodes)]
        for i, l in pairs:
            i, l = int(i), int(l)
            if not (0 <= i < n_nodes and 0 <= l < n_attrs):
                raise DataError(f"attribute entry ({i}, {l}) out of bounds "
                                f"for {n_nodes}x{n_attrs} matrix")
            rows[i].add(l)
        cols = [[] for _ in range(n_attrs)]
        row_index = []
        for i in range(n_nodes):
            active = np.array(sorted(rows[i]), dtype=np.int64)
            row_index.append(active)
            for l in active:
                cols[l].append(i)
        col_index = [np.array(c, dtype=np.int64) for c in cols]
        return cls(n_nodes, n_attrs, row_index, col_index)

    @classmethod
    def empty(cls, n_nodes, n_attrs=0):
        return cls.from_pairs([], n_nodes, n_attrs)

    @property
    def nnz(self):
        return sum(r.size for r in self.row_index)

    def csr(self):
        """(indptr, indices) over rows, for the shape-cache kernel."""
        indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        for i, r in enumerate(self.row_index):
            indptr[i + 1] = indptr[i] + r.size
        if self.nnz:
            indices = np.concatenate(self.row_index)
        else:
            indices = np.empty(0, dtype=np.int64)
        return indptr, indices

    def write(self, path):
        from narm.snapshots import atomic_open

        with atomic_open(path) as fh:
            fh.write(f"% {self.n_nodes} {self.n_attrs}\n")
            for i, active in enumerate(self.row_index):
                for l in active:
                    fh.write(f"{i}\t{l}\n")


@dataclass(frozen=True)
class SplitSpec:
    mode: str  # by_links | by_nodes
    train_fraction: float
    seed: int

    def __post_init__(self):
        if self.mode not in ("by_links", "by_nodes"):
            raise ValueError(f"unknown split mode {self.mode!r}")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValueError("train_fraction must be in (0, 1]")


@dataclass
class EvalSet:
    """Disjoint train/test pair lists with binary labels."""

    n_nodes: int
    directed: bool
    train_pairs: np.ndarray  # (n, 2)
    train_y: np.ndarray
    test_pairs: np.ndarray
    test_y: np.ndarray

    def train_positive_pairs(self):
        return self.train_pairs[self.train_y == 1]


def _parse_lines(path):
    """Yield (lineno, fields) for non-comment lines; '%' header first."""
    header = None
    body = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if stripped.startswith("%"):
                if header is None and not body:
                    header = stripped[1:].split()
                    continue
                raise DataError(f"{path}:{lineno}: stray '%' header")
            body.append((lineno, stripped.split()))
    return header, body


def _parse_pairs(path):
    header, body = _parse_lines(path)
    pairs = []
    for lineno, fields in body:
        if len(fields) != 2:
            raise DataError(f"{path}:{lineno}: expected two ids, "
                            f"got {len(fields)} fields")
        try:
            pairs.append((int(fields[0]), int(fields[1])))
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-integer id") from None
    return header, pairs


def load_edge_list(path, directed, n_nodes):
    """Read an edge-list file into a SparseBinaryMatrix.

    Duplicate lines collapse to one entry; undirected entries are
    canonicalized to row < col; self-loops are dropped with a warning.
    """
    header, pairs = _parse_pairs(path)
    if header and int(header[0]) != n_nodes:
        raise DataError(f"{path}: header says {header[0]} nodes, "
                        f"caller says {n_nodes}")
    return SparseBinaryMatrix.from_pairs(pairs, n_nodes, n_nodes, directed)


def load_attributes(path, n_nodes, n_attrs=None):
    """Read 'node_id attr_id' lines into an AttributeMatrix.

    The attribute count comes from the '% N L' header if present, from
    the caller otherwise, and falls back to 1 + max id seen.
    """
    header, pairs = _parse_pairs(path)
    if header:
        if int(header[0]) != n_nodes:
            raise DataError(f"{path}: header says {header[0]} nodes, "
                            f"caller says {n_nodes}")
        if len(header) > 1:
            n_attrs = int(header[1])
    if n_attrs is None:
        n_attrs = 1 + max((l for _, l in pairs), default=-1)
    return AttributeMatrix.from_pairs(pairs, n_nodes, n_attrs)


def load_hierarchy(path, n_attrs, n_parents=None):
    """Read 'attr_id parent_attr_id' lines into an L x M AttributeMatrix."""
    header, pairs = _parse_pairs(path)
    if header and len(header) > 1:
        n_parents = int(header[1])
    if n_parents is None:
        n_parents = 1 + max((m for _, m in pairs), default=-1)
    return AttributeMatrix.from_pairs(pairs, n_attrs, n_parents)


def encode_categorical(table):
    """One-hot encode per-node categorical fields into binary columns.

    ``table`` maps field name -> sequence of per-node values (None for
    missing).  Returns (AttributeMatrix, column labels, missing list)
    where labels are (field, level) pairs and missing records the
    (node, field) pairs that had no value.
    """
    fields = list(table)
    if not fields:
        raise DataError("no categorical fields given")
    n_nodes = len(table[fields[0]])
    for name in fields:
        if len(table[name]) != n_nodes:
            raise DataError(f"field {name!r} has {len(table[name])} values, "
                            f"expected {n_nodes}")
    labels = []
    pairs = []
    missing = []
    for name in fields:
        values = table[name]
        levels = sorted({v for v in values if v is not None}, key=str)
        offset = len(labels)
        labels.extend((name, lv) for lv in levels)
        col_of = {lv: offset + c for c, lv in enumerate(levels)}
        for i, v in enumerate(values):
            if v is None:
                missing.append((i, name))
            else:
                pairs.append((i, col_of[v]))
    matrix = AttributeMatrix.from_pairs(pairs, n_nodes, len(labels))
    return matrix, labels, missing


def _candidate_count(n, directed):
    return n * (n - 1) if directed else n * (n - 1) // 2


def _sample_nonlinks(network, count, rng, forbidden=()):
    """Uniform non-link pairs without replacement.

    Enumerates the candidate universe when small enough, otherwise
    rejection-samples.  ``forbidden`` removes extra pairs (already used
    negatives) from the universe.
    """
    n = network.n_rows
    if count == 0:
        return []
    universe = _candidate_count(n, network.directed)
    positives = network.pairs
    if universe <= ENUMERATION_LIMIT:
        if network.directed:
            cand = [(i, j) for i in range(n) for j in range(n)
                    if i != j and (i, j) not in positives
                    and (i, j) not in forbidden]
        else:
            cand = [(i, j) for i in range(n) for j in range(i + 1, n)
                    if (i, j) not in positives and (i, j) not in forbidden]
        if count > len(cand):
            raise DataError(f"requested {count} negatives but only "
                            f"{len(cand)} non-links exist")
        idx = rng.choice(len(cand), size=count, replace=False)
        return [cand[k] for k in idx]
    out = []
    chosen = set()
    while len(out) < count:
        i = int(rng.integers(n))
        j = int(rng.integers(n))
        if i == j:
            continue
        if not network.directed and i > j:
            i, j = j, i
        p = (i, j)
        if p in positives or p in chosen or p in forbidden:
            continue
        chosen.add(p)
        out.append(p)
    return out


def _to_entries(pos, neg):
    pairs = np.array([list(p) for p in pos] + [list(p) for p in neg],
                     dtype=np.int64).reshape(-1, 2)
    y = np.concatenate([np.ones(len(pos), dtype=np.int64),
                        np.zeros(len(neg), dtype=np.int64)])
    return pairs, y


def make_split(network, spec, all_negatives=False):
    """Reproducible train/test split with 1:1 matched negatives.

    by_links: every positive goes to train with probability
    train_fraction; each side gets an equal number of uniformly sampled
    non-links.  by_nodes: pairs with both endpoints in a sampled node
    subset form train, everything else tests.  With ``all_negatives``
    every non-link is enumerated instead of sampled (small networks
    only).
    """
    if network.n_entries == 0:
        raise DataError("cannot split an empty network")
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=spec.seed, spawn_key=(901,)))
    links = list(zip(network.rows.tolist(), network.cols.tolist()))

    if spec.mode == "by_links":
        mask = rng.random(len(links)) < spec.train_fraction
        train_pos = [p for p, m in zip(links, mask) if m]
        test_pos = [p for p, m in zip(links, mask) if not m]
    else:
        n_train = int(np.ceil(spec.train_fraction * network.n_rows))
        nodes = set(rng.choice(network.n_rows, size=n_train,
                               replace=False).tolist())
        train_pos = [p for p in links if p[0] in nodes and p[1] in nodes]
        test_pos = [p for p in links if not (p[0] in nodes and p[1] in nodes)]

    if not train_pos:
        raise DataError("train_fraction leaves no positive link in train")

    if all_negatives:
        if _candidate_count(network.n_rows, network.directed) > ENUMERATION_LIMIT:
            raise DataError("all_negatives only supported up to "
                            f"{ENUMERATION_LIMIT} candidate pairs")
        all_neg = _sample_nonlinks(
            network, _candidate_count(network.n_rows, network.directed)
            - network.n_entries, rng)
        cut = len(train_pos) * len(all_neg) // max(len(links), 1)
        rng.shuffle(all_neg)
        train_neg, test_neg = all_neg[:cut], all_neg[cut:]
    else:
        train_neg = _sample_nonlinks(network, len(train_pos), rng)
        test_neg = _sample_nonlinks(network, len(test_pos), rng,
                                    forbidden=set(train_neg))

    train_pairs, train_y = _to_entries(train_pos, train_neg)
    test_pairs, test_y = _to_entries(test_pos, test_neg)
    return EvalSet(network.n_rows, network.directed,
                   train_pairs, train_y, test_pairs, test_y)


def write_manifest(path, eval_set):
    """Persist a split as 'i j y fold' lines."""
    from narm.snapshots import atomic_open

    with atomic_open(path) as fh:
        fh.write(f"% {eval_set.n_nodes} "
                 f"{'directed' if eval_set.directed else 'undirected'}\n")
        for (i, j), y in zip(eval_set.train_pairs, eval_set.train_y):
            fh.write(f"{i}\t{j}\t{y}\ttrain\n")
        for (i, j), y in zip(eval_set.test_pairs, eval_set.test_y):
            fh.write(f"{i}\t{j}\t{y}\ttest\n")


def read_manifest(path):
    header, body = _parse_lines(path)
    if not header or len(header) < 2:
        raise DataError(f"{path}: manifest needs a '% N directedness' header")
    n_nodes = int(header[0])
    directed = header[1] == "directed"
    train, test = [], []
    for lineno, fields in body:
        if len(fields) != 4 or fields[3] not in ("train", "test"):
            raise DataError(f"{path}:{lineno}: bad manifest line")
        rec = (int(fields[0]), int(fields[1]), int(fields[2]))
        (train if fields[3] == "train" else test).append(rec)
    def split(entries):
        if not entries:
            return (np.empty((0, 2), dtype=np.int64),
                    np.empty(0, dtype=np.int64))
        arr = np.array(entries, dtype=np.int64)
        return arr[:, :2], arr[:, 2]
    train_pairs, train_y = split(train)
    test_pairs, test_y = split(test)
    return EvalSet(n_nodes, directed, train_pairs, train_y,
                   test_pairs, test_y)
