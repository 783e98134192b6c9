"""Positive-edge graphs, edge-list I/O, neighbourhood set operations and
synthetic planted-partition instances.

Only the positive edges ``E+`` of the complete signed graph are stored; every
absent pair is an implicit negative edge.  Vertices are ``0 .. n-1``.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp


class GraphFormatError(ValueError):
    """Malformed edge-list document."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def as_fraction(x) -> Fraction:
    """Exact rational for a threshold parameter; floats go through ``str`` so
    that ``0.1`` means one tenth."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(str(x))


def floor_threshold(x) -> int:
    """Largest integer ``<= x`` for a rational bound, so that an integer count
    ``c`` satisfies ``c <= x`` iff ``c <= floor_threshold(x)``."""
    return math.floor(as_fraction(x))


class PositiveGraph:
    """Immutable undirected simple graph in CSR form.

    Attributes
    ----------
    n : int
        Vertex count.
    edges : ndarray, shape (m, 2)
        Unique pairs with ``u < v``, sorted lexicographically.
    indptr, indices : ndarray
        CSR adjacency; ``indices[indptr[u]:indptr[u+1]]`` is strictly ascending.
    deg : ndarray
        Per-vertex degree.
    """

    def __init__(self, n: int, edges: np.ndarray):
        n = int(n)
        if n < 0:
            raise ValueError("vertex count must be non-negative")
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        self.n = n
        self.edges = edges
        self.edges.setflags(write=False)
        both = np.concatenate([edges, edges[:, ::-1]])
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
        self.indices = np.ascontiguousarray(both[:, 1])
        counts = np.bincount(both[:, 0], minlength=n) if n else np.zeros(0, np.int64)
        self.deg = counts.astype(np.int64)
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(self.deg, out=self.indptr[1:])
        # edge id of every CSR slot, so per-edge caches can be read from adjacency
        eid = np.concatenate([np.arange(len(edges)), np.arange(len(edges))])
        self.slot_edge = eid[order]
        for arr in (self.indices, self.deg, self.indptr, self.slot_edge):
            arr.setflags(write=False)
        self._lists: list[list[int]] | None = None

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[Sequence[int]]) -> "PositiveGraph":
        """Build from arbitrary pairs, validating range and self-loops and
        collapsing duplicates (a warning reports how many)."""
        arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs,
                         dtype=np.int64).reshape(-1, 2)
        if len(arr):
            if arr.min() < 0 or arr.max() >= n:
                raise ValueError("edge endpoint out of range")
            if np.any(arr[:, 0] == arr[:, 1]):
                raise ValueError("self-loop in edge list")
        canon = np.sort(arr, axis=1)
        uniq = np.unique(canon, axis=0) if len(canon) else canon
        dup = len(canon) - len(uniq)
        if dup:
            warnings.warn(f"collapsed {dup} duplicate edge(s)", stacklevel=2)
        return cls(n, uniq)

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, v: int) -> np.ndarray:
        self._check(v)
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def adj_lists(self) -> list[list[int]]:
        """Adjacency as Python lists (cached), for merge-based set operations."""
        if self._lists is None:
            flat = self.indices.tolist()
            ptr = self.indptr.tolist()
            self._lists = [flat[ptr[v]:ptr[v + 1]] for v in range(self.n)]
        return self._lists

    def closed_adjacency(self, dtype=np.int8) -> sp.csr_matrix:
        """Sparse ``A + I`` (row ``x`` is the characteristic vector of N[x])."""
        data = np.ones(len(self.indices), dtype=dtype)
        a = sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))
        return (a + sp.identity(self.n, dtype=dtype, format="csr")).tocsr()

    def _check(self, v: int) -> None:
        if not 0 <= v < self.n:
            raise IndexError(f"vertex {v} out of range for n={self.n}")

    def __repr__(self) -> str:
        return f"PositiveGraph(n={self.n}, m={self.m})"


@dataclass(frozen=True)
class VertexPartitionByDegree:
    v_low: np.ndarray
    v_high: np.ndarray
    is_high: np.ndarray = field(repr=False)
    phi: int
    eta: Fraction
    threshold: int  # deg <= threshold  <=>  deg <= (3 + eta) * phi


def load_graph(text: str) -> PositiveGraph:
    """Parse an edge-list document: first line ``n``, then one ``u v`` per line.

    Blank lines are skipped.  Duplicate pairs (in either orientation) are
    collapsed with a warning.

    Raises
    ------
    GraphFormatError
        On a malformed line, an endpoint outside ``[0, n)``, or a self-loop.
    """
    lines = io.StringIO(text)
    n = None
    pairs: list[tuple[int, int]] = []
    for lineno, raw in enumerate(lines, start=1):
        s = raw.strip()
        if not s:
            continue
        parts = s.split()
        if n is None:
            if len(parts) != 1:
                raise GraphFormatError(lineno, "expected vertex count")
            try:
                n = int(parts[0])
            except ValueError:
                raise GraphFormatError(lineno, f"bad vertex count {parts[0]!r}") from None
            if n < 0:
                raise GraphFormatError(lineno, "negative vertex count")
            continue
        if len(parts) != 2:
            raise GraphFormatError(lineno, f"expected 'u v', got {s!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(lineno, f"non-integer endpoint in {s!r}") from None
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(lineno, f"endpoint out of range in {s!r}")
        if u == v:
            raise GraphFormatError(lineno, f"self-loop at vertex {u}")
        pairs.append((u, v))
    if n is None:
        raise GraphFormatError(1, "empty document")
    return PositiveGraph.from_pairs(n, pairs)


def dump_graph(g: PositiveGraph) -> str:
    out = [str(g.n)]
    out.extend(f"{u} {v}" for u, v in g.edges.tolist())
    return "\n".join(out) + "\n"


def iter_edge_list(lines: Iterable[str]):
    """Yield ``n`` first, then each ``(u, v)`` pair, parsing line by line.

    Used by the streaming front end so the edge list is never held in memory.
    Validation matches :func:`load_graph` except that duplicates are passed
    through (the consumer decides what to do with them).
    """
    n = None
    for lineno, raw in enumerate(lines, start=1):
        s = raw.strip()
        if not s:
            continue
        parts = s.split()
        if n is None:
            if len(parts) != 1 or not parts[0].lstrip("-").isdigit():
                raise GraphFormatError(lineno, "expected vertex count")
            n = int(parts[0])
            yield n
            continue
        if len(parts) != 2:
            raise GraphFormatError(lineno, f"expected 'u v', got {s!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(lineno, f"non-integer endpoint in {s!r}") from None
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(lineno, f"endpoint out of range in {s!r}")
        if u == v:
            raise GraphFormatError(lineno, f"self-loop at vertex {u}")
        yield (u, v)
    if n is None:
        raise GraphFormatError(1, "empty document")


def closed_neighborhood(g: PositiveGraph, v: int) -> np.ndarray:
    """Sorted ``N[v] = N(v) ∪ {v}``."""
    nb = g.neighbors(v)
    pos = np.searchsorted(nb, v)
    return np.insert(nb, pos, v)


def symdiff_size(g: PositiveGraph, u: int, v: int, cap: int | None = None) -> int:
    """``|N[u] Δ N[v]|`` by merging the two sorted closed neighbourhoods.

    With ``cap`` set the merge may stop as soon as the count is certain to
    exceed ``cap`` and return some value ``> cap``.
    """
    g._check(u)
    g._check(v)
    if u == v:
        return 0
    du, dv = int(g.deg[u]), int(g.deg[v])
    if cap is not None and abs(du - dv) > cap:
        return abs(du - dv)
    adj = g.adj_lists()
    a, b = adj[u], adj[v]
    # the merge walks N(u) and N(v) and accounts for u and v themselves
    # separately: u ∈ N[u]; u ∈ N[v] iff adjacent (and symmetrically for v)
    adjacent = _contains(a, v)
    count = 0 if adjacent else 2
    i = j = 0
    la, lb = len(a), len(b)
    limit = math.inf if cap is None else cap
    while i < la and j < lb:
        x, y = a[i], b[j]
        if x == y:
            i += 1
            j += 1
        elif x < y:
            if x != v:
                count += 1
            i += 1
        else:
            if y != u:
                count += 1
            j += 1
        if count > limit:
            return count
    count += sum(1 for x in a[i:] if x != v) + sum(1 for y in b[j:] if y != u)
    return count


def _contains(sorted_list: list[int], x: int) -> bool:
    lo, hi = 0, len(sorted_list)
    while lo < hi:
        mid = (lo + hi) // 2
        if sorted_list[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo < len(sorted_list) and sorted_list[lo] == x


def degree_split(g: PositiveGraph, phi: int, eta=0) -> VertexPartitionByDegree:
    """Split V into low (``deg <= (3+eta)·phi``) and high-degree vertices."""
    if phi < 0:
        raise ValueError("phi must be non-negative")
    eta_q = as_fraction(eta)
    if not 0 <= eta_q < 1:
        raise ValueError("eta must lie in [0, 1)")
    thr = floor_threshold((3 + eta_q) * phi)
    is_high = g.deg > thr
    is_high.setflags(write=False)
    return VertexPartitionByDegree(
        v_low=np.flatnonzero(~is_high),
        v_high=np.flatnonzero(is_high),
        is_high=is_high,
        phi=int(phi),
        eta=eta_q,
        threshold=thr,
    )


class UnionFind:
    """Disjoint sets over ``0 .. size-1`` with path compression.  The root of
    every set is its minimum element."""

    def __init__(self, size: int):
        self.parent = list(range(size))

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            if rx < ry:
                self.parent[ry] = rx
            else:
                self.parent[rx] = ry


def connected_components(vertices: Iterable[int], edges: Iterable[Sequence[int]]) -> list[list[int]]:
    """Components of the graph ``(vertices, edges)``.

    Each component is a sorted list; components are ordered by their minimum
    vertex.  Raises ``ValueError`` if an edge endpoint is not in ``vertices``.
    """
    verts = sorted(set(int(v) for v in vertices))
    index = {v: i for i, v in enumerate(verts)}
    uf = UnionFind(len(verts))
    for e in edges:
        u, v = int(e[0]), int(e[1])
        if u not in index or v not in index:
            raise ValueError(f"edge ({u}, {v}) has an endpoint outside the vertex set")
        uf.union(index[u], index[v])
    groups: dict[int, list[int]] = {}
    for i, v in enumerate(verts):
        groups.setdefault(uf.find(i), []).append(v)
    # roots are minimal indices and verts is sorted, so root order == label order
    return [groups[r] for r in sorted(groups)]


def planted_instance(n: int, k_clusters: int, flip_prob: float, seed: int):
    """Planted-partition graph.

    Vertices are split into ``k_clusters`` contiguous blocks of near-equal
    size.  Each intra-block pair is a positive edge with probability
    ``1 - flip_prob``, each inter-block pair with probability ``flip_prob``,
    all independently.

    Returns
    -------
    graph : PositiveGraph
    truth : ndarray
        Ground-truth block id per vertex.
    """
    if not 1 <= k_clusters <= n:
        raise ValueError("need 1 <= k_clusters <= n")
    if not 0 <= flip_prob < 0.5:
        raise ValueError("flip_prob must lie in [0, 0.5)")
    rng = np.random.default_rng(seed)
    sizes = np.full(k_clusters, n // k_clusters)
    sizes[: n % k_clusters] += 1
    truth = np.repeat(np.arange(k_clusters), sizes)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])

    intra = []
    for s, size in zip(starts.tolist(), sizes.tolist()):
        iu, ju = np.triu_indices(size, k=1)
        pairs = np.stack([iu + s, ju + s], axis=1)
        if flip_prob > 0:
            pairs = pairs[rng.random(len(pairs)) >= flip_prob]
        intra.append(pairs)
    parts = intra
    if flip_prob > 0:
        parts.append(_bernoulli_pairs(n, flip_prob, rng, truth))
    edges = np.concatenate(parts) if parts else np.zeros((0, 2), np.int64)
    edges = np.unique(np.sort(edges, axis=1), axis=0) if len(edges) else edges
    return PositiveGraph(n, edges), truth


def _bernoulli_pairs(n: int, p: float, rng: np.random.Generator, truth: np.ndarray) -> np.ndarray:
    """Inter-block pairs, each kept independently with probability ``p``.

    Walks the upper triangle with geometric gaps, so cost is proportional to
    the number of kept pairs rather than ``n^2``.
    """
    total = n * (n - 1) // 2
    if total == 0:
        return np.zeros((0, 2), np.int64)
    # row i owns linear indices [off[i], off[i+1]) for pairs (i, j > i)
    row_len = np.arange(n - 1, -1, -1, dtype=np.int64)
    off = np.concatenate([[0], np.cumsum(row_len)])
    picked = []
    pos = -1
    batch = max(16, int(total * p * 1.1) + 16)
    while True:
        gaps = rng.geometric(p, size=batch)
        idx = pos + np.cumsum(gaps)
        pos = int(idx[-1])
        idx = idx[idx < total]
        picked.append(idx)
        if pos >= total:
            break
    lin = np.concatenate(picked)
    i = np.searchsorted(off, lin, side="right") - 1
    j = lin - off[i] + i + 1
    keep = truth[i] != truth[j]
    return np.stack([i[keep], j[keep]], axis=1)


def write_partition(labels: Sequence[int]) -> str:
    """Serialise a partition as ``vertex cluster_id`` lines."""
    return "".join(f"{v} {c}\n" for v, c in enumerate(np.asarray(labels).tolist()))


def read_partition(text: str, n: int | None = None) -> np.ndarray:
    """Parse ``vertex cluster_id`` lines back into a label array."""
    rows = [line.split() for line in text.splitlines() if line.strip()]
    if any(len(r) != 2 for r in rows):
        raise ValueError("partition lines must be 'vertex cluster_id'")
    pairs = np.array([[int(a), int(b)] for a, b in rows], dtype=np.int64).reshape(-1, 2)
    size = len(pairs) if n is None else n
    if sorted(pairs[:, 0].tolist()) != list(range(size)):
        raise ValueError("partition must list every vertex 0..n-1 exactly once")
    labels = np.empty(size, dtype=np.int64)
    labels[pairs[:, 0]] = pairs[:, 1]
    return labels


def random_graph(n: int, density: float, seed: int) -> PositiveGraph:
    """Erdős–Rényi graph: every pair is a positive edge with probability ``density``."""
    if not 0 <= density <= 1:
        raise ValueError("density must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < density
    return PositiveGraph(n, np.stack([iu[keep], ju[keep]], axis=1))
