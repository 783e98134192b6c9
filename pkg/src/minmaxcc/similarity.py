"""η-similarity queries over closed neighbourhoods.

Two backends answer ``|N[u] Δ N[v]| <=_η t``:

* exact: sorted-merge symmetric difference (η = 0 behaviour);
* sketch: ±1 random projections ``A·N⃗[x] = Σ_{v ∈ N[x]} A_v``.  The test
  ``‖A·N⃗[u] − A·N⃗[v]‖² / ((1+ε)k) <= t`` is correct w.h.p. for
  ``1 + η = (1+ε)/(1−ε)``.

Rows ``A_v`` come from a counter-based generator keyed by ``(seed, tag, v)``
so any row can be regenerated without materialising the whole matrix.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .graph import PositiveGraph, as_fraction, floor_threshold, symdiff_size

DEFAULT_C = 8.0
_BLOCK = 2048
_CHUNK = 4096


def eps_for_eta(eta) -> Fraction:
    """Projection accuracy ε with ``(1+η) = (1+ε)/(1−ε)``, i.e. ``η/(2+η)``."""
    eta = as_fraction(eta)
    return eta / (2 + eta)


def eta_for_eps(eps) -> Fraction:
    eps = as_fraction(eps)
    return 2 * eps / (1 - eps)


def sketch_dim(n: int, eps, C: float = DEFAULT_C) -> int:
    """``k = ⌈C · ln n / ε²⌉`` (at least 1)."""
    eps = float(as_fraction(eps))
    return max(1, math.ceil(C * math.log(n) / eps**2))


def sketch_dtype(n: int):
    # entries are bounded by deg+1 <= n, differences by 2n
    return np.int16 if 2 * n < np.iinfo(np.int16).max else np.int32


def projection_rows(seed: int, tag: int, vertices, k: int) -> np.ndarray:
    """±1 rows ``A_v`` for the given vertices, shape ``(len(vertices), k)``."""
    vertices = np.asarray(vertices, dtype=np.int64).ravel()
    words = (k + 63) // 64
    raw = np.empty((len(vertices), words), dtype=np.uint64)
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF, int(tag)]
    for i, v in enumerate(vertices.tolist()):
        raw[i] = np.random.Philox(key=key, counter=[0, 0, v, 0]).random_raw(words)
    bits = np.unpackbits(raw.view(np.uint8), axis=1, count=k, bitorder="little")
    out = bits.astype(np.int16)
    out *= 2
    out -= 1
    return out


def accumulate_rows(matrix: sp.csr_matrix, seed: int, tag: int, k: int, dtype) -> np.ndarray:
    """``matrix @ A`` where row ``v`` of ``A`` is ``A_v``; ``A`` is generated
    in vertex blocks and never held whole."""
    n_rows, n_cols = matrix.shape
    out = np.zeros((n_rows, k), dtype=dtype)
    csc = matrix.tocsc()
    for start in range(0, n_cols, _BLOCK):
        stop = min(n_cols, start + _BLOCK)
        block = csc[:, start:stop]
        if block.nnz == 0:
            continue
        rows = projection_rows(seed, tag, np.arange(start, stop), k).astype(dtype, copy=False)
        out += (block.astype(dtype) @ rows).astype(dtype, copy=False)
    return out


def squared_distances(S: np.ndarray, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Exact integer ``‖S[src] − S[dst]‖²`` row-wise."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    out = np.empty(len(src), dtype=np.int64)
    for s in range(0, len(src), _CHUNK):
        d = S[src[s:s + _CHUNK]] - S[dst[s:s + _CHUNK]]
        out[s:s + _CHUNK] = np.einsum("ij,ij->i", d, d, dtype=np.int64)
    return out


def pairwise_squared_distances(S: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Exact integer matrix ``‖S[r] − S[c]‖²`` for all ``r in rows, c in cols``."""
    a = S[np.asarray(rows, dtype=np.int64)]
    b = S[np.asarray(cols, dtype=np.int64)]
    if a.size == 0 or b.size == 0:
        return np.zeros((len(a), len(b)), dtype=np.int64)
    na = np.einsum("ij,ij->i", a, a, dtype=np.int64)
    nb = np.einsum("ij,ij->i", b, b, dtype=np.int64)
    # float64 BLAS over column chunks short enough that every partial dot
    # product stays below 2^53, hence exact; chunks are summed in int64
    top = max(int(np.abs(a).max()), int(np.abs(b).max()), 1)
    step = (2**53 - 1) // (top * top)
    if step == 0:
        return na[:, None] + nb[None, :] - 2 * (a.astype(np.int64) @ b.astype(np.int64).T)
    gram = np.zeros((len(a), len(b)), dtype=np.int64)
    for s in range(0, a.shape[1], step):
        part = a[:, s:s + step].astype(np.float64) @ b[:, s:s + step].astype(np.float64).T
        gram += part.astype(np.int64)
    return na[:, None] + nb[None, :] - 2 * gram


@dataclass(frozen=True)
class SketchSet:
    """Per-vertex sketches ``sketch[x] = Σ_{v ∈ N[x]} A_v``."""

    k: int
    seed: int
    eps: Fraction
    C: float
    sketch: np.ndarray = field(repr=False)
    tag: int = 0

    @property
    def n(self) -> int:
        return self.sketch.shape[0]

    def row(self, v: int) -> np.ndarray:
        return projection_rows(self.seed, self.tag, [v], self.k)[0]

    def raw_distance(self, u: int, v: int) -> int:
        d = self.sketch[u].astype(np.int64) - self.sketch[v]
        return int(d @ d)

    def raw_bound(self, t) -> int:
        """Largest raw squared distance accepted by a query at threshold ``t``."""
        return floor_threshold(as_fraction(t) * (1 + self.eps) * self.k)


def build_sketches(g: PositiveGraph, epsilon, seed: int, C: float = DEFAULT_C, tag: int = 0) -> SketchSet:
    """Sketch every closed neighbourhood with ``k = ⌈C ln n / ε²⌉`` rows.

    One sparse product of ``A + I`` with the projection, generated in vertex
    blocks: work is proportional to ``(m + n)·k``.
    """
    eps = as_fraction(epsilon)
    if not 0 < eps < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if g.n < 2:
        raise ValueError("sketches need n >= 2")
    k = sketch_dim(g.n, eps, C)
    dtype = sketch_dtype(g.n)
    S = accumulate_rows(g.closed_adjacency(dtype=dtype), seed, tag, k, dtype)
    S.setflags(write=False)
    return SketchSet(k=k, seed=int(seed), eps=eps, C=float(C), sketch=S, tag=tag)


def distance_estimate(s: SketchSet, u: int, v: int) -> float:
    """``‖sketch[u] − sketch[v]‖² / ((1+ε)k)``."""
    for x in (u, v):
        if not 0 <= x < s.n:
            raise IndexError(f"vertex {x} out of range for n={s.n}")
    return s.raw_distance(u, v) / (float(1 + s.eps) * s.k)


class SimilarityOracle:
    """Answers η-similarity queries and counts them.

    Parameters
    ----------
    graph : PositiveGraph
    sketches : SketchSet, optional
        If given, queries use the projection test; otherwise exact merges.

    Notes
    -----
    The sketch backend built at accuracy ε is a valid η-query for every
    ``η >= 2ε/(1−ε)`` (exposed as :attr:`eta`), so one sketch set serves
    both the η and the η/2 queries of a solver when built at the tighter ε.
    The counter is guarded by a lock; everything else is read-only.
    """

    def __init__(self, graph: PositiveGraph, sketches: SketchSet | None = None, eta=0):
        self.graph = graph
        self.sketches = sketches
        if sketches is not None and sketches.n != graph.n:
            raise ValueError("sketch set does not match graph")
        self.eta = eta_for_eps(sketches.eps) if sketches is not None else Fraction(0)
        # only used to size the early-exit cap of exact merges
        self._cap_eta = as_fraction(eta)
        self._queries = 0
        self._lock = threading.Lock()
        self._edge_dist: np.ndarray | None = None

    @property
    def backend(self) -> str:
        return "exact" if self.sketches is None else "sketch"

    @property
    def queries(self) -> int:
        return self._queries

    def _count(self, k: int) -> None:
        with self._lock:
            self._queries += k

    def query(self, u: int, v: int, t) -> bool:
        """One η-similarity query ``|N[u] Δ N[v]| <=_η t``."""
        t = as_fraction(t)
        if t < 0:
            raise ValueError("threshold must be non-negative")
        self._count(1)
        if self.sketches is None:
            cap = math.ceil((1 + self._cap_eta) * t)
            return symdiff_size(self.graph, u, v, cap=cap) <= t
        return self.sketches.raw_distance(u, v) <= self.sketches.raw_bound(t)

    # -- batched forms used by the solvers -----------------------------------

    def edge_distances(self) -> np.ndarray:
        """Per-edge distance in backend units, aligned with ``graph.edges``:
        the exact symmetric difference, or the raw squared sketch distance.
        Computed once and cached (it does not depend on the threshold)."""
        if self._edge_dist is None:
            g = self.graph
            if self.sketches is None:
                self._edge_dist = exact_edge_symdiff(g)
            else:
                self._edge_dist = squared_distances(self.sketches.sketch, g.edges[:, 0], g.edges[:, 1])
            self._edge_dist.setflags(write=False)
        return self._edge_dist

    def bound(self, t) -> int:
        """Largest backend distance for which a query at ``t`` answers true."""
        if self.sketches is None:
            return floor_threshold(t)
        return self.sketches.raw_bound(t)

    def query_edges(self, t, edge_ids=None) -> np.ndarray:
        """Boolean answers for graph edges (all edges, or the given ids)."""
        dist = self.edge_distances()
        if edge_ids is not None:
            dist = dist[np.asarray(edge_ids, dtype=np.int64)]
        self._count(len(dist))
        return dist <= self.bound(t)

    def query_pairs(self, rows, cols, t) -> np.ndarray:
        """Boolean matrix of answers for every ``(r, c)`` in ``rows × cols``."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        self._count(len(rows) * len(cols))
        if self.sketches is None:
            dist = exact_pairwise_symdiff(self.graph, rows, cols)
        else:
            dist = pairwise_squared_distances(self.sketches.sketch, rows, cols)
        return dist <= self.bound(t)


def eta_similarity_query(oracle: SimilarityOracle, u: int, v: int, t) -> bool:
    return oracle.query(u, v, t)


def exact_edge_symdiff(g: PositiveGraph) -> np.ndarray:
    """``|N[u] Δ N[v]|`` for every edge ``uv``.

    For an edge, ``|N[u] ∩ N[v]| = common(u, v) + 2``, so the symmetric
    difference is ``deg u + deg v − 2·common − 2``.
    """
    if g.m == 0:
        return np.zeros(0, dtype=np.int64)
    a = sp.csr_matrix((np.ones(len(g.indices), np.int32), g.indices, g.indptr), shape=(g.n, g.n))
    u, v = g.edges[:, 0], g.edges[:, 1]
    common = np.asarray((a[u].multiply(a[v])).sum(axis=1)).ravel()
    return g.deg[u] + g.deg[v] - 2 * common - 2


def exact_pairwise_symdiff(g: PositiveGraph, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    if len(rows) == 0 or len(cols) == 0:
        return np.zeros((len(rows), len(cols)), dtype=np.int64)
    ai = g.closed_adjacency(dtype=np.int32)
    inter = (ai[rows] @ ai[cols].T).toarray().astype(np.int64)
    size = g.deg + 1
    return size[rows][:, None] + size[cols][None, :] - 2 * inter
