"""Single-pass semi-streaming simulation of the per-φ clustering step.

State kept while the edge stream goes by:

* ``A`` accumulators ``A·N⃗[v]`` (:class:`NeighborhoodSketch`), used only for
  similarity queries;
* ``B`` accumulators ``B·N⃗[v]`` (:class:`DisagreementSketch`), used only to
  estimate the disagreements of a finished cluster;
* degree-proportional vertex sampling by levels: vertex ``v`` is drawn into
  level ``i`` up front with probability ``min(1, c·ln n / 2^i)``, level ``i``
  dies once ``v`` has seen more than ``2^{i+1}`` edges, and ``v`` keeps its
  incident edges while any level is alive;
* a word ledger with a high-water mark.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np
import scipy.sparse as sp

from .cluster import Clustering, PhiOutcome
from .graph import as_fraction, connected_components, floor_threshold, iter_edge_list
from .similarity import (
    DEFAULT_C,
    accumulate_rows,
    eps_for_eta,
    pairwise_squared_distances,
    projection_rows,
    sketch_dim,
    sketch_dtype,
)

DEFAULT_C_SAMPLE = 8.0
_TAG_A, _TAG_B, _TAG_LEVELS = 0, 1, 2
_SMALL_BATCH = 64


class _Accumulator:
    def __init__(self, n: int, k: int, eps: Fraction, seed: int, tag: int):
        self.n, self.k, self.eps, self.seed, self.tag = n, k, eps, seed, tag
        self.dtype = sketch_dtype(n)
        self._acc = np.zeros((n, k), dtype=self.dtype)
        self._closed = False

    @property
    def words(self) -> int:
        return self.n * self.k

    def add_edges(self, src: np.ndarray, dst: np.ndarray) -> None:
        if self._closed:
            raise RuntimeError("accumulator already finalised")
        if len(src) <= _SMALL_BATCH:
            both_to = np.concatenate([src, dst])
            both_from = np.concatenate([dst, src])
            rows = projection_rows(self.seed, self.tag, both_from, self.k).astype(self.dtype)
            np.add.at(self._acc, both_to, rows)
            return
        ones = np.ones(2 * len(src), dtype=self.dtype)
        m = sp.csr_matrix(
            (ones, (np.concatenate([src, dst]), np.concatenate([dst, src]))),
            shape=(self.n, self.n),
        )
        self._acc += accumulate_rows(m, self.seed, self.tag, self.k, self.dtype)

    def add_self_terms(self) -> None:
        """Turn open-neighbourhood sums into closed ones (``v ∈ N[v]``)."""
        eye = sp.identity(self.n, dtype=self.dtype, format="csr")
        self._acc += accumulate_rows(eye, self.seed, self.tag, self.k, self.dtype)
        self._closed = True
        self._acc.setflags(write=False)

    def _raw_bound(self, t) -> int:
        return floor_threshold(as_fraction(t) * (1 + self.eps) * self.k)


class NeighborhoodSketch(_Accumulator):
    """``A·N⃗[v]`` accumulators.  Answers η-similarity queries and nothing else."""

    def query_pairs(self, rows, cols, t) -> np.ndarray:
        dist = pairwise_squared_distances(self._acc, rows, cols)
        return dist <= self._raw_bound(t)

    def vector(self, v: int) -> np.ndarray:
        return self._acc[v].copy()


class DisagreementSketch(_Accumulator):
    """``B·N⃗[v]`` accumulators.  Only estimates ``|C Δ N[u]|`` for members
    ``u`` of a finished cluster ``C`` via ``‖B·C⃗ − B·N⃗[u]‖² / ((1+ε)k)``."""

    def _raw(self, members) -> np.ndarray:
        members = np.asarray(members, dtype=np.int64)
        bc = projection_rows(self.seed, self.tag, members, self.k).sum(axis=0, dtype=np.int64)
        d = self._acc[members].astype(np.int64) - bc
        return np.einsum("ij,ij->i", d, d)

    def cluster_estimates(self, members) -> np.ndarray:
        return self._raw(members) / (float(1 + self.eps) * self.k)

    def cluster_fits(self, members, limit) -> bool:
        """True iff every member's estimated disagreement is at most ``limit``."""
        return bool(np.all(self._raw(members) <= self._raw_bound(limit)))


@dataclass
class StreamOutcome(PhiOutcome):
    candidates: list[np.ndarray] = field(default_factory=list)
    sampled: np.ndarray | None = None
    pivots: list[int | None] = field(default_factory=list)
    absorbed: list[list[int]] = field(default_factory=list)


def check_disjoint(sets, n: int) -> None:
    """Raise if any vertex appears in two of the given sets."""
    seen = np.zeros(n, dtype=np.int64)
    for s in sets:
        np.add.at(seen, np.asarray(s, dtype=np.int64), 1)
    if np.any(seen > 1):
        raise AssertionError(f"candidate sets overlap at {np.flatnonzero(seen > 1).tolist()[:5]}")


def _level_of(d: np.ndarray) -> np.ndarray:
    """``⌈log2 d⌉`` with degrees 0 and 1 mapped to level 0."""
    d = np.maximum(np.asarray(d, dtype=np.int64), 1)
    lev = np.zeros(d.shape, dtype=np.int64)
    big = d > 1
    lev[big] = np.ceil(np.log2(d[big])).astype(np.int64)
    # guard against floating error at exact powers of two
    lev[big & (2 ** np.maximum(lev - 1, 0) >= d)] -= 1
    return lev


class StreamState:
    """Everything the one-pass solver keeps for a fixed guess ``phi``.

    Parameters
    ----------
    n, phi : int
    eta : float or Fraction
        ``0 < eta < 1``.  The ``A`` sketch is built at ``ε = (η/2)/(2+η/2)``;
        the ``B`` sketch at the ``ε`` with ``(1+ε)/(1−ε) = (3+2η)/(3+η)`` so an
        accepted cluster is within ``(3+2η)·φ`` w.h.p.
    seed : int
        Keys the projections and the level sampling.
    C : float
        Sketch dimension constant, ``k = ⌈C ln n / ε²⌉``.
    c_sample : float
        Level sampling constant.
    check_duplicates : bool
        Reject repeated edges.  This check keeps a set of seen edges and is
        simulator bookkeeping, not counted in the space ledger.
    """

    def __init__(self, n: int, phi: int, eta, seed: int, C: float = DEFAULT_C,
                 c_sample: float = DEFAULT_C_SAMPLE, check_duplicates: bool = True):
        if n < 2:
            raise ValueError("streaming needs n >= 2")
        if phi < 0:
            raise ValueError("phi must be non-negative")
        eta = as_fraction(eta)
        if not 0 < eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        if c_sample <= 0:
            raise ValueError("c_sample must be positive")
        self.n, self.phi, self.eta, self.seed = n, int(phi), eta, int(seed)
        self.C, self.c_sample = float(C), float(c_sample)

        eps_a = eps_for_eta(eta / 2)
        eps_b = eps_for_eta(eta / (3 + eta))
        self.sketch_a = NeighborhoodSketch(n, sketch_dim(n, eps_a, C), eps_a, seed, _TAG_A)
        self.sketch_b = DisagreementSketch(n, sketch_dim(n, eps_b, C), eps_b, seed, _TAG_B)

        self.levels = math.ceil(math.log2(n))
        p = np.minimum(1.0, c_sample * math.log(n) / 2.0 ** np.arange(self.levels + 1))
        rng = np.random.default_rng([self.seed, _TAG_LEVELS])
        self.level_membership = rng.random((n, self.levels + 1)) < p
        self.level_membership.setflags(write=False)
        self.live = self.level_membership.copy()
        # a vertex keeps its edges until its highest live level dies
        top = np.where(self.live.any(axis=1),
                       self.levels - np.argmax(self.live[:, ::-1], axis=1), -1)
        self._store_until = np.where(top >= 0, 2 ** (top + 1) + 1, 0)

        self.observed_deg = np.zeros(n, dtype=np.int64)
        self.stored: list[list[int]] = [[] for _ in range(n)]
        self._stored_records = 0
        self.edges_seen = 0
        self._seen: set[int] | None = set() if check_duplicates else None
        self._finalised = False
        self.words = self._current_words()
        self.high_water = self.words

    # -- ledger ----------------------------------------------------------------

    def _current_words(self) -> int:
        return (self.sketch_a.words + self.sketch_b.words
                + 2 * self._stored_records + int(self.live.sum()))

    def space_report(self) -> tuple[int, int]:
        """``(high_water_words, current_words)``."""
        return self.high_water, self.words

    # -- ingestion -------------------------------------------------------------

    def ingest(self, u: int, v: int) -> None:
        self.ingest_many(np.array([[u, v]], dtype=np.int64))

    def ingest_many(self, edges) -> None:
        """Ingest a batch of edges in stream order; equivalent to calling
        :meth:`ingest` on each, including the ledger high-water mark."""
        if self._finalised:
            raise RuntimeError("stream already finalised")
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if len(e) == 0:
            return
        n = self.n
        if e.min() < 0 or e.max() >= n:
            raise ValueError("edge endpoint out of range")
        if np.any(e[:, 0] == e[:, 1]):
            raise ValueError("self-loop in stream")
        if self._seen is not None:
            keys = np.minimum(e[:, 0], e[:, 1]) * n + np.maximum(e[:, 0], e[:, 1])
            if len(np.unique(keys)) != len(keys) or not self._seen.isdisjoint(keys.tolist()):
                raise ValueError("duplicate edge in stream")
            self._seen.update(keys.tolist())

        src, dst = e[:, 0], e[:, 1]
        self.sketch_a.add_edges(src, dst)
        self.sketch_b.add_edges(src, dst)

        # endpoint events in stream order: (vertex, other end, degree after)
        x = e.ravel()
        other = e[:, ::-1].ravel()
        order = np.argsort(x, kind="stable")
        xs = x[order]
        start = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
        run = np.arange(len(xs)) - np.repeat(start, np.diff(np.r_[start, len(xs)]))
        after = np.empty_like(x)
        after[order] = self.observed_deg[xs] + run + 1

        until = self._store_until[x]
        stores = after < until
        frees = after == until
        # a level i dies when the degree reaches 2^{i+1} + 1
        dying = np.zeros(len(x), dtype=bool)
        lvl = np.zeros(len(x), dtype=np.int64)
        cand = (after >= 3) & ((after - 1) & (after - 2) == 0)
        lvl[cand] = np.log2(after[cand] - 1).round().astype(np.int64) - 1
        cand &= lvl <= self.levels
        dying[cand] = self.live[x[cand], lvl[cand]]

        delta = 2 * stores.astype(np.int64) - 2 * np.where(frees, after - 1, 0) - dying
        per_edge = delta.reshape(-1, 2).sum(axis=1)
        running = self.words + np.cumsum(per_edge)
        self.high_water = max(self.high_water, int(running.max()))

        self.live[x[dying], lvl[dying]] = False
        np.add.at(self.observed_deg, x, 1)
        for v, w in zip(x[stores].tolist(), other[stores].tolist()):
            self.stored[v].append(w)
        # a vertex frees its records once and never stores again
        for v in x[frees].tolist():
            self.stored[v] = []
        self._stored_records += int(stores.sum()) - int((after[frees] - 1).sum())
        self.edges_seen += len(e)
        self.words = self._current_words()
        assert self.words == int(running[-1])

    # -- finalisation ------------------------------------------------------------

    def sampled(self) -> np.ndarray:
        """``S``: vertices alive at level ``⌈log2 d(v)⌉`` of their final degree."""
        lev = _level_of(self.observed_deg)
        ok = lev <= self.levels
        s = np.zeros(self.n, dtype=bool)
        s[ok] = self.live[np.flatnonzero(ok), lev[ok]]
        return np.flatnonzero(s)

    def finalize(self) -> StreamOutcome:
        if self._finalised:
            raise RuntimeError("stream already finalised")
        self._finalised = True
        self.sketch_a.add_self_terms()
        self.sketch_b.add_self_terms()
        n, phi, eta = self.n, self.phi, self.eta
        deg = self.observed_deg
        thr = floor_threshold((3 + eta) * phi)
        is_high = deg > thr
        v_high = np.flatnonzero(is_high)
        v_low = np.flatnonzero(~is_high)

        # high-degree partition from all-pairs A queries over V_high
        if len(v_high):
            sim = self.sketch_a.query_pairs(v_high, v_high, 2 * phi)
            iu, ju = np.nonzero(np.triu(sim, k=1))
            high = connected_components(v_high.tolist(), zip(v_high[iu].tolist(), v_high[ju].tolist()))
        else:
            high = []

        # Cand(L_i): low vertices similar to all of L_i and to no other high vertex,
        # i.e. whose similar set among V_high is exactly L_i
        hid = np.full(n, -1, dtype=np.int64)
        for i, members in enumerate(high):
            hid[members] = i
        cand_of = np.full(n, -1, dtype=np.int64)
        if len(high) and len(v_low):
            q = self.sketch_a.query_pairs(v_low, v_high, 2 * phi)
            count = q.sum(axis=1)
            first = np.where(count > 0, hid[v_high[np.argmax(q, axis=1)]], -1)
            sizes = np.array([len(c) for c in high])
            same = np.array([
                bool(count[r]) and bool(np.all(hid[v_high[q[r]]] == first[r])) for r in range(len(v_low))
            ], dtype=bool)
            exact = same & (count == np.where(first >= 0, sizes[np.maximum(first, 0)], -1))
            cand_of[v_low[exact]] = first[exact]
        candidates = [np.flatnonzero(cand_of == i) for i in range(len(high))]
        check_disjoint(candidates, n)

        sampled = self.sampled()
        in_s = np.zeros(n, dtype=bool)
        in_s[sampled] = True
        for v in sampled.tolist():
            if len(self.stored[v]) != deg[v]:
                raise AssertionError(f"sampled vertex {v} lost edges")

        labels = np.full(n, -1, dtype=np.int64)
        unclustered = ~is_high
        limit = (3 + eta) * phi
        pivots: list[int | None] = []
        absorbed: list[list[int]] = []
        for i, members in enumerate(high):
            in_cand = cand_of == i
            order = [y for y in candidates[i].tolist() if in_s[y]]
            order += [y for y in members if in_s[y]]
            chosen = None
            for y in order + [None]:
                if y is None:
                    r = np.zeros(0, dtype=np.int64)
                else:
                    nb = np.array(self.stored[y] + [y], dtype=np.int64)
                    w = nb[unclustered[nb] & in_cand[nb]]
                    r = w[self.sketch_a.query_pairs([y], w, 2 * phi)[0]] if len(w) else w
                c = np.concatenate([np.asarray(members, dtype=np.int64), r])
                if self.sketch_b.cluster_fits(c, limit):
                    chosen = (y, r)
                    break
            if chosen is None:
                return StreamOutcome(phi=phi, eta=eta, clustering=None, high_partition=high,
                                     candidates=candidates, sampled=sampled,
                                     pivots=pivots, absorbed=absorbed)
            y, r = chosen
            labels[members] = members[0]
            labels[r] = members[0]
            unclustered[r] = False
            pivots.append(y)
            absorbed.append(sorted(r.tolist()))
        rest = labels == -1
        labels[rest] = np.flatnonzero(rest)
        return StreamOutcome(phi=phi, eta=eta, clustering=Clustering(labels), high_partition=high,
                             candidates=candidates, sampled=sampled, pivots=pivots, absorbed=absorbed)


def stream_init(n: int, phi: int, eta, seed: int, C: float = DEFAULT_C,
                c_sample: float = DEFAULT_C_SAMPLE) -> StreamState:
    return StreamState(n, phi, eta, seed, C=C, c_sample=c_sample)


def stream_ingest(state: StreamState, u: int, v: int) -> None:
    state.ingest(u, v)


def stream_finalize(state: StreamState) -> StreamOutcome:
    return state.finalize()


def space_report(state: StreamState) -> tuple[int, int]:
    return state.space_report()


def space_budget(n: int, epsilon, b0: float) -> float:
    """``B₀ · n · ln n / ε²``."""
    return b0 * n * math.log(n) / float(as_fraction(epsilon)) ** 2


# -- stream sources and drivers ----------------------------------------------------

def edge_source(edges, shuffle_seed: int | None = None) -> Callable[[], Iterable[np.ndarray]]:
    """Replayable source over an in-memory edge array, optionally permuted."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if shuffle_seed is not None:
        e = e[np.random.default_rng(shuffle_seed).permutation(len(e))]
        # also flip orientation of some pairs; the stream is unordered
        flip = np.random.default_rng([shuffle_seed, 1]).random(len(e)) < 0.5
        e = np.where(flip[:, None], e[:, ::-1], e)

    def batches(size: int = 65536):
        for s in range(0, len(e), size):
            yield e[s:s + size]
    return batches


def file_source(path, shuffle_seed: int | None = None, batch: int = 65536):
    """Replayable source reading an edge-list file line by line.

    Returns ``(n, source)``.  With ``shuffle_seed`` the edges are read once and
    permuted in memory (for adversarial-order experiments).
    """
    with open(path) as fh:
        it = iter_edge_list(fh)
        n = next(it)
        if shuffle_seed is not None:
            e = np.array(list(it), dtype=np.int64).reshape(-1, 2)
            return n, edge_source(e, shuffle_seed)

    def batches(size: int = batch):
        with open(path) as fh:
            it = iter_edge_list(fh)
            next(it)
            buf = []
            for pair in it:
                buf.append(pair)
                if len(buf) >= size:
                    yield np.array(buf, dtype=np.int64)
                    buf = []
            if buf:
                yield np.array(buf, dtype=np.int64)
    return n, batches


def run_stream(source, n: int, phi: int, eta, seed: int, C: float = DEFAULT_C,
               c_sample: float = DEFAULT_C_SAMPLE) -> tuple[StreamOutcome, StreamState]:
    """One pass over ``source()`` at a fixed ``phi``."""
    state = StreamState(n, phi, eta, seed, C=C, c_sample=c_sample)
    for batch in source():
        state.ingest_many(batch)
    return state.finalize(), state


@dataclass
class StreamSearchResult:
    clustering: Clustering
    phi: int
    eta: Fraction
    passes: int
    peak_words: int
    probes: list[tuple[int, bool]]


def stream_search(source, n: int, epsilon, seed: int, C: float = DEFAULT_C,
                  c_sample: float = DEFAULT_C_SAMPLE) -> StreamSearchResult:
    """Binary search over φ, replaying the stream once per probe.

    Runs at ``η = ε/2`` so that accepted clusters are within ``(3+ε)·φ``.
    The first pass probes ``φ = n``, which always succeeds.
    """
    eta = as_fraction(epsilon) / 2
    probes: list[tuple[int, bool]] = []
    peak = 0
    out, st = run_stream(source, n, n, eta, seed, C, c_sample)
    probes.append((n, out.ok))
    peak = max(peak, st.high_water)
    if not out.ok:
        raise RuntimeError(f"streaming probe failed at phi = n = {n}")
    best = out
    lo, hi = 0, n
    while lo < hi:
        mid = (lo + hi) // 2
        out, st = run_stream(source, n, mid, eta, seed, C, c_sample)
        probes.append((mid, out.ok))
        peak = max(peak, st.high_water)
        if out.ok:
            hi, best = mid, out
        else:
            lo = mid + 1
    return StreamSearchResult(clustering=best.clustering, phi=best.phi, eta=eta,
                              passes=len(probes), peak_words=peak, probes=probes)
