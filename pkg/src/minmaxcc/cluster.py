"""Sequential min-max correlation clustering.

``cluster_phi`` either certifies a clustering with objective at most
``(3+η)·φ`` or reports that no clustering achieves ``φ``; ``solve`` binary
searches φ over ``[0, n]``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .graph import (
    PositiveGraph,
    as_fraction,
    connected_components,
    degree_split,
    floor_threshold,
)
from .similarity import DEFAULT_C, SimilarityOracle, build_sketches, eps_for_eta


class Clustering:
    """A partition of ``0 .. n-1``.

    ``labels[v]`` is the index of the cluster holding ``v`` and
    ``clusters[i]`` is the sorted member list of cluster ``i``.  Clusters are
    ordered by their minimum vertex.
    """

    def __init__(self, labels: Sequence[int]):
        labels = np.asarray(labels, dtype=np.int64).ravel()
        # renumber by first appearance, which orders clusters by min vertex
        _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
        rank = np.empty(len(first), dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(len(first))
        self.labels = rank[inverse]
        self.labels.setflags(write=False)
        order = np.argsort(self.labels, kind="stable")
        bounds = np.flatnonzero(np.diff(self.labels[order])) + 1
        self.clusters = [c.tolist() for c in np.split(order, bounds)] if len(order) else []

    @classmethod
    def from_clusters(cls, clusters: Iterable[Iterable[int]], n: int) -> "Clustering":
        labels = np.full(n, -1, dtype=np.int64)
        for i, members in enumerate(clusters):
            members = np.asarray(list(members), dtype=np.int64)
            if len(members) and (members.min() < 0 or members.max() >= n):
                raise ValueError("cluster member out of range")
            if np.any(labels[members] != -1) or len(set(members.tolist())) != len(members):
                raise ValueError("clusters overlap")
            labels[members] = i
        if np.any(labels == -1):
            raise ValueError("clusters do not cover every vertex")
        return cls(labels)

    @property
    def n(self) -> int:
        return len(self.labels)

    def cluster_of(self, v: int) -> list[int]:
        return self.clusters[self.labels[v]]

    def as_sets(self) -> set[frozenset[int]]:
        return {frozenset(c) for c in self.clusters}

    def __eq__(self, other) -> bool:
        return isinstance(other, Clustering) and np.array_equal(self.labels, other.labels)

    def __repr__(self) -> str:
        return f"Clustering(n={self.n}, clusters={len(self.clusters)})"


@dataclass(frozen=True)
class DisagreementReport:
    rho: np.ndarray
    obj: int


@dataclass
class PhiOutcome:
    """Result of one ``cluster_phi`` probe; ``clustering`` is ``None`` when
    the probe concluded ``OPT > φ``."""

    phi: int
    eta: Fraction
    clustering: Clustering | None
    obj: int | None = None
    high_partition: list[list[int]] = field(default_factory=list)
    queries: int = 0

    @property
    def ok(self) -> bool:
        return self.clustering is not None


def objective(g: PositiveGraph, c: Clustering) -> DisagreementReport:
    """Exact per-vertex disagreements ``ρ(x) = |N[x] Δ C_x|`` and their max.

    Uses ``ρ(x) = (deg x + 1) + |C_x| − 2·|N[x] ∩ C_x|`` in one adjacency scan.
    """
    if c.n != g.n:
        raise ValueError("clustering does not partition the graph's vertices")
    labels = c.labels
    sizes = np.bincount(labels, minlength=len(c.clusters))
    row = np.repeat(np.arange(g.n), g.deg)
    same = np.bincount(row[labels[row] == labels[g.indices]], minlength=g.n)
    rho = (g.deg + 1) + sizes[labels] - 2 * (same + 1)
    return DisagreementReport(rho=rho, obj=int(rho.max()) if g.n else 0)


def high_degree_clustering(g: PositiveGraph, phi: int, eta, oracle: SimilarityOracle) -> list[list[int]]:
    """Cluster the high-degree vertices with ``O(m)`` similarity queries.

    ``E_sim`` keeps the positive edges passing ``|N[u] Δ N[v]| <=_η 2φ``.
    Each vertex takes ``min(v)``, the smallest high-degree id in its closed
    ``E_sim`` neighbourhood, and sends it to its ``E_sim`` neighbours; a
    high-degree vertex receiving at least ``φ+1`` equal tokens joins the
    smallest such value.  High-degree vertices with no qualifying value stay
    alone.
    """
    n = g.n
    split = degree_split(g, phi, eta)
    if len(split.v_high) == 0:
        return []
    is_high = split.is_high
    keep = oracle.query_edges(2 * phi)
    e = g.edges[keep]
    src = np.concatenate([e[:, 0], e[:, 1]])
    dst = np.concatenate([e[:, 1], e[:, 0]])

    none = n
    mins = np.where(is_high, np.arange(n), none)
    hs = is_high[src]
    np.minimum.at(mins, dst[hs], src[hs])

    # tokens min(src) -> dst for high receivers; senders without a value stay silent
    live = (mins[src] != none) & is_high[dst]
    recv, val = dst[live], mins[src[live]]
    label = np.full(n, -1, dtype=np.int64)
    if len(recv):
        key = recv * (n + 1) + val
        uniq, counts = np.unique(key, return_counts=True)
        ok = counts >= phi + 1
        r_ok, v_ok = uniq[ok] // (n + 1), uniq[ok] % (n + 1)
        best = np.full(n, none, dtype=np.int64)
        np.minimum.at(best, r_ok, v_ok)
        got = best != none
        label[got] = best[got]

    groups: dict[int, list[int]] = {}
    for v in split.v_high.tolist():
        lab = label[v]
        groups.setdefault(int(lab) if lab >= 0 else n + 1 + v, []).append(v)
    return sorted(groups.values(), key=lambda c: c[0])


def allpairs_high_clustering(g: PositiveGraph, phi: int, eta, oracle: SimilarityOracle) -> list[list[int]]:
    """Components of ``(V_high, E')`` with ``E'`` from all-pairs queries."""
    split = degree_split(g, phi, eta)
    vh = split.v_high
    if len(vh) == 0:
        return []
    sim = oracle.query_pairs(vh, vh, 2 * phi)
    iu, ju = np.nonzero(np.triu(sim, k=1))
    return connected_components(vh.tolist(), zip(vh[iu].tolist(), vh[ju].tolist()))


def cluster_phi(
    g: PositiveGraph,
    phi: int,
    eta,
    oracle: SimilarityOracle,
    mode: str = "token",
    order: Sequence[int] | None = None,
) -> PhiOutcome:
    """One probe at guess ``phi``.

    High-degree vertices are clustered (``mode='token'`` uses
    :func:`high_degree_clustering`, ``'allpairs'`` the reference all-pairs
    construction).  Each high cluster ``L_i``, in ascending label order unless
    ``order`` permutes them, takes as pivot its minimum vertex ``u_i`` and
    absorbs the unclustered low-degree neighbours ``w`` of ``u_i`` with
    ``|N[w] Δ N[u_i]| <=_{η/2} 2φ``.  Remaining vertices become singletons.
    The exact objective decides between success and ``OPT > φ``.
    """
    if not 0 <= phi:
        raise ValueError("phi must be non-negative")
    eta_q = as_fraction(eta)
    if not 0 <= eta_q < 1:
        raise ValueError("eta must lie in [0, 1)")
    before = oracle.queries
    split = degree_split(g, phi, eta_q)
    if mode == "token":
        high = high_degree_clustering(g, phi, eta_q, oracle)
    elif mode == "allpairs":
        high = allpairs_high_clustering(g, phi, eta_q, oracle)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    n = g.n
    labels = np.full(n, -1, dtype=np.int64)
    unclustered = ~split.is_high  # V_i: low-degree vertices not yet absorbed
    seq = range(len(high)) if order is None else order
    if sorted(seq) != list(range(len(high))):
        raise ValueError("order must be a permutation of the high clusters")
    for i in seq:
        members = high[i]
        pivot = members[0]
        labels[members] = pivot
        lo, hi = g.indptr[pivot], g.indptr[pivot + 1]
        nbrs = g.indices[lo:hi]
        cand = unclustered[nbrs]
        if not cand.any():
            continue
        similar = oracle.query_edges(2 * phi, g.slot_edge[lo:hi][cand])
        absorbed = nbrs[cand][similar]
        labels[absorbed] = pivot
        unclustered[absorbed] = False
    rest = labels == -1
    labels[rest] = np.flatnonzero(rest)

    clustering = Clustering(labels)
    report = objective(g, clustering)
    ok = report.obj <= floor_threshold((3 + eta_q) * phi)
    return PhiOutcome(
        phi=int(phi),
        eta=eta_q,
        clustering=clustering if ok else None,
        obj=report.obj,
        high_partition=high,
        queries=oracle.queries - before,
    )


@dataclass
class SolveResult:
    clustering: Clustering
    report: DisagreementReport
    phi: int
    eta: Fraction
    probes: list[tuple[int, bool]]
    queries: int
    sketch_k: int | None
    seconds: float

    @property
    def obj(self) -> int:
        return self.report.obj


def make_oracle(g: PositiveGraph, mode: str, eta, seed: int = 0, C: float = DEFAULT_C) -> SimilarityOracle:
    """Oracle for a solve at accuracy ``eta``.

    The sketch set is built once at ``ε' = (η/2)/(2+η/2)``, tight enough for
    both the η and the η/2 queries.
    """
    eta = as_fraction(eta)
    if mode == "exact" or g.n < 2:
        return SimilarityOracle(g, eta=eta)
    if mode != "sketch":
        raise ValueError(f"unknown mode {mode!r}")
    if not 0 < eta < 1:
        raise ValueError("sketch mode needs 0 < epsilon < 1")
    sk = build_sketches(g, eps_for_eta(eta / 2), seed, C=C)
    return SimilarityOracle(g, sk, eta=eta)


def solve(
    g: PositiveGraph,
    epsilon=0,
    mode: str = "exact",
    seed: int = 0,
    C: float = DEFAULT_C,
    high_mode: str = "token",
) -> SolveResult:
    """Binary search over ``φ ∈ [0, n]`` keeping the last successful probe.

    ``mode='exact'`` runs every probe with η = 0 (3-approximation);
    ``mode='sketch'`` uses random projections with η = ε.  Failures only occur
    when ``φ < OPT`` (w.h.p. for sketches), so the final ``φ <= OPT`` and the
    returned objective is at most ``(3+η)·OPT``.
    """
    t0 = time.perf_counter()
    eta = Fraction(0) if mode == "exact" else as_fraction(epsilon)
    if eta < 0:
        raise ValueError("epsilon must be non-negative")
    oracle = make_oracle(g, mode, eta, seed=seed, C=C)
    probes: list[tuple[int, bool]] = []

    lo, hi = 0, g.n
    best = cluster_phi(g, hi, eta, oracle, mode=high_mode)
    probes.append((hi, best.ok))
    if not best.ok:
        raise RuntimeError(f"cluster_phi failed at phi = n = {g.n}")
    while lo < hi:
        mid = (lo + hi) // 2
        out = cluster_phi(g, mid, eta, oracle, mode=high_mode)
        probes.append((mid, out.ok))
        if out.ok:
            hi, best = mid, out
        else:
            lo = mid + 1

    clustering = best.clustering
    report = objective(g, clustering)
    assert report.obj <= floor_threshold((3 + eta) * best.phi)
    return SolveResult(
        clustering=clustering,
        report=report,
        phi=best.phi,
        eta=eta,
        probes=probes,
        queries=oracle.queries,
        sketch_k=oracle.sketches.k if oracle.sketches is not None else None,
        seconds=time.perf_counter() - t0,
    )
