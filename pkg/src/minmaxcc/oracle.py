"""Exact ground truth at desk scale.

``brute_force_opt`` enumerates every set partition (restricted-growth
strings) and evaluates the min-max objective for all of them at once;
``check_structural`` verifies the structural facts the approximation
argument rests on against every optimal clustering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .cluster import Clustering, cluster_phi
from .graph import PositiveGraph
from .similarity import SimilarityOracle

MAX_ENUM_N = 12
MAX_CHECK_N = 10
ALL_WITNESS_N = 8
_CHUNK = 65536


class SizeGuardError(ValueError):
    """Instance too large for exhaustive enumeration."""


def _guard(n: int, limit: int) -> None:
    if n > limit:
        raise SizeGuardError(f"n = {n} exceeds the enumeration limit {limit}")
    if n < 0:
        raise ValueError("n must be non-negative")


def rgs_array(n: int) -> np.ndarray:
    """All restricted-growth strings of length ``n``, one per row, in
    lexicographic order.  Row ``r`` gives the block index of every vertex."""
    _guard(n, MAX_ENUM_N)
    if n == 0:
        return np.zeros((1, 0), dtype=np.int8)
    rows = np.zeros((1, 1), dtype=np.int8)
    top = np.zeros(1, dtype=np.int8)
    for _ in range(1, n):
        reps = (top + 2).astype(np.int64)
        parent = np.repeat(np.arange(len(rows)), reps)
        start = np.repeat(np.cumsum(reps) - reps, reps)
        val = (np.arange(len(parent)) - start).astype(np.int8)
        rows = np.column_stack([rows[parent], val])
        top = np.maximum(top[parent], val)
    return rows


def enumerate_partitions(n: int) -> Iterator[tuple[tuple[int, ...], ...]]:
    """Every set partition of ``{0..n-1}`` exactly once, as tuples of blocks,
    in restricted-growth-string order."""
    _guard(n, MAX_ENUM_N)
    if n == 0:
        yield ()
        return
    a = [0] * n
    top = [0] * n  # top[i] = max(a[:i + 1])
    while True:
        blocks: dict[int, list[int]] = {}
        for v, lab in enumerate(a):
            blocks.setdefault(lab, []).append(v)
        yield tuple(tuple(blk) for blk in blocks.values())
        i = n - 1
        while i > 0 and a[i] == top[i - 1] + 1:
            i -= 1
        if i == 0:
            return
        a[i] += 1
        top[i] = max(top[i - 1], a[i])
        for j in range(i + 1, n):
            a[j] = 0
            top[j] = top[i]


def all_objectives(g: PositiveGraph, rgs: np.ndarray | None = None) -> np.ndarray:
    """Objective of every partition in ``rgs`` (default: all of them)."""
    n = g.n
    if rgs is None:
        rgs = rgs_array(n)
    if n == 0:
        return np.zeros(len(rgs), dtype=np.int64)
    closed = g.closed_adjacency(dtype=np.int8).toarray().astype(bool)
    size = g.deg + 1
    out = np.empty(len(rgs), dtype=np.int64)
    for s in range(0, len(rgs), _CHUNK):
        p = rgs[s:s + _CHUNK]
        eq = p[:, :, None] == p[:, None, :]
        same = eq.sum(axis=2)
        agree = (eq & closed[None]).sum(axis=2)
        out[s:s + _CHUNK] = (size[None, :] + same - 2 * agree).max(axis=1)
    return out


@dataclass
class OptResult:
    opt: int
    witnesses: list[Clustering]


def brute_force_opt(g: PositiveGraph, all_witnesses: bool = False) -> OptResult:
    """Exact OPT by full enumeration (``n <= 12``).

    Keeps the first optimal partition in restricted-growth order, or every
    optimal one when ``all_witnesses`` is set.
    """
    _guard(g.n, MAX_ENUM_N)
    rgs = rgs_array(g.n)
    obj = all_objectives(g, rgs)
    opt = int(obj.min())
    idx = np.flatnonzero(obj == opt)
    if not all_witnesses:
        idx = idx[:1]
    return OptResult(opt=opt, witnesses=[Clustering(rgs[i]) for i in idx])


@dataclass(frozen=True)
class Violation:
    check: str
    witness: int
    vertices: tuple[int, ...]
    detail: str


@dataclass
class StructuralReport:
    phi: int
    opt: int
    witnesses_checked: int
    violations: list[Violation] = field(default_factory=list)

    @property
    def vacuous(self) -> bool:
        return self.witnesses_checked == 0

    @property
    def ok(self) -> bool:
        return not self.violations


CHECKS = ("intra", "cross", "no_stealing", "large_intersection", "hard_case", "closeness", "cluster_gap")


def check_structural(g: PositiveGraph, phi: int, perturb: dict[str, int] | None = None,
                     all_witnesses: bool | None = None) -> StructuralReport:
    """Verify the structural facts behind the 3-approximation (η = 0).

    For every clustering ``C*`` with ``obj(C*) <= phi`` (all of them for
    ``n <= 8``, else the first optimal one):

    * ``intra``: same-cluster pairs have ``|N[x] Δ N[y]| <= 2φ``;
    * ``cross``: cross-cluster pairs have ``|N[x] ∩ N[y]| <= 2φ``;
    * ``no_stealing``: for high-degree ``u, v`` in different clusters and
      low-degree ``w ∈ C*_u``, ``|N[v] Δ N[w]| > 2φ``;
    * ``large_intersection``: for the same triples, if
      ``|N[w] ∩ N[v] ∩ N[u]| = φ + t`` with ``t > 0`` then
      ``|N[w] Δ N[u]| <= 2(φ − t)``;
    * from an exact ``cluster_phi`` run with pivots ``u_i``:
      ``high_partition`` (``L_i = C*_i ∩ V_high``), ``inclusion``
      (``C*_i ∩ N(u_i) ⊆ C_i``), ``closeness`` (``|N[u_i] Δ C_i| <= φ``) and
      ``cluster_gap`` (``|C*_i Δ C_i| <= φ``).

    ``perturb`` adds an integer offset to the bound of a threshold check (one
    of :data:`CHECKS`; ``hard_case`` shifts the ``t`` of the large-intersection
    premise); it exists so tests can confirm the checks have teeth.
    """
    _guard(g.n, MAX_CHECK_N)
    off = {name: 0 for name in CHECKS}
    for name, d in (perturb or {}).items():
        if name not in off:
            raise KeyError(f"unknown check {name!r}")
        off[name] = int(d)
    n = g.n
    rgs = rgs_array(n)
    obj = all_objectives(g, rgs)
    opt = int(obj.min())
    if all_witnesses is None:
        all_witnesses = n <= ALL_WITNESS_N
    idx = np.flatnonzero(obj <= phi)
    if not all_witnesses:
        idx = np.flatnonzero(obj == opt)[:1] if opt <= phi else idx[:0]
    report = StructuralReport(phi=phi, opt=opt, witnesses_checked=len(idx))
    if len(idx) == 0:
        return report

    closed = g.closed_adjacency(dtype=np.int64).toarray()
    inter = closed @ closed
    size = g.deg + 1
    sym = size[:, None] + size[None, :] - 2 * inter
    high = np.flatnonzero(g.deg > 3 * phi)
    low_mask = g.deg <= 3 * phi

    run = cluster_phi(g, phi, 0, SimilarityOracle(g), mode="token")
    add = report.violations.append

    for wi, r in enumerate(idx.tolist()):
        lab = rgs[r].astype(np.int64)
        same = lab[:, None] == lab[None, :]
        iu, ju = np.triu_indices(n, k=1)
        for x, y in zip(iu.tolist(), ju.tolist()):
            if same[x, y] and sym[x, y] > 2 * phi + off["intra"]:
                add(Violation("intra", wi, (x, y), f"|N[x]ΔN[y]| = {sym[x, y]} > 2φ"))
            if not same[x, y] and inter[x, y] > 2 * phi + off["cross"]:
                add(Violation("cross", wi, (x, y), f"|N[x]∩N[y]| = {inter[x, y]} > 2φ"))

        for u in high.tolist():
            for v in high.tolist():
                if same[u, v]:
                    continue
                for w in np.flatnonzero(same[u] & low_mask).tolist():
                    if not sym[v, w] > 2 * phi + off["no_stealing"]:
                        add(Violation("no_stealing", wi, (u, v, w), f"|N[v]ΔN[w]| = {sym[v, w]} <= 2φ"))
                    t = int(closed[w] @ (closed[u] * closed[v])) - phi + off["hard_case"]
                    if t > 0 and sym[w, u] > 2 * (phi - t) + off["large_intersection"]:
                        add(Violation("large_intersection", wi, (u, v, w),
                                      f"t = {t}, |N[w]ΔN[u]| = {sym[w, u]} > 2(φ−t)"))

        if not run.ok:
            add(Violation("closeness", wi, (), f"cluster_phi failed at φ = {phi} with obj {run.obj}"))
            continue
        out = run.clustering
        is_high = np.zeros(n, dtype=bool)
        is_high[high] = True
        for members in run.high_partition:
            u = members[0]
            star = np.flatnonzero(lab == lab[u])
            if set(members) != set(star[is_high[star]].tolist()):
                add(Violation("high_partition", wi, tuple(members), "L_i ≠ C*_i ∩ V_high"))
            ci = np.array(out.cluster_of(u))
            in_c = np.zeros(n, dtype=bool)
            in_c[ci] = True
            in_star = lab == lab[u]
            open_nb = closed[u].astype(bool)
            open_nb[u] = False
            missing = np.flatnonzero(in_star & open_nb & ~in_c)
            if len(missing):
                add(Violation("inclusion", wi, (u, *missing.tolist()), "C*_i ∩ N(u_i) ⊄ C_i"))
            gap_nb = int(np.sum(closed[u].astype(bool) ^ in_c))
            if gap_nb > phi + off["closeness"]:
                add(Violation("closeness", wi, (u,), f"|N[u_i]ΔC_i| = {gap_nb} > φ"))
            gap = int(np.sum(in_star ^ in_c))
            if gap > phi + off["cluster_gap"]:
                add(Violation("cluster_gap", wi, (u,), f"|C*_iΔC_i| = {gap} > φ"))
    return report
