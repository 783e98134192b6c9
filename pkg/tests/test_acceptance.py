"""Acceptance criteria, one test per criterion.

Each test appends a PASS/FAIL line to ``ACCEPTANCE_LINES`` before asserting,
so the terminal summary lists every criterion whatever the outcome.
"""

import math
import statistics
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from minmaxcc.cli import bench_instance
from minmaxcc.cluster import (
    Clustering,
    allpairs_high_clustering,
    cluster_phi,
    high_degree_clustering,
    make_oracle,
    objective,
    solve,
)
from minmaxcc.graph import PositiveGraph, floor_threshold, planted_instance, random_graph
from minmaxcc.oracle import brute_force_opt, check_structural
from minmaxcc.similarity import (
    SimilarityOracle,
    build_sketches,
    exact_pairwise_symdiff,
    pairwise_squared_distances,
)
from minmaxcc.streaming import check_disjoint, edge_source, run_stream, space_budget

pytestmark = pytest.mark.slow

# (graph, clustering, phi_final, eta) of every run made in this file, rechecked by criterion 3
CERTIFICATES = []


def record(name, ok, detail):
    ACCEPTANCE_LINES.append(f"{name}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def suite():
    """504 seeded random graphs: n in 4..9, density in {0.2, 0.5, 0.8}, 28 seeds each."""
    out = []
    for n in range(4, 10):
        for d in (0.2, 0.5, 0.8):
            for s in range(28):
                g = random_graph(n, d, seed=10_000 * n + 100 * int(d * 10) + s)
                out.append((g, brute_force_opt(g).opt))
    return out


def test_c1_exact_factor(suite):
    t0 = time.perf_counter()
    bad = 0
    for g, opt in suite:
        r = solve(g)
        CERTIFICATES.append((g, r.clustering, r.phi, r.eta))
        bad += r.obj > 3 * opt
    wall = time.perf_counter() - t0
    record("criterion 1 (exact obj <= 3 OPT)", bad == 0 and len(suite) >= 500 and wall < 120,
           f"{len(suite)} instances, {bad} violations, {wall:.1f}s")


def test_c2_sketch_factor(suite):
    t0 = time.perf_counter()
    runs = good = 0
    for g, opt in suite:
        for seed in range(10):
            r = solve(g, epsilon=0.5, mode="sketch", seed=seed)
            CERTIFICATES.append((g, r.clustering, r.phi, r.eta))
            runs += 1
            good += r.obj <= Fraction(7, 2) * opt
    wall = time.perf_counter() - t0
    rate = good / runs
    record("criterion 2 (sketch obj <= 3.5 OPT in >= 99%)", rate >= 0.99 and wall < 300,
           f"{good}/{runs} = {rate:.4f}, {wall:.1f}s")


def test_c4_completeness(suite):
    fails = 0
    for g, opt in suite:
        out = cluster_phi(g, opt, 0, SimilarityOracle(g))
        fails += not out.ok
        if out.ok:
            CERTIFICATES.append((g, out.clustering, opt, Fraction(0)))
    record("criterion 4 (cluster_phi succeeds at OPT)", fails == 0,
           f"{len(suite) - fails}/{len(suite)} succeed")


def two_clique_instance(seed):
    """Two cliques of size >= 3φ+3 with at most φ noise flips per vertex, so
    the planted split has objective <= φ."""
    rng = np.random.default_rng(seed)
    phi = int(rng.integers(1, 4))
    a, b = (int(x) for x in rng.integers(3 * phi + 3, 3 * phi + 9, size=2))
    n = a + b
    truth = np.repeat([0, 1], [a, b])
    adj = truth[:, None] == truth[None, :]
    np.fill_diagonal(adj, False)
    budget = np.full(n, phi)
    for _ in range(int(rng.integers(0, n * phi // 2 + 1))):
        u, v = (int(x) for x in rng.choice(n, 2, replace=False))
        if budget[u] and budget[v]:
            adj[u, v] = adj[v, u] = not adj[u, v]
            budget[u] -= 1
            budget[v] -= 1
    iu, ju = np.nonzero(np.triu(adj, 1))
    g = PositiveGraph(n, np.stack([iu, ju], axis=1))
    assert objective(g, Clustering(truth)).obj <= phi
    return g, phi


def test_c5_token_allpairs():
    mism = with_high = 0
    for s in range(200):
        g, phi = two_clique_instance(s)
        with_high += bool(np.any(g.deg > 3 * phi))
        for mode, eta in (("exact", 0), ("sketch", Fraction(1, 2))):
            o = make_oracle(g, mode, eta, seed=s)
            same = high_degree_clustering(g, phi, eta, o) == allpairs_high_clustering(g, phi, eta, o)
            tok = cluster_phi(g, phi, eta, o, mode="token")
            alp = cluster_phi(g, phi, eta, o, mode="allpairs")
            same &= tok.ok == alp.ok and tok.clustering == alp.clustering
            mism += not same
            if tok.ok:
                CERTIFICATES.append((g, tok.clustering, phi, Fraction(eta)))
    record("criterion 5 (token == all-pairs partition)", mism == 0 and with_high == 200,
           f"200 instances x 2 backends, {mism} mismatches, {with_high} with high-degree vertices")


@pytest.fixture(scope="module")
def structural_suite():
    """250 Erdős–Rényi and 250 planted two-block graphs, n in 4..8."""
    out = []
    for i in range(250):
        out.append(random_graph(4 + i % 5, (0.2, 0.5, 0.8)[(i // 5) % 3], 1000 + i))
    for i in range(250):
        out.append(planted_instance(4 + i % 5, 2, (0.05, 0.1, 0.2)[(i // 5) % 3], 2000 + i)[0])
    return [(g, brute_force_opt(g).opt) for g in out]


def no_stealing_slack(g, phi):
    """Smallest ``|N[v] Δ N[w]| − 2φ`` over the checked triples (None if none)."""
    closed = g.closed_adjacency(dtype=np.int64).toarray()
    size = g.deg + 1
    sym = size[:, None] + size[None, :] - 2 * closed @ closed
    high = np.flatnonzero(g.deg > 3 * phi)
    best = None
    for w in brute_force_opt(g, all_witnesses=g.n <= 8).witnesses:
        lab = w.labels
        for u in high:
            for v in high:
                if lab[u] == lab[v]:
                    continue
                ws = np.flatnonzero((lab == lab[u]) & (g.deg <= 3 * phi))
                if len(ws):
                    m = int(sym[v, ws].min()) - 2 * phi
                    best = m if best is None else min(best, m)
    return best


def test_c6_structural(structural_suite):
    viol = sum(len(check_structural(g, opt).violations) for g, opt in structural_suite)
    slacks = [s for s in (no_stealing_slack(g, opt) for g, opt in structural_suite) if s is not None]
    slack = min(slacks)
    # frozen: the tightest no-stealing triple in this suite clears 2φ by 4
    assert slack == 4
    mutations = [("intra", -1), ("cross", -1), ("no_stealing", slack), ("hard_case", 1),
                 ("closeness", -1), ("cluster_gap", -1)]
    hits = {}
    for check, d in mutations:
        hits[f"{check}{d:+d}"] = sum(bool(check_structural(g, opt, perturb={check: d}).violations)
                                     for g, opt in structural_suite)
    ok = viol == 0 and all(h >= 1 for h in hits.values())
    record("criterion 6 (structural suite + mutations)", ok,
           f"{len(structural_suite)} instances, {viol} violations; mutation hits {hits}")


def test_c7_jl_accuracy():
    n, eps = 500, 0.3
    g, _ = planted_instance(n, 10, 0.05, seed=7)
    r = np.arange(n)
    true = exact_pairwise_symdiff(g, r, r)
    iu, ju = np.triu_indices(n, k=1)
    d = true[iu, ju].astype(float)
    nz = d > 0
    literal, jl = [], []
    for seed in range(20):
        s = build_sketches(g, eps, seed=seed)
        assert s.k == math.ceil(8 * math.log(n) / eps**2)
        raw = pairwise_squared_distances(s.sketch, r, r)[iu, ju][nz].astype(float)
        est = raw / ((1 + eps) * s.k)
        literal.append(np.mean((est < (1 - eps) * d[nz]) | (est > (1 + eps) * d[nz])))
        ratio = raw / s.k
        jl.append(np.mean((ratio < (1 - eps) * d[nz]) | (ratio > (1 + eps) * d[nz])))
    ACCEPTANCE_LINES.append(
        f"criterion 7, diagnostic only (raw/k within (1±ε)Δ): "
        f"{'PASS' if max(jl) <= 1 / n else 'FAIL'}  worst seed rate {max(jl):.5f} vs 1/n = {1 / n:.5f}")
    record("criterion 7 (distance_estimate within (1±ε)Δ)", max(literal) <= 1 / n,
           f"worst seed rate {max(literal):.5f}, mean {np.mean(literal):.5f} vs 1/n = {1 / n:.5f} "
           f"over 20 seeds, k = {s.k}")


def test_c8_streaming_correctness():
    eps = Fraction(1, 2)
    eta = eps / 2
    good = disjoint = invariant = 0
    for seed in range(100):
        g, truth = planted_instance(200, 8, 0.01, seed=seed)
        phi = objective(g, Clustering(truth)).obj
        out, _ = run_stream(edge_source(g.edges, shuffle_seed=seed), g.n, phi, eta, seed=seed)
        other, _ = run_stream(edge_source(g.edges, shuffle_seed=seed + 1000), g.n, phi, eta, seed=seed)
        invariant += out.ok == other.ok and out.clustering == other.clustering
        try:
            check_disjoint(out.candidates, g.n)
            disjoint += 1
        except AssertionError:
            pass
        if out.ok:
            obj = objective(g, out.clustering).obj
            good += obj <= floor_threshold((3 + eps) * phi)
            CERTIFICATES.append((g, out.clustering, phi, 2 * eta))
    ok = good >= 95 and disjoint == 100 and invariant == 100
    record("criterion 8 (streaming success and invariants)", ok,
           f"obj <= (3+ε)φ in {good}/100, disjoint {disjoint}/100, order-invariant {invariant}/100")


# measured once (ratios ~2450 at both sizes), then frozen as the regression bound
B0 = 2500


def test_c9_streaming_space():
    eps = 1.0
    rows = []
    for n in (1000, 10_000):
        g, truth = planted_instance(n, n // 20, 2.0 / n, seed=1)
        phi = objective(g, Clustering(truth)).obj
        out, state = run_stream(edge_source(g.edges, shuffle_seed=1), n, phi, eps / 2, seed=1)
        budget = space_budget(n, eps, B0)
        rows.append((n, state.high_water, budget, state.high_water / (n * math.log(n) / eps**2)))
    ok = all(hw <= b for _, hw, b, _ in rows)
    record("criterion 9 (peak words <= B0 n ln n / ε², B0 = 2500)", ok,
           "; ".join(f"n={n}: peak {hw} budget {b:.0f} ratio {r:.1f}" for n, hw, b, r in rows))


def test_c10_scaling():
    t_all = time.perf_counter()
    medians, ms = [], []
    for target in (50_000, 100_000, 200_000):
        g, _ = bench_instance(target, 100, seed=0)
        times = []
        for rep in range(3):
            t0 = time.perf_counter()
            r = solve(g, epsilon=0.5, mode="sketch", seed=rep)
            times.append(time.perf_counter() - t0)
        CERTIFICATES.append((g, r.clustering, r.phi, r.eta))
        medians.append(statistics.median(times))
        ms.append(g.m)
    ratios = [b / a for a, b in zip(medians, medians[1:])]
    wall = time.perf_counter() - t_all
    ok = all(x <= 3 for x in ratios) and wall < 300
    record("criterion 10 (time ratio per doubling of m <= 3)", ok,
           f"m {ms}, medians {[round(x, 2) for x in medians]}s, ratios {[round(x, 2) for x in ratios]}, "
           f"{wall:.0f}s total")


def test_c3_certificates():
    # solve() also asserts this on every call, so it holds for every run in the
    # whole test suite; here the runs collected above are rechecked independently
    bad = 0
    for g, c, phi, eta in CERTIFICATES:
        bad += objective(g, c).obj > floor_threshold((3 + eta) * phi)
    record("criterion 3 (obj <= (3+η) φ_final on every returned clustering)",
           bad == 0 and len(CERTIFICATES) > 0, f"{len(CERTIFICATES)} runs rechecked, {bad} violations")
