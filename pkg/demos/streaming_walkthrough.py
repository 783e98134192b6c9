"""One-pass streaming solver on a planted instance: a single guess, then the
binary search that replays the stream, with the space ledger.

Run with ``python demos/streaming_walkthrough.py``.
"""

import math

from minmaxcc.cluster import Clustering, objective
from minmaxcc.graph import planted_instance
from minmaxcc.streaming import edge_source, run_stream, stream_search


def main():
    g, truth = planted_instance(400, 8, 0.01, seed=0)
    phi = objective(g, Clustering(truth)).obj
    print(f"graph: n={g.n}, m={g.m}, planted objective {phi}")

    # edges arrive in a shuffled order; the output does not depend on it
    src = edge_source(g.edges, shuffle_seed=5)
    out, state = run_stream(src, g.n, phi, eta=0.25, seed=0)
    print(f"single pass at phi={phi}: ok={out.ok}, clusters={len(out.clustering.clusters)}")
    print(f"  exact recheck obj {objective(g, out.clustering).obj} (limit {(3 + 0.5) * phi:.1f})")
    print(f"  sampled vertices {len(out.sampled)}, pivots {out.pivots}")
    hw, now = state.space_report()
    print(f"  peak words {hw}, n ln n = {g.n * math.log(g.n):.0f}")

    res = stream_search(src, g.n, epsilon=0.5, seed=0)
    print(f"search: phi={res.phi} after {res.passes} passes, "
          f"obj {objective(g, res.clustering).obj}, peak words {res.peak_words}")


if __name__ == "__main__":
    main()
