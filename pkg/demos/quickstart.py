"""Sequential solver on a small planted instance, checked against the exact
optimum.

Run with ``python demos/quickstart.py``.
"""

from minmaxcc.cluster import Clustering, objective, solve
from minmaxcc.graph import planted_instance
from minmaxcc.oracle import brute_force_opt


def main():
    g, truth = planted_instance(10, 2, 0.1, seed=3)
    print(f"graph: n={g.n}, m={g.m}")
    print(f"planted split objective: {objective(g, Clustering(truth)).obj}")

    opt = brute_force_opt(g).opt
    print(f"exact optimum by enumeration: {opt}")

    exact = solve(g)
    print(f"exact-query solver: obj {exact.obj}, final guess {exact.phi}, probes {exact.probes}")

    sketch = solve(g, epsilon=0.5, mode="sketch", seed=1)
    print(f"sketch solver (k={sketch.sketch_k}): obj {sketch.obj}, final guess {sketch.phi}")
    print(f"clusters: {exact.clustering.clusters}")
    assert exact.obj <= 3 * opt


if __name__ == "__main__":
    main()
