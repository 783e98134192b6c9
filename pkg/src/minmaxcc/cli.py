"""Command-line front end.

Sub-commands: ``solve``, ``stream``, ``oracle``, ``check``, ``gen`` and
``bench``.  Every command can write a flat JSON run record; clusterings are
written as ``vertex cluster_id`` lines.

Exit codes: 0 ok, 1 structural check found violations, 2 usage or parse
error, 3 I/O error, 4 instance too large for the oracle.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import statistics
import sys
import time
from dataclasses import asdict, dataclass

from threadpoolctl import threadpool_limits

from .cluster import Clustering, objective, solve
from .graph import (
    GraphFormatError,
    PositiveGraph,
    dump_graph,
    load_graph,
    planted_instance,
    random_graph,
    write_partition,
)
from .oracle import MAX_CHECK_N, SizeGuardError, brute_force_opt, check_structural
from .streaming import DEFAULT_C_SAMPLE, file_source, run_stream, stream_search

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_IO, EXIT_GUARD = 0, 1, 2, 3, 4


@dataclass
class RunRecord:
    command: str
    input_digest: str | None = None
    seed: int | None = None
    epsilon: float | None = None
    mode: str | None = None
    n: int | None = None
    m: int | None = None
    status: str = "ok"
    phi_final: int | None = None
    obj: int | None = None
    opt: int | None = None
    wall_time_ms: float | None = None
    peak_words: int | None = None
    query_count: int | None = None
    passes: int | None = None


class _UsageError(Exception):
    pass


def _digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _read_graph(path: str) -> tuple[PositiveGraph, str]:
    with open(path) as fh:
        text = fh.read()
    return load_graph(text), _digest(path)


def _write(path: str | None, text: str) -> None:
    if path is None:
        return
    if path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w") as fh:
        fh.write(text)


def _emit(args, payload: dict) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if args.json:
        _write(args.json, text)
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    g, digest = _read_graph(args.input)
    t0 = time.perf_counter()
    res = solve(g, epsilon=args.epsilon, mode=args.mode, seed=args.seed, high_mode=args.high_mode)
    wall = (time.perf_counter() - t0) * 1e3
    _write(args.out, write_partition(res.clustering.labels))
    rec = RunRecord(
        command="solve", input_digest=digest, seed=args.seed, epsilon=args.epsilon, mode=args.mode,
        n=g.n, m=g.m, phi_final=res.phi, obj=objective(g, res.clustering).obj,
        wall_time_ms=round(wall, 3), query_count=res.queries, passes=len(res.probes),
    )
    if args.oracle:
        rec.opt = brute_force_opt(g).opt
    _emit(args, asdict(rec))
    return EXIT_OK


def cmd_stream(args) -> int:
    if (args.phi is None) == (not args.search):
        raise _UsageError("give exactly one of --phi N or --search")
    if not 0 < args.epsilon < 2:
        raise _UsageError("streaming needs 0 < epsilon < 2")
    n, source = file_source(args.input, shuffle_seed=args.shuffle_seed)
    digest = _digest(args.input)
    t0 = time.perf_counter()
    if args.search:
        res = stream_search(source, n, args.epsilon, args.seed, c_sample=args.c_sample)
        clustering, phi, passes, peak = res.clustering, res.phi, res.passes, res.peak_words
    else:
        out, state = run_stream(source, n, args.phi, args.epsilon / 2, args.seed, c_sample=args.c_sample)
        clustering, phi, passes, peak = out.clustering, args.phi, 1, state.high_water
    wall = (time.perf_counter() - t0) * 1e3
    rec = RunRecord(command="stream", input_digest=digest, seed=args.seed, epsilon=args.epsilon,
                    mode="search" if args.search else "single", n=n, phi_final=phi,
                    wall_time_ms=round(wall, 3), peak_words=peak, passes=passes)
    if clustering is None:
        rec.status = "opt_exceeds_phi"
    else:
        # exact recheck, outside the streaming space model
        g, _ = _read_graph(args.input)
        rec.m = g.m
        rec.obj = objective(g, clustering).obj
        _write(args.out, write_partition(clustering.labels))
    _emit(args, asdict(rec))
    return EXIT_OK


def cmd_oracle(args) -> int:
    g, digest = _read_graph(args.input)
    t0 = time.perf_counter()
    res = brute_force_opt(g, all_witnesses=args.all_witnesses)
    wall = (time.perf_counter() - t0) * 1e3
    rec = RunRecord(command="oracle", input_digest=digest, n=g.n, m=g.m, opt=res.opt,
                    wall_time_ms=round(wall, 3))
    payload = asdict(rec)
    payload["witnesses"] = len(res.witnesses)
    _emit(args, payload)
    if args.out:
        _write(args.out, write_partition(res.witnesses[0].labels))
    return EXIT_OK


def _check_instances(args):
    if args.input:
        g, _ = _read_graph(args.input)
        yield g
        return
    if args.n > MAX_CHECK_N:
        raise SizeGuardError(f"n = {args.n} exceeds the check limit {MAX_CHECK_N}")
    for i in range(args.count):
        yield random_graph(args.n, args.density, args.seed + i)


def cmd_check(args) -> int:
    t0 = time.perf_counter()
    instances = violations = vacuous = 0
    first = []
    for g in _check_instances(args):
        phi = brute_force_opt(g).opt if args.phi is None else args.phi
        rep = check_structural(g, phi)
        instances += 1
        vacuous += rep.vacuous
        violations += len(rep.violations)
        first.extend(f"{v.check} {list(v.vertices)}: {v.detail}" for v in rep.violations[:3])
    payload = {
        "command": "check", "seed": args.seed, "instances": instances, "violations": violations,
        "vacuous": vacuous, "wall_time_ms": round((time.perf_counter() - t0) * 1e3, 3),
        "examples": "; ".join(first[:5]),
    }
    _emit(args, payload)
    return EXIT_OK if violations == 0 else EXIT_VIOLATION


def cmd_gen(args) -> int:
    g, truth = planted_instance(args.n, args.clusters, args.flip, args.seed)
    _write(args.out, dump_graph(g))
    if args.truth:
        _write(args.truth, write_partition(Clustering(truth).labels))
    return EXIT_OK


def bench_instance(target_m: int, cluster_size: int, seed: int):
    """Planted instance with about ``target_m`` positive edges: blocks of
    ``cluster_size`` vertices, a ``1/n`` flip rate."""
    per = cluster_size * (cluster_size - 1) // 2
    k = max(1, round(target_m / per))
    n = k * cluster_size
    return planted_instance(n, k, 1.0 / n, seed)


def cmd_bench(args) -> int:
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        raise _UsageError(f"bad --sizes {args.sizes!r}") from None
    if not sizes or args.repeats < 1:
        raise _UsageError("need at least one size and one repeat")
    rows = []
    for target in sizes:
        g, _ = bench_instance(target, args.cluster_size, args.seed)
        times = []
        for r in range(args.repeats):
            t0 = time.perf_counter()
            res = solve(g, epsilon=args.epsilon, mode=args.mode, seed=args.seed + r)
            times.append(time.perf_counter() - t0)
        rows.append({"target_m": target, "n": g.n, "m": g.m, "median_s": statistics.median(times),
                     "obj": res.obj, "phi_final": res.phi})
    payload = {"command": "bench", "mode": args.mode, "epsilon": args.epsilon, "seed": args.seed,
               "repeats": args.repeats}
    for i, row in enumerate(rows):
        for key, val in row.items():
            payload[f"{key}_{i}"] = val
        if i:
            payload[f"ratio_{i}"] = row["median_s"] / rows[i - 1]["median_s"]
    _emit(args, payload)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="minmaxcc", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_input=True):
        if needs_input:
            sp.add_argument("--input", required=True, help="edge-list file: n, then 'u v' per line")
        sp.add_argument("--json", help="write the JSON record here (default: stdout)")
        sp.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("solve", help="sequential (3+ε)-approximation")
    common(s)
    s.add_argument("--epsilon", type=float, default=0.5)
    s.add_argument("--mode", choices=("exact", "sketch"), default="exact")
    s.add_argument("--high-mode", choices=("token", "allpairs"), default="token")
    s.add_argument("--out", help="clustering output ('-' for stdout)")
    s.add_argument("--oracle", action="store_true", help="also compute OPT by enumeration (n <= 12)")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("stream", help="single-pass streaming simulation")
    common(s)
    s.add_argument("--epsilon", type=float, default=0.5)
    s.add_argument("--phi", type=int, help="run one pass at this guess")
    s.add_argument("--search", action="store_true", help="binary search over φ, one pass per probe")
    s.add_argument("--shuffle-seed", type=int, help="permute the edge order under this seed")
    s.add_argument("--c-sample", type=float, default=DEFAULT_C_SAMPLE)
    s.add_argument("--out", help="clustering output ('-' for stdout)")
    s.set_defaults(func=cmd_stream)

    s = sub.add_parser("oracle", help="exact OPT by enumeration (n <= 12)")
    common(s)
    s.add_argument("--all-witnesses", action="store_true")
    s.add_argument("--out", help="write one optimal clustering here")
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("check", help="structural lemma checks (n <= 10)")
    common(s, needs_input=False)
    s.add_argument("--input", help="check this graph instead of random ones")
    s.add_argument("--phi", type=int, help="guess to check at (default OPT)")
    s.add_argument("--count", type=int, default=100)
    s.add_argument("--n", type=int, default=7)
    s.add_argument("--density", type=float, default=0.5)
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("gen", help="planted-partition instance")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--clusters", type=int, required=True)
    s.add_argument("--flip", type=float, default=0.01)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="-")
    s.add_argument("--truth", help="write the planted partition here")
    s.set_defaults(func=cmd_gen, json=None)

    s = sub.add_parser("bench", help="wall time of solve on planted instances of growing m")
    common(s, needs_input=False)
    s.add_argument("--sizes", default="50000,100000,200000", help="comma-separated target edge counts")
    s.add_argument("--repeats", type=int, default=3)
    s.add_argument("--epsilon", type=float, default=0.5)
    s.add_argument("--mode", choices=("exact", "sketch"), default="sketch")
    s.add_argument("--cluster-size", type=int, default=100)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        threads = int(os.environ.get("MINMAXCC_THREADS", "1") or 1)
        with threadpool_limits(limits=max(1, threads)):
            return args.func(args)
    except SizeGuardError as exc:
        print(f"minmaxcc: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (GraphFormatError, _UsageError, ValueError) as exc:
        print(f"minmaxcc: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"minmaxcc: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
