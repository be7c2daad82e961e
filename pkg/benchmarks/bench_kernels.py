"""Compare the compiled graph kernels with the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--workload cons2|counter|cons3] [--repeat N]
"""

from __future__ import annotations

import argparse
import statistics
import sys
from time import perf_counter

import numpy as np

from cofcheck import _pykernels
from cofcheck.algorithms import cons2, cons3_naive, counter_swsr
from cofcheck.graph import Encoder, all_input_vectors
from cofcheck.valency import IMPOSSIBILITY_INPUTS

try:
    from cofcheck import _kernels as compiled
except ImportError:
    compiled = None

WORKLOADS = {
    "cons2": lambda: (cons2(), None),
    "counter": lambda: (counter_swsr(2), None),
    "counter3": lambda: (counter_swsr(3), None),
    "cons3": lambda: (cons3_naive(), [IMPOSSIBILITY_INPUTS]),
}


def timed(fn, repeat: int) -> tuple[float, object]:
    times, out = [], None
    for _ in range(repeat):
        start = perf_counter()
        out = fn()
        times.append(perf_counter() - start)
    return statistics.median(times), out


def bench(name: str, repeat: int, budget: int) -> list[dict]:
    alg, vectors = WORKLOADS[name]()
    vectors = vectors or all_input_vectors(alg)
    enc = Encoder(alg)
    roots = np.asarray([enc.encode(alg.initial_configuration(v)) for v in vectors], dtype=np.int64)
    backends = [("python", _pykernels)] + ([("compiled", compiled)] if compiled is not None else [])
    rows = []
    for label, mod in backends:
        t_explore, (codes, succ, _, _) = timed(lambda: mod.explore(enc.tables, roots, budget), repeat)
        mask = succ >= 0
        t_scc, comp = timed(lambda: mod.scc(succ, mask), repeat)
        targets = np.zeros(len(codes), dtype=bool)
        targets[(succ < 0).all(axis=1)] = True
        t_back, _ = timed(lambda: mod.backward_reach(succ, mask, targets), repeat)
        rows.append(
            {
                "workload": name,
                "backend": label,
                "states": len(codes),
                "sccs": int(comp.max()) + 1 if len(comp) else 0,
                "explore": t_explore,
                "scc": t_scc,
                "backward_reach": t_back,
            }
        )
    return rows


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workload", choices=sorted(WORKLOADS), action="append")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--budget", type=int, default=10**7)
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; timing the fallback only", file=sys.stderr)
    names = args.workload or ["cons2", "counter"]
    print(f"{'workload':<10}{'backend':<10}{'states':>10}{'sccs':>10}{'explore':>11}{'scc':>11}{'backward':>11}")
    results = []
    for name in names:
        rows = bench(name, args.repeat, args.budget)
        results.extend(rows)
        for r in rows:
            print(
                f"{r['workload']:<10}{r['backend']:<10}{r['states']:>10}{r['sccs']:>10}"
                f"{r['explore']:>10.3f}s{r['scc']:>10.3f}s{r['backward_reach']:>10.3f}s"
            )
        if len(rows) == 2:
            py, c = rows
            speed = [py[k] / max(c[k], 1e-9) for k in ("explore", "scc", "backward_reach")]
            print(f"{'':<20}speedup   {'':>10}{speed[0]:>10.1f}x{speed[1]:>10.1f}x{speed[2]:>10.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
