"""Compare the compiled and numpy kernel backends on desk-scale workloads.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each workload is timed with ``timeit`` (best of ``--repeat``) for every
importable backend, and the results of the two backends are checked to agree.
"""
import argparse
import json
import timeit

import numpy as np

from spde_reaction.kernels import available_backends

RTOL = 1e-12


def workloads(rng):
    """(name, call(backend) -> result) pairs sized like one desk replicate."""
    proj = rng.normal(size=(101, 32, 32))
    decay = rng.uniform(0.9, 1.0, size=(32, 32))
    obs = rng.normal(size=(101, 201, 201))
    jj = np.arange(20, 181, 5)
    kk = np.arange(20, 181, 5)
    x = np.linspace(0.0, 60.0, 200_000)
    edges = np.linspace(1.0, 400.0, 201)
    return [
        ("time sums (N=100, L=32)", lambda b: b.compensated_time_sums(proj, decay)),
        ("triple increments (30x30 cells)", lambda b: b.triple_increment_sumsq(obs, jj, kk)),
        ("J0 on 2e5 points", lambda b: b.bessel_j0_array(x)),
        ("psi panels (r=1, alpha=0.5)", lambda b: b.psi_panels(1.0, 0.5, edges, 1e-10)[0]),
    ]


def _close(a, b):
    if isinstance(a, tuple):
        return all(_close(u, v) for u, v in zip(a, b))
    return np.allclose(a, b, rtol=RTOL, atol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", dest="json_path", default=None)
    args = ap.parse_args(argv)

    backends = available_backends()
    rows = []
    for name, fn in workloads(np.random.default_rng(0)):
        times, results = {}, {}
        for bname, mod in backends.items():
            results[bname] = fn(mod)
            times[bname] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        agree = _close(*results.values()) if len(results) == 2 else None
        speedup = times["python"] / times["cython"] if "cython" in times else None
        rows.append({"workload": name, "seconds": times, "speedup": speedup, "agree": agree})

    width = max(len(r["workload"]) for r in rows)
    print(f"{'workload'.ljust(width)}  {'python s':>10}  {'cython s':>10}  {'speedup':>8}  agree")
    for r in rows:
        py = r["seconds"]["python"]
        cy = r["seconds"].get("cython")
        print(f"{r['workload'].ljust(width)}  {py:10.4f}  "
              f"{'-' if cy is None else format(cy, '10.4f'):>10}  "
              f"{'-' if r['speedup'] is None else format(r['speedup'], '8.1f'):>8}  {r['agree']}")
    if args.json_path:
        with open(args.json_path, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
