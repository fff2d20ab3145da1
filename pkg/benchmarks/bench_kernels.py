"""Time the numba kernels against the numpy fallback on training-sized inputs.

Usage: python3 benchmarks/bench_kernels.py [--agents 4 8 12] [--actions 5] [--repeat 200]
"""

import argparse
import time

import numpy as np

from sparsecg import kernels
from sparsecg.graph import pair_index


def _inputs(rng, n, A, T=40):
    pi, pj = pair_index(n)
    m = len(pi)
    return dict(
        pi=pi, pj=pj,
        U=rng.normal(size=(n, A)), P=rng.normal(size=(m, A, A)),
        u=rng.normal(size=(4 * n, A)), p=rng.normal(size=(4 * m, A, A)),
        rows=np.arange(n, dtype=np.int64), prows=np.arange(m, dtype=np.int64),
        T_rows=(np.arange(n) * 4 + rng.integers(4, size=(T, n))).astype(np.int64),
        T_prows=rng.integers(4 * m, size=(T, m)).astype(np.int64),
        acts=rng.integers(A, size=(T, n)).astype(np.int64),
        rew=rng.normal(size=T), term=rng.random(T) < 0.1,
        masks=np.zeros((T, m), dtype=np.bool_), budget=m // 2,
        y=rng.normal(size=T), mcs=rng.random((T, m)) < 0.5,
    )


def _cases(be, d):
    n = d["U"].shape[0]
    full = np.ones(len(d["pi"]), dtype=np.bool_)
    return {
        "max_sum": lambda: be.max_sum(d["U"], d["P"], d["pi"], d["pj"], full, 5, True, True, 1.0 / n,
                                      1.0 / max(len(d["pi"]), 1)),
        "act": lambda: be.act(d["u"], d["p"], d["u"], d["p"], d["rows"], d["prows"], d["pi"], d["pj"],
                              kernels.KIND_QVAR, d["budget"], True, full, 5, True, False),
        "td_targets": lambda: be.td_targets(d["u"], d["p"], d["T_rows"], d["T_prows"], d["rew"], d["term"],
                                            d["T_rows"], d["T_prows"], d["pi"], d["pj"], kernels.KIND_QVAR,
                                            d["budget"], d["masks"], d["masks"], 5, True, False, 0.99),
        "td_batch": lambda: be.td_batch(d["u"].copy(), d["p"].copy(), d["T_rows"], d["T_prows"], d["acts"],
                                        d["y"], d["mcs"], d["pi"], d["pj"], 0.01, 1e-4, kernels.LOSS_QVAR),
    }


def _time(fn, repeat):
    fn()  # warm-up, also triggers compilation
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--agents", type=int, nargs="+", default=[4, 8, 12])
    ap.add_argument("--actions", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args(argv)
    backends = {"numpy": kernels.get_backend("numpy"), "numba": kernels.get_backend("numba")}
    print(f"{'kernel':<12}{'agents':>7}{'numpy ms':>12}{'numba ms':>12}{'speed-up':>10}")
    for n in args.agents:
        d = _inputs(np.random.default_rng(n), n, args.actions)
        res = {name: {k: _time(f, args.repeat if not k.startswith("td_") else max(1, args.repeat // 20))
                      for k, f in _cases(be, d).items()} for name, be in backends.items()}
        for k in res["numpy"]:
            a, b = res["numpy"][k] * 1e3, res["numba"][k] * 1e3
            print(f"{k:<12}{n:>7}{a:>12.3f}{b:>12.3f}{a / b:>9.1f}x")


if __name__ == "__main__":
    main()
