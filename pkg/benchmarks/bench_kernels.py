"""Compare the compiled and pure-Python kernels on the reference scenarios.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from epmatch import _pykernels
from epmatch.integrate import IntegratorConfig, block_coefficients, dense_coefficients
from epmatch.scenarios import scenario_heavy_top, scenario_spherical_pendulum

try:
    from epmatch import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    else:
        print("compiled extension not available, timing the pure-Python kernels only")

    print(f"{'case':28s} {'backend':8s} {'steps':>7s} {'seconds':>9s} {'us/step':>9s}")
    for make in (scenario_spherical_pendulum, scenario_heavy_top):
        sc = make()
        cfg = IntegratorConfig(t_end=sc.t_end)
        g = sc.gains
        cases = {
            "block (matched)": block_coefficients(sc.params, g.rho, 0.0),
            "dense (implicit u)": dense_coefficients(sc.params, k=g.k, up=sc.params.m_bar * sc.params.grav),
        }
        x0 = sc.initial.to_array()
        for label, coeffs in cases.items():
            integ = "integrate_block" if label.startswith("block") else "integrate_dense"
            results = {}
            for name, mod in backends.items():
                sec, out = best_of(lambda: getattr(mod, integ)(x0, cfg.dt, cfg.n_steps, coeffs, False), args.repeat)
                results[name] = (sec, out)
                print(f"{sc.name + ' ' + label:28s} {name:8s} {cfg.n_steps:7d} {sec:9.4f} {1e6 * sec / cfg.n_steps:9.2f}")
            if len(results) == 2:
                diff = np.max(np.abs(results["python"][1] - results["cython"][1]))
                print(f"{'':28s} speedup {results['python'][0] / results['cython'][0]:.1f}x, max difference {diff:.1e}")


if __name__ == "__main__":
    main()
