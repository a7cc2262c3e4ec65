"""Compare the compiled and numpy kernels.

Run with ``python3 benchmarks/bench_kernels.py``.  Needs the extension built
(``pip install -e . --no-build-isolation``).
"""
import argparse
import timeit

import numpy as np
from scipy.stats import unitary_group

from qfredkin._kernels import _fallback
from qfredkin.circuit import ghz_target
from qfredkin.measurement import sample_records, tomography_settings
from qfredkin.tomography import _stack

try:
    from qfredkin._kernels import _core
except ImportError:
    _core = None


def _cases():
    u4 = unitary_group.rvs(4, random_state=1)
    target = ghz_target("2+")
    rho = 0.9 * np.outer(target, target.conj()) + 0.1 * np.eye(8) / 8
    vecs, counts = _stack(sample_records(rho, tomography_settings(), 5029, 7))
    rho0 = np.eye(8, dtype=complex) / 8
    return {
        "expand_subspace (4 modes, 4 photons)": lambda m: m.expand_subspace((1, 1, 1, 1), u4),
        "mle_rhor (3 qubits, 5029 events)": lambda m: m.mle_rhor(vecs, counts, rho0),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=20)
    args = ap.parse_args()
    backends = [("python", _fallback)] + ([("cython", _core)] if _core is not None else [])
    print(f"{'kernel':40s} " + " ".join(f"{name:>12s}" for name, _ in backends) + "   speedup")
    for label, fn in _cases().items():
        times = [min(timeit.repeat(lambda: fn(mod), repeat=args.repeat, number=args.number)) / args.number for _, mod in backends]
        speed = f"{times[0] / times[-1]:8.1f}x" if len(times) > 1 else "       -"
        print(f"{label:40s} " + " ".join(f"{t * 1e3:10.3f}ms" for t in times) + f"  {speed}")


if __name__ == "__main__":
    main()
