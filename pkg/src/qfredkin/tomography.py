"""Maximum-likelihood state tomography with Monte-Carlo error bars."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from ._kernels import BACKEND, mle_rhor
from .measurement import CountRecord, SeedLike

MAX_ITER = 10_000
TOL = 1e-10


class TomographyError(ValueError):
    pass


@dataclass(frozen=True)
class Reconstruction:
    rho: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    history: np.ndarray


@dataclass(frozen=True)
class TomographyResult:
    rho: np.ndarray
    fidelity: float
    sigma_fidelity: float
    purity: float
    sigma_purity: float
    loglik: float
    iterations: int
    converged: bool


def _stack(records: Sequence[CountRecord]):
    if not records:
        raise TomographyError("no count records")
    vecs = np.concatenate([r.setting.outcome_vectors() for r in records])
    counts = np.concatenate([np.asarray(r.counts, dtype=float) for r in records])
    if counts.sum() <= 0:
        raise TomographyError("all counts are zero")
    return vecs, counts


def check_density_matrix(rho: np.ndarray, atol: float = 1e-10) -> None:
    if np.abs(rho - rho.conj().T).max() > atol:
        raise AssertionError("not Hermitian")
    if abs(np.trace(rho).real - 1) > atol:
        raise AssertionError("trace differs from 1")
    if np.linalg.eigvalsh(rho).min() < -1e-9:
        raise AssertionError("negative eigenvalue")


def mle_from_arrays(vecs: np.ndarray, counts: np.ndarray, max_iter: int = MAX_ITER, tol: float = TOL) -> Reconstruction:
    d = vecs.shape[1]
    rho0 = np.eye(d, dtype=complex) / d
    rho, history, iterations, converged = mle_rhor(vecs, counts, rho0, max_iter, tol, 1e-12)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    return Reconstruction(rho, float(history[-1]), int(iterations), bool(converged), np.asarray(history))


def mle_reconstruct(records: Sequence[CountRecord], max_iter: int = MAX_ITER, tol: float = TOL) -> Reconstruction:
    """Fixed-point maximum-likelihood estimate started from the maximally mixed state.

    Each step applies ``rho -> G rho G`` with ``G = (1 - t) I + t R`` and
    ``R = sum_k (n_k / p_k) P_k / N``; ``t`` halves whenever the likelihood
    would drop.  Stops once no matrix element moves by more than ``tol``.
    """
    vecs, counts = _stack(records)
    return mle_from_arrays(vecs, counts, max_iter, tol)


def fidelity(rho: np.ndarray, target: np.ndarray) -> float:
    """``<t|rho|t>`` for a pure target vector, or Uhlmann fidelity for a matrix target."""
    rho = np.asarray(rho, dtype=complex)
    target = np.asarray(target, dtype=complex)
    if target.ndim == 1:
        if target.shape[0] != rho.shape[0]:
            raise ValueError("dimension mismatch")
        f = np.vdot(target, rho @ target).real
    else:
        if target.shape != rho.shape:
            raise ValueError("dimension mismatch")
        s = scipy.linalg.sqrtm(rho)
        f = np.trace(scipy.linalg.sqrtm(s @ target @ s)).real ** 2
    return float(np.clip(f, 0.0, 1.0))


def purity(rho: np.ndarray) -> float:
    rho = np.asarray(rho, dtype=complex)
    return float(np.clip(np.trace(rho @ rho).real, 1.0 / rho.shape[0], 1.0))


def _replica(args):
    vecs, counts, target, seed, max_iter, tol = args
    rng = np.random.default_rng(seed)
    resampled = rng.poisson(counts).astype(float)
    if resampled.sum() == 0:
        resampled = counts
    rec = mle_from_arrays(vecs, resampled, max_iter, tol)
    return fidelity(rec.rho, target), purity(rec.rho)


def monte_carlo_errors(
    records: Sequence[CountRecord],
    target: np.ndarray,
    n_samples: int = 500,
    seed: SeedLike = 0,
    max_iter: int = MAX_ITER,
    tol: float = TOL,
    workers: Optional[int] = None,
) -> tuple[float, float]:
    """Standard deviations of fidelity and purity over Poisson-resampled replicas.

    Replica ``i`` uses the ``i``-th child of ``SeedSequence(seed)``, so the
    result does not depend on ``workers``.
    """
    vecs, counts = _stack(records)
    if isinstance(seed, np.random.Generator):
        seed = int(seed.integers(2**63))
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(n_samples)
    jobs = [(vecs, counts, target, child, max_iter, tol) for child in children]
    if workers is None:
        # the compiled kernel drops the GIL, the numpy one mostly does not
        workers = 4 if BACKEND == "cython" else 1
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(_replica, jobs))
    else:
        results = [_replica(j) for j in jobs]
    f, p = np.array(results).T
    return float(np.std(f, ddof=1)), float(np.std(p, ddof=1))


def tomography(
    records: Sequence[CountRecord], target: np.ndarray, n_samples: int = 500, seed: SeedLike = 0, **kw
) -> TomographyResult:
    rec = mle_reconstruct(records)
    sf, sp = monte_carlo_errors(records, target, n_samples, seed, **kw) if n_samples > 1 else (0.0, 0.0)
    return TomographyResult(rec.rho, fidelity(rec.rho, target), sf, purity(rec.rho), sp, rec.loglik, rec.iterations, rec.converged)


# -- serialization -----------------------------------------------------------------


def density_to_json(rho: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(rho)]


def density_from_json(obj) -> np.ndarray:
    if isinstance(obj, str):
        obj = json.loads(obj)
    return np.array([[complex(re, im) for re, im in row] for row in obj])


def density_to_csv(rho: np.ndarray) -> tuple[str, str]:
    """Real and imaginary parts as two CSV grids."""
    fmt = lambda m: "\n".join(",".join(f"{x:.12g}" for x in row) for row in m) + "\n"
    rho = np.asarray(rho)
    return fmt(rho.real), fmt(rho.imag)
