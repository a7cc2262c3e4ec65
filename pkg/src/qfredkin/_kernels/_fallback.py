"""Pure-Python/numpy versions of the hot kernels."""
from __future__ import annotations

import math
from collections import defaultdict

import numpy as np


def expand_subspace(sub, matrix):
    """Fock-space image of the occupation ``sub`` under a k-mode unitary.

    Returns ``{output occupation: amplitude}``.
    """
    k = len(sub)
    norm = 1.0
    for n in sub:
        norm *= math.factorial(n)
    partial = {(0,) * k: 1.0 / math.sqrt(norm)}
    for i, n in enumerate(sub):
        if not n:
            continue
        col = [(j, complex(matrix[j, i])) for j in range(k) if matrix[j, i] != 0]
        for _ in range(n):
            nxt = defaultdict(complex)
            for occ, c in partial.items():
                for j, u in col:
                    o = list(occ)
                    o[j] += 1
                    nxt[tuple(o)] += c * u
            partial = nxt
    out = {}
    for occ, c in partial.items():
        f = 1.0
        for m in occ:
            f *= math.factorial(m)
        c *= math.sqrt(f)
        if abs(c) > 1e-15:
            out[occ] = c
    return out


def _probs(vecs, rho):
    return np.einsum("ji,ik,jk->j", vecs.conj(), rho, vecs).real


def _loglik(counts, p):
    mask = counts > 0
    return float(np.sum(counts[mask] * np.log(np.maximum(p[mask], 1e-300))))


def mle_rhor(vecs, counts, rho0, max_iter=10_000, tol=1e-10, slack=1e-12):
    """Safeguarded R-rho-R fixed-point iteration.

    ``vecs`` holds one rank-1 projector vector per row; ``counts`` the matching
    observed counts.  Returns ``(rho, loglik_history, iterations, converged)``.
    """
    vecs = np.ascontiguousarray(vecs, dtype=complex)
    counts = np.ascontiguousarray(counts, dtype=float)
    total = counts.sum()
    d = vecs.shape[1]
    eye = np.eye(d)
    rho = np.array(rho0, dtype=complex)
    p = _probs(vecs, rho)
    L = _loglik(counts, p)
    history = [L]
    step = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w = np.where(counts > 0, counts / np.maximum(p, 1e-300), 0.0) / total
        R = (vecs.T * w) @ vecs.conj()
        while True:
            G = (1.0 - step) * eye + step * R
            new = G @ rho @ G.conj().T
            new /= np.trace(new).real
            new = 0.5 * (new + new.conj().T)
            p_new = _probs(vecs, new)
            L_new = _loglik(counts, p_new)
            if L_new >= L - slack or step < 1e-12:
                break
            step *= 0.5
        delta = np.abs(new - rho).max()
        rho, p, L = new, p_new, L_new
        history.append(L)
        step = min(1.0, 2.0 * step)
        if delta < tol:
            converged = True
            break
    return rho, np.array(history), it, converged
