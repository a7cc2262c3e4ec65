"""Truth tables, Bell-type inequalities and SWAP-test fringes."""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, replace
from typing import Literal, Optional, Sequence

import numpy as np

from .circuit import (
    FREDKIN,
    D,
    GateConfig,
    QubitPreparation,
    calibrated,
    ghz_preparation,
    logical_bit,
    logical_to_pol,
    run_gate,
)
from .measurement import (
    BasisSetting,
    QubitBasis,
    SeedLike,
    as_generator,
    mermin_settings,
    outcome_probs,
    split_budget,
    svetlichny_settings,
)

PARITY = np.array([(-1) ** bin(k).count("1") for k in range(8)], dtype=float)


class FitError(ValueError):
    pass


# -- truth table ------------------------------------------------------------------


@dataclass(frozen=True)
class TruthTable:
    measured: np.ndarray  # rows: logical inputs |000>..|111>, columns: outputs
    ideal: np.ndarray
    overlap: float
    success: np.ndarray  # per-input success probability
    shots: Optional[int] = None


def mean_overlap(measured: np.ndarray, ideal: np.ndarray) -> float:
    return float(np.trace(measured @ ideal.T) / np.trace(ideal @ ideal.T))


def _basis_rows(cfg: GateConfig):
    rows, success = [], []
    for i in range(8):
        out = run_gate(QubitPreparation.basis(i >> 2, (i >> 1) & 1, i & 1), cfg)
        rows.append(np.clip(np.diag(out.density_matrix()).real, 0, None))
        success.append(out.success_probability)
    return np.array(rows), np.array(success)


def truth_table(
    cfg: GateConfig = GateConfig(),
    shots: Optional[int] = None,
    seed: SeedLike = None,
    extinction: float = 0.0,
) -> TruthTable:
    """Logical-basis truth table and its mean overlap with the ideal one.

    ``extinction`` is the probability that each prepared qubit comes out in
    the orthogonal polarization.  ``shots=None`` gives exact probabilities;
    otherwise each row is a normalized multinomial sample.
    """
    if not 0 <= extinction <= 1:
        raise ValueError("extinction must lie in [0, 1]")
    rows, success = _basis_rows(cfg)
    measured = np.zeros((8, 8))
    for i in range(8):
        for flips in range(8):
            k = bin(flips).count("1")
            w = extinction**k * (1 - extinction) ** (3 - k)
            if w:
                measured[i] += w * rows[i ^ flips]
    measured /= measured.sum(axis=1, keepdims=True)
    if shots is not None:
        if seed is None:
            raise ValueError("a seed is required for sampled truth tables")
        rng = as_generator(seed)
        measured = np.array([rng.multinomial(shots, row / row.sum()) for row in measured]) / shots
    ideal = FREDKIN.T.copy()
    return TruthTable(measured, ideal, mean_overlap(measured, ideal), success, shots)


# -- correlations and inequalities -------------------------------------------------


def correlator(rho: np.ndarray, a: QubitBasis, b: QubitBasis, c: QubitBasis) -> float:
    """Expectation of the outcome-parity product in the setting ``(a, b, c)``."""
    return float(PARITY @ outcome_probs(rho, BasisSetting((a, b, c))))


def correlator_from_counts(counts) -> tuple[float, float]:
    """Parity expectation and its Poisson standard error from 8 outcome counts."""
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    if n <= 0:
        raise ValueError("no events for this setting")
    e = float(PARITY @ counts / n)
    return e, math.sqrt(max(1 - e * e, 0.0) / n)


MERMIN_TERMS = ((+1, "a'", "b", "c'"), (+1, "a", "b'", "c'"), (+1, "a", "b", "c"), (-1, "a'", "b'", "c"))
SVETLICHNY_TERMS = (
    (+1, "a", "b", "c"), (+1, "a", "b", "c'"), (+1, "a", "b'", "c"), (-1, "a", "b'", "c'"),
    (+1, "a'", "b", "c"), (-1, "a'", "b", "c'"), (-1, "a'", "b'", "c"), (-1, "a'", "b'", "c'"),
)
BOUNDS = {"mermin": 2.0, "svetlichny": 4.0}


def _terms(kind: str):
    if kind == "mermin":
        return MERMIN_TERMS, mermin_settings()
    if kind == "svetlichny":
        return SVETLICHNY_TERMS, svetlichny_settings()
    raise ValueError(f"unknown inequality {kind!r}")


def inequality_settings(kind: str) -> list[BasisSetting]:
    terms, s = _terms(kind)
    return [BasisSetting((s[a], s[b], s[c])) for _, a, b, c in terms]


def inequality_value(rho: np.ndarray, kind: str) -> float:
    terms, s = _terms(kind)
    return abs(sum(sign * correlator(rho, s[a], s[b], s[c]) for sign, a, b, c in terms))


def mermin(rho: np.ndarray) -> float:
    return inequality_value(rho, "mermin")


def svetlichny(rho: np.ndarray) -> float:
    return inequality_value(rho, "svetlichny")


@dataclass(frozen=True)
class InequalitySample:
    kind: str
    value: float
    sigma: float
    correlators: tuple[float, ...]
    counts: tuple[tuple[int, ...], ...]
    settings: tuple[str, ...]

    @property
    def significance(self) -> float:
        excess = self.value - BOUNDS[self.kind]
        if self.sigma == 0:
            return math.copysign(math.inf, excess) if excess else 0.0
        return excess / self.sigma


def _setting_label(setting: BasisSetting) -> str:
    return ",".join(b.name for b in setting.bases)


def inequality_from_counts(kind: str, counts: Sequence[Sequence[int]]) -> InequalitySample:
    terms, _ = _terms(kind)
    es, ss = zip(*(correlator_from_counts(c) for c in counts))
    value = sum(sign * e for (sign, *_), e in zip(terms, es))
    labels = tuple(_setting_label(s) for s in inequality_settings(kind))
    return InequalitySample(
        kind, abs(value), math.sqrt(sum(s * s for s in ss)), tuple(es),
        tuple(tuple(int(x) for x in c) for c in counts), labels,
    )


def sample_inequality(rho: np.ndarray, kind: str, total: int, seed: SeedLike) -> InequalitySample:
    """Draw ``total`` events split equally over the inequality's settings."""
    rng = as_generator(seed)
    settings = inequality_settings(kind)
    counts = [rng.multinomial(n, outcome_probs(rho, s)) for s, n in zip(settings, split_budget(total, len(settings)))]
    return inequality_from_counts(kind, counts)


def inequality_band(rho: np.ndarray, kind: str, total: int, n_rep: int, seed: SeedLike) -> tuple[float, float]:
    """Mean and standard deviation of the sampled statistic over ``n_rep`` replicas."""
    rng = as_generator(seed)
    settings = inequality_settings(kind)
    terms, _ = _terms(kind)
    signs = np.array([t[0] for t in terms], dtype=float)
    budget = split_budget(total, len(settings))
    probs = [outcome_probs(rho, s) for s in settings]
    es = np.empty((n_rep, len(settings)))
    for j, (p, n) in enumerate(zip(probs, budget)):
        es[:, j] = rng.multinomial(n, p, size=n_rep) @ PARITY / n
    values = np.abs(es @ signs)
    return float(values.mean()), float(values.std(ddof=1))


def ghz_density(zeta: float, kind: str = "2+", cfg: GateConfig = GateConfig()) -> np.ndarray:
    """Calibrated gate output for a GHZ preparation with coherence ``zeta = zeta1 * zeta2``."""
    z = math.sqrt(zeta)
    cfg = calibrated(replace(cfg, zeta1=1.0, zeta2=1.0), +1 if kind.endswith("+") else -1)
    return run_gate(ghz_preparation(kind), replace(cfg, zeta1=z, zeta2=z)).density_matrix()


# statistic -> (value, error, event budget) from the experiment being modelled
MEASURED_INEQUALITY = {"mermin": (3.58, 0.06, 747), "svetlichny": (4.88, 0.13, 2348)}


@dataclass(frozen=True)
class ZetaFit:
    zeta: float
    bands: dict  # kind -> (mean, std)
    overlaps: dict  # kind -> bool
    grid: tuple[float, ...]


def fit_inequality_zeta(
    grid: Sequence[float] = tuple(np.round(np.arange(0.85, 0.9501, 0.005), 4)),
    n_rep: int = 400,
    seed: SeedLike = 0,
) -> ZetaFit:
    """Pick the coherence that best matches both reported inequality values.

    For each ``zeta`` the sampled distribution of each statistic at the
    reported event budget is compared with the reported value; the score is
    the summed squared distance in units of the combined spread.
    """
    best = None
    ss = np.random.SeedSequence(seed if not isinstance(seed, np.random.Generator) else int(seed.integers(2**63)))
    seeds = ss.spawn(len(grid))
    for z, s in zip(grid, seeds):
        rho = ghz_density(float(z))
        rng = np.random.default_rng(s)
        bands, score = {}, 0.0
        for kind, (value, sigma, total) in MEASURED_INEQUALITY.items():
            mean, std = inequality_band(rho, kind, total, n_rep, rng)
            bands[kind] = (mean, std)
            score += (mean - value) ** 2 / (std**2 + sigma**2)
        if best is None or score < best[0]:
            best = (score, float(z), bands)
    _, z, bands = best
    overlaps = {
        kind: abs(bands[kind][0] - value) <= bands[kind][1] + sigma
        for kind, (value, sigma, _) in MEASURED_INEQUALITY.items()
    }
    return ZetaFit(z, bands, overlaps, tuple(float(g) for g in grid))


# -- SWAP test ----------------------------------------------------------------------


@dataclass(frozen=True)
class FringeScan:
    thetas: np.ndarray
    values: np.ndarray
    visibility: float
    sigma: float
    phase: float

    def as_dict(self) -> dict:
        return {
            "theta": [float(t) for t in self.thetas],
            "value": [float(v) for v in self.values],
            "visibility": self.visibility,
            "sigma_visibility": self.sigma,
            "phase": self.phase,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "value"])
        for t, v in zip(self.thetas, self.values):
            w.writerow([f"{t:.12g}", f"{v:.12g}"])
        return buf.getvalue()


def fit_visibility(thetas, values) -> tuple[float, float, float]:
    """Least-squares fit of ``c + a cos(t) + b sin(t)``.

    Returns ``(visibility, sigma, phase)`` with visibility
    ``hypot(a, b) / c`` clipped to ``[0, 1]`` and ``phase = atan2(-b, a)`` so
    that the fringe reads ``c (1 + v cos(t + phase))``.
    """
    thetas = np.asarray(thetas, dtype=float)
    y = np.asarray(values, dtype=float)
    if len(np.unique(np.round(np.mod(thetas, 2 * np.pi), 12))) < 3:
        raise FitError("at least three distinct phase settings are needed")
    X = np.column_stack([np.ones_like(thetas), np.cos(thetas), np.sin(thetas)])
    if np.linalg.matrix_rank(X) < 3:
        raise FitError("phase settings do not determine a cosine")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    c, a, b = coef
    if c <= 0:
        raise FitError("fringe offset is not positive")
    amp = math.hypot(a, b)
    v = amp / c
    dof = len(y) - 3
    rss = float(np.sum((y - X @ coef) ** 2))
    cov = (rss / dof if dof > 0 else 0.0) * np.linalg.inv(X.T @ X)
    if amp > 0:
        grad = np.array([-v / c, a / (amp * c), b / (amp * c)])
    else:
        grad = np.array([0.0, 1 / c, 1 / c]) / math.sqrt(2)
    sigma = math.sqrt(max(float(grad @ cov @ grad), 0.0))
    return float(min(max(v, 0.0), 1.0)), sigma, math.atan2(-b, a)


def make_scan(thetas, values) -> FringeScan:
    v, s, ph = fit_visibility(thetas, values)
    return FringeScan(np.asarray(thetas, dtype=float), np.asarray(values, dtype=float), v, s, ph)


def _eig_ensemble(rho_or_vec) -> list[tuple[float, np.ndarray]]:
    """Pure-state decomposition ``[(weight, logical vector)]`` of a qubit state."""
    arr = np.asarray(rho_or_vec, dtype=complex)
    if arr.ndim == 1:
        return [(1.0, arr / np.linalg.norm(arr))]
    w, vecs = np.linalg.eigh(arr)
    return [(float(wi), vecs[:, i]) for i, wi in enumerate(w) if wi > 1e-14]



def _control_plus_probability(rho: np.ndarray) -> float:
    proj = np.kron(np.outer([1, 1], [1, 1]) / 2, np.eye(4))
    return float(np.trace(proj @ rho).real)


def _pure_fringe(t1: np.ndarray, t2: np.ndarray, thetas, cfg: GateConfig) -> np.ndarray:
    prep = QubitPreparation(D, logical_to_pol(t1), logical_to_pol(t2))
    return np.array([_control_plus_probability(run_gate(prep, replace(cfg, theta=float(t))).density_matrix()) for t in thetas])


def swap_test_fringe(rho1, rho2, thetas, cfg: GateConfig = GateConfig()) -> FringeScan:
    """Control-``|+>`` probability vs compensating phase with the control prepared in ``|+>``.

    Target states are logical-basis vectors or 2x2 density matrices; mixed
    inputs are averaged over their eigen-decompositions.
    """
    thetas = np.asarray(thetas, dtype=float)
    if thetas.size == 0:
        raise FitError("empty phase grid")
    values = np.zeros(len(thetas))
    for w1, v1 in _eig_ensemble(rho1):
        for w2, v2 in _eig_ensemble(rho2):
            values += w1 * w2 * _pure_fringe(v1, v2, thetas, cfg)
    return make_scan(thetas, values)


def mixture_weights(m: float) -> dict[str, float]:
    """Weights of the four logical target pairs that make ``rho(m) x rho(m)``."""
    if not 0 <= m <= 1:
        raise ValueError("m must lie in [0, 1]")
    return {"00": 0.25 * (1 + m) ** 2, "01": 0.25 * (1 - m * m), "10": 0.25 * (1 - m * m), "11": 0.25 * (1 - m) ** 2}


def mixed_single_qubit(m: float) -> np.ndarray:
    """``m |0><0| + (1 - m) I / 2`` in the logical basis."""
    return m * np.diag([1.0, 0.0]) + (1 - m) / 2 * np.eye(2)


def mixed_state_run(
    m: float,
    thetas,
    cfg: GateConfig = GateConfig(),
    convention: Literal["equal-phase", "anti-phase-11"] = "equal-phase",
) -> FringeScan:
    """Aggregate the four pure-input fringes of the mixed-state purity test.

    ``equal-phase`` adds the fringes as the gate produces them (visibility
    ``(1 + m^2) / 2``, the purity).  ``anti-phase-11`` shifts the ``|11>``
    fringe by pi before adding (visibility ``m``, the Bloch-vector length).
    """
    if convention not in ("equal-phase", "anti-phase-11"):
        raise ValueError(f"unknown convention {convention!r}")
    thetas = np.asarray(thetas, dtype=float)
    values = np.zeros(len(thetas))
    for key, w in mixture_weights(m).items():
        if w == 0:
            continue
        t1, t2 = (np.eye(2)[int(ch)] for ch in key)
        shift = math.pi if (key == "11" and convention == "anti-phase-11") else 0.0
        values += w * _pure_fringe(t1, t2, thetas + shift, cfg)
    return make_scan(thetas, values)


# -- serialization -------------------------------------------------------------------


def truth_table_to_json(tt: TruthTable) -> dict:
    labels = ["".join(b) for b in itertools.product("01", repeat=3)]
    return {
        "inputs": labels,
        "outputs": labels,
        "M_exp": tt.measured.tolist(),
        "M_ideal": tt.ideal.tolist(),
        "overlap": tt.overlap,
        "success_probability": tt.success.tolist(),
        "shots_per_input": tt.shots,
    }


def matrix_to_csv(m: np.ndarray) -> str:
    labels = ["".join(b) for b in itertools.product("01", repeat=3)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["input"] + labels)
    for lab, row in zip(labels, m):
        w.writerow([lab] + [f"{x:.12g}" for x in row])
    return buf.getvalue()
