"""The post-selected linear-optical Fredkin gate.

Two SPDC pairs are turned into a four-photon path-mode entangled state; the
swap branch (paths ``1B, 2B, 1G, 2G``) routes the target photons crosswise
into the target detectors, the identity branch (``1R, 2R, 1Y, 2Y``) routes
them straight.  The control photon's polarization decides which branch
reaches the control detector.

Path roles
----------
``1B/1R``  control, recombined on a beam displacer into detector port ``C``
``2R/1G``  displaced Sagnac A, mixed on an NPBS into ``T1`` (and ``T1'``)
``2B/1Y``  displaced Sagnac B, mixed on an NPBS into ``T2`` (and ``T2'``)
``2G/2Y``  trigger, measured in D/A: ports ``TrD`` and ``TrA``

Logical encoding: ``|1> = H`` and ``|0> = V`` for every qubit, control first.
"""
from __future__ import annotations

import cmath
import functools
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Literal, Mapping, Optional, Sequence

import numpy as np

from . import optics
from .fock import (
    EMPTY,
    DetectionPattern,
    ElementTransform,
    ModeRegistry,
    PhotonicEnsemble,
    PhotonicState,
    apply,
    apply_all,
    dephase_branches,
    post_select,
    reduce_to_qubits,
    tensor,
)

SQRT1_2 = 1 / math.sqrt(2)

# polarization vectors (H, V)
H = np.array([1, 0], dtype=complex)
V = np.array([0, 1], dtype=complex)
D = SQRT1_2 * np.array([1, 1], dtype=complex)
A = SQRT1_2 * np.array([1, -1], dtype=complex)
R = SQRT1_2 * np.array([1, 1j], dtype=complex)
L = SQRT1_2 * np.array([1, -1j], dtype=complex)

INPUT_PATHS = ("1B", "2B", "1R", "2R", "1G", "2G", "1Y", "2Y")
SWAP_PATHS = frozenset({"1B", "2B", "1G", "2G"})
REGISTRY = ModeRegistry.from_paths(INPUT_PATHS)

# native SPDC polarization of each path in the entangled state
NATIVE_POL = {"1B": "H", "2B": "V", "1G": "V", "2G": "H", "1R": "V", "2R": "H", "1Y": "H", "2Y": "V"}

OUTPUT_NAMES = {"1B": "C", "1R": "C'", "2R": "T1", "1G": "T1'", "2B": "T2", "1Y": "T2'", "2G": "TrD", "2Y": "TrA"}
OUTPUT_REGISTRY = REGISTRY.relabel(OUTPUT_NAMES)


class CalibrationError(RuntimeError):
    """The phase fringe is too flat to locate its extremum."""


def pol_to_logical(vec) -> np.ndarray:
    """``(H, V)`` polarization amplitudes -> ``(|0>, |1>)`` logical amplitudes."""
    vec = np.asarray(vec, dtype=complex)
    return np.array([vec[1], vec[0]])


def logical_to_pol(vec) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex)
    return np.array([vec[1], vec[0]])


def logical_bit(bit: int) -> np.ndarray:
    """Polarization vector of logical ``|bit>``."""
    return H.copy() if bit else V.copy()


def _check_qubit(name, vec):
    vec = np.asarray(vec, dtype=complex).reshape(2)
    if abs(np.vdot(vec, vec).real - 1.0) > 1e-10:
        raise ValueError(f"{name} must be normalized, |v|^2 = {np.vdot(vec, vec).real}")
    return vec


@dataclass(frozen=True)
class QubitPreparation:
    """Polarization states ``(H, V)`` of control, target 1 and target 2."""

    control: np.ndarray
    target1: np.ndarray
    target2: np.ndarray

    def __post_init__(self):
        for name in ("control", "target1", "target2"):
            object.__setattr__(self, name, _check_qubit(name, getattr(self, name)))

    @classmethod
    def basis(cls, c: int, t1: int, t2: int) -> "QubitPreparation":
        return cls(logical_bit(c), logical_bit(t1), logical_bit(t2))

    def logical_vector(self) -> np.ndarray:
        return np.kron(np.kron(pol_to_logical(self.control), pol_to_logical(self.target1)), pol_to_logical(self.target2))


@dataclass(frozen=True)
class GateConfig:
    """Gate parameters.

    ``intrinsic_phase`` is the extra phase carried by the swap branch; the
    compensating ``theta`` (a tilted wave plate on the control output) adds
    to it.  ``zeta1``/``zeta2`` are the amplitude overlaps at the two
    Sagnac NPBSs.
    """

    intrinsic_phase: float = 0.0
    theta: float = 0.0
    zeta1: float = 1.0
    zeta2: float = 1.0
    collection: Literal["single-port", "both-ports"] = "single-port"
    trigger: Literal["D-only", "both-with-feedforward"] = "D-only"

    def __post_init__(self):
        for name in ("zeta1", "zeta2"):
            z = getattr(self, name)
            if not 0.0 <= z <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {z}")
        if self.collection not in ("single-port", "both-ports"):
            raise ValueError(f"unknown collection mode {self.collection!r}")
        if self.trigger not in ("D-only", "both-with-feedforward"):
            raise ValueError(f"unknown trigger mode {self.trigger!r}")
        for name in ("intrinsic_phase", "theta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def zeta(self) -> float:
        return self.zeta1 * self.zeta2


@dataclass(frozen=True)
class PatternResult:
    probability: float
    state: np.ndarray  # logical vector (pure) or density matrix

    @property
    def is_pure(self) -> bool:
        return self.state.ndim == 1

    def density_matrix(self) -> np.ndarray:
        return np.outer(self.state, self.state.conj()) if self.is_pure else self.state


@dataclass(frozen=True)
class GateOutcome:
    """Accepted detector patterns with their probabilities and conditional states."""

    patterns: Mapping[str, PatternResult]
    success_probability: float

    def density_matrix(self) -> np.ndarray:
        if not self.patterns:
            raise ValueError("gate never succeeded")
        rho = sum(r.probability * r.density_matrix() for r in self.patterns.values())
        return rho / self.success_probability

    def state_vector(self) -> np.ndarray:
        """Conditional pure state (first pattern); raises if the output is mixed."""
        first = next(iter(self.patterns.values()))
        rho = self.density_matrix()
        if not first.is_pure or abs(np.trace(rho @ rho).real - 1) > 1e-9:
            raise ValueError("gate output is mixed")
        return first.state


# -- sources and input encoding ------------------------------------------------


def spdc_pair_state(source: int) -> PhotonicState:
    """Polarization-entangled pair of source 1 or 2, labelled by path."""
    if source == 1:
        terms = {(("1B", "H"), ("2B", "V")): SQRT1_2, (("1R", "V"), ("2R", "H")): SQRT1_2}
        reg = ModeRegistry.from_paths(("1B", "2B", "1R", "2R"))
    elif source == 2:
        terms = {(("1Y", "H"), ("2Y", "V")): SQRT1_2, (("1G", "V"), ("2G", "H")): SQRT1_2}
        reg = ModeRegistry.from_paths(("1G", "2G", "1Y", "2Y"))
    else:
        raise ValueError("source must be 1 or 2")
    return PhotonicState.from_labels(reg, terms)


def _regroup(state: PhotonicState, mapping: Mapping[tuple, tuple], registry: ModeRegistry) -> PhotonicState:
    """Move occupied modes to new labels; modes must stay distinct per term."""
    out = {}
    for occ, amp in state.terms.items():
        vec = [0] * len(registry)
        for i, n in enumerate(occ):
            if n:
                j = registry.index(mapping[state.registry.labels[i]])
                if vec[j]:
                    raise ValueError("regrouping would merge occupied modes")
                vec[j] = n
        out[tuple(vec)] = out.get(tuple(vec), 0) + amp
    return PhotonicState(registry, out)


# path -> (fiber carrying that photon before the polarization split)
_FIBER = {"1B": "s1a", "1R": "s1a", "2B": "s1b", "2R": "s1b", "1Y": "s2a", "1G": "s2a", "2Y": "s2b", "2G": "s2b"}


def central_pbs_state():
    """Send both SPDC pairs through the central PBS and the polarization splitters.

    Returns ``(post-selection probability, path-mode state)``; the state is
    the four-photon path-entangled state with one photon per control,
    Sagnac A, Sagnac B and trigger arm.
    """
    pair = tensor(spdc_pair_state(1), spdc_pair_state(2))
    fibers = ModeRegistry.from_paths(("s1a", "s1b", "s2a", "s2b", "e1", "e2", "e3", "e4"))
    state = _regroup(pair, {lab: (_FIBER[lab[0]], lab[1]) for lab in pair.registry.labels}, fibers)
    state = apply_all(
        state,
        [
            # central PBS: transmitted s1b and reflected s2a share one output
            optics.pbs_on(fibers, "s1b", "s2a"),
            # PBS half of each displaced Sagnac splits H and V into counterpropagating paths
            optics.pbs_on(fibers, "s1b", "e1"),
            optics.pbs_on(fibers, "s2a", "e2"),
            # polarization-to-path conversion of control and trigger photons
            optics.displacer_on(fibers, "s1a", "e3"),
            optics.displacer_on(fibers, "s2b", "e4"),
        ],
    )
    names = {"s1b": "2R", "e1": "1G", "s2a": "1Y", "e2": "2B", "s1a": "1B", "e3": "1R", "s2b": "2G", "e4": "2Y"}
    state = state.relabel(names).embed(REGISTRY)
    pattern = DetectionPattern.from_paths(REGISTRY, [["1B", "1R"], ["2R", "1G"], ["2B", "1Y"], ["2G", "2Y"]])
    return post_select(state, pattern)


def path_entangled_state() -> PhotonicState:
    """The four-photon path-mode entangled state, one term per branch."""
    swap = [(p, NATIVE_POL[p]) for p in ("1B", "2B", "1G", "2G")]
    ident = [(p, NATIVE_POL[p]) for p in ("1R", "2R", "1Y", "2Y")]
    return PhotonicState.from_labels(REGISTRY, {tuple(swap): SQRT1_2, tuple(ident): SQRT1_2})


def _encoder(path: str, target) -> np.ndarray:
    u = optics.polarization_unitary(target)
    if NATIVE_POL[path] == "V":
        u = u @ np.array([[0, 1], [1, 0]])
    return u


def build_input(prep: QubitPreparation) -> PhotonicState:
    """Encode the three qubits onto both path branches of each photon."""
    encoding = {
        "1B": prep.control, "1R": prep.control,
        "2B": prep.target1, "2R": prep.target1,
        "1G": prep.target2, "1Y": prep.target2,
    }
    return apply_all(
        path_entangled_state(),
        [optics.on_path(REGISTRY, p, _encoder(p, vec)) for p, vec in encoding.items()],
    )


def _in_swap_branch(occ) -> bool:
    return any(occ[REGISTRY.index((p, pol))] for p in SWAP_PATHS for pol in "HV")


# -- gate ------------------------------------------------------------------------


def _circuit(cfg: GateConfig) -> list[ElementTransform]:
    reg = REGISTRY
    c_h, c_v = reg.path_modes("1B")
    return [
        # swap-branch path-length phase
        optics.path_phase_on(reg, "2B", cfg.intrinsic_phase),
        # control: second beam displacer sends 1B-H and 1R-V into port 1B (= C)
        optics.displacer_on(reg, "1B", "1R"),
        # tilted HWP on the control output, phase on H
        ElementTransform((c_v, c_h), optics.phase_shift(cfg.theta)),
        # which-path erasure in each displaced Sagnac
        optics.npbs_on(reg, "2R", "1G"),
        optics.npbs_on(reg, "2B", "1Y"),
        # trigger: recombine, rotate to D/A, split
        optics.displacer_on(reg, "2G", "2Y"),
        optics.on_path(reg, "2G", optics.hwp(22.5)),
        optics.pbs_on(reg, "2G", "2Y"),
    ]


def _patterns(cfg: GateConfig) -> list[tuple[str, str, str, str]]:
    t1 = ("T1", "T1'") if cfg.collection == "both-ports" else ("T1",)
    t2 = ("T2", "T2'") if cfg.collection == "both-ports" else ("T2",)
    tr = ("TrD", "TrA") if cfg.trigger == "both-with-feedforward" else ("TrD",)
    return [("C", a, b, t) for a in t1 for b in t2 for t in tr]


def pattern_name(ports: Sequence[str]) -> str:
    return ",".join(ports)


def _raw_output(prep: QubitPreparation, cfg: GateConfig):
    state = build_input(prep)
    mixed = dephase_branches(state, _in_swap_branch, cfg.zeta1)
    mixed = dephase_branches(mixed, _in_swap_branch, cfg.zeta2)
    circuit = _circuit(cfg)
    return PhotonicEnsemble(tuple((w, apply_all(s, circuit).relabel(OUTPUT_NAMES)) for w, s in mixed))


def _read_pattern(out: PhotonicEnsemble, ports):
    reg = OUTPUT_REGISTRY
    pattern = DetectionPattern.from_paths(reg, [[p] for p in ports])
    if len(out) == 1:
        p, cond = post_select(out.members[0][1], pattern)
    else:
        p, cond = post_select(out, pattern)
    if cond is EMPTY:
        return 0.0, None
    qubits = [reg.path_modes(port) for port in ports[:3]]
    ignore = reg.path_modes("TrD") + reg.path_modes("TrA")
    return p, reduce_to_qubits(cond, qubits, ignore)


@functools.lru_cache(maxsize=None)
def pattern_corrections() -> dict[str, float]:
    """Relative swap/identity phase of every detector pattern, referenced to ``C,T1,T2,TrD``.

    Audited once with the control in ``D`` and both targets in ``H`` (the
    swap acts trivially there, so any relative phase comes from the ports).
    """
    probe = QubitPreparation(D, H, H)
    cfg = GateConfig(collection="both-ports", trigger="both-with-feedforward")
    out = _raw_output(probe, cfg)
    phases = {}
    for ports in _patterns(cfg):
        _, vec = _read_pattern(out, ports)
        # |0,1,1> (index 3) vs |1,1,1> (index 7)
        phases[pattern_name(ports)] = cmath.phase(vec[7] / vec[3])
    ref = phases[pattern_name(("C", "T1", "T2", "TrD"))]
    return {k: _wrap(v - ref) for k, v in phases.items()}


def _wrap(x: float) -> float:
    return (x + math.pi) % (2 * math.pi) - math.pi


def _correct(state: np.ndarray, phase: float) -> np.ndarray:
    if abs(phase) < 1e-15:
        return state
    d = np.ones(8, dtype=complex)
    d[4:] = np.exp(-1j * phase)
    if state.ndim == 1:
        return d * state
    return d[:, None] * state * d.conj()[None, :]


def run_gate(prep: QubitPreparation, cfg: GateConfig = GateConfig()) -> GateOutcome:
    """Simulate the gate and return every accepted pattern's outcome.

    Non-reference patterns (other NPBS port, A-port trigger) carry a known
    branch phase; it is removed before the patterns are reported, which is
    the feed-forward correction.
    """
    out = _raw_output(prep, cfg)
    corrections = pattern_corrections()
    results = {}
    total = 0.0
    for ports in _patterns(cfg):
        p, state = _read_pattern(out, ports)
        if state is None:
            continue
        name = pattern_name(ports)
        results[name] = PatternResult(p, _correct(state, corrections[name]))
        total += p
    return GateOutcome(results, total)


def output_distribution(prep: QubitPreparation, cfg: GateConfig = GateConfig()) -> dict[tuple[str, ...], float]:
    """Probability of every path-level detection pattern over all output ports."""
    out = _raw_output(prep, cfg)
    paths = OUTPUT_REGISTRY.paths
    dist: dict[tuple[str, ...], float] = {}
    for w, s in out:
        for occ, amp in s.terms.items():
            counts = []
            for path in paths:
                h, v = OUTPUT_REGISTRY.path_modes(path)
                counts.extend([path] * (occ[h] + occ[v]))
            key = tuple(counts)
            dist[key] = dist.get(key, 0.0) + w * abs(amp) ** 2
    return dist


def fredkin_vector(prep: QubitPreparation) -> np.ndarray:
    """Ideal controlled-SWAP output in the logical basis (control ``|1>`` swaps)."""
    c = pol_to_logical(prep.control)
    t1 = pol_to_logical(prep.target1)
    t2 = pol_to_logical(prep.target2)
    return c[0] * np.kron([1, 0], np.kron(t1, t2)) + c[1] * np.kron([0, 1], np.kron(t2, t1))


FREDKIN = np.zeros((8, 8))
for _i in range(8):
    _c, _a, _b = _i >> 2, (_i >> 1) & 1, _i & 1
    FREDKIN[(_c << 2) | ((_b << 1) | _a if _c else (_a << 1) | _b), _i] = 1.0


# -- GHZ states and phase calibration --------------------------------------------

GHZ_KINDS = ("1+", "1-", "2+", "2-")


def ghz_preparation(kind: str) -> QubitPreparation:
    if kind not in GHZ_KINDS:
        raise ValueError(f"GHZ kind must be one of {GHZ_KINDS}")
    family, sign = kind[0], 1 if kind[1] == "+" else -1
    control = SQRT1_2 * (logical_bit(0) + sign * logical_bit(1))
    t1, t2 = (1, 0) if family == "1" else (0, 1)
    return QubitPreparation(control, logical_bit(t1), logical_bit(t2))


def ghz_target(kind: str) -> np.ndarray:
    prep = ghz_preparation(kind)
    return fredkin_vector(prep)


# sigma_x sigma_y sigma_y outcomes used to set the phase
_FRINGE_OUTCOMES = ((D, R, R), (D, L, L), (A, R, L), (A, L, R))


def fringe_rate(rho: np.ndarray) -> float:
    """Summed probability of the DRR, DLL, ARL and ALR outcomes."""
    total = 0.0
    for a, b, c in _FRINGE_OUTCOMES:
        v = np.kron(np.kron(pol_to_logical(a), pol_to_logical(b)), pol_to_logical(c))
        total += np.vdot(v, rho @ v).real
    return total


def phase_fringe(cfg: GateConfig, thetas, sign: int = +1) -> np.ndarray:
    prep = ghz_preparation("1+" if sign > 0 else "1-")
    return np.array([fringe_rate(run_gate(prep, replace(cfg, theta=float(t))).density_matrix()) for t in thetas])


def calibrate_phase(cfg: GateConfig, sign: int = +1, n_points: int = 12, min_visibility: float = 1e-6) -> float:
    """Compensating phase that maximizes (sign=+1) or minimizes the fringe.

    The fringe is exactly sinusoidal in ``theta``; a three-parameter cosine
    fit over ``n_points`` settings locates the extremum in closed form.
    """
    thetas = np.linspace(0, 2 * np.pi, n_points, endpoint=False)
    y = phase_fringe(cfg, thetas, sign)
    design = np.column_stack([np.ones_like(thetas), np.cos(thetas), np.sin(thetas)])
    (c, a, b), *_ = np.linalg.lstsq(design, y, rcond=None)
    amp = math.hypot(a, b)
    if c <= 0 or amp / c < min_visibility:
        raise CalibrationError(f"phase fringe is flat (visibility {amp / max(c, 1e-300):.2e})")
    best = math.atan2(b, a)
    if sign < 0:
        best += math.pi
    return _wrap(best)


def calibrated(cfg: GateConfig, sign: int = +1) -> GateConfig:
    return replace(cfg, theta=calibrate_phase(cfg, sign))


# -- resources and HOM -------------------------------------------------------------


@dataclass(frozen=True)
class ResourceReport:
    variant: str
    collection: str
    c_path_gates: int
    heralded_cnots: int
    entangled_pair_ancillae: int
    factors: tuple[tuple[str, float], ...]

    @property
    def success_probability(self) -> float:
        return math.prod(f for _, f in self.factors)

    def as_dict(self) -> dict:
        return {
            "variant": self.variant,
            "collection": self.collection,
            "c_path_gates": self.c_path_gates,
            "heralded_cnots": self.heralded_cnots,
            "entangled_pair_ancillae": self.entangled_pair_ancillae,
            "factors": [[name, f] for name, f in self.factors],
            "success_probability": self.success_probability,
        }


CPATH_SUCCESS = (1 / 4) ** 2
CNOTS_PER_CPATH = 2
ANCILLAE_PER_CNOT = 1
OUTPUT_HERALD_COST = 1 / 4


def heralded_resources(variant: str = "direct", collection: str = "single-port") -> ResourceReport:
    if variant == "direct":
        targets = 1.0 if collection == "both-ports" else 1 / 4
        factors = (("control detection", 1 / 2), ("trigger D port", 1 / 2), ("target ports", targets))
        return ResourceReport(variant, collection, 0, 0, 0, factors)
    if variant == "c-path-heralded":
        n = 3
        factors = tuple((f"C-path gate {i + 1}", CPATH_SUCCESS) for i in range(n))
        factors += (("output non-detection herald", OUTPUT_HERALD_COST),)
        cnots = n * CNOTS_PER_CPATH
        return ResourceReport(variant, collection, n, cnots, cnots * ANCILLAE_PER_CNOT, factors)
    raise ValueError(f"unknown variant {variant!r}")


def hom_visibility(zeta: float) -> float:
    if not 0.0 <= zeta <= 1.0:
        raise ValueError("zeta must lie in [0, 1]")
    return zeta**2


def hom_coincidence(zeta: float) -> float:
    """Coincidence probability of two photons on a 50:50 splitter with overlap ``zeta``."""
    return (1 - hom_visibility(zeta)) / 2


def hom_scan(delays, sigma: float, zeta0: float = 1.0) -> np.ndarray:
    """Coincidence probability vs delay for a Gaussian overlap envelope."""
    delays = np.asarray(delays, dtype=float)
    zeta = zeta0 * np.exp(-(delays**2) / (2 * sigma**2))
    return (1 - zeta**2) / 2


def hom_simulate(zeta: float) -> float:
    """Coincidence probability from the Fock simulator.

    The second photon's internal state has overlap ``zeta`` with the first;
    the orthogonal remainder rides on the spare polarization mode, which the
    NPBS treats identically.
    """
    reg = ModeRegistry.from_paths(("a", "b"))
    state = PhotonicState.from_labels(
        reg, {(("a", "H"), ("b", "H")): zeta, (("a", "H"), ("b", "V")): math.sqrt(max(0.0, 1 - zeta**2))}
    )
    out = apply(state, optics.npbs_on(reg, "a", "b"))
    p, _ = post_select(out, DetectionPattern.from_paths(reg, [["a"], ["b"]]))
    return p
