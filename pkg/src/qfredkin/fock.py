"""Few-photon states over labelled path x polarization modes.

States are sparse maps from occupation vectors to complex amplitudes.  Every
linear-optical element acts on a subset of modes through a small unitary
``U``; creation operators are rewritten as ``a_i^dag -> sum_j U[j, i] a_j^dag``.
Mixedness is carried by :class:`PhotonicEnsemble`, a weighted list of pure
states.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

from ._kernels import expand_subspace

AMP_TOL = 1e-12
NORM_TOL = 1e-10
UNITARY_TOL = 1e-10

Label = tuple[str, str]
Occupation = tuple[int, ...]

POLARIZATIONS = ("H", "V")


class RegistryError(ValueError):
    """Raised when two states cannot share or combine their mode registries."""


class EncodingError(ValueError):
    """Raised when a state leaves the dual-rail qubit subspace."""


@dataclass(frozen=True)
class ModeRegistry:
    """Ordered, unique mode labels ``(path, polarization)``."""

    labels: tuple[Label, ...]
    _index: Mapping[Label, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        labels = tuple((str(p), str(pol)) for p, pol in self.labels)
        for _, pol in labels:
            if pol not in POLARIZATIONS:
                raise ValueError(f"unknown polarization {pol!r}")
        if len(set(labels)) != len(labels):
            raise RegistryError("mode labels must be unique")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_index", MappingProxyType({lab: i for i, lab in enumerate(labels)}))

    @classmethod
    def from_paths(cls, paths: Iterable[str]) -> "ModeRegistry":
        return cls(tuple((p, pol) for p in paths for pol in POLARIZATIONS))

    def __len__(self):
        return len(self.labels)

    def __contains__(self, label) -> bool:
        return tuple(label) in self._index

    def index(self, label: Label) -> int:
        try:
            return self._index[tuple(label)]
        except KeyError:
            raise KeyError(f"mode {label!r} not in registry") from None

    def indices(self, labels: Iterable[Label]) -> tuple[int, ...]:
        return tuple(self.index(lab) for lab in labels)

    def path_modes(self, path: str) -> tuple[int, int]:
        """Return the ``(H, V)`` indices of a spatial path."""
        return self.index((path, "H")), self.index((path, "V"))

    @property
    def paths(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for p, _ in self.labels:
            seen.setdefault(p)
        return tuple(seen)

    def relabel(self, mapping: Mapping[str, str]) -> "ModeRegistry":
        return ModeRegistry(tuple((mapping.get(p, p), pol) for p, pol in self.labels))

    def __add__(self, other: "ModeRegistry") -> "ModeRegistry":
        return ModeRegistry(self.labels + other.labels)


class PhotonicState:
    """A normalized-or-not superposition of Fock occupation vectors.

    Instances are treated as immutable; all operations return new states.
    """

    __slots__ = ("registry", "_terms", "n_photons")

    def __init__(self, registry: ModeRegistry, terms: Mapping[Occupation, complex], *, prune: float = AMP_TOL):
        clean: dict[Occupation, complex] = {}
        n = None
        for occ, amp in terms.items():
            occ = tuple(int(x) for x in occ)
            if len(occ) != len(registry):
                raise ValueError(f"occupation {occ} does not match registry of {len(registry)} modes")
            if any(x < 0 for x in occ):
                raise ValueError(f"negative occupation {occ}")
            amp = complex(amp)
            if abs(amp) <= prune:
                continue
            total = sum(occ)
            if n is None:
                n = total
            elif total != n:
                raise ValueError("all occupation vectors must carry the same photon number")
            clean[occ] = clean.get(occ, 0) + amp
        self.registry = registry
        self._terms = MappingProxyType(clean)
        self.n_photons = 0 if n is None else n

    @classmethod
    def from_labels(cls, registry: ModeRegistry, terms: Mapping[Sequence[Label], complex]) -> "PhotonicState":
        """Build a state from ``{(label, label, ...): amplitude}``; repeated labels mean multiple photons."""
        out: dict[Occupation, complex] = defaultdict(complex)
        for labels, amp in terms.items():
            occ = [0] * len(registry)
            for lab in labels:
                occ[registry.index(lab)] += 1
            out[tuple(occ)] += amp
        return cls(registry, out)

    @classmethod
    def vacuum(cls, registry: ModeRegistry) -> "PhotonicState":
        return cls(registry, {(0,) * len(registry): 1.0})

    @property
    def terms(self) -> Mapping[Occupation, complex]:
        return self._terms

    def __len__(self):
        return len(self._terms)

    def __repr__(self):
        body = " + ".join(f"({amp:.4g})|{self.describe(occ)}>" for occ, amp in list(self._terms.items())[:6])
        more = "" if len(self) <= 6 else f" + ... ({len(self)} terms)"
        return f"PhotonicState({body}{more})"

    def describe(self, occ: Occupation) -> str:
        parts = []
        for i, n in enumerate(occ):
            if n:
                p, pol = self.registry.labels[i]
                parts.append(f"{pol}_{p}" if n == 1 else f"{n}{pol}_{p}")
        return ",".join(parts) or "vac"

    def amplitude(self, occ: Union[Occupation, Sequence[Label]]) -> complex:
        if occ and isinstance(occ[0], tuple):
            vec = [0] * len(self.registry)
            for lab in occ:
                vec[self.registry.index(lab)] += 1
            occ = tuple(vec)
        return self._terms.get(tuple(occ), 0j)

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self._terms.values()))

    def is_empty(self) -> bool:
        return not self._terms

    def normalized(self) -> "PhotonicState":
        nrm = self.norm()
        if nrm <= AMP_TOL:
            raise ValueError("cannot normalize a zero state")
        return PhotonicState(self.registry, {k: v / nrm for k, v in self._terms.items()})

    def scaled(self, c: complex) -> "PhotonicState":
        return PhotonicState(self.registry, {k: v * c for k, v in self._terms.items()})

    def inner(self, other: "PhotonicState") -> complex:
        """``<self|other>``; registries must be identical."""
        _same_registry(self, other)
        acc = 0j
        for occ, amp in self._terms.items():
            b = other._terms.get(occ)
            if b is not None:
                acc += amp.conjugate() * b
        return acc

    def __add__(self, other: "PhotonicState") -> "PhotonicState":
        _same_registry(self, other)
        out = dict(self._terms)
        for occ, amp in other._terms.items():
            out[occ] = out.get(occ, 0j) + amp
        return PhotonicState(self.registry, out)

    def __sub__(self, other: "PhotonicState") -> "PhotonicState":
        return self + other.scaled(-1)

    def allclose(self, other: "PhotonicState", atol: float = NORM_TOL) -> bool:
        if self.registry.labels != other.registry.labels:
            return False
        keys = set(self._terms) | set(other._terms)
        return all(abs(self._terms.get(k, 0j) - other._terms.get(k, 0j)) <= atol for k in keys)

    def relabel(self, mapping: Mapping[str, str]) -> "PhotonicState":
        """Rename spatial paths; photon content is untouched."""
        return PhotonicState(self.registry.relabel(mapping), self._terms)

    def embed(self, registry: ModeRegistry) -> "PhotonicState":
        """Re-express the state over a larger registry containing every current label."""
        idx = [registry.index(lab) for lab in self.registry.labels]
        out = {}
        for occ, amp in self._terms.items():
            vec = [0] * len(registry)
            for i, n in zip(idx, occ):
                vec[i] = n
            out[tuple(vec)] = amp
        return PhotonicState(registry, out)


def _same_registry(a: PhotonicState, b: PhotonicState):
    if a.registry.labels != b.registry.labels:
        raise RegistryError("states live on different mode registries")


@dataclass(frozen=True)
class PhotonicEnsemble:
    """Classical mixture of pure photonic states."""

    members: tuple[tuple[float, PhotonicState], ...]

    def __post_init__(self):
        members = tuple((float(w), s) for w, s in self.members)
        if any(w < -NORM_TOL for w, _ in members):
            raise ValueError("ensemble weights must be non-negative")
        total = sum(w for w, _ in members)
        if abs(total - 1.0) > NORM_TOL:
            raise ValueError(f"ensemble weights sum to {total}, not 1")
        object.__setattr__(self, "members", members)

    @classmethod
    def pure(cls, state: PhotonicState) -> "PhotonicEnsemble":
        return cls(((1.0, state),))

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @property
    def registry(self) -> ModeRegistry:
        return self.members[0][1].registry


StateLike = Union[PhotonicState, PhotonicEnsemble]


@dataclass(frozen=True)
class ElementTransform:
    """Unitary ``matrix`` acting on the listed mode indices (column = input mode)."""

    modes: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        modes = tuple(int(m) for m in self.modes)
        mat = np.array(self.matrix, dtype=complex)
        if len(set(modes)) != len(modes):
            raise ValueError("element modes must be distinct")
        if mat.shape != (len(modes), len(modes)):
            raise ValueError(f"matrix shape {mat.shape} does not match {len(modes)} modes")
        err = np.abs(mat.conj().T @ mat - np.eye(len(modes))).max() if modes else 0.0
        if err > UNITARY_TOL:
            raise ValueError(f"element matrix is not unitary (max deviation {err:.2e})")
        mat.setflags(write=False)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def on(cls, registry: ModeRegistry, labels: Sequence[Label], matrix) -> "ElementTransform":
        return cls(registry.indices(labels), matrix)

    def dagger(self) -> "ElementTransform":
        return ElementTransform(self.modes, self.matrix.conj().T)


def tensor(a: PhotonicState, b: PhotonicState) -> PhotonicState:
    """Product state.

    Disjoint registries are concatenated.  Identical registries are allowed as
    long as the two states never occupy the same mode.
    """
    if a.registry.labels == b.registry.labels:
        occ_a = {i for occ in a.terms for i, n in enumerate(occ) if n}
        occ_b = {i for occ in b.terms for i, n in enumerate(occ) if n}
        if occ_a & occ_b:
            raise RegistryError("states occupy overlapping modes of a shared registry")
        out: dict[Occupation, complex] = defaultdict(complex)
        for oa, aa in a.terms.items():
            for ob, ab in b.terms.items():
                out[tuple(x + y for x, y in zip(oa, ob))] += aa * ab
        return PhotonicState(a.registry, out)
    if set(a.registry.labels) & set(b.registry.labels):
        raise RegistryError("registries overlap without being identical")
    reg = a.registry + b.registry
    return PhotonicState(reg, {oa + ob: aa * ab for oa, aa in a.terms.items() for ob, ab in b.terms.items()})


def apply(state: PhotonicState, t: ElementTransform) -> PhotonicState:
    """Apply a mode-subset unitary to a pure state."""
    nmodes = len(state.registry)
    if any(m < 0 or m >= nmodes for m in t.modes):
        raise IndexError("element references modes outside the registry")
    modes = t.modes
    cache: dict[Occupation, dict[Occupation, complex]] = {}
    out: dict[Occupation, complex] = defaultdict(complex)
    for occ, amp in state.terms.items():
        sub = tuple(occ[m] for m in modes)
        if not any(sub):
            out[occ] += amp
            continue
        row = cache.get(sub)
        if row is None:
            row = cache[sub] = expand_subspace(sub, t.matrix)
        base = list(occ)
        for new_sub, coeff in row.items():
            for m, n in zip(modes, new_sub):
                base[m] = n
            out[tuple(base)] += amp * coeff
    return PhotonicState(state.registry, out)


def apply_all(state: PhotonicState, elements: Iterable[ElementTransform]) -> PhotonicState:
    for t in elements:
        state = apply(state, t)
    return state


@dataclass(frozen=True)
class DetectionPattern:
    """Required photon counts (default one each) in groups of mode indices."""

    groups: tuple[tuple[int, ...], ...]
    counts: tuple[int, ...] = ()
    names: tuple[str, ...] = ()

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        counts = tuple(self.counts) or (1,) * len(groups)
        if len(counts) != len(groups):
            raise ValueError("one count per group is required")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_paths(cls, registry: ModeRegistry, groups: Sequence[Sequence[str]], counts: Sequence[int] = ()) -> "DetectionPattern":
        """Groups given as lists of path names; both polarizations of each path are included."""
        idx = []
        for g in groups:
            modes: list[int] = []
            for path in g:
                modes.extend(registry.path_modes(path))
            idx.append(tuple(modes))
        return cls(tuple(idx), tuple(counts), tuple("+".join(g) for g in groups))

    def accepts(self, occ: Occupation) -> bool:
        return all(sum(occ[i] for i in g) == c for g, c in zip(self.groups, self.counts))


class _Empty:
    """Marker returned when a post-selection has zero probability."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EMPTY"

    def __bool__(self):
        return False


EMPTY = _Empty()


def _project(state: PhotonicState, pattern: DetectionPattern) -> PhotonicState:
    return PhotonicState(state.registry, {occ: a for occ, a in state.terms.items() if pattern.accepts(occ)})


def _check_pattern(registry: ModeRegistry, pattern: DetectionPattern):
    n = len(registry)
    for g in pattern.groups:
        if any(i < 0 or i >= n for i in g):
            raise IndexError("detection pattern references unknown modes")


def post_select(state: StateLike, pattern: DetectionPattern):
    """Project onto the detection pattern.

    Returns ``(probability, conditional)``; the conditional state is
    renormalized, and is :data:`EMPTY` when the probability vanishes.
    """
    if isinstance(state, PhotonicEnsemble):
        _check_pattern(state.registry, pattern)
        kept = []
        total = 0.0
        for w, s in state:
            proj = _project(s, pattern)
            p = w * proj.norm() ** 2
            if p > AMP_TOL**2:
                kept.append((p, proj.normalized()))
                total += p
        if total <= AMP_TOL**2:
            return 0.0, EMPTY
        return total, PhotonicEnsemble(tuple((p / total, s) for p, s in kept))
    _check_pattern(state.registry, pattern)
    proj = _project(state, pattern)
    p = proj.norm() ** 2
    if p <= AMP_TOL**2:
        return 0.0, EMPTY
    return p, proj.normalized()


def dephase_branches(state: StateLike, branch_of: Callable[[Occupation], bool], zeta: float) -> PhotonicEnsemble:
    """Scale the coherence between two branches of a state by ``zeta``.

    ``branch_of`` sends each occupation vector to ``True`` (first branch) or
    ``False``.  The result mixes the original state with weight ``(1+zeta)/2``
    and the branch-antisymmetric copy with weight ``(1-zeta)/2``.
    """
    if not 0.0 <= zeta <= 1.0:
        raise ValueError(f"zeta must lie in [0, 1], got {zeta}")
    if isinstance(state, PhotonicEnsemble):
        members = []
        for w, s in state:
            members.extend((w * wi, si) for wi, si in dephase_branches(s, branch_of, zeta))
        return PhotonicEnsemble(tuple(members))
    if zeta == 1.0:
        return PhotonicEnsemble.pure(state)
    flipped = PhotonicState(state.registry, {occ: (a if branch_of(occ) else -a) for occ, a in state.terms.items()})
    members = [((1 + zeta) / 2, state)]
    if zeta < 1.0:
        members.append(((1 - zeta) / 2, flipped))
    return PhotonicEnsemble(tuple(members))


def reduce_to_qubits(state: StateLike, qubit_map: Sequence[tuple[int, int]], ignore: Sequence[int] = ()):
    """Read out dual-rail polarization qubits.

    Each ``(mode_H, mode_V)`` pair must hold exactly one photon; ``H`` is
    logical ``|1>`` and ``V`` is logical ``|0>``.  Photons in ``ignore`` modes
    (e.g. a heralding trigger) are traced out.  A pure state whose ignored
    modes carry a single configuration reduces to a state vector; otherwise
    the result is a density matrix.
    """
    if isinstance(state, PhotonicEnsemble):
        dim = 2 ** len(qubit_map)
        rho = np.zeros((dim, dim), dtype=complex)
        for w, s in state:
            r = reduce_to_qubits(s, qubit_map, ignore)
            rho += w * (np.outer(r, r.conj()) if r.ndim == 1 else r)
        return rho
    ignore = tuple(ignore)
    used = {i for pair in qubit_map for i in pair} | set(ignore)
    nq = len(qubit_map)
    blocks: dict[Occupation, np.ndarray] = {}
    for occ, amp in state.terms.items():
        if any(occ[i] for i in range(len(occ)) if i not in used):
            raise EncodingError(f"photon outside the qubit modes: {state.describe(occ)}")
        index = 0
        for h, v in qubit_map:
            if occ[h] + occ[v] != 1:
                raise EncodingError(f"qubit rail pair ({h}, {v}) not singly occupied in {state.describe(occ)}")
            index = 2 * index + occ[h]
        key = tuple(occ[i] for i in ignore)
        vec = blocks.setdefault(key, np.zeros(2**nq, dtype=complex))
        vec[index] += amp
    if not blocks:
        raise EncodingError("empty state has no qubit encoding")
    if len(blocks) == 1:
        (vec,) = blocks.values()
        return vec / np.linalg.norm(vec)
    rho = sum(np.outer(v, v.conj()) for v in blocks.values())
    return rho / np.trace(rho).real
