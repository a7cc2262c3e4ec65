"""Projective polarization measurements and count sampling.

Outcome ordering for an n-qubit setting is lexicographic over qubits
(control, target 1, target 2) with the ``+`` outcome first, so index
``0`` is ``(+,+,+)`` and index ``7`` is ``(-,-,-)``.  ``+`` is D for X, R for
Y and H for Z.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .circuit import A, D, H, L, R, V, pol_to_logical

SeedLike = Union[int, np.random.Generator, np.random.SeedSequence, None]


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class QubitBasis:
    """Orthonormal polarization pair; ``plus`` and ``minus`` are ``(H, V)`` vectors."""

    name: str
    plus: np.ndarray
    minus: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.plus, dtype=complex)
        w = np.asarray(self.minus, dtype=complex)
        gram = np.array([[np.vdot(u, u), np.vdot(u, w)], [np.vdot(w, u), np.vdot(w, w)]])
        if np.abs(gram - np.eye(2)).max() > 1e-10:
            raise ValueError(f"basis {self.name!r} is not orthonormal")
        object.__setattr__(self, "plus", u)
        object.__setattr__(self, "minus", w)

    def logical_vectors(self) -> tuple[np.ndarray, np.ndarray]:
        return pol_to_logical(self.plus), pol_to_logical(self.minus)

    def observable(self) -> np.ndarray:
        """``|+><+| - |-><-|`` in the logical basis."""
        p, m = self.logical_vectors()
        return np.outer(p, p.conj()) - np.outer(m, m.conj())


X = QubitBasis("X", D, A)
Y = QubitBasis("Y", R, L)
Z = QubitBasis("Z", H, V)
PAULI = {"X": X, "Y": Y, "Z": Z}


def custom_basis(name: str, plus, minus) -> QubitBasis:
    return QubitBasis(name, np.asarray(plus, dtype=complex), np.asarray(minus, dtype=complex))


@dataclass(frozen=True)
class BasisSetting:
    bases: tuple[QubitBasis, ...]

    @classmethod
    def from_name(cls, name: str) -> "BasisSetting":
        try:
            return cls(tuple(PAULI[ch] for ch in name))
        except KeyError:
            raise ValueError(f"setting name {name!r} must use X, Y, Z only") from None

    @property
    def name(self) -> str:
        return "".join(b.name for b in self.bases)

    @property
    def n_qubits(self) -> int:
        return len(self.bases)

    def outcome_vectors(self) -> np.ndarray:
        """Row ``k`` is the logical product vector of outcome ``k``."""
        per_qubit = [b.logical_vectors() for b in self.bases]
        rows = []
        for choice in itertools.product((0, 1), repeat=self.n_qubits):
            v = np.array([1.0 + 0j])
            for (p, m), c in zip(per_qubit, choice):
                v = np.kron(v, m if c else p)
            rows.append(v)
        return np.array(rows)

    def outcome_labels(self) -> list[str]:
        return ["".join(s) for s in itertools.product("+-", repeat=self.n_qubits)]


def tomography_settings(n_qubits: int = 3) -> list[BasisSetting]:
    return [BasisSetting.from_name("".join(p)) for p in itertools.product("XYZ", repeat=n_qubits)]


def outcome_probs(rho: np.ndarray, setting: BasisSetting) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    dim = 2**setting.n_qubits
    if rho.shape != (dim, dim):
        raise ValueError(f"density matrix shape {rho.shape} does not match a {setting.n_qubits}-qubit setting")
    vecs = setting.outcome_vectors()
    p = np.einsum("ki,ij,kj->k", vecs.conj(), rho, vecs).real
    p[p < 0] = 0.0
    return p / p.sum()


def svetlichny_settings() -> dict[str, QubitBasis]:
    """Measurement bases a, a', b, b', c, c' for the Svetlichny test."""
    w1 = np.exp(3j * np.pi / 4)
    w2 = np.exp(1j * np.pi / 4)
    s = 1 / np.sqrt(2)
    sv1 = custom_basis("Sv1", s * np.array([1, w1]), s * np.array([1, -w1]))
    sv2 = custom_basis("Sv2", s * np.array([1, w2]), s * np.array([1, -w2]))
    return {"a": sv1, "a'": sv2, "b": Y, "b'": X, "c": X, "c'": Y}


def mermin_settings() -> dict[str, QubitBasis]:
    return {"a": X, "b": X, "c": X, "a'": Y, "b'": Y, "c'": Y}


@dataclass(frozen=True)
class CountRecord:
    setting: BasisSetting
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (2**self.setting.n_qubits,):
            raise ValueError("one count per outcome is required")
        if (counts < 0).any():
            raise ValueError("counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def sample_counts(probs, n_events: int, seed: SeedLike, setting: BasisSetting = None) -> CountRecord:
    """Multinomial draw of ``n_events`` over the outcomes."""
    probs = np.clip(np.asarray(probs, dtype=float), 0, None)
    probs = probs / probs.sum()
    rng = as_generator(seed)
    counts = rng.multinomial(int(n_events), probs) if n_events > 0 else np.zeros(len(probs), dtype=np.int64)
    if setting is None:
        setting = BasisSetting.from_name("Z" * int(np.log2(len(probs))))
    return CountRecord(setting, counts)


def split_budget(total: int, n_settings: int) -> list[int]:
    """Equal share per setting; the remainder goes to the first settings."""
    base, extra = divmod(int(total), n_settings)
    return [base + (1 if i < extra else 0) for i in range(n_settings)]


def sample_records(rho: np.ndarray, settings: Sequence[BasisSetting], total: int, seed: SeedLike) -> list[CountRecord]:
    rng = as_generator(seed)
    return [
        sample_counts(outcome_probs(rho, s), n, rng, s)
        for s, n in zip(settings, split_budget(total, len(settings)))
    ]


def exact_records(rho: np.ndarray, settings: Sequence[BasisSetting], per_setting: float) -> list[tuple[BasisSetting, np.ndarray]]:
    """Expected (non-integer) counts; useful for asymptotic checks."""
    return [(s, per_setting * outcome_probs(rho, s)) for s in settings]


# -- serialization -----------------------------------------------------------------


def _setting_to_json(setting: BasisSetting) -> dict:
    return {
        "name": setting.name,
        "bases": [
            {"name": b.name, "plus": [[z.real, z.imag] for z in b.plus], "minus": [[z.real, z.imag] for z in b.minus]}
            for b in setting.bases
        ],
    }


def _setting_from_json(obj: dict) -> BasisSetting:
    bases = []
    for b in obj["bases"]:
        if b["name"] in PAULI:
            bases.append(PAULI[b["name"]])
        else:
            plus = np.array([complex(re, im) for re, im in b["plus"]])
            minus = np.array([complex(re, im) for re, im in b["minus"]])
            bases.append(custom_basis(b["name"], plus, minus))
    return BasisSetting(tuple(bases))


def records_to_json(records: Iterable[CountRecord]) -> str:
    rows = [{"setting": _setting_to_json(r.setting), "counts": [int(c) for c in r.counts]} for r in records]
    return json.dumps({"outcome_order": "lexicographic, '+' first, qubits (C, T1, T2)", "records": rows}, indent=1)


def records_from_json(text: str) -> list[CountRecord]:
    obj = json.loads(text)
    return [CountRecord(_setting_from_json(r["setting"]), np.array(r["counts"])) for r in obj["records"]]


def records_to_csv(records: Iterable[CountRecord]) -> str:
    records = list(records)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    n = records[0].setting.n_qubits if records else 3
    writer.writerow(["setting"] + ["".join(s) for s in itertools.product("+-", repeat=n)])
    for r in records:
        writer.writerow([r.setting.name] + [int(c) for c in r.counts])
    return buf.getvalue()


def records_from_csv(text: str) -> list[CountRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    return [CountRecord(BasisSetting.from_name(row[0]), np.array([int(x) for x in row[1:]])) for row in rows[1:]]
