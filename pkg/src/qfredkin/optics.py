"""Jones matrices and mode-coupling transforms for the gate's optical elements.

Conventions (fixed once, used everywhere):

* polarization vectors are ``(H, V)``;
* wave plates retard the slow axis by ``-i`` (QWP) or ``-1`` (HWP), so that
  ``qwp(45)`` sends ``H`` to ``R = (H + iV)/sqrt2`` and ``qwp(t) @ qwp(t) == hwp(t)``;
* the NPBS is symmetric, transmission ``1/sqrt2`` and reflection ``i/sqrt2``;
* the PBS transmits ``H`` and reflects ``V`` with amplitude ``i``.

Four-mode elements use the mode order ``(a_H, a_V, b_H, b_V)`` for input
ports ``a`` and ``b``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .fock import ElementTransform, ModeRegistry

SQRT1_2 = 1 / np.sqrt(2)


@dataclass(frozen=True)
class WavePlateSetting:
    kind: Literal["HWP", "QWP"]
    angle_deg: float

    def __post_init__(self):
        if self.kind not in ("HWP", "QWP"):
            raise ValueError(f"unknown wave plate {self.kind!r}")
        object.__setattr__(self, "angle_deg", float(self.angle_deg) % 180.0)

    def matrix(self) -> np.ndarray:
        return hwp(self.angle_deg) if self.kind == "HWP" else qwp(self.angle_deg)


@dataclass(frozen=True)
class PhaseSetting:
    """Compensating phase from a tilted HWP; ``tilt_deg`` is informational only."""

    theta: float
    tilt_deg: Optional[float] = None

    def __post_init__(self):
        if not np.isfinite(self.theta):
            raise ValueError("phase must be finite")

    def matrix(self) -> np.ndarray:
        return phase_shift(self.theta)


def hwp(angle_deg: float) -> np.ndarray:
    t = 2 * np.deg2rad(angle_deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, s], [s, -c]], dtype=complex)


def qwp(angle_deg: float) -> np.ndarray:
    t = np.deg2rad(angle_deg)
    c, s = np.cos(t), np.sin(t)
    return np.array(
        [[c * c - 1j * s * s, (1 + 1j) * s * c], [(1 + 1j) * s * c, s * s - 1j * c * c]],
        dtype=complex,
    )


def phase_shift(theta) -> np.ndarray:
    if isinstance(theta, PhaseSetting):
        theta = theta.theta
    return np.diag([1.0, np.exp(1j * theta)]).astype(complex)


def pbs() -> np.ndarray:
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = m[2, 2] = 1.0
    m[3, 1] = m[1, 3] = 1j
    return m


def npbs() -> np.ndarray:
    bs = SQRT1_2 * np.array([[1, 1j], [1j, 1]], dtype=complex)
    # (a_H, a_V, b_H, b_V) = port-major, polarization-minor
    return np.kron(bs, np.eye(2))


def beam_displacer() -> np.ndarray:
    """Route ``V`` of port ``a`` into port ``b`` (and back); ``H`` stays put."""
    m = np.eye(4, dtype=complex)
    m[[1, 3]] = m[[3, 1]]
    return m


def polarization_unitary(target) -> np.ndarray:
    """A unitary whose first column is the normalized ``target`` (H -> target)."""
    a, b = np.asarray(target, dtype=complex) / np.linalg.norm(target)
    return np.array([[a, -np.conj(b)], [b, np.conj(a)]], dtype=complex)


# -- placing elements on a registry -------------------------------------------


def _ports(reg: ModeRegistry, a: str, b: str) -> tuple[int, ...]:
    return reg.path_modes(a) + reg.path_modes(b)


def on_path(reg: ModeRegistry, path: str, jones) -> ElementTransform:
    return ElementTransform(reg.path_modes(path), jones)


def pbs_on(reg: ModeRegistry, a: str, b: str) -> ElementTransform:
    return ElementTransform(_ports(reg, a, b), pbs())


def npbs_on(reg: ModeRegistry, a: str, b: str) -> ElementTransform:
    return ElementTransform(_ports(reg, a, b), npbs())


def displacer_on(reg: ModeRegistry, a: str, b: str) -> ElementTransform:
    return ElementTransform(_ports(reg, a, b), beam_displacer())


def path_phase_on(reg: ModeRegistry, path: str, theta: float) -> ElementTransform:
    """Common phase on both polarizations of one path (a path-length change)."""
    return ElementTransform(reg.path_modes(path), np.exp(1j * theta) * np.eye(2))
