"""Canonical kets, Pauli observables, Bell basis, and preparation bases."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "AXES",
    "PAULI",
    "BELL_NAMES",
    "KET_0",
    "KET_1",
    "canonical_phase",
    "bloch_to_ket",
    "ket_to_dm",
    "pauli",
    "pauli_projector",
    "bell_state",
    "bell_projectors",
    "bell_index_from_name",
    "PreparationBasis",
    "pbr_default_bases",
]

AXES = ("X", "Y", "Z")

PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# Bell basis order is fixed: index 0..3 <-> PhiPlus, PhiMinus, PsiPlus, PsiMinus.
BELL_NAMES = ("PhiPlus", "PhiMinus", "PsiPlus", "PsiMinus")

KET_0 = np.array([1, 0], dtype=complex)
KET_1 = np.array([0, 1], dtype=complex)

_PHASE_TOL = 1e-12


def canonical_phase(ket: np.ndarray) -> np.ndarray:
    """Fix the global phase so the first non-negligible amplitude is real >= 0."""
    ket = np.asarray(ket, dtype=complex)
    for amp in ket:
        if abs(amp) > _PHASE_TOL:
            return ket * (np.conj(amp) / abs(amp))
    return ket


def bloch_to_ket(theta: float, phi: float) -> np.ndarray:
    """cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>, canonical global phase."""
    ket = np.array(
        [np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)], dtype=complex
    )
    return canonical_phase(ket)


def ket_to_dm(ket: np.ndarray) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, np.conj(ket))


def pauli(axis: str) -> np.ndarray:
    try:
        return PAULI[axis]
    except KeyError:
        raise ValueError(f"unknown Pauli axis {axis!r}, expected one of {AXES}") from None


def pauli_projector(axis: str, sign: int) -> np.ndarray:
    """Rank-1 projector onto the +1 or -1 eigenvector of the named Pauli."""
    if sign not in (+1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")
    return (np.eye(2, dtype=complex) + sign * pauli(axis)) / 2


def bell_state(n: int) -> np.ndarray:
    """Bell ket by index: 0 PhiPlus, 1 PhiMinus, 2 PsiPlus, 3 PsiMinus."""
    s = 1 / np.sqrt(2)
    if n == 0:
        return np.array([s, 0, 0, s], dtype=complex)
    if n == 1:
        return np.array([s, 0, 0, -s], dtype=complex)
    if n == 2:
        return np.array([0, s, s, 0], dtype=complex)
    if n == 3:
        return np.array([0, s, -s, 0], dtype=complex)
    raise ValueError(f"Bell index must be 0..3, got {n!r}")


def bell_projectors() -> tuple[np.ndarray, ...]:
    return tuple(ket_to_dm(bell_state(n)) for n in range(4))


def bell_index_from_name(name: str) -> int:
    try:
        return BELL_NAMES.index(name)
    except ValueError:
        raise ValueError(
            f"unknown Bell outcome {name!r}, expected one of {BELL_NAMES}"
        ) from None


@dataclass(frozen=True)
class PreparationBasis:
    """An orthonormal single-qubit basis whose members carry labels 1 and 2."""

    kets: tuple[np.ndarray, np.ndarray]
    name: str = "custom"

    def __post_init__(self):
        a, b = (np.asarray(k, dtype=complex) for k in self.kets)
        if a.shape != (2,) or b.shape != (2,):
            raise ValueError("preparation basis kets must have dimension 2")
        for k in (a, b):
            if abs(np.linalg.norm(k) - 1) > 1e-12:
                raise ValueError("preparation basis kets must be unit norm")
        if abs(np.vdot(a, b)) > 1e-12:
            raise ValueError("preparation basis kets must be orthogonal")
        object.__setattr__(self, "kets", (a, b))

    def ket(self, label: int) -> np.ndarray:
        if label not in (1, 2):
            raise ValueError(f"preparation label must be 1 or 2, got {label!r}")
        return self.kets[label - 1]

    def projector(self, label: int) -> np.ndarray:
        return ket_to_dm(self.ket(label))

    @classmethod
    def z_basis(cls) -> "PreparationBasis":
        return cls((KET_0, KET_1), name="Z")

    @classmethod
    def from_bloch(cls, theta: float, phi: float) -> "PreparationBasis":
        """Basis of the Bloch direction (theta, phi) and its antipode."""
        return cls(
            (bloch_to_ket(theta, phi), bloch_to_ket(np.pi - theta, phi + np.pi)),
            name=f"bloch({theta:.6g},{phi:.6g})",
        )


def pbr_default_bases() -> tuple[PreparationBasis, PreparationBasis]:
    """The two preparation bases of the two-source variant.

    Basis 0 is (|0>, |1>) and basis 1 is (|+>, |->); label 1 marks the
    nominal state of each basis and label 2 its orthogonal complement.
    """
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    minus = np.array([1, -1], dtype=complex) / np.sqrt(2)
    return (
        PreparationBasis((KET_0, KET_1), name="computational"),
        PreparationBasis((plus, minus), name="diagonal"),
    )
