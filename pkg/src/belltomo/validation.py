"""Input validation helpers shared by the estimators and the pipeline."""

from __future__ import annotations

import numpy as np

from .linalg import dagger, hermitian_eig

__all__ = [
    "check_square_matrix",
    "check_hermitian",
    "check_density_matrix",
    "check_ket",
    "check_axis",
    "check_sign",
    "check_stage",
    "check_projector_completeness",
]

STAGES = ("P", "R")


def check_square_matrix(m, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def check_hermitian(m, tol: float = 1e-10, name: str = "matrix") -> np.ndarray:
    m = check_square_matrix(m, name)
    asym = np.max(np.abs(m - dagger(m)))
    if asym > tol:
        raise ValueError(f"{name} is not Hermitian within {tol:.1e} (asymmetry {asym:.3e})")
    return (m + dagger(m)) / 2


def check_density_matrix(rho, tol: float = 1e-8, name: str = "state") -> np.ndarray:
    """Validate Hermiticity, unit trace, and positivity; return symmetrized copy."""
    rho = check_hermitian(rho, tol=max(tol, 1e-10), name=name)
    tr = np.trace(rho).real
    if abs(tr - 1) > tol:
        raise ValueError(f"{name} trace is {tr:.6f}, expected 1 within {tol:.1e}")
    vals, _ = hermitian_eig(rho)
    if vals[-1] < -tol:
        raise ValueError(f"{name} has negative eigenvalue {vals[-1]:.3e}")
    return rho


def check_ket(v, name: str = "ket") -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if v.ndim != 1 or v.size < 2:
        raise ValueError(f"{name} must be a 1-d amplitude vector, got shape {v.shape}")
    norm = np.linalg.norm(v)
    if abs(norm - 1) > 1e-12:
        raise ValueError(f"{name} norm is {norm:.12f}, expected 1 within 1e-12")
    return v


def check_axis(axis, name: str = "axis") -> str:
    if axis not in ("X", "Y", "Z"):
        raise ValueError(f"{name} must be one of X, Y, Z, got {axis!r}")
    return axis


def check_sign(sign, name: str = "sign") -> int:
    if sign not in (+1, -1):
        raise ValueError(f"{name} must be +1 or -1, got {sign!r}")
    return int(sign)


def check_stage(stage) -> str:
    if stage not in STAGES:
        raise ValueError(f"stage must be 'P' or 'R', got {stage!r}")
    return stage


def check_projector_completeness(projectors, dim: int, tol: float = 1e-10):
    """Require the projector set to resolve the identity on a dim-d space."""
    mats = [check_square_matrix(p, f"projector {i}") for i, p in enumerate(projectors)]
    if any(p.shape != (dim, dim) for p in mats):
        raise ValueError(f"projectors must all be {dim}x{dim}")
    total = sum(mats)
    if np.max(np.abs(total - np.eye(dim))) > tol:
        raise ValueError("projector set does not sum to the identity")
    return mats
