"""Dense complex linear algebra for small Hilbert spaces.

Everything here operates on plain numpy arrays of shape (d, d) with d a
small power of two (2, 4, 16 in practice).  The basis ordering convention
is fixed package-wide: tensor factors multiply left-to-right with the
left factor as the slow index, so a two-qubit basis reads
|00>, |01>, |10>, |11>.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "JacobiConvergenceError",
    "tensor",
    "embed",
    "dagger",
    "symmetrize",
    "hermitian_eig",
    "partial_transpose",
    "partial_trace",
    "trace_distance",
]

HERMITICITY_TOL = 1e-10
JACOBI_OFF_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


class JacobiConvergenceError(RuntimeError):
    """Raised when the cyclic Jacobi sweep budget is exhausted."""


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(m.T)


def _check_square(m, name="matrix"):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def tensor(*ops) -> np.ndarray:
    """Kronecker product of one or more operators, left factor slow."""
    if not ops:
        raise ValueError("tensor requires at least one operator")
    out = _check_square(ops[0], "factor 0")
    for i, op in enumerate(ops[1:], start=1):
        out = np.kron(out, _check_square(op, f"factor {i}"))
    return out


def embed(op: np.ndarray, position: int, dims: tuple[int, ...]) -> np.ndarray:
    """Place ``op`` at tensor ``position``, identities elsewhere.

    ``op`` may span several adjacent factors; its dimension must equal the
    product of dims[position:position+k] for some k.
    """
    op = _check_square(op, "op")
    d = op.shape[0]
    span = 1
    prod = dims[position]
    while prod < d:
        span += 1
        if position + span > len(dims):
            raise ValueError(f"op of dim {d} does not fit at position {position} of {dims}")
        prod *= dims[position + span - 1]
    if prod != d:
        raise ValueError(f"op of dim {d} does not align with factors {dims}")
    left = int(np.prod(dims[:position], dtype=int))
    right = int(np.prod(dims[position + span:], dtype=int))
    return tensor(np.eye(left), op, np.eye(right))


def symmetrize(m: np.ndarray, tol: float = HERMITICITY_TOL) -> np.ndarray:
    """Return (m + m^dag)/2, rejecting inputs that are not Hermitian within tol."""
    m = _check_square(m)
    asym = np.max(np.abs(m - dagger(m)))
    if asym > tol:
        raise ValueError(f"matrix is not Hermitian: max asymmetry {asym:.3e} exceeds {tol:.1e}")
    return (m + dagger(m)) / 2


def _off_norm(a: np.ndarray) -> float:
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def hermitian_eig(
    m: np.ndarray,
    tol: float = JACOBI_OFF_TOL,
    max_sweeps: int = JACOBI_MAX_SWEEPS,
) -> tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors) with eigenvalues real and sorted in
    descending order and eigenvectors as the matching orthonormal columns.
    The input is symmetrized first; asymmetry beyond 1e-10 is rejected.

    The sweep loop annihilates each off-diagonal element in turn with a
    complex plane rotation.  For the 2x2 block [[alpha, beta], [conj(beta),
    gamma]] with beta = r e^{i phi}, the rotation
        tau = (alpha - gamma) / (2 r)
        t   = sign(tau) / (|tau| + sqrt(tau^2 + 1))
        c   = 1 / sqrt(1 + t^2),  s = t c e^{-i phi}
    applied as G[p,p] = G[q,q] = c, G[q,p] = s, G[p,q] = -conj(s) zeroes the
    (p, q) entry.  Convergence is declared when the off-diagonal Frobenius
    mass drops below ``tol``; exhausting ``max_sweeps`` raises.
    """
    a = symmetrize(m)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    eps = np.finfo(float).eps
    for _ in range(max_sweeps):
        if _off_norm(a) < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                r = abs(a[p, q])
                app = a[p, p].real
                aqq = a[q, q].real
                # Entries already negligible against the convergence target
                # (or against the local diagonal scale) are zeroed outright;
                # rotating on them risks overflow in tau for denormal r.
                if r <= max(tol / (4 * n), eps * max(abs(app), abs(aqq))):
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                phase = a[p, q] / r
                tau = (app - aqq) / (2 * r)
                if tau != 0.0:
                    t = np.sign(tau) / (abs(tau) + np.hypot(tau, 1.0))
                else:
                    t = 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c * np.conj(phase)
                # a <- G^dag a G and v <- v G, touching only rows/cols p, q.
                row_p = c * a[p, :] + np.conj(s) * a[q, :]
                row_q = -s * a[p, :] + c * a[q, :]
                a[p, :] = row_p
                a[q, :] = row_q
                col_p = c * a[:, p] + s * a[:, q]
                col_q = -np.conj(s) * a[:, p] + c * a[:, q]
                a[:, p] = col_p
                a[:, q] = col_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vcol_p = c * v[:, p] + s * v[:, q]
                vcol_q = -np.conj(s) * v[:, p] + c * v[:, q]
                v[:, p] = vcol_p
                v[:, q] = vcol_q
    else:
        residual = _off_norm(a)
        if residual >= tol:
            raise JacobiConvergenceError(
                f"Jacobi sweeps exhausted ({max_sweeps}) with off-diagonal mass {residual:.3e}"
            )
    vals = np.diag(a).real.copy()
    order = np.argsort(vals)[::-1]
    return vals[order], v[:, order]


def partial_transpose(rho: np.ndarray, subsystem: int, dims: tuple[int, ...] = (2, 2)) -> np.ndarray:
    """Transpose on one tensor factor of a multipartite operator."""
    rho = _check_square(rho, "rho")
    k = len(dims)
    if int(np.prod(dims, dtype=int)) != rho.shape[0]:
        raise ValueError(f"dims {dims} do not multiply to matrix dim {rho.shape[0]}")
    if not 0 <= subsystem < k:
        raise ValueError(f"subsystem {subsystem} out of range for {k} factors")
    t = rho.reshape(dims + dims)
    t = np.swapaxes(t, subsystem, k + subsystem)
    return t.reshape(rho.shape)


def partial_trace(rho: np.ndarray, keep, dims: tuple[int, ...]) -> np.ndarray:
    """Trace out all tensor factors not listed in ``keep`` (order preserved)."""
    rho = _check_square(rho, "rho")
    k = len(dims)
    if int(np.prod(dims, dtype=int)) != rho.shape[0]:
        raise ValueError(f"dims {dims} do not multiply to matrix dim {rho.shape[0]}")
    keep = tuple(keep)
    if any(not 0 <= i < k for i in keep) or len(set(keep)) != len(keep):
        raise ValueError(f"invalid keep set {keep} for {k} factors")
    t = rho.reshape(dims + dims)
    traced = 0
    for i in range(k):
        if i in keep:
            continue
        axis = i - traced
        nleft = k - traced
        t = np.trace(t, axis1=axis, axis2=axis + nleft)
        traced += 1
    d = int(np.prod([dims[i] for i in keep], dtype=int)) if keep else 1
    return t.reshape(d, d)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """(1/2) sum |eigenvalues(rho - sigma)| for Hermitian rho, sigma."""
    rho = _check_square(rho, "rho")
    sigma = _check_square(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise ValueError(f"shape mismatch {rho.shape} vs {sigma.shape}")
    vals, _ = hermitian_eig(rho - sigma)
    return float(0.5 * np.sum(np.abs(vals)))
