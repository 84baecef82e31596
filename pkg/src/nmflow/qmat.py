"""Dense complex-matrix kernel.

Every function accepts stacked inputs: trailing two axes are the matrix,
any leading axes are treated as a batch. Dimensions here are tiny (2 to 16),
so everything is plain dense numpy.
"""

from __future__ import annotations

from functools import reduce
from typing import NamedTuple, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
ISOMETRY_TOL = 1e-10
CLAMP_TOL = 1e-12

_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


class HermitianSpectrum(NamedTuple):
    eigenvalues: np.ndarray  # descending along the last axis
    eigenvectors: np.ndarray  # columns, matching eigenvalue order


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def hermitian_residual(m: np.ndarray) -> float:
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    return float(np.max(np.abs(m - dagger(m))))


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + dagger(m))


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of two or more matrices (or vectors)."""
    if not ops:
        raise ValueError("tensor needs at least one operand")
    return reduce(np.kron, [np.asarray(op) for op in ops])


def _check_dims(n: int, dims: Sequence[int]) -> None:
    if int(np.prod(dims)) != n:
        raise ValueError(f"subsystem dims {list(dims)} do not multiply to matrix size {n}")


def partial_trace(m: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduce ``m`` onto the subsystems listed in ``keep``.

    ``dims`` gives the dimension of each tensor factor in order. The kept
    factors stay in their original relative order, whatever order ``keep``
    lists them in.
    """
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ValueError(f"partial_trace needs square matrices, got shape {m.shape}")
    dims = [int(d) for d in dims]
    _check_dims(m.shape[-1], dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValueError(f"keep={keep} out of range for dims {dims}")
    n = len(dims)
    batch = m.shape[:-2]
    t = m.reshape(batch + tuple(dims) + tuple(dims))
    row = list(_LETTERS[:n])
    col = [row[i] if i not in keep else _LETTERS[n + i] for i in range(n)]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    spec = "..." + "".join(row) + "".join(col) + "->..." + "".join(out)
    d_keep = int(np.prod([dims[i] for i in keep])) if keep else 1
    return np.einsum(spec, t).reshape(batch + (d_keep, d_keep))


def reduced_from_ket(psi: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrix of the pure state ``psi`` on ``keep``."""
    psi = np.asarray(psi)
    dims = [int(d) for d in dims]
    _check_dims(psi.shape[-1], dims)
    keep = sorted(set(int(k) for k in keep))
    rest = [i for i in range(len(dims)) if i not in keep]
    batch = psi.shape[:-1]
    t = psi.reshape(batch + tuple(dims))
    nb = len(batch)
    t = np.moveaxis(t, [nb + i for i in keep], list(range(nb, nb + len(keep))))
    d_keep = int(np.prod([dims[i] for i in keep])) if keep else 1
    d_rest = int(np.prod([dims[i] for i in rest])) if rest else 1
    t = t.reshape(batch + (d_keep, d_rest))
    return t @ dagger(t)


def hermitian_eig(m: np.ndarray, tol: float = HERMITIAN_TOL) -> HermitianSpectrum:
    m = np.asarray(m)
    res = hermitian_residual(m)
    if res > tol:
        raise ValueError(f"matrix is not Hermitian (max |M - M^dag| = {res:.3e} > {tol:g})")
    w, v = np.linalg.eigh(symmetrize(m))
    return HermitianSpectrum(w[..., ::-1], v[..., ::-1])


def _eigvalsh_2x2(m: np.ndarray) -> np.ndarray:
    a = np.real(m[..., 0, 0])
    d = np.real(m[..., 1, 1])
    b = m[..., 0, 1]
    half_tr = 0.5 * (a + d)
    radius = np.hypot(0.5 * (a - d), np.abs(b))
    return np.stack([half_tr + radius, half_tr - radius], axis=-1)


def eigvalsh(m: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Eigenvalues only, descending."""
    m = np.asarray(m)
    res = hermitian_residual(m)
    if res > tol:
        raise ValueError(f"matrix is not Hermitian (max |M - M^dag| = {res:.3e} > {tol:g})")
    m = symmetrize(m)
    if m.shape[-1] == 2:
        return _eigvalsh_2x2(m)
    return np.linalg.eigvalsh(m)[..., ::-1]


def clamp_spectrum(w: np.ndarray, tol: float = CLAMP_TOL) -> np.ndarray:
    """Zero out roundoff negatives; anything below ``-tol`` is a real error."""
    w = np.asarray(w, dtype=float)
    if w.size and w.min() < -tol:
        raise ValueError(f"eigenvalue {w.min():.3e} is negative beyond roundoff ({tol:g})")
    return np.clip(w, 0.0, None)


def trace_norm(m: np.ndarray) -> np.ndarray | float:
    w = eigvalsh(m)
    out = np.abs(w).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def conjugate_by(u: np.ndarray, m: np.ndarray, tol: float = ISOMETRY_TOL) -> np.ndarray:
    """Return ``u @ m @ u^dag``; ``u`` may be a rectangular isometry."""
    u = np.asarray(u)
    m = np.asarray(m)
    if u.shape[-1] != m.shape[-2]:
        raise ValueError(f"shapes {u.shape} and {m.shape} are not compatible")
    gram = dagger(u) @ u
    err = float(np.max(np.abs(gram - np.eye(u.shape[-1]))))
    if err > tol:
        raise ValueError(f"operator is not an isometry (max |U^dag U - I| = {err:.3e})")
    return u @ m @ dagger(u)
