"""Density matrices, Bloch-ball qubit states and purifications.

Subsystems are always ordered S (system), A (apparatus), E (environment).
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .qmat import HERMITIAN_TOL, hermitian_eig, hermitian_residual

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])

BLOCH_TOL = 1e-12


class Violation(NamedTuple):
    invariant: str
    magnitude: float


def ket(*amplitudes: complex) -> np.ndarray:
    v = np.asarray(amplitudes, dtype=complex)
    return v / np.linalg.norm(v)


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return psi[..., :, None] * np.conj(psi[..., None, :])


def bell_state() -> np.ndarray:
    """|Phi+><Phi+| on two qubits."""
    return projector(ket(1, 0, 0, 1))


def bloch_to_density(r: Sequence[float] | np.ndarray) -> np.ndarray:
    """(I + r.sigma)/2 for a Bloch vector, or a stack of them (shape (..., 3))."""
    r = np.asarray(r, dtype=float)
    if r.shape[-1] != 3:
        raise ValueError(f"Bloch vectors have 3 components, got shape {r.shape}")
    norm = np.linalg.norm(r, axis=-1)
    if np.any(norm > 1 + BLOCH_TOL):
        raise ValueError(f"Bloch vector norm {np.max(norm):.6g} exceeds 1")
    return 0.5 * (I2 + np.einsum("...i,ijk->...jk", r, PAULIS))


def density_to_bloch(rho: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("...jk,ikj->...i", rho, PAULIS))


def purification_ket(rho: np.ndarray) -> np.ndarray:
    """sum_i sqrt(l_i) |v_i> (x) |i>, eigenvalues taken in descending order."""
    w, v = hermitian_eig(rho)
    w = np.clip(w, 0.0, None)
    d = rho.shape[-1]
    psi = np.einsum("...i,...ai->...ai", np.sqrt(w), v)  # psi[a, i]
    return psi.reshape(rho.shape[:-2] + (d * d,))


def purify(rho: np.ndarray) -> np.ndarray:
    """Canonical purification of ``rho``; the ancilla is the second factor."""
    return projector(purification_ket(rho))


def pure_sa_ket(r: Sequence[float] | np.ndarray) -> np.ndarray:
    """Pure S(x)A ket whose A-marginal has Bloch vector ``r``.

    S plays the purifying role, so the canonical purification is transposed
    into S(x)A order.
    """
    rho_a = bloch_to_density(r)
    psi = purification_ket(rho_a)
    batch = psi.shape[:-1]
    psi = psi.reshape(batch + (2, 2))  # [a, s]
    return np.swapaxes(psi, -1, -2).reshape(batch + (4,))


def pure_sa_from_bloch(r: Sequence[float] | np.ndarray) -> np.ndarray:
    return projector(pure_sa_ket(r))


def spherical_to_bloch(radius, theta, phi) -> np.ndarray:
    radius, theta, phi = np.broadcast_arrays(*(np.asarray(x, float) for x in (radius, theta, phi)))
    return np.stack(
        [
            radius * np.sin(theta) * np.cos(phi),
            radius * np.sin(theta) * np.sin(phi),
            radius * np.cos(theta),
        ],
        axis=-1,
    )


def validate(rho: np.ndarray, tol: float = HERMITIAN_TOL) -> list[Violation]:
    """List every density-matrix invariant that ``rho`` breaks (empty if valid)."""
    rho = np.asarray(rho)
    report: list[Violation] = []
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return [Violation("square", float("inf"))]
    herm = hermitian_residual(rho)
    if herm > tol:
        report.append(Violation("hermitian", herm))
    tr = abs(np.trace(rho) - 1.0)
    if tr > tol:
        report.append(Violation("unit_trace", float(tr)))
    wmin = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    if wmin < -tol:
        report.append(Violation("positivity", -wmin))
    return report


def check_density(rho: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    report = validate(rho, tol)
    if report:
        desc = ", ".join(f"{v.invariant}={v.magnitude:.3e}" for v in report)
        raise ValueError(f"not a density matrix: {desc}")


def is_pure(rho: np.ndarray, tol: float = 1e-10) -> bool:
    return abs(float(np.real(np.trace(rho @ rho))) - 1.0) <= tol


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_pure(d: int, rng: np.random.Generator) -> np.ndarray:
    psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return psi / np.linalg.norm(psi)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random mixed state from a Ginibre matrix of the given rank (default full)."""
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_bloch(rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform samples from the Bloch ball."""
    n = 1 if size is None else size
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    v *= rng.random((n, 1)) ** (1 / 3)
    return v[0] if size is None else v


__all__ = [
    "I2",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "Violation",
    "bell_state",
    "bloch_to_density",
    "check_density",
    "density_to_bloch",
    "is_pure",
    "ket",
    "projector",
    "pure_sa_from_bloch",
    "pure_sa_ket",
    "purification_ket",
    "purify",
    "random_bloch",
    "random_density",
    "random_pure",
    "random_unitary",
    "spherical_to_bloch",
    "validate",
]
