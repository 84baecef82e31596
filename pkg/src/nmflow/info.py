"""Entropic and distance quantities, all in bits (log base 2).

Functions broadcast over leading axes wherever that is cheap, so a whole
time series of reduced states can be pushed through in one call.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .qmat import clamp_spectrum, dagger, eigvalsh, partial_trace, trace_norm
from .states import PAULIS, SIGMA_Y

_YY = np.kron(SIGMA_Y, SIGMA_Y)
RANK_TOL = 1e-13  # eigenvalues treated as exact zeros in the concurrence factor


def _entropy_of_spectrum(w: np.ndarray) -> np.ndarray:
    w = clamp_spectrum(w)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > 0, -w * np.log2(np.where(w > 0, w, 1.0)), 0.0)
    return terms.sum(axis=-1)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def entropy(rho: np.ndarray):
    """Von Neumann entropy -Tr rho log2 rho."""
    return _scalar(_entropy_of_spectrum(eigvalsh(rho)))


def binary_entropy(x):
    x = np.asarray(x, dtype=float)
    return _scalar(_entropy_of_spectrum(np.stack([x, 1.0 - x], axis=-1)))


def mutual_information(rho: np.ndarray, dims: Sequence[int] = (2, 2)):
    """S(X) + S(Y) - S(XY) for a bipartite state."""
    if len(dims) != 2:
        raise ValueError(f"mutual_information needs two subsystems, got dims {list(dims)}")
    sx = entropy(partial_trace(rho, dims, [0]))
    sy = entropy(partial_trace(rho, dims, [1]))
    return sx + sy - entropy(rho)


def conditional_mutual_information(rho: np.ndarray, dims: Sequence[int]):
    """S(X:Y|Z) = S(XZ) + S(YZ) - S(Z) - S(XYZ)."""
    if len(dims) != 3:
        raise ValueError(f"conditional_mutual_information needs three subsystems, got dims {list(dims)}")
    s_xz = entropy(partial_trace(rho, dims, [0, 2]))
    s_yz = entropy(partial_trace(rho, dims, [1, 2]))
    s_z = entropy(partial_trace(rho, dims, [2]))
    return s_xz + s_yz - s_z - entropy(rho)


def ternary_mutual_information(rho: np.ndarray, dims: Sequence[int]):
    """S(X:Y:Z) = S(X:Y) - S(X:Y|Z); vanishes on pure tripartite states."""
    rho_xy = partial_trace(rho, dims, [0, 1])
    return mutual_information(rho_xy, dims[:2]) - conditional_mutual_information(rho, dims)


def trace_distance(r1: np.ndarray, r2: np.ndarray):
    r1 = np.asarray(r1)
    r2 = np.asarray(r2)
    if r1.shape[-2:] != r2.shape[-2:]:
        raise ValueError(f"states have different dimensions: {r1.shape[-2:]} vs {r2.shape[-2:]}")
    return _scalar(0.5 * np.asarray(trace_norm(r1 - r2)))


def concurrence_from_vectors(phi: np.ndarray):
    """Concurrence of rho = Phi Phi^dag given the 4 x k factor ``Phi``.

    The square roots of the eigenvalues of rho rho~ are the singular values
    of the symmetric k x k matrix Phi^T (Y(x)Y) Phi. When Phi comes straight
    from a pure state or a Kraus decomposition this is accurate to roundoff.
    """
    phi = np.asarray(phi)
    if phi.shape[-2] != 4:
        raise ValueError(f"expected a 4 x k factor, got shape {phi.shape}")
    tau = np.swapaxes(phi, -1, -2) @ _YY @ phi
    sv = np.linalg.svd(tau, compute_uv=False)  # descending
    if sv.shape[-1] < 4:
        sv = np.concatenate([sv, np.zeros(sv.shape[:-1] + (4 - sv.shape[-1],))], axis=-1)
    c = sv[..., 0] - sv[..., 1] - sv[..., 2] - sv[..., 3]
    return _scalar(np.clip(c, 0.0, 1.0))


def concurrence(rho: np.ndarray):
    """Wootters concurrence of a two-qubit state.

    Uses the factor Phi = V sqrt(w) of the eigendecomposition. Eigenvalues
    at roundoff level (<= RANK_TOL) are dropped: kept, they would enter Phi as
    sqrt(roundoff) and shift the result by ~1e-8. Genuine eigenvalues that
    small still limit the accuracy to about sqrt(RANK_TOL); prefer
    ``concurrence_from_vectors`` when an exact factor is at hand.
    """
    rho = np.asarray(rho)
    if rho.shape[-2:] != (4, 4):
        raise ValueError(f"concurrence is defined for two qubits, got shape {rho.shape}")
    w, v = np.linalg.eigh(0.5 * (rho + dagger(rho)))
    w = clamp_spectrum(w, 1e-10)
    w = np.where(w > RANK_TOL, w, 0.0)
    return concurrence_from_vectors(v * np.sqrt(w)[..., None, :])


def eof_from_concurrence(c):
    c = np.clip(np.asarray(c, dtype=float), 0.0, 1.0)
    return binary_entropy((1 + np.sqrt(1 - c**2)) / 2)


def entanglement_of_formation(rho: np.ndarray):
    return eof_from_concurrence(concurrence(rho))


def quantum_loss(initial_entropy_a: float, rho_sa_evolved: np.ndarray, dims: Sequence[int] = (2, 2)):
    """S(A) - S(A~) + S(SA~): information lost to the environment, no E needed."""
    s_a = entropy(partial_trace(rho_sa_evolved, dims, [1]))
    return initial_entropy_a - s_a + entropy(rho_sa_evolved)


def accessible_information_kw(rho_sa_evolved: np.ndarray, s_sys):
    """Accessible information of S from E via Koashi-Winter (global state pure)."""
    return s_sys - entanglement_of_formation(rho_sa_evolved)


def discord(l_tilde, j):
    return l_tilde - j


def _conditional_entropy_after_projection(rho_se: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """sum_i p_i S(rho_S^i) for the measurement {(I +/- n.sigma)/2} on E."""
    t = rho_se.reshape(2, 2, 2, 2)
    rho_s = np.einsum("aebe->ab", t)
    # X_k = Tr_E[(I (x) sigma_k) rho_SE]
    x = np.einsum("aebf,kfe->kab", t, PAULIS)
    nx = np.einsum("...k,kab->...ab", directions, x)
    total = np.zeros(directions.shape[:-1])
    for sign in (1.0, -1.0):
        branch = 0.5 * (rho_s + sign * nx)
        p = np.real(np.trace(branch, axis1=-2, axis2=-1))
        w = np.linalg.eigvalsh(0.5 * (branch + dagger(branch)))
        safe = np.where(p > 1e-300, p, 1.0)[..., None]
        cond = np.where(p > 1e-14, _entropy_of_spectrum(np.clip(w / safe, 0.0, None)), 0.0)
        total = total + p * cond
    return total


def _direction(theta, phi) -> np.ndarray:
    theta = np.asarray(theta, float)
    phi = np.asarray(phi, float)
    return np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)


def accessible_information_povm(
    rho_se: np.ndarray,
    dims: Sequence[int] = (2, 2),
    grid: tuple[int, int] = (64, 32),
    refine: bool = True,
    n_seeds: int = 3,
) -> float:
    """Accessible information of S from rank-1 projective measurements on a qubit E.

    Direct optimisation used as an oracle for the Koashi-Winter route: a
    theta/phi grid over measurement directions followed by Nelder-Mead from
    the best ``n_seeds`` grid points.
    """
    dims = [int(d) for d in dims]
    if dims != [2, 2]:
        raise ValueError(f"the projective oracle handles a qubit system and qubit environment only, got dims {dims}")
    rho_se = np.asarray(rho_se)
    s_sys = entropy(partial_trace(rho_se, dims, [0]))
    theta = np.linspace(0.0, np.pi, grid[0])
    phi = np.linspace(0.0, 2 * np.pi, grid[1], endpoint=False)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    cond = _conditional_entropy_after_projection(rho_se, _direction(tt, pp)).ravel()
    best = float(cond.min())
    if refine:
        order = np.argsort(cond, kind="stable")[:n_seeds]
        starts = np.stack([tt.ravel()[order], pp.ravel()[order]], axis=-1)

        def objective(x):
            return float(_conditional_entropy_after_projection(rho_se, _direction(x[0], x[1])))

        for x0 in starts:
            res = minimize(
                objective,
                x0,
                method="Nelder-Mead",
                options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 4000},
            )
            best = min(best, float(res.fun))
    return max(s_sys - best, 0.0)


@dataclass(frozen=True)
class EntropyDiagram:
    """Tripartite entropy bookkeeping at one time (fields may be arrays over time)."""

    I_tilde: np.ndarray | float
    L_tilde: np.ndarray | float
    N_tilde: np.ndarray | float
    J: np.ndarray | float
    delta: np.ndarray | float
    E_SA: np.ndarray | float
    S_sys: np.ndarray | float

    def residuals(self) -> dict[str, float]:
        def worst(x):
            return float(np.max(np.abs(x)))

        return {
            "conservation": worst(np.asarray(self.I_tilde) + self.L_tilde - 2 * np.asarray(self.S_sys)),
            "discord_split": worst(np.asarray(self.L_tilde) - self.J - self.delta),
            "koashi_winter": worst(np.asarray(self.E_SA) + self.J - self.S_sys),
            "min_field": min(float(np.min(getattr(self, f.name))) for f in fields(self)),
        }

    def check(self, tol: float = 1e-9) -> None:
        res = self.residuals()
        bad = [k for k in ("conservation", "discord_split", "koashi_winter") if res[k] > tol]
        if res["min_field"] < -1e-10:
            bad.append("min_field")
        if bad:
            raise ValueError(f"entropy diagram invariants violated: { {k: res[k] for k in bad} }")
