"""System-apparatus-environment scenario engine.

A pure S(x)A state is evolved by dilating Lambda(t, 0) on A into a fresh
environment, one shot per time point, so the S(x)A(x)E state stays pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .channels import dilate
from .info import EntropyDiagram, concurrence_from_vectors, entropy, eof_from_concurrence
from .qmat import hermitian_eig, partial_trace
from .states import projector

INPUT_PURITY_TOL = 1e-10
GLOBAL_PURITY_TOL = 1e-9
LOSS_ROUTE_TOL = 1e-9


class ScenarioError(RuntimeError):
    def __init__(self, t: float, cause: Exception):
        super().__init__(f"evaluation failed at t={t:.12g}: {cause}")
        self.t = t
        self.cause = cause


def _purity(rho: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("...ij,...ji->...", rho, rho))


def sa_ket(initial_sa: np.ndarray) -> np.ndarray:
    """Ket of a pure two-qubit density matrix (global phase fixed by eigh)."""
    initial_sa = np.asarray(initial_sa)
    if initial_sa.shape != (4, 4):
        raise ValueError(f"initial S(x)A state must be 4x4, got {initial_sa.shape}")
    purity = float(_purity(initial_sa))
    if abs(purity - 1.0) > INPUT_PURITY_TOL:
        raise ValueError(f"initial S(x)A state is not pure (Tr rho^2 = {purity:.12f})")
    _, v = hermitian_eig(initial_sa)
    return v[:, 0]


def evolve_ket(psi_sa: np.ndarray, family, t) -> np.ndarray:
    """(I_S (x) V_t) |psi_SA>, shape ``(..., 4 * k)`` over S, A, E."""
    v = dilate(family.kraus(t))
    psi = np.asarray(psi_sa).reshape(2, 2)
    out = np.einsum("...xb,sb->...sx", v, psi)
    return out.reshape(out.shape[:-2] + (out.shape[-2] * out.shape[-1],))


def evolve_scenario(initial_sa: np.ndarray, family, t) -> np.ndarray:
    """Pure S(x)A(x)E density matrix at time(s) ``t``; dims are [2, 2, k]."""
    return projector(evolve_ket(sa_ket(initial_sa), family, t))


def initial_system_entropy(initial_sa: np.ndarray) -> float:
    return entropy(partial_trace(initial_sa, [2, 2], [0]))


def sample_diagram(
    state_sae: np.ndarray,
    s_sys,
    dims: Sequence[int] | None = None,
    ket: np.ndarray | None = None,
) -> EntropyDiagram:
    """All entropy-diagram quantities of a pure S(x)A(x)E state (or a stack over time).

    ``s_sys`` is the (time-invariant) entropy of S. The quantum loss is
    computed both as S(S:E~) and from S(x)A~ alone; the two must agree.
    The concurrence uses the E-slices of the global ket as an exact factor
    of rho_SA~; pass ``ket`` if it is known, otherwise it is recovered as
    the leading eigenvector of ``state_sae``.
    """
    state_sae = np.asarray(state_sae)
    if dims is None:
        dims = [2, 2, state_sae.shape[-1] // 4]
    dims = [int(d) for d in dims]
    purity = _purity(state_sae)
    worst = float(np.max(np.abs(purity - 1.0)))
    if worst > GLOBAL_PURITY_TOL:
        raise ValueError(f"global S(x)A(x)E state is mixed (max |Tr rho^2 - 1| = {worst:.3e})")

    def s(keep):
        return np.asarray(entropy(partial_trace(state_sae, dims, keep)))

    s_s, s_a, s_e = s([0]), s([1]), s([2])
    rho_sa = partial_trace(state_sae, dims, [0, 1])
    s_sa, s_se, s_ae = np.asarray(entropy(rho_sa)), s([0, 2]), s([1, 2])

    i_tilde = s_s + s_a - s_sa
    l_tilde = s_s + s_e - s_se
    n_tilde = s_a + s_e - s_ae
    l_free = np.asarray(s_sys) - s_a + s_sa
    gap = float(np.max(np.abs(l_tilde - l_free)))
    if gap > LOSS_ROUTE_TOL:
        raise ValueError(f"quantum loss routes disagree by {gap:.3e}")

    if ket is None:
        ket = hermitian_eig(state_sae).eigenvectors[..., 0]
    factor = np.asarray(ket).reshape(np.shape(ket)[:-1] + (dims[0] * dims[1], dims[2]))
    e_sa = np.asarray(eof_from_concurrence(concurrence_from_vectors(factor)))
    j = np.asarray(s_sys) - e_sa
    out = dict(
        I_tilde=i_tilde,
        L_tilde=l_tilde,
        N_tilde=n_tilde,
        J=j,
        delta=l_tilde - j,
        E_SA=e_sa,
        S_sys=np.broadcast_to(np.asarray(s_sys, dtype=float), i_tilde.shape).copy(),
    )
    if i_tilde.ndim == 0:
        out = {k: float(v) for k, v in out.items()}
    return EntropyDiagram(**out)


@dataclass(frozen=True)
class ScenarioSample:
    t: float
    diagram: EntropyDiagram
    params: dict[str, float] = field(default_factory=dict)
    gamma_t: float | None = None


@dataclass(frozen=True)
class SweepResult:
    """Column-oriented sweep output; ``samples()`` gives the per-point view."""

    grid: np.ndarray
    diagram: EntropyDiagram
    params: dict[str, np.ndarray]
    gamma: np.ndarray | None
    rho_s_drift: np.ndarray  # max |rho_S(t) - rho_S(0)| per point
    ternary: np.ndarray  # S(S:A:E) per point

    def column(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self.diagram, name))

    def samples(self) -> list[ScenarioSample]:
        out = []
        for n, t in enumerate(self.grid):
            diag = EntropyDiagram(**{k: float(np.asarray(v)[n]) for k, v in vars(self.diagram).items()})
            params = {k: float(v[n]) for k, v in self.params.items()}
            gamma = None if self.gamma is None else float(self.gamma[n])
            out.append(ScenarioSample(float(t), diag, params, gamma))
        return out


def _check_grid(grid: np.ndarray) -> None:
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("time grid needs at least two points")
    steps = np.diff(grid)
    if np.any(steps <= 0) or np.max(np.abs(steps - steps.mean())) > 1e-9 * max(1.0, abs(grid[-1])):
        raise ValueError("time grid must be uniform and strictly increasing")


def sweep_arrays(initial_sa: np.ndarray, family, grid: Sequence[float]) -> SweepResult:
    grid = np.asarray(grid, dtype=float)
    _check_grid(grid)
    psi = sa_ket(initial_sa)
    s_sys = initial_system_entropy(initial_sa)
    try:
        kets = evolve_ket(psi, family, grid)
        states = projector(kets)
        diagram = sample_diagram(states, s_sys, ket=kets)
    except Exception as exc:  # locate the offending time point
        for t in grid:
            try:
                point = evolve_ket(psi, family, t)
                sample_diagram(projector(point), s_sys, ket=point)
            except Exception as point_exc:
                raise ScenarioError(float(t), point_exc) from point_exc
        raise ScenarioError(float("nan"), exc) from exc
    k = states.shape[-1] // 4
    dims = [2, 2, k]
    rho_s = partial_trace(states, dims, [0])
    rho_s0 = partial_trace(initial_sa, [2, 2], [0])
    drift = np.max(np.abs(rho_s - rho_s0), axis=(-2, -1))
    # pure tripartite: S(S:A:E) = S(S:A) - S(S:A|E)
    s_se = np.asarray(entropy(partial_trace(states, dims, [0, 2])))
    s_ae = np.asarray(entropy(partial_trace(states, dims, [1, 2])))
    s_e = np.asarray(entropy(partial_trace(states, dims, [2])))
    s_all = np.asarray(entropy(states))
    cmi = s_se + s_ae - s_e - s_all
    ternary = np.asarray(diagram.I_tilde) - cmi
    gamma = family.decay_rate(grid, on_pole="nan") if hasattr(family, "decay_rate") else None
    params = {k: np.asarray(v, dtype=float) for k, v in family.parameters(grid).items()}
    return SweepResult(grid, diagram, params, gamma, drift, ternary)


def sweep(initial_sa: np.ndarray, family, grid: Sequence[float]) -> list[ScenarioSample]:
    return sweep_arrays(initial_sa, family, grid).samples()


def describe(family) -> dict[str, Any]:
    if family.kind == "ad":
        return {"channel": "ad", "gamma0": family.gamma0, "lam": family.lam}
    if family.kind == "gad":
        return {"channel": "gad", "omega": family.omega}
    return {"channel": family.kind}
