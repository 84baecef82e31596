"""Qubit channel families and their representations.

A Kraus channel is a plain array of operators with shape ``(k, d, d)``;
families evaluated at an array of times return ``(n_t, k, d, d)``.
Operators are vectorised row-major (numpy's native order), so the
superoperator of ``{M_i}`` is ``sum_i kron(M_i, conj(M_i))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, ClassVar, Iterable, Sequence

import numpy as np

from .qmat import dagger, trace_norm
from .states import check_density

COMPLETENESS_TOL = 1e-12
POLE_EXCLUSION = 1e-6
MAX_CONDITION = 1e12
G_FLOOR = 1e-9

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|, decay 1 -> 0
SIGMA_PLUS = SIGMA_MINUS.T.copy()


class SingularTimeError(ArithmeticError):
    """A decay rate was requested at (or integrated across) one of its poles."""

    def __init__(self, t: float, pole: float):
        super().__init__(f"decay rate is singular at t={pole:.12g} (requested t={t:.12g})")
        self.t = t
        self.pole = pole


class NonInvertibleMapError(np.linalg.LinAlgError):
    def __init__(self, condition: float, t: float | None = None):
        where = "" if t is None else f" at t={t:.12g}"
        super().__init__(f"dynamical map is not invertible{where} (condition number {condition:.3e})")
        self.condition = condition
        self.t = t


# --------------------------------------------------------------------------
# Kraus utilities


def completeness_residual(ops: np.ndarray) -> float:
    ops = np.asarray(ops)
    total = np.einsum("...kba,...kbc->...ac", np.conj(ops), ops)
    return float(np.max(np.abs(total - np.eye(ops.shape[-1]))))


def check_completeness(ops: np.ndarray, tol: float = COMPLETENESS_TOL) -> None:
    res = completeness_residual(ops)
    if res > tol:
        raise ValueError(f"Kraus operators violate completeness: max |sum K^dag K - I| = {res:.3e}")


def apply_channel(ops: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """sum_i K_i rho K_i^dag, broadcasting over leading axes of both."""
    return np.einsum("...kab,...bc,...kdc->...ad", ops, rho, np.conj(ops))


def apply_to_subsystem(ops: np.ndarray, rho: np.ndarray, dims: Sequence[int], target: int) -> np.ndarray:
    """Act with the channel on factor ``target`` of ``rho``, identity elsewhere."""
    ops = np.asarray(ops)
    rho = np.asarray(rho)
    dims = [int(d) for d in dims]
    if int(np.prod(dims)) != rho.shape[-1]:
        raise ValueError(f"dims {dims} do not match state of size {rho.shape[-1]}")
    if not 0 <= target < len(dims):
        raise ValueError(f"target {target} out of range for dims {dims}")
    if ops.shape[-1] != dims[target]:
        raise ValueError(
            f"channel acts on dimension {ops.shape[-1]} but subsystem {target} has dimension {dims[target]}"
        )
    n = len(dims)
    batch = np.broadcast_shapes(ops.shape[:-3], rho.shape[:-2])
    t = rho.reshape(rho.shape[:-2] + tuple(dims) + tuple(dims))
    row = list("abcdefgh"[:n])
    col = list("ijklmnop"[:n])
    new_row = row.copy()
    new_col = col.copy()
    new_row[target] = "x"
    new_col[target] = "y"
    spec = (
        f"...wx{row[target]},..."
        + "".join(row)
        + "".join(col)
        + f",...wy{col[target]}->..."
        + "".join(new_row)
        + "".join(new_col)
    )
    out = np.einsum(spec, ops, t, np.conj(ops))
    d = rho.shape[-1]
    return out.reshape(batch + (d, d))


def dilate(ops: np.ndarray, tol: float = COMPLETENESS_TOL) -> np.ndarray:
    """Stinespring isometry V = sum_i K_i (x) |i>_E, shape ``(d*k, d)``.

    The output index is ``a*k + i`` (system factor first, environment second).
    """
    ops = np.asarray(ops)
    check_completeness(ops, tol)
    k, d = ops.shape[-3], ops.shape[-1]
    return np.moveaxis(ops, -3, -2).reshape(ops.shape[:-3] + (d * k, d))


def unital_residual(ops: np.ndarray) -> float:
    d = np.asarray(ops).shape[-1]
    return float(np.max(np.abs(apply_channel(ops, np.eye(d)) - np.eye(d))))


def identity_kraus(d: int = 2) -> np.ndarray:
    return np.eye(d, dtype=complex)[None]


# --------------------------------------------------------------------------
# amplitude damping


def ad_kraus(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError(f"amplitude damping parameter must lie in [0, 1], got {p}")
    ops = np.zeros(p.shape + (2, 2, 2), dtype=complex)
    ops[..., 0, 0, 0] = 1.0
    ops[..., 0, 1, 1] = np.sqrt(1.0 - p)
    ops[..., 1, 0, 1] = np.sqrt(p)
    return ops


@dataclass(frozen=True)
class AmplitudeDamping:
    """Zero-temperature relaxation with a Lorentzian spectral density.

    ``gamma0`` couples the apparatus to the bath, ``lam`` is the spectral
    width. ``lam < 2*gamma0`` is the oscillatory (non-Markovian) regime.
    """

    gamma0: float
    lam: float

    kind: ClassVar[str] = "ad"
    n_kraus: ClassVar[int] = 2
    dim: ClassVar[int] = 2

    def __post_init__(self):
        if not (self.gamma0 > 0 and self.lam > 0):
            raise ValueError(f"gamma0 and lam must be positive, got {self.gamma0}, {self.lam}")

    @property
    def discriminant(self) -> float:
        return self.lam**2 - 2 * self.gamma0 * self.lam

    def amplitude(self, t) -> np.ndarray:
        """e^{-lam t/2}[cosh(dt/2) + (lam/d) sinh(dt/2)], the excited-state amplitude.

        For ``lam < 2 gamma0`` the hyperbolic functions continue to cos/sin of
        ``|d| t/2``; the amplitude then changes sign at the poles of the rate.
        """
        t = np.asarray(t, dtype=float)
        lam, disc = self.lam, self.discriminant
        if disc > 0:
            d = np.sqrt(disc)
            grow = np.exp((d - lam) * t / 2)
            fall = np.exp(-(d + lam) * t / 2)
            return 0.5 * (grow + fall) + 0.5 * (lam / d) * (grow - fall)
        if disc < 0:
            w = np.sqrt(-disc)
            return np.exp(-lam * t / 2) * (np.cos(w * t / 2) + (lam / w) * np.sin(w * t / 2))
        return np.exp(-lam * t / 2) * (1 + lam * t / 2)

    def p(self, t) -> np.ndarray:
        return np.clip(1.0 - self.amplitude(t) ** 2, 0.0, 1.0)

    def poles(self, t_max: float) -> np.ndarray:
        """Times in [0, t_max] where the decay rate diverges."""
        if self.discriminant >= 0:
            return np.empty(0)
        w = np.sqrt(-self.discriminant)
        first = 2 * (np.pi - np.arctan(w / self.lam)) / w
        period = 2 * np.pi / w
        if t_max < first:
            return np.empty(0)
        return first + period * np.arange(int(np.floor((t_max - first) / period)) + 1)

    def decay_rate(self, t, on_pole: str = "raise") -> np.ndarray:
        """gamma(t); ``on_pole`` is "raise" or "nan" for times within 1e-6 of a pole."""
        t = np.asarray(t, dtype=float)
        g0, lam, disc = self.gamma0, self.lam, self.discriminant
        if disc > 0:
            d = np.sqrt(disc)
            th = np.tanh(d * t / 2)
            return 2 * g0 * lam * th / (d + lam * th)
        if disc == 0:
            return 2 * g0 * lam * (t / 2) / (1 + lam * t / 2)
        w = np.sqrt(-disc)
        poles = self.poles(float(np.max(t)) + 1.0)
        near = np.zeros(t.shape, dtype=bool)
        for tp in poles:
            hit = np.abs(t - tp) <= POLE_EXCLUSION
            if np.any(hit) and on_pole == "raise":
                bad = float(np.atleast_1d(t)[np.argmax(np.atleast_1d(hit))])
                raise SingularTimeError(bad, float(tp))
            near |= hit
        s, c = np.sin(w * t / 2), np.cos(w * t / 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            rate = 2 * g0 * lam * s / (w * c + lam * s)
        return np.where(near, np.nan, rate)

    def kraus(self, t) -> np.ndarray:
        # sqrt(1-p) = |G| and sqrt(p) = sqrt((1-|G|)(1+|G|)) taken from the
        # amplitude directly; going through p loses relative precision in
        # 1-p once p is close to 1, which the divisibility witness magnifies.
        g = np.minimum(np.abs(self.amplitude(t)), 1.0)
        ops = np.zeros(g.shape + (2, 2, 2), dtype=complex)
        ops[..., 0, 0, 0] = 1.0
        ops[..., 0, 1, 1] = g
        ops[..., 1, 0, 1] = np.sqrt((1.0 - g) * (1.0 + g))
        return ops

    def parameters(self, t) -> dict[str, np.ndarray]:
        return {"p": self.p(t)}


def ad_decay_rate(t, params: AmplitudeDamping) -> np.ndarray:
    return params.decay_rate(t)


def ad_p(t, params: AmplitudeDamping) -> np.ndarray:
    return params.p(t)


def ad_composed_p(p_late, p_early):
    """Parameter of the AD map taking time t1 to t2, given p(t2) and p(t1)."""
    return (np.asarray(p_late) - np.asarray(p_early)) / (1.0 - np.asarray(p_early))


# --------------------------------------------------------------------------
# generalized amplitude damping


def gad_kraus(s, r) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    r = np.asarray(r, dtype=float)
    for name, v in (("s", s), ("r", r)):
        if np.any(v < 0) or np.any(v > 1):
            raise ValueError(f"GAD parameter {name} must lie in [0, 1], got {v}")
    s, r = np.broadcast_arrays(s, r)
    a, b = np.sqrt(s), np.sqrt(1.0 - s)
    ops = np.zeros(s.shape + (4, 2, 2), dtype=complex)
    ops[..., 0, 0, 0] = a
    ops[..., 0, 1, 1] = a * np.sqrt(r)
    ops[..., 1, 0, 1] = a * np.sqrt(1.0 - r)
    ops[..., 2, 0, 0] = b * np.sqrt(r)
    ops[..., 2, 1, 1] = b
    ops[..., 3, 1, 0] = b * np.sqrt(1.0 - r)
    return ops


def gad_schedule(t, params: "GeneralizedAmplitudeDamping"):
    t = np.asarray(t, dtype=float)
    s = np.clip(np.cos(params.omega * t) ** 2, 0.0, 1.0)
    return s, np.exp(-t)


@dataclass(frozen=True)
class GeneralizedAmplitudeDamping:
    """GAD with s(t) = cos^2(omega t) and r(t) = exp(-t); t is dimensionless."""

    omega: float

    kind: ClassVar[str] = "gad"
    n_kraus: ClassVar[int] = 4
    dim: ClassVar[int] = 2

    def __post_init__(self):
        if not np.isfinite(self.omega):
            raise ValueError(f"omega must be a finite real number, got {self.omega}")

    def schedule(self, t):
        return gad_schedule(t, self)

    def kraus(self, t) -> np.ndarray:
        return gad_kraus(*self.schedule(t))

    def parameters(self, t) -> dict[str, np.ndarray]:
        s, r = self.schedule(t)
        return {"s": s, "r": r}


def gad_f(t, params: GeneralizedAmplitudeDamping) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    w = params.omega
    return -w * np.sin(2 * w * t) * (1 - np.exp(-t)) + np.cos(w * t) ** 2


def gad_g_closed_form(t, params: GeneralizedAmplitudeDamping) -> np.ndarray:
    f = gad_f(t, params)
    return 0.5 * (np.abs(1 - f) + np.abs(f) - 1)


@dataclass(frozen=True)
class IdentityFamily:
    dim: int = 2

    kind: ClassVar[str] = "identity"
    n_kraus: ClassVar[int] = 1

    def kraus(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(identity_kraus(self.dim), t.shape + (1, self.dim, self.dim)).copy()

    def parameters(self, t) -> dict[str, np.ndarray]:
        return {}


ADParams = AmplitudeDamping
GADParams = GeneralizedAmplitudeDamping


# --------------------------------------------------------------------------
# master equation


def ad_generator(rho: np.ndarray, rate: float) -> np.ndarray:
    """gamma (s- rho s+ - {s+ s-, rho}/2)."""
    n = SIGMA_PLUS @ SIGMA_MINUS
    return rate * (SIGMA_MINUS @ rho @ SIGMA_PLUS - 0.5 * (n @ rho + rho @ n))


def _check_uniform(grid: np.ndarray) -> float:
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("time grid needs at least two points")
    steps = np.diff(grid)
    h = float(steps.mean())
    if h <= 0 or np.max(np.abs(steps - h)) > 1e-9 * max(1.0, abs(grid[-1])):
        raise ValueError("time grid must be uniform and strictly increasing")
    return h


def integrate_master(
    rho0: np.ndarray,
    rate: Callable[[float], float],
    grid: Sequence[float],
    singular_times: Iterable[float] = (),
    tol: float = 1e-8,
) -> np.ndarray:
    """Fixed-step RK4 for the time-dependent amplitude-damping master equation.

    Returns an array of shape ``(len(grid), 2, 2)``. Steps whose closed
    interval (padded by the pole exclusion radius) contains one of
    ``singular_times`` raise :class:`SingularTimeError`.
    """
    grid = np.asarray(grid, dtype=float)
    h = _check_uniform(grid)
    poles = np.asarray(list(singular_times), dtype=float)
    rho = np.array(rho0, dtype=complex)
    check_density(rho, tol)
    out = np.empty((grid.size, 2, 2), dtype=complex)
    out[0] = rho
    for n in range(grid.size - 1):
        t = grid[n]
        if poles.size:
            inside = (poles >= t - POLE_EXCLUSION) & (poles <= t + h + POLE_EXCLUSION)
            if np.any(inside):
                raise SingularTimeError(t, float(poles[inside][0]))
        g1, g2, g3 = float(rate(t)), float(rate(t + h / 2)), float(rate(t + h))
        k1 = ad_generator(rho, g1)
        k2 = ad_generator(rho + 0.5 * h * k1, g2)
        k3 = ad_generator(rho + 0.5 * h * k2, g2)
        k4 = ad_generator(rho + h * k3, g3)
        rho = rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        check_density(rho, tol)
        out[n + 1] = rho
    return out


def integrate_ad(rho0: np.ndarray, family: AmplitudeDamping, grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    return integrate_master(rho0, family.decay_rate, grid, family.poles(grid[-1] + 1.0))


# --------------------------------------------------------------------------
# superoperators, Choi matrices, divisibility


def vec(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    return rho.reshape(rho.shape[:-2] + (rho.shape[-1] * rho.shape[-2],))


def unvec(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    d = int(round(np.sqrt(v.shape[-1])))
    return v.reshape(v.shape[:-1] + (d, d))


def superoperator(ops: np.ndarray) -> np.ndarray:
    ops = np.asarray(ops)
    d = ops.shape[-1]
    s = np.einsum("...kab,...kcd->...acbd", ops, np.conj(ops))
    return s.reshape(ops.shape[:-3] + (d * d, d * d))


def apply_superoperator(s: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return unvec(np.einsum("...ij,...j->...i", s, vec(rho)))


def intermediate_map(late: np.ndarray, early: np.ndarray, max_condition: float = MAX_CONDITION) -> np.ndarray:
    """Lambda(t2, t1) = Lambda(t2, 0) Lambda(t1, 0)^-1."""
    late = np.asarray(late)
    early = np.asarray(early)
    cond = np.linalg.cond(early)
    worst = float(np.max(np.where(np.isfinite(cond), cond, np.inf)))
    if not worst <= max_condition:
        raise NonInvertibleMapError(worst)
    # X @ early = late  <=>  early^T X^T = late^T
    return np.swapaxes(np.linalg.solve(np.swapaxes(early, -1, -2), np.swapaxes(late, -1, -2)), -1, -2)


def choi(s: np.ndarray) -> np.ndarray:
    """(I (x) Lambda)|Omega><Omega| with |Omega> = sum_j |jj>/sqrt(d)."""
    s = np.asarray(s)
    d = int(round(np.sqrt(s.shape[-1])))
    s4 = s.reshape(s.shape[:-2] + (d, d, d, d))
    c = np.einsum("...acbd->...badc", s4) / d
    return c.reshape(s.shape[:-2] + (d * d, d * d))


def choi_from_kraus(ops: np.ndarray) -> np.ndarray:
    return choi(superoperator(ops))


def g_witness(t, family, eps: float = 1e-5, scheme: str = "central") -> np.ndarray | float:
    """Finite-step estimate of the Choi-trace-norm divisibility witness.

    g = (||Choi(Lambda(t+eps, t))||_1 - 1)/eps.
    ``scheme="forward"`` uses the intermediate map on [t, t+eps];
    ``"central"`` uses [t-eps/2, t+eps/2] (forward near t=0), which removes
    the leading time-derivative bias. Values below 1e-9 are floored to zero.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    t = np.asarray(t, dtype=float)
    if scheme == "forward":
        t0 = t
    elif scheme == "central":
        t0 = np.maximum(t - eps / 2, 0.0)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    early = superoperator(family.kraus(t0))
    late = superoperator(family.kraus(t0 + eps))
    try:
        mid = intermediate_map(late, early)
    except NonInvertibleMapError as exc:
        if t.ndim == 0:
            raise NonInvertibleMapError(exc.condition, float(t)) from None
        raise
    c = choi(mid)
    c = 0.5 * (c + dagger(c))
    # For a trace-preserving map ||C||_1 - 1 = ||C||_1 - Tr C; the second form
    # is insensitive to the small trace error the matrix inversion leaves.
    trace = np.real(np.trace(c, axis1=-2, axis2=-1))
    g = (trace_norm(c) - trace) / eps
    g = np.where(g < G_FLOOR, 0.0, g)
    return float(g) if g.ndim == 0 else g


POLE_FREE_MARGIN = 0.2  # in units of 1/gamma0


def pole_free_segments(family: AmplitudeDamping, grid: Sequence[float], margin: float = POLE_FREE_MARGIN):
    """Split ``grid`` into runs of points at least ``margin/gamma0`` from any pole.

    Near a pole the rate diverges like 1/(t - t*), which a fixed-step
    integrator cannot follow; each run is integrated separately.
    """
    grid = np.asarray(grid, dtype=float)
    poles = family.poles(float(grid[-1]) + 1.0)
    if poles.size == 0:
        return [grid]
    gap = margin / family.gamma0
    ok = np.all(np.abs(grid[:, None] - poles[None, :]) >= gap, axis=1)
    segment = np.searchsorted(poles, grid)
    out = []
    for seg in np.unique(segment[ok]):
        run = grid[ok & (segment == seg)]
        if run.size >= 2:
            out.append(run)
    return out
