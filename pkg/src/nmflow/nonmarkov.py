"""Non-Markovianity measures as accumulated growth over a uniform time grid.

All three measures share one recipe: evaluate a quantity along the
trajectory, sum its positive increments, and maximise over initial states.

* BLP: trace distance of a pair of apparatus states.
* LFS: S:A mutual information (dual to the decrease of the quantum loss).
* RHP: S:A entanglement of formation (dual to the decrease of the
  accessible information).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .channels import (
    NonInvertibleMapError,
    apply_channel,
    apply_to_subsystem,
    g_witness,
    gad_g_closed_form,
)
from .info import concurrence_from_vectors, entanglement_of_formation, entropy, eof_from_concurrence, mutual_information, trace_distance
from .states import bloch_to_density, pure_sa_from_bloch, pure_sa_ket, random_density, spherical_to_bloch
from .tripartite import sweep_arrays

DUALITY_TOL = 1e-9
# per-step increments at or below this are roundoff, not growth
STEP_FLOOR = 1e-12


@dataclass(frozen=True)
class TimeSeries:
    grid: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        if grid.shape != values.shape or grid.ndim != 1:
            raise ValueError(f"grid and values must be 1-D of equal length, got {grid.shape} and {values.shape}")
        if grid.size >= 2:
            steps = np.diff(grid)
            if np.any(steps <= 0) or np.max(np.abs(steps - steps.mean())) > 1e-9 * max(1.0, abs(grid[-1])):
                raise ValueError("time grid must be uniform and strictly increasing")

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0]) if self.grid.size > 1 else 0.0

    def __neg__(self) -> "TimeSeries":
        return TimeSeries(self.grid, -self.values, f"-{self.label}")


@dataclass(frozen=True)
class SearchConfig:
    bloch_grid: tuple[int, int, int] = (9, 9, 9)  # radius, theta, phi
    n_seeds: int = 3
    refine_maxiter: int = 300
    refine_xatol: float = 1e-6
    refine_fatol: float = 1e-12
    blp_grid: tuple[int, int] = (24, 12)  # theta, phi
    blp_random_pairs: int = 500
    seed: int = 0
    zero_tol: float = 1e-6

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SearchConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown search fields: {sorted(unknown)}")
        kw = dict(data)
        for key in ("bloch_grid", "blp_grid"):
            if key in kw:
                kw[key] = tuple(int(x) for x in kw[key])
        return cls(**kw)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["bloch_grid"] = list(self.bloch_grid)
        d["blp_grid"] = list(self.blp_grid)
        return d


@dataclass
class MeasureReport:
    name: str
    value: float
    intervals: list[tuple[float, float]]
    argmax_params: dict[str, Any]
    grid_step: float
    dual_value: float | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def onset(self) -> float | None:
        return self.intervals[0][0] if self.intervals else None

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "value": self.value,
            "dual_value": self.dual_value,
            "intervals": [list(iv) for iv in self.intervals],
            "onset": self.onset,
            "argmax_params": self.argmax_params,
            "grid_step": self.grid_step,
            **self.extra,
        }


def worker_count() -> int:
    """Thread cap from ``NMFLOW_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("NMFLOW_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"NMFLOW_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("NMFLOW_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def _map(fn: Callable, items: Sequence) -> list:
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# positive variation


def positive_variation(series: TimeSeries, floor: float = 0.0) -> tuple[float, list[tuple[float, float]]]:
    """Sum of increments above ``floor`` and the maximal runs where they occur."""
    v = series.values
    if v.size < 2:
        return 0.0, []
    inc = np.diff(v)
    up = inc > floor
    total = float(inc[up].sum())
    intervals = []
    k = 0
    n = inc.size
    while k < n:
        if up[k]:
            start = k
            while k < n and up[k]:
                k += 1
            intervals.append((float(series.grid[start]), float(series.grid[k])))
        else:
            k += 1
    return total, intervals


def first_decrease(series: TimeSeries, tol: float = 1e-12) -> float | None:
    """Grid time at which the first step with a drop larger than ``tol`` begins."""
    drops = np.flatnonzero(np.diff(series.values) < -tol)
    return float(series.grid[drops[0]]) if drops.size else None


def halve_grid(grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    h = (grid[1] - grid[0]) / 2
    return grid[0] + h * np.arange(2 * grid.size - 1)


# --------------------------------------------------------------------------
# series along a trajectory


def evolved_sa(initial_sa: np.ndarray, ops: np.ndarray) -> np.ndarray:
    """(I (x) Lambda_t) rho_SA for a stack of Kraus sets ``ops``."""
    return apply_to_subsystem(ops, initial_sa, [2, 2], 1)


def _kraus_columns(psi_sa: np.ndarray, ops: np.ndarray) -> np.ndarray:
    """Phi with columns (I (x) K_k) psi, so that the evolved S(x)A state is Phi Phi^dag.

    ``psi_sa`` may be a stack (c, 4); the result has shape (c, n, 4, k).
    """
    psi = np.asarray(psi_sa).reshape(np.shape(psi_sa)[:-1] + (2, 2))
    phi = np.einsum("nkab,...sb->...nsak", ops, psi)
    return phi.reshape(phi.shape[:-3] + (4, ops.shape[-3]))


def _mi_objective(psi_sa: np.ndarray, ops: np.ndarray) -> np.ndarray:
    """S:A mutual information along the grid for pure inputs.

    S(SA~) is read off the k x k Gram matrix Phi^dag Phi, which shares its
    nonzero spectrum with the evolved S(x)A state.
    """
    phi = _kraus_columns(psi_sa, ops)
    t = phi.reshape(phi.shape[:-2] + (2, 2, phi.shape[-1]))
    rho_s = np.einsum("...sak,...tak->...st", t, np.conj(t))
    rho_a = np.einsum("...sak,...sbk->...ab", t, np.conj(t))
    gram = np.conj(np.swapaxes(phi, -1, -2)) @ phi
    return entropy(rho_s) + entropy(rho_a) - entropy(gram)


def _eof_objective(psi_sa: np.ndarray, ops: np.ndarray) -> np.ndarray:
    """Entanglement of formation along the grid for pure inputs."""
    return np.asarray(eof_from_concurrence(concurrence_from_vectors(_kraus_columns(psi_sa, ops))))


def mutual_information_series(initial_sa: np.ndarray, family, grid) -> TimeSeries:
    grid = np.asarray(grid, dtype=float)
    rho = evolved_sa(initial_sa, family.kraus(grid))
    return TimeSeries(grid, mutual_information(rho), "I_tilde")


def entanglement_series(initial_sa: np.ndarray, family, grid) -> TimeSeries:
    grid = np.asarray(grid, dtype=float)
    rho = evolved_sa(initial_sa, family.kraus(grid))
    return TimeSeries(grid, entanglement_of_formation(rho), "E_SA")


def trace_distance_series(rho1: np.ndarray, rho2: np.ndarray, family, grid) -> TimeSeries:
    grid = np.asarray(grid, dtype=float)
    ops = family.kraus(grid)
    return TimeSeries(grid, trace_distance(apply_channel(ops, rho1), apply_channel(ops, rho2)), "D")


# --------------------------------------------------------------------------
# optimisation helpers


def _project_to_ball(x: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(x)
    return x / n if n > 1 else x


def _ranked(values: Sequence[float], params: Sequence[np.ndarray]) -> list[int]:
    """Indices by value descending, ties broken lexicographically on params."""
    return sorted(range(len(values)), key=lambda i: (-values[i], tuple(np.round(params[i], 12))))


def _nelder_mead(objective, x0: np.ndarray, search: SearchConfig) -> tuple[np.ndarray, float]:
    res = minimize(
        lambda x: -objective(x),
        np.asarray(x0, dtype=float),
        method="Nelder-Mead",
        options={"xatol": search.refine_xatol, "fatol": search.refine_fatol, "maxiter": search.refine_maxiter},
    )
    return np.asarray(res.x), -float(res.fun)


def _bloch_candidates(search: SearchConfig) -> np.ndarray:
    nr, nt, nph = search.bloch_grid
    radius = np.linspace(0.0, 1.0, nr)
    theta = np.linspace(0.0, np.pi, nt)
    phi = np.linspace(0.0, 2 * np.pi, nph, endpoint=False)
    rr, tt, pp = np.meshgrid(radius, theta, phi, indexing="ij")
    pts = spherical_to_bloch(rr, tt, pp).reshape(-1, 3)
    pts = np.where(np.abs(pts) < 1e-15, 0.0, pts)
    # drop duplicates (radius 0, poles) keeping first occurrence
    _, first = np.unique(np.round(pts, 12), axis=0, return_index=True)
    return pts[np.sort(first)]


CHUNK = 32  # candidates evaluated together in one batched call


def _batched_variation(fn: Callable[[np.ndarray], np.ndarray], cands: np.ndarray) -> list[float]:
    """Positive variation of ``fn(chunk)`` (shape (c, n)) for every candidate."""
    chunks = [cands[i : i + CHUNK] for i in range(0, len(cands), CHUNK)]

    def run(chunk):
        inc = np.diff(np.asarray(fn(chunk), dtype=float), axis=-1)
        return np.where(inc > STEP_FLOOR, inc, 0.0).sum(axis=-1)

    return [float(v) for part in _map(run, chunks) for v in part]


def _optimise_bloch(
    quantity: Callable[[np.ndarray], np.ndarray],
    grid: np.ndarray,
    search: SearchConfig,
    start: Sequence[float] | None,
) -> tuple[np.ndarray, float]:
    """Maximise the positive variation of ``quantity(psi_sa)`` over Bloch vectors of A."""
    grid_series = np.asarray(grid, dtype=float)

    def value(r: np.ndarray) -> float:
        r = _project_to_ball(np.asarray(r, dtype=float))
        return positive_variation(TimeSeries(grid_series, quantity(pure_sa_ket(r))), STEP_FLOOR)[0]

    if start is None:
        cands = _bloch_candidates(search)
        kets = np.stack([pure_sa_ket(r) for r in cands])
        vals = _batched_variation(quantity, kets)
        order = _ranked(vals, list(cands))
        seeds = [cands[i] for i in order[: search.n_seeds]]
        best_r, best_v = cands[order[0]], value(cands[order[0]])
    else:
        seeds = [np.asarray(start, dtype=float)]
        best_r, best_v = seeds[0], value(seeds[0])
    for x0 in seeds:
        x, v = _nelder_mead(value, x0, search)
        x = _project_to_ball(x)
        if v > best_v:
            best_r, best_v = x, v
    return np.asarray(best_r, dtype=float), float(best_v)


def _trivial(value: float, search: SearchConfig) -> float:
    return 0.0 if value <= search.zero_tol else value


# --------------------------------------------------------------------------
# measures


def lfs_measure(family, grid, search: SearchConfig | None = None, start: Sequence[float] | None = None) -> MeasureReport:
    """Mutual-information measure, maximised over Bloch-parameterised pure S(x)A states."""
    search = search or SearchConfig()
    grid = np.asarray(grid, dtype=float)
    ops = family.kraus(grid)
    r, _ = _optimise_bloch(lambda psi: _mi_objective(psi, ops), grid, search, start)
    res = sweep_arrays(pure_sa_from_bloch(r), family, grid)
    value, intervals = positive_variation(TimeSeries(grid, res.column("I_tilde"), "I_tilde"), STEP_FLOOR)
    dual, _ = positive_variation(TimeSeries(grid, -res.column("L_tilde"), "-L_tilde"), STEP_FLOOR)
    return MeasureReport(
        "lfs",
        value,
        intervals,
        {"bloch": r.tolist()},
        float(grid[1] - grid[0]),
        dual_value=dual,
        extra={"is_zero": _trivial(value, search) == 0.0},
    )


def rhp_measure(family, grid, search: SearchConfig | None = None, start: Sequence[float] | None = None) -> MeasureReport:
    """Entanglement measure, maximised over Bloch-parameterised pure S(x)A states."""
    search = search or SearchConfig()
    grid = np.asarray(grid, dtype=float)
    ops = family.kraus(grid)
    r, _ = _optimise_bloch(lambda psi: _eof_objective(psi, ops), grid, search, start)
    res = sweep_arrays(pure_sa_from_bloch(r), family, grid)
    value, intervals = positive_variation(TimeSeries(grid, res.column("E_SA"), "E_SA"), STEP_FLOOR)
    dual, _ = positive_variation(TimeSeries(grid, -res.column("J"), "-J"), STEP_FLOOR)
    return MeasureReport(
        "rhp",
        value,
        intervals,
        {"bloch": r.tolist()},
        float(grid[1] - grid[0]),
        dual_value=dual,
        extra={"is_zero": _trivial(value, search) == 0.0},
    )


def _antipodal_pair(theta: float, phi: float) -> tuple[np.ndarray, np.ndarray]:
    n = spherical_to_bloch(1.0, theta, phi)
    return bloch_to_density(n), bloch_to_density(-n)


def blp_measure(family, grid, search: SearchConfig | None = None, start: Sequence[float] | None = None) -> MeasureReport:
    """Trace-distance measure over antipodal pure pairs, guarded by random pairs.

    The random (possibly mixed) pairs are a falsification check: if one of
    them beats the antipodal optimum by more than 1e-6 the report says so
    and the larger value is returned.
    """
    search = search or SearchConfig()
    grid = np.asarray(grid, dtype=float)
    ops = family.kraus(grid)
    step = float(grid[1] - grid[0])

    def evolved_distance(rho1, rho2) -> np.ndarray:
        # rho stacks of shape (c, 2, 2) -> distances of shape (c, n)
        e1 = apply_channel(ops, np.asarray(rho1)[..., None, :, :])
        e2 = apply_channel(ops, np.asarray(rho2)[..., None, :, :])
        return np.asarray(trace_distance(e1, e2))

    def pair_value(rho1, rho2) -> tuple[float, list]:
        return positive_variation(TimeSeries(grid, evolved_distance(rho1, rho2), "D"), STEP_FLOOR)

    def angle_value(x) -> float:
        return pair_value(*_antipodal_pair(x[0], x[1]))[0]

    def angle_batch(x):
        n = spherical_to_bloch(1.0, x[:, 0], x[:, 1])
        return evolved_distance(bloch_to_density(n), bloch_to_density(-n))

    if start is None:
        nt, nph = search.blp_grid
        theta = np.linspace(0.0, np.pi, nt)
        phi = np.linspace(0.0, 2 * np.pi, nph, endpoint=False)
        cands = [np.array([t, p]) for t in theta for p in phi]
        vals = _batched_variation(angle_batch, np.array(cands))
        order = _ranked(vals, cands)
        seeds = [cands[i] for i in order[: search.n_seeds]]
        best_x, best_v = cands[order[0]], angle_value(cands[order[0]])
    else:
        seeds = [np.asarray(start, dtype=float)]
        best_x, best_v = seeds[0], angle_value(seeds[0])
    for x0 in seeds:
        x, v = _nelder_mead(angle_value, x0, search)
        if v > best_v:
            best_x, best_v = x, v
    value, intervals = pair_value(*_antipodal_pair(best_x[0], best_x[1]))

    rng = np.random.default_rng(search.seed)
    pairs = []
    for _ in range(search.blp_random_pairs):
        ranks = rng.integers(1, 3, size=2)
        pairs.append((random_density(2, rng, int(ranks[0])), random_density(2, rng, int(ranks[1]))))
    guard = 0.0
    if pairs:
        firsts = np.stack([p[0] for p in pairs])
        seconds = np.stack([p[1] for p in pairs])
        both = np.stack([firsts, seconds], axis=1)  # (m, 2, 2, 2)
        guard = max(_batched_variation(lambda b: evolved_distance(b[:, 0], b[:, 1]), both))
    exceeded = guard > value + 1e-6
    argmax = {"theta": float(best_x[0]), "phi": float(best_x[1])}
    if exceeded:
        value = guard
    return MeasureReport(
        "blp",
        value,
        intervals,
        argmax,
        step,
        extra={"guard_max": guard, "guard_exceeded": bool(exceeded), "is_zero": _trivial(value, search) == 0.0},
    )


MEASURES: dict[str, Callable[..., MeasureReport]] = {
    "blp": blp_measure,
    "lfs": lfs_measure,
    "rhp": rhp_measure,
}


def start_from(report: MeasureReport) -> list[float]:
    if report.name == "blp":
        return [report.argmax_params["theta"], report.argmax_params["phi"]]
    return list(report.argmax_params["bloch"])


def measure_with_convergence(name: str, family, grid, search: SearchConfig | None = None) -> MeasureReport:
    """Run a measure and re-run it on the halved grid, refining from the argmax."""
    fn = MEASURES[name]
    report = fn(family, grid, search)
    half = fn(family, halve_grid(grid), search, start=start_from(report))
    delta = abs(half.value - report.value)
    report.extra["convergence"] = {
        "halved_step": half.grid_step,
        "halved_value": half.value,
        "abs_delta": delta,
        "rel_delta": delta / report.value if report.value > 0 else 0.0,
    }
    return report


# --------------------------------------------------------------------------
# divisibility


@dataclass(frozen=True)
class DivisibilityProfile:
    series: TimeSeries
    closed_form: TimeSeries | None
    failed: list[float]


def divisibility_profile(family, grid, eps: float = 1e-5, scheme: str = "central") -> DivisibilityProfile:
    grid = np.asarray(grid, dtype=float)
    try:
        g = np.asarray(g_witness(grid, family, eps, scheme), dtype=float)
        failed: list[float] = []
    except NonInvertibleMapError:
        g = np.empty(grid.size)
        failed = []
        for n, t in enumerate(grid):
            try:
                g[n] = g_witness(float(t), family, eps, scheme)
            except NonInvertibleMapError:
                g[n] = np.nan
                failed.append(float(t))
    closed = None
    if family.kind == "gad":
        closed = TimeSeries(grid, gad_g_closed_form(grid, family), "g_closed_form")
    return DivisibilityProfile(TimeSeries(grid, g, "g"), closed, failed)
