"""Scenario configuration files.

A scenario is a small YAML document::

    channel: ad            # or gad
    ad:
      gamma0: 1.0
      lam: 0.1
    grid:
      t_max: 50.0          # AD: scaled time gamma0*t; GAD: raw t
      dt: 0.01
    initial: bell          # or a Bloch vector [r1, r2, r3] for the apparatus
    outputs: [I_tilde, L_tilde, J, E_SA]   # optional, default: every column
    witness:               # optional
      eps: 1.0e-5
      scheme: central
    search: {}             # optional overrides of SearchConfig fields
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .channels import AmplitudeDamping, GeneralizedAmplitudeDamping
from .nonmarkov import SearchConfig
from .states import bell_state, pure_sa_from_bloch

CSV_COLUMNS = ["t", "p_or_s", "r", "gamma", "I_tilde", "L_tilde", "N_tilde", "J", "delta", "E_SA", "g"]
QUANTITIES = CSV_COLUMNS[1:]


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _number(data: dict, key: str, path: str) -> float:
    if key not in data:
        raise ConfigError(f"{path}.{key}", "missing")
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {value!r}")
    value = float(value)
    if not np.isfinite(value):
        raise ConfigError(f"{path}.{key}", "must be finite")
    return value


def _mapping(data: Any, path: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected a mapping, got {type(data).__name__}")
    return data


@dataclass(frozen=True)
class ScenarioConfig:
    channel: str
    t_max: float
    dt: float
    gamma0: float | None = None
    lam: float | None = None
    omega: float | None = None
    initial: str | tuple[float, float, float] = "bell"
    outputs: tuple[str, ...] = tuple(QUANTITIES)
    eps: float = 1e-5
    scheme: str = "central"
    search: SearchConfig = field(default_factory=SearchConfig)

    @classmethod
    def from_dict(cls, data: Any) -> "ScenarioConfig":
        data = _mapping(data, "<root>")
        known = {"channel", "ad", "gad", "grid", "initial", "outputs", "witness", "search"}
        extra = set(data) - known
        if extra:
            raise ConfigError(sorted(extra)[0], "unknown field")
        channel = data.get("channel")
        if channel not in ("ad", "gad"):
            raise ConfigError("channel", f"must be 'ad' or 'gad', got {channel!r}")
        other = "gad" if channel == "ad" else "ad"
        if data.get(other) is not None:
            raise ConfigError(other, f"must be absent when channel is {channel!r}")
        block = _mapping(data.get(channel), channel)
        kw: dict[str, Any] = {"channel": channel}
        if channel == "ad":
            kw["gamma0"] = _number(block, "gamma0", "ad")
            kw["lam"] = _number(block, "lam", "ad")
            for key in ("gamma0", "lam"):
                if kw[key] <= 0:
                    raise ConfigError(f"ad.{key}", "must be positive")
            extra = set(block) - {"gamma0", "lam"}
        else:
            kw["omega"] = _number(block, "omega", "gad")
            extra = set(block) - {"omega"}
        if extra:
            raise ConfigError(f"{channel}.{sorted(extra)[0]}", "unknown field")

        grid = _mapping(data.get("grid"), "grid")
        kw["t_max"] = _number(grid, "t_max", "grid")
        kw["dt"] = _number(grid, "dt", "grid")
        if kw["dt"] <= 0:
            raise ConfigError("grid.dt", "must be positive")
        if kw["t_max"] <= kw["dt"]:
            raise ConfigError("grid.t_max", "must exceed grid.dt")
        n = kw["t_max"] / kw["dt"]
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ConfigError("grid.t_max", "must be an integer multiple of grid.dt")

        initial = data.get("initial", "bell")
        if initial == "bell":
            kw["initial"] = "bell"
        elif isinstance(initial, (list, tuple)) and len(initial) == 3:
            try:
                r = tuple(float(x) for x in initial)
            except (TypeError, ValueError):
                raise ConfigError("initial", f"Bloch vector entries must be numbers, got {initial!r}") from None
            if np.linalg.norm(r) > 1 + 1e-12:
                raise ConfigError("initial", f"Bloch vector norm {np.linalg.norm(r):.6g} exceeds 1")
            kw["initial"] = r
        else:
            raise ConfigError("initial", f"expected 'bell' or a 3-component Bloch vector, got {initial!r}")

        outputs = data.get("outputs")
        if outputs is not None:
            if not isinstance(outputs, (list, tuple)) or not outputs:
                raise ConfigError("outputs", "expected a non-empty list of quantity names")
            bad = [q for q in outputs if q not in QUANTITIES]
            if bad:
                raise ConfigError("outputs", f"unknown quantities {bad}; choose from {QUANTITIES}")
            kw["outputs"] = tuple(outputs)

        witness = data.get("witness")
        if witness is not None:
            witness = _mapping(witness, "witness")
            if "eps" in witness:
                kw["eps"] = _number(witness, "eps", "witness")
                if kw["eps"] <= 0:
                    raise ConfigError("witness.eps", "must be positive")
            if "scheme" in witness:
                if witness["scheme"] not in ("central", "forward"):
                    raise ConfigError("witness.scheme", "must be 'central' or 'forward'")
                kw["scheme"] = witness["scheme"]
            extra = set(witness) - {"eps", "scheme"}
            if extra:
                raise ConfigError(f"witness.{sorted(extra)[0]}", "unknown field")

        search = data.get("search")
        if search is not None:
            try:
                kw["search"] = SearchConfig.from_dict(_mapping(search, "search"))
            except (TypeError, ValueError) as exc:
                raise ConfigError("search", str(exc)) from None
        return cls(**kw)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"channel": self.channel}
        if self.channel == "ad":
            out["ad"] = {"gamma0": self.gamma0, "lam": self.lam}
        else:
            out["gad"] = {"omega": self.omega}
        out["grid"] = {"t_max": self.t_max, "dt": self.dt}
        out["initial"] = self.initial if self.initial == "bell" else list(self.initial)
        out["outputs"] = list(self.outputs)
        out["witness"] = {"eps": self.eps, "scheme": self.scheme}
        out["search"] = self.search.to_dict()
        return out

    # -- derived objects

    def family(self):
        if self.channel == "ad":
            return AmplitudeDamping(self.gamma0, self.lam)
        return GeneralizedAmplitudeDamping(self.omega)

    def time_unit(self) -> float:
        """Factor turning reported times into model times (1/gamma0 for AD)."""
        return 1.0 / self.gamma0 if self.channel == "ad" else 1.0

    def reported_grid(self) -> np.ndarray:
        n = int(round(self.t_max / self.dt))
        return self.dt * np.arange(n + 1)

    def model_grid(self) -> np.ndarray:
        return self.reported_grid() * self.time_unit()

    def initial_state(self) -> np.ndarray:
        if self.initial == "bell":
            return bell_state()
        return pure_sa_from_bloch(self.initial)


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"invalid YAML: {exc}") from None
    return ScenarioConfig.from_dict(data)


def dump_config(config: ScenarioConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)
