"""``nmflow`` command-line front end.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .channels import (
    AmplitudeDamping,
    GeneralizedAmplitudeDamping,
    NonInvertibleMapError,
    SingularTimeError,
    apply_channel,
    completeness_residual,
    gad_g_closed_form,
    g_witness,
    integrate_ad,
    pole_free_segments,
)
from .config import CSV_COLUMNS, ConfigError, ScenarioConfig, load_config
from .info import accessible_information_kw, accessible_information_povm
from .nonmarkov import MEASURES, divisibility_profile, measure_with_convergence
from .qmat import partial_trace
from .states import bell_state, projector
from .tripartite import ScenarioError, evolve_ket, sa_ket, sweep_arrays

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

NUMERICAL_ERRORS = (ScenarioError, SingularTimeError, NonInvertibleMapError, ArithmeticError, np.linalg.LinAlgError)

# short names accepted by ``plotscript --quantities``
ALIASES = {
    "L": "L_tilde",
    "I": "I_tilde",
    "N": "N_tilde",
    "E": "E_SA",
    "p": "p_or_s",
    "s": "p_or_s",
}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# --------------------------------------------------------------------------
# formatting


def fmt(x) -> str:
    """12 significant digits; empty for missing values; no negative zero."""
    if x is None:
        return ""
    x = float(x)
    if not np.isfinite(x):
        return ""
    if x == 0.0:
        x = 0.0
    return f"{x:.12g}"


def sweep_table(config: ScenarioConfig) -> dict[str, np.ndarray | None]:
    """Every CSV column as an array over the reported grid (None when inapplicable)."""
    family = config.family()
    grid = config.model_grid()
    unit = config.time_unit()
    res = sweep_arrays(config.initial_state(), family, grid)
    wanted = set(config.outputs)
    cols: dict[str, np.ndarray | None] = {name: None for name in CSV_COLUMNS}
    cols["t"] = config.reported_grid()
    if config.channel == "ad":
        cols["p_or_s"] = res.params["p"]
        # rates are per unit of reported time
        cols["gamma"] = res.gamma * unit
    else:
        cols["p_or_s"] = res.params["s"]
        cols["r"] = res.params["r"]
    for name in ("I_tilde", "L_tilde", "N_tilde", "J", "delta", "E_SA"):
        cols[name] = res.column(name)
    if "g" in wanted:
        profile = divisibility_profile(family, grid, config.eps, config.scheme)
        cols["g"] = profile.series.values * unit
    for name in CSV_COLUMNS[1:]:
        if name not in wanted:
            cols[name] = None
    return cols


def render_csv(cols: dict[str, np.ndarray | None]) -> str:
    n = len(cols["t"])
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for i in range(n):
        row = [fmt(cols[c][i]) if cols[c] is not None else "" for c in CSV_COLUMNS]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# --------------------------------------------------------------------------
# commands


def cmd_sweep(config: ScenarioConfig, out: str | None) -> int:
    _write(out, render_csv(sweep_table(config)))
    return EXIT_OK


def _report_in_reported_time(report: dict, unit: float) -> dict:
    scale = 1.0 / unit
    report = dict(report)
    report["intervals"] = [[a * scale, b * scale] for a, b in report["intervals"]]
    report["onset"] = None if report["onset"] is None else report["onset"] * scale
    report["grid_step"] = report["grid_step"] * scale
    if "convergence" in report:
        conv = dict(report["convergence"])
        conv["halved_step"] = conv["halved_step"] * scale
        report["convergence"] = conv
    return report


def parse_which(which: str) -> list[str]:
    """``all``, one measure name, or a comma-separated list such as ``lfs,rhp``."""
    if which == "all":
        return list(MEASURES)
    names = [w.strip() for w in which.split(",") if w.strip()]
    bad = [w for w in names if w not in MEASURES]
    if bad or not names:
        raise CliError(f"unknown measure(s) {bad or which!r}; choose from {list(MEASURES)} or 'all'", EXIT_CONFIG)
    return list(dict.fromkeys(names))


def measure_reports(config: ScenarioConfig, which: str) -> dict:
    names = parse_which(which)
    family = config.family()
    grid = config.model_grid()
    out = {
        "scenario": config.to_dict(),
        "time_unit": "gamma0*t" if config.channel == "ad" else "t",
        "measures": {},
    }
    for name in names:
        report = measure_with_convergence(name, family, grid, config.search)
        out["measures"][name] = _report_in_reported_time(report.to_dict(), config.time_unit())
    return out


def cmd_measure(config: ScenarioConfig, which: str, out: str | None) -> int:
    text = json.dumps(measure_reports(config, which), indent=2, sort_keys=False) + "\n"
    _write(out, text)
    return EXIT_OK


# -- selftest


def _grid(t_max: float, dt: float = 0.01) -> np.ndarray:
    return dt * np.arange(int(round(t_max / dt)) + 1)


SELFTEST_SCENARIOS = [
    (AmplitudeDamping(1.0, 3.0), _grid(10.0)),
    (AmplitudeDamping(1.0, 0.1), _grid(50.0)),
    (GeneralizedAmplitudeDamping(5.0), _grid(3.0)),
]


def _check_kraus(inject: str | None) -> float:
    worst = 0.0
    for family, grid in SELFTEST_SCENARIOS:
        ops = family.kraus(grid)
        if inject == "completeness":
            ops = ops.copy()
            ops[..., 0, :, :] *= 1 + 1e-6
        worst = max(worst, completeness_residual(ops))
    return worst


def _sweeps():
    bell = bell_state()
    return [sweep_arrays(bell, family, grid) for family, grid in SELFTEST_SCENARIOS]


def _check_povm(n_points: int = 5) -> float:
    family, grid = SELFTEST_SCENARIOS[1]
    psi = sa_ket(bell_state())
    worst = 0.0
    for t in grid[np.linspace(1, grid.size - 1, n_points).astype(int)]:
        state = projector(evolve_ket(psi, family, t))
        j_povm = accessible_information_povm(partial_trace(state, [2, 2, 2], [0, 2]))
        j_kw = accessible_information_kw(partial_trace(state, [2, 2, 2], [0, 1]), 1.0)
        worst = max(worst, abs(j_povm - j_kw))
    return worst


def _check_integrator() -> float:
    rho0 = np.array([[0.25, 0.4], [0.4, 0.75]], dtype=complex)
    worst = 0.0
    for family, grid in SELFTEST_SCENARIOS[:2]:
        for segment in pole_free_segments(family, grid):
            start = apply_channel(family.kraus(segment[0]), rho0)
            numeric = integrate_ad(start, family, segment)
            exact = apply_channel(family.kraus(segment), rho0)
            worst = max(worst, float(np.max(np.abs(numeric - exact))))
    return worst


def _check_g() -> float:
    family, grid = SELFTEST_SCENARIOS[2]
    return float(np.max(np.abs(g_witness(grid, family) - gad_g_closed_form(grid, family))))


def selftest_rows(inject: str | None = None) -> list[tuple[str, float, float]]:
    sweeps = _sweeps()
    rows = [("kraus_completeness", _check_kraus(inject), 1e-12)]
    rows.append(("conservation", max(r.diagram.residuals()["conservation"] for r in sweeps), 1e-9))
    rows.append(("koashi_winter", max(r.diagram.residuals()["koashi_winter"] for r in sweeps), 1e-9))
    rows.append(("povm_vs_koashi_winter", _check_povm(), 1e-6))
    duality = 0.0
    for r in sweeps:
        d = r.diagram
        duality = max(
            duality,
            float(np.max(np.abs(np.diff(d.L_tilde) + np.diff(d.I_tilde)))),
            float(np.max(np.abs(np.diff(d.E_SA) + np.diff(d.J)))),
        )
    rows.append(("duality", duality, 1e-9))
    rows.append(("pure_global_state", max(float(np.max(r.rho_s_drift)) for r in sweeps), 1e-12))
    rows.append(("kraus_vs_integrator", _check_integrator(), 1e-6))
    rows.append(("g_closed_form", _check_g(), 1e-4))
    return rows


def cmd_selftest(inject: str | None = None, stream=None) -> int:
    stream = stream or sys.stdout
    rows = selftest_rows(inject)
    width = max(len(name) for name, _, _ in rows)
    failed = []
    for name, residual, tol in rows:
        ok = residual <= tol
        if not ok:
            failed.append(name)
        stream.write(f"{name:<{width}}  residual={residual:.3e}  tol={tol:.0e}  {'PASS' if ok else 'FAIL'}\n")
    if failed:
        stream.write(f"FAILED: {', '.join(failed)}\n")
        return EXIT_NUMERICAL
    stream.write(f"all {len(rows)} checks passed\n")
    return EXIT_OK


# -- plotscript


def parse_panels(text: str) -> list[list[str]]:
    """``"L,I;J,E;g"`` -> [[L_tilde, I_tilde], [J, E_SA], [g]]."""
    panels = []
    for chunk in text.split(";"):
        names = [ALIASES.get(q.strip(), q.strip()) for q in chunk.split(",") if q.strip()]
        if names:
            panels.append(names)
    if not panels:
        raise CliError("no quantities given", EXIT_CONFIG)
    return panels


def _csv_columns_with_data(csv_path: str) -> tuple[list[str], set[str]]:
    try:
        with open(csv_path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = list(reader.fieldnames or [])
            filled = set()
            for row in reader:
                filled.update(k for k, v in row.items() if v not in ("", None))
    except OSError as exc:
        raise CliError(f"cannot read {csv_path}: {exc}", EXIT_CONFIG) from None
    return header, filled


PLOT_TEMPLATE = '''"""Plot {quantities} from {csv_name}.

Usage: python this_script.py [image.png]   (no argument: open a window)
"""

import csv
import sys

import matplotlib.pyplot as plt

CSV_PATH = {csv_path!r}
PANELS = {panels!r}
AD_INSET = {inset!r}
XLABEL = {xlabel!r}


def column(rows, name):
    return [float(r[name]) if r[name] != "" else float("nan") for r in rows]


with open(CSV_PATH, newline="", encoding="utf-8") as fh:
    rows = list(csv.DictReader(fh))
t = column(rows, "t")

fig, axes = plt.subplots(1, len(PANELS), figsize=(4.5 * len(PANELS), 3.6), squeeze=False)
for ax, names in zip(axes[0], PANELS):
    for name in names:
        ax.plot(t, column(rows, name), label=name)
    ax.set_xlabel(XLABEL)
    ax.legend()
if AD_INSET:
    inset = axes[0][0].inset_axes([0.55, 0.12, 0.4, 0.35])
    inset.plot(t, column(rows, "gamma"), color="gray", lw=1)
    inset.axhline(0.0, color="black", lw=0.5)
    inset.set_title("decay rate", fontsize=8)
    inset.tick_params(labelsize=7)
fig.tight_layout()
if len(sys.argv) > 1:
    fig.savefig(sys.argv[1], dpi=120)
else:
    plt.show()
'''


def plot_script(csv_path: str, quantities: str) -> str:
    panels = parse_panels(quantities)
    header, filled = _csv_columns_with_data(csv_path)
    wanted = [q for panel in panels for q in panel]
    missing = [q for q in wanted if q not in header or q not in filled]
    if missing:
        raise CliError(f"columns missing from {csv_path}: {', '.join(missing)}", EXIT_CONFIG)
    is_ad = "gamma" in filled
    return PLOT_TEMPLATE.format(
        quantities=", ".join(wanted),
        csv_name=Path(csv_path).name,
        csv_path=str(Path(csv_path).resolve()),
        panels=panels,
        inset=is_ad,
        xlabel="gamma0 t" if is_ad else "t",
    )


def cmd_plotscript(csv_path: str, quantities: str, out: str | None) -> int:
    _write(out, plot_script(csv_path, quantities))
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nmflow", description="Information flow in open qubit dynamics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="entropy-diagram time series as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")

    p = sub.add_parser("measure", help="non-Markovianity measures as JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--which", default="all", help="blp, lfs, rhp, a comma-separated list, or all")
    p.add_argument("--out", default=None, help="JSON path (default: stdout)")

    p = sub.add_parser("selftest", help="run the identity checks")
    p.add_argument("--inject", choices=["completeness"], default=None, help=argparse.SUPPRESS)

    p = sub.add_parser("plotscript", help="emit a matplotlib script for sweep columns")
    p.add_argument("--csv", required=True)
    p.add_argument("--quantities", required=True, help="comma-separated names, ';' between panels, e.g. L,I;J,E;g")
    p.add_argument("--out", default=None)
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "selftest":
        return cmd_selftest(args.inject)
    if args.command == "plotscript":
        return cmd_plotscript(args.csv, args.quantities, args.out)
    config = load_config(args.config)
    if args.command == "sweep":
        return cmd_sweep(config, args.out)
    return cmd_measure(config, args.which, args.out)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
