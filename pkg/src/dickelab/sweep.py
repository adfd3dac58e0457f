"""Gamma sweeps across methods, figure data, and exact-vs-analytic comparisons.

Output files are deterministic: fixed column order, floats written as the
shortest round-trip decimal (``repr``), LF line endings.  Null cells are
empty (CSV) or ``null`` (JSON) and every row with a null cell carries a
reason code.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exact import (
    CutoffError,
    EigenResult,
    EigensolverError,
    converged_lowest,
    expectation_set,
    lowest_states,
    refined_doublet,
)
from .meanfield import is_superradiant, mean_field_observables
from .model import ModelParams, Parity
from .observables import ObservableSet
from .projected import DOMAIN_REASON, DomainError, projected_observables

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
METHODS = ("mean_field", "projected_even", "projected_odd", "exact")
ANALYTIC_METHODS = ("mean_field", "projected_even", "projected_odd")
THREADS_ENV = "DICKELAB_THREADS"

COLUMNS = (
    "n_atoms", "omega_a", "gamma", "gamma_c", "method", "parity",
    "energy", "energy_per_atom", "n_photons", "n_excited", "jz", "q2", "p2",
    "var_q", "var_p", "jx2", "jy2", "xi_x2", "xi_y2",
    "gap", "ground_parity", "nu_max_used", "converged", "reason",
)
OBS_COLUMNS = ("energy", "n_photons", "n_excited", "jz", "q2", "p2", "var_q", "var_p", "jx2", "jy2", "xi_x2", "xi_y2")
EXACT_ONLY = ("gap", "ground_parity", "nu_max_used", "converged")

REASON_EXACT_ONLY = "exact_only"
REASON_UNCONVERGED = "numerical: cutoff_unconverged"
REASON_EIGEN = "numerical: eigensolver_failure"
REASON_NONFINITE = "numerical: non_finite"


class ConfigError(ValueError):
    pass


class OutputExistsError(FileExistsError):
    pass


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class SweepConfig:
    omega_a: float
    n_atoms_list: tuple[int, ...]
    gammas: tuple[float, ...]
    methods: tuple[str, ...] = METHODS
    nu_max: int | None = None  # None = automatic convergence
    k_states: int = 2
    output: str = "sweep.csv"
    format: str = "csv"
    energy_tol: float = 1e-9
    refine_gap: bool = False

    def __post_init__(self):
        if not self.n_atoms_list:
            raise ConfigError("n_atoms_list must not be empty")
        for n in self.n_atoms_list:
            if int(n) != n or n < 1:
                raise ConfigError(f"bad atom number {n!r}")
        if not self.gammas:
            raise ConfigError("gamma grid must contain at least one point")
        g = np.asarray(self.gammas, dtype=float)
        if np.any(~np.isfinite(g)) or np.any(g < 0) or np.any(np.diff(g) <= 0):
            raise ConfigError("gamma grid must be finite, >= 0 and strictly increasing")
        if not (math.isfinite(self.omega_a) and self.omega_a >= 0):
            raise ConfigError("omega_a must be finite and >= 0")
        if not self.methods:
            raise ConfigError("at least one method must be selected")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.nu_max is not None and (int(self.nu_max) != self.nu_max or self.nu_max < 0):
            raise ConfigError("nu_max must be 'auto' or a nonnegative integer")
        if self.k_states < 1:
            raise ConfigError("k_states must be >= 1")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if not self.energy_tol > 0:
            raise ConfigError("energy_tol must be positive")
        # keep method order canonical for deterministic output
        object.__setattr__(self, "methods", tuple(m for m in METHODS if m in self.methods))

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path | None = None) -> SweepConfig:
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if data.get("schema") != SCHEMA_VERSION:
            raise ConfigError(f"config needs \"schema\": {SCHEMA_VERSION}")
        try:
            grid = data["gamma_grid"]
            if isinstance(grid, dict):
                count = int(grid["count"])
                if count < 1:
                    raise ConfigError("gamma_grid.count must be >= 1")
                gammas = np.linspace(float(grid["start"]), float(grid["stop"]), count)
            else:
                gammas = [float(x) for x in grid]
            nu_max = data.get("nu_max", "auto")
            if nu_max == "auto":
                nu_max = None
            elif isinstance(nu_max, bool) or not isinstance(nu_max, int):
                raise ConfigError("nu_max must be 'auto' or an integer")
            out = data.get("output", {})
            if isinstance(out, str):
                out = {"path": out}
            path = out.get("path", "sweep.csv")
            if base_dir is not None and not os.path.isabs(path):
                path = os.path.join(base_dir, path)
            tol = data.get("tolerances", {})
            return cls(
                omega_a=float(data["omega_a"]),
                n_atoms_list=tuple(int(n) for n in data["n_atoms_list"]),
                gammas=tuple(float(x) for x in gammas),
                methods=tuple(data.get("methods", METHODS)),
                nu_max=nu_max,
                k_states=int(data.get("k_states", 2)),
                output=str(path),
                format=out.get("format", "csv"),
                energy_tol=float(tol.get("energy_tol", 1e-9)),
                refine_gap=bool(tol.get("refine_gap", False)),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc!r}") from exc


def load_config(path: str | Path) -> SweepConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return SweepConfig.from_dict(data, base_dir=path.parent)


# ---------------------------------------------------------------------------
# per-point computation

@dataclass
class SweepRecord:
    n_atoms: int
    omega_a: float
    gamma: float
    gamma_c: float
    results: dict[str, ObservableSet | None] = field(default_factory=dict)
    reasons: dict[str, str] = field(default_factory=dict)
    gap: float | None = None
    ground_parity: int | None = None
    nu_max_used: int | None = None
    converged: bool | None = None


def _doublet_gap(res: EigenResult, params: ModelParams, refine: bool) -> float:
    gap = float(res.energies[1] - res.energies[0])
    resolution = 1e-9 * max(1.0, abs(res.energies[0]))
    if refine and gap < resolution and res.parities[0] * res.parities[1] < 0:
        return refined_doublet(params, res.nu_max_used).gap
    return max(gap, 0.0)


def _exact_point(params: ModelParams, cfg: SweepConfig, rec: SweepRecord, k: int) -> None:
    try:
        if cfg.nu_max is None:
            try:
                res = converged_lowest(params, cfg.energy_tol, k=k)
                converged = True
            except CutoffError as exc:
                if exc.last is None:
                    raise
                res, converged = exc.last, False
        else:
            res = lowest_states(params, cfg.nu_max, k)
            converged = res.top_mass() < 1e-10
        obs = expectation_set(res.ground_state, res.basis)
    except (EigensolverError, CutoffError) as exc:
        log.warning("exact diagonalization failed at %s: %s", params, exc)
        rec.results["exact"] = None
        rec.reasons["exact"] = REASON_EIGEN
        return
    rec.results["exact"] = obs
    rec.ground_parity = 1 if res.parities[0] > 0 else -1
    rec.nu_max_used = res.nu_max_used
    rec.converged = converged
    rec.gap = _doublet_gap(res, params, cfg.refine_gap) if len(res.energies) > 1 else None
    if not converged:
        rec.reasons["exact"] = REASON_UNCONVERGED


def compute_point(cfg: SweepConfig, n_atoms: int, gamma: float) -> SweepRecord:
    params = ModelParams(n_atoms, cfg.omega_a, gamma)
    rec = SweepRecord(n_atoms, cfg.omega_a, gamma, params.gamma_c)
    for method in cfg.methods:
        if method == "mean_field":
            rec.results[method] = mean_field_observables(params)
        elif method.startswith("projected_"):
            try:
                rec.results[method] = projected_observables(params, method.split("_")[1])
            except DomainError:
                rec.results[method] = None
                rec.reasons[method] = DOMAIN_REASON
        elif method == "exact":
            _exact_point(params, cfg, rec, max(2, cfg.k_states))
    return rec


def _compute_star(args):
    return compute_point(*args)


def compute_records(cfg: SweepConfig, threads: int | None = None) -> list[SweepRecord]:
    """One record per (N, gamma); N outer, gamma inner."""
    jobs = [(cfg, n, g) for n in cfg.n_atoms_list for g in cfg.gammas]
    threads = default_threads() if threads is None else max(1, threads)
    if threads == 1 or len(jobs) == 1:
        out = []
        for i, job in enumerate(jobs):
            out.append(_compute_star(job))
            log.info("point %d/%d done (N=%d, gamma=%g)", i + 1, len(jobs), job[1], job[2])
        return out
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_compute_star, jobs, chunksize=1))


# ---------------------------------------------------------------------------
# output

def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _mean_field_parity(rec: SweepRecord) -> str:
    params = ModelParams(rec.n_atoms, rec.omega_a, rec.gamma)
    return "broken" if is_superradiant(params) else "even"


def record_rows(rec: SweepRecord) -> list[dict]:
    """Flatten a record into output rows, one per method (and parity)."""
    rows = []
    for method, obs in rec.results.items():
        if method == "exact":
            name = "exact"
            parity = None if rec.ground_parity is None else str(Parity(rec.ground_parity))
        elif method == "mean_field":
            name, parity = "mean_field", _mean_field_parity(rec)
        else:
            name, parity = "projected", method.split("_")[1]
        row = {c: None for c in COLUMNS}
        row.update(n_atoms=rec.n_atoms, omega_a=rec.omega_a, gamma=rec.gamma, gamma_c=rec.gamma_c,
                   method=name, parity=parity)
        reasons = []
        if method in rec.reasons:
            reasons.append(rec.reasons[method])
        if obs is not None:
            for col in OBS_COLUMNS:
                row[col] = getattr(obs, col)
            row["energy_per_atom"] = obs.energy / rec.n_atoms
        if method == "exact" and obs is not None:
            row.update(gap=rec.gap, ground_parity=rec.ground_parity,
                       nu_max_used=rec.nu_max_used, converged=rec.converged)
        else:
            reasons.append(REASON_EXACT_ONLY)
        if parity is None:
            row["parity"] = None
        for col, v in row.items():
            if isinstance(v, float) and not math.isfinite(v):
                row[col] = None
                if REASON_NONFINITE not in reasons:
                    reasons.append(REASON_NONFINITE)
        row["reason"] = "; ".join(reasons) if reasons else None
        rows.append(row)
    return rows


def render(rows: Sequence[dict], columns: Sequence[str], fmt_name: str, extra: dict | None = None) -> str:
    if fmt_name == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row[c]) for c in columns])
        return buf.getvalue()
    doc = {"schema": SCHEMA_VERSION, "columns": list(columns)}
    if extra:
        doc.update(extra)
    doc["rows"] = [{c: _json_value(row[c]) for c in columns} for row in rows]
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def _json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def check_writable(path: str | Path, overwrite: bool) -> None:
    if os.path.exists(path) and not overwrite:
        raise OutputExistsError(f"{path} exists; pass --overwrite to replace it")


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_sweep(cfg: SweepConfig, threads: int | None = None, overwrite: bool = False,
              output: str | None = None) -> list[SweepRecord]:
    path = output or cfg.output
    check_writable(path, overwrite)
    records = compute_records(cfg, threads)
    rows = [row for rec in records for row in record_rows(rec)]
    atomic_write(path, render(rows, COLUMNS, cfg.format))
    return records


# ---------------------------------------------------------------------------
# comparison report

COMPARE_COLUMNS = (
    "n_atoms", "omega_a", "gamma", "gamma_c", "method", "parity", "field",
    "exact", "analytic", "abs_delta", "abs_delta_per_atom", "rel_delta", "reason",
)
SUMMARY_COLUMNS = ("n_atoms", "method", "parity", "field", "max_abs_delta", "max_abs_delta_per_atom", "points")


def compare_rows(records: Iterable[SweepRecord]) -> list[dict]:
    rows = []
    for rec in records:
        exact = rec.results.get("exact")
        for method in ANALYTIC_METHODS:
            if method not in rec.results:
                continue
            ana = rec.results[method]
            if method == "mean_field":
                name, parity = "mean_field", _mean_field_parity(rec)
            else:
                name, parity = "projected", method.split("_")[1]
            for col in OBS_COLUMNS:
                row = dict(n_atoms=rec.n_atoms, omega_a=rec.omega_a, gamma=rec.gamma, gamma_c=rec.gamma_c,
                           method=name, parity=parity, field=col, exact=None, analytic=None,
                           abs_delta=None, abs_delta_per_atom=None, rel_delta=None, reason=None)
                if exact is None or ana is None:
                    row["reason"] = rec.reasons.get(method) or rec.reasons.get("exact") or REASON_EIGEN
                    rows.append(row)
                    continue
                e, a = getattr(exact, col), getattr(ana, col)
                d = abs(e - a)
                row.update(exact=e, analytic=a, abs_delta=d, abs_delta_per_atom=d / rec.n_atoms)
                if a != 0:
                    row["rel_delta"] = d / abs(a)
                elif d == 0:
                    row["rel_delta"] = 0.0
                else:
                    row["reason"] = "zero_reference"
                rows.append(row)
    return rows


def summarize(rows: Sequence[dict]) -> list[dict]:
    """Max deltas per (N, method, parity, field) over the gamma grid."""
    acc: dict[tuple, dict] = {}
    for row in rows:
        if row["abs_delta"] is None:
            continue
        key = (row["n_atoms"], row["method"], row["parity"], row["field"])
        s = acc.setdefault(key, dict(n_atoms=key[0], method=key[1], parity=key[2], field=key[3],
                                     max_abs_delta=0.0, max_abs_delta_per_atom=0.0, points=0))
        s["max_abs_delta"] = max(s["max_abs_delta"], row["abs_delta"])
        s["max_abs_delta_per_atom"] = max(s["max_abs_delta_per_atom"], row["abs_delta_per_atom"])
        s["points"] += 1
    order = {c: i for i, c in enumerate(OBS_COLUMNS)}
    return sorted(acc.values(), key=lambda s: (s["method"], s["parity"], order[s["field"]], s["n_atoms"]))


def compare_paths(cfg: SweepConfig, output: str | None = None) -> tuple[Path, Path | None]:
    base = Path(output) if output else Path(cfg.output).with_name(Path(cfg.output).stem + ".compare." + cfg.format)
    if cfg.format == "csv":
        return base, base.with_name(base.stem + ".summary.csv")
    return base, None


def compare_report(cfg: SweepConfig, threads: int | None = None, overwrite: bool = False,
                   output: str | None = None) -> tuple[list[dict], list[dict]]:
    if "exact" not in cfg.methods or not set(ANALYTIC_METHODS) & set(cfg.methods):
        raise ConfigError("compare needs 'exact' and at least one analytic method")
    table, summary_path = compare_paths(cfg, output)
    for p in (table, summary_path):
        if p is not None:
            check_writable(p, overwrite)
    records = compute_records(cfg, threads)
    rows = compare_rows(records)
    summary = summarize(rows)
    if cfg.format == "csv":
        atomic_write(table, render(rows, COMPARE_COLUMNS, "csv"))
        atomic_write(summary_path, render(summary, SUMMARY_COLUMNS, "csv"))
    else:
        doc = json.loads(render(rows, COMPARE_COLUMNS, "json"))
        doc["summary_columns"] = list(SUMMARY_COLUMNS)
        doc["summary"] = summary
        atomic_write(table, json.dumps(doc, indent=1, allow_nan=False) + "\n")
    return rows, summary


# ---------------------------------------------------------------------------
# figure data

FIGURES = {
    "fig1": {"quantity": "var_q / N", "title": "photon quadrature fluctuation"},
    "fig2": {"quantity": "var_Jx / N^2", "title": "atomic transition operator fluctuation"},
}
DEFAULT_FIGURE_N = (10, 20, 30, 50)


def figure_exact_value(which: str, obs: ObservableSet, n: int) -> float:
    if which == "fig1":
        return obs.var_q / n
    # definite-parity ground state: <J_x> = 0, so (Delta J_x)^2 = <J_x^2>
    return obs.jx2 / n**2


def figure_analytic_value(which: str, omega_a: float, gamma: float, analytic_n: int | None = None) -> float:
    """Even projected-state curve; N -> infinity form (F = 0) unless ``analytic_n`` is given.

    At and below gamma_c the normal-phase values (Delta q)^2 = 1/2 and
    (Delta J_x)^2 = N/4 are used, i.e. 1/(2N) and 1/(4N), which vanish in the
    N -> infinity form.
    """
    n = analytic_n
    probe = ModelParams(n or 1, omega_a, gamma)
    if not is_superradiant(probe):
        if n is None:
            return 0.0
        return 1 / (2 * n) if which == "fig1" else 1 / (4 * n)
    if n is not None:
        obs = projected_observables(probe, Parity.EVEN)
        return obs.var_q / n if which == "fig1" else obs.jx2 / n**2
    c = omega_a / (4 * gamma**2)
    a = 1 - c * c
    return 2 * gamma**2 * a if which == "fig1" else a / 4


@dataclass(frozen=True)
class FigureData:
    which: str
    gammas: tuple[float, ...]
    exact: dict[int, list[float]]
    nu_max: dict[int, list[int]]
    analytic: list[float]
    manifest: dict


def figure_data(which: str, omega_a: float = 1.0, gammas: Sequence[float] | None = None,
                n_list: Sequence[int] = DEFAULT_FIGURE_N, analytic_n: int | None = None,
                energy_tol: float = 1e-9, threads: int | None = None) -> FigureData:
    if which not in FIGURES:
        raise ConfigError(f"unknown figure {which!r}; choose from {sorted(FIGURES)}")
    if gammas is None:
        gammas = np.linspace(0.0, 1.1, 111)
    cfg = SweepConfig(omega_a=omega_a, n_atoms_list=tuple(n_list), gammas=tuple(float(g) for g in gammas),
                      methods=("exact",), k_states=1, energy_tol=energy_tol)
    records = compute_records(cfg, threads)
    exact: dict[int, list[float]] = {n: [] for n in n_list}
    nus: dict[int, list[int]] = {n: [] for n in n_list}
    for rec in records:
        obs = rec.results["exact"]
        if obs is None:
            raise EigensolverError(f"exact diagonalization failed at N={rec.n_atoms}, gamma={rec.gamma}")
        exact[rec.n_atoms].append(figure_exact_value(which, obs, rec.n_atoms))
        nus[rec.n_atoms].append(rec.nu_max_used)
    analytic = [figure_analytic_value(which, omega_a, g, analytic_n) for g in cfg.gammas]
    manifest = {
        "schema": SCHEMA_VERSION,
        "figure": which,
        "quantity": FIGURES[which]["quantity"],
        "omega_a": omega_a,
        "n_atoms_list": list(n_list),
        "gamma_grid": {"start": cfg.gammas[0], "stop": cfg.gammas[-1], "count": len(cfg.gammas)},
        "energy_tol": energy_tol,
        "analytic_curve": {
            "state": "even parity-projected coherent state",
            "n_atoms": "infinity (F=0, (N-1)/N -> 1, 1/(2N) -> 0)" if analytic_n is None else analytic_n,
            "below_gamma_c": "normal-phase symmetric state: (Delta q)^2 = 1/2, (Delta J_x)^2 = N/4",
        },
    }
    return FigureData(which, cfg.gammas, exact, nus, analytic, manifest)


def reproduce_figure(which: str, out_dir: str | Path, overwrite: bool = False, threads: int | None = None,
                     **kwargs) -> dict:
    """Write one CSV per curve plus ``manifest.json`` (with SHA-256 checksums) into ``out_dir``."""
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not overwrite:
        raise OutputExistsError(f"{out_dir} is not empty; pass --overwrite to replace its files")
    data = figure_data(which, threads=threads, **kwargs)
    files = {}
    for n, values in data.exact.items():
        rows = [dict(gamma=g, value=v, nu_max_used=nu) for g, v, nu in zip(data.gammas, values, data.nu_max[n])]
        files[f"{which}_exact_N{n}.csv"] = render(rows, ("gamma", "value", "nu_max_used"), "csv")
    rows = [dict(gamma=g, value=v) for g, v in zip(data.gammas, data.analytic)]
    files[f"{which}_analytic.csv"] = render(rows, ("gamma", "value"), "csv")
    manifest = dict(data.manifest)
    manifest["files"] = {
        name: {"sha256": hashlib.sha256(text.encode("utf-8")).hexdigest(),
               "curve": "analytic" if name.endswith("_analytic.csv") else "exact"}
        for name, text in files.items()
    }
    for name, text in files.items():
        atomic_write(out_dir / name, text)
    atomic_write(out_dir / "manifest.json", json.dumps(manifest, indent=1, allow_nan=False) + "\n")
    return manifest


def config_to_dict(cfg: SweepConfig) -> dict:
    d = dataclasses.asdict(cfg)
    return {
        "schema": SCHEMA_VERSION,
        "omega_a": d["omega_a"],
        "n_atoms_list": list(d["n_atoms_list"]),
        "gamma_grid": list(d["gammas"]),
        "methods": list(d["methods"]),
        "nu_max": "auto" if d["nu_max"] is None else d["nu_max"],
        "k_states": d["k_states"],
        "output": {"path": d["output"], "format": d["format"]},
        "tolerances": {"energy_tol": d["energy_tol"], "refine_gap": d["refine_gap"]},
    }
