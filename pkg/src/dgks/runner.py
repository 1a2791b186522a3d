"""
Run orchestration: global, DG and comparison runs, parameter sweeps and the
files they leave behind.

Output files
------------
``result_<mode>.json``
    ``config`` (resolved configuration, see :meth:`RunConfig.echo`),
    ``report`` (fields of :class:`ComparisonReport`), ``history`` (per-SCF
    iteration records for each pipeline: iteration, residual, etot, mu,
    seconds and solver diagnostics).
``summary_<mode>.txt``
    The same report as aligned text.
``sweep_<param>.csv``
    One row per swept value: ``value, e_glb, e_dg, error_au, error_mev,
    dg_iterations, dg_converged, basis_s, assembly_s, dg_eigensolve_s,
    status``.  Failed points carry ``status = failed: <reason>`` and empty
    numeric fields.
``sweep_alpha_fit.json``
    For penalty sweeps, the least-squares slope and intercept of
    ``log(error)`` against ``log(alpha)``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig, Species, validate
from .dgsolver import solve_dg_scf
from .geometry import Domain, build_partition
from .grids import global_grid
from .hamiltonian import ProjectorSpec, System
from .parallel import resolve_workers
from .reference import solve_global
from .scf import SCFSettings

log = logging.getLogger(__name__)

MEV_PER_AU = 27211.4


@dataclass
class ComparisonReport:
    mode: str
    n_atoms: int
    e_glb: float = None
    e_dg: float = None
    error_per_atom_au: float = None
    error_per_atom_mev: float = None
    iterations: dict = field(default_factory=dict)
    converged: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    dg_dim: int = None

    def summary(self) -> str:
        lines = [f"mode               {self.mode}", f"atoms              {self.n_atoms}"]
        if self.e_glb is not None:
            lines.append(f"E_GLB (au)         {self.e_glb:.12f}")
        if self.e_dg is not None:
            lines.append(f"E_DG  (au)         {self.e_dg:.12f}")
        if self.error_per_atom_au is not None:
            lines.append(f"error/atom (au)    {self.error_per_atom_au:.3e}")
            lines.append(f"error/atom (meV)   {self.error_per_atom_mev:.3e}")
        if self.dg_dim is not None:
            lines.append(f"DG matrix size     {self.dg_dim}")
        for k, v in self.iterations.items():
            lines.append(f"SCF iterations     {k}: {v} ({'converged' if self.converged[k] else 'NOT converged'})")
        for k, v in self.timings.items():
            lines.append(f"time {k:<14s}{v:10.3f} s")
        return "\n".join(lines)


@dataclass
class RunOutcome:
    report: ComparisonReport
    config: RunConfig
    global_result: object = None
    dg_result: object = None
    dg_step: object = None
    paths: dict = field(default_factory=dict)


def build_system(cfg: RunConfig):
    """Global system and element partition described by ``cfg``."""
    domain = Domain(cfg.domain)
    grid = global_grid(cfg.domain, cfg.grid_shape)
    system = System(domain, grid, cfg.atom_specs(), cfg.n_electrons, hartree=cfg.hartree, xc=cfg.xc)
    partition = build_partition(domain, cfg.partition, cfg.positions)
    return system, partition


def scf_settings(cfg: RunConfig) -> SCFSettings:
    return SCFSettings(tol=cfg.tol, max_iter=cfg.max_iter, mixing=cfg.mixing, alpha_mix=cfg.alpha_mix,
                       depth=cfg.depth, temperature=cfg.temperature, n_states=cfg.n_states)


def pipeline_seeds(seed: int):
    """Independent seeds for the global and DG pipelines."""
    a, b = np.random.SeedSequence(seed).generate_state(2)
    return int(a), int(b)


def run_global(cfg: RunConfig, system: System = None):
    system = system or build_system(cfg)[0]
    seed, _ = pipeline_seeds(cfg.seed)
    return solve_global(system, scf_settings(cfg), inner_iters=cfg.global_inner_iters, seed=seed)


def run_dg(cfg: RunConfig, system: System = None, partition=None, workers=None):
    if system is None or partition is None:
        system, partition = build_system(cfg)
    _, seed = pipeline_seeds(cfg.seed)
    workers = resolve_workers(workers if workers is not None else cfg.workers)
    return solve_dg_scf(system, partition, scf_settings(cfg), cfg.basis_counts(), cfg.buffer_au,
                        lgl_order=cfg.lgl_order, alpha=cfg.alpha, delta=cfg.svd_delta,
                        inner_iters=cfg.basis_inner_iters, seed=seed, workers=workers)


def run(cfg: RunConfig, write: bool = True, reference=None, workers=None) -> RunOutcome:
    """Execute ``cfg.mode`` and optionally persist the outputs.

    ``reference`` may hold a previously computed global result (the
    ``(SCFResult, EigenSolution)`` pair) to reuse in compare mode.
    """
    t0 = time.perf_counter()
    validate(cfg)
    system, partition = build_system(cfg)
    report = ComparisonReport(cfg.mode, cfg.n_atoms)
    out = RunOutcome(report, cfg)
    history = {}

    if cfg.mode in ("global", "compare"):
        try:
            g, _ = reference if reference is not None else run_global(cfg, system)
        except Exception as exc:
            raise RuntimeError(f"global pipeline failed: {exc}") from exc
        out.global_result = g
        report.e_glb = g.energy.total
        report.iterations["global"] = len(g.history)
        report.converged["global"] = g.converged
        if reference is None:
            report.timings.update(g.timings)
        history["global"] = g.history

    if cfg.mode in ("dg", "compare"):
        try:
            d, step = run_dg(cfg, system, partition, workers)
        except Exception as exc:
            raise RuntimeError(f"DG pipeline failed: {exc}") from exc
        out.dg_result, out.dg_step = d, step
        report.e_dg = d.energy.total
        report.iterations["dg"] = len(d.history)
        report.converged["dg"] = d.converged
        report.dg_dim = step.dg.dim
        report.timings.update(d.timings)
        history["dg"] = d.history

    if report.e_glb is not None and report.e_dg is not None:
        report.error_per_atom_au = abs(report.e_glb - report.e_dg) / cfg.n_atoms
        report.error_per_atom_mev = report.error_per_atom_au * MEV_PER_AU
    report.timings["total"] = time.perf_counter() - t0

    if write:
        out.paths = write_outputs(cfg, report, history)
    return out


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return x


def write_outputs(cfg: RunConfig, report: ComparisonReport, history: dict) -> dict:
    d = Path(cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    res = d / f"result_{cfg.mode}.json"
    summ = d / f"summary_{cfg.mode}.txt"
    payload = {"config": cfg.echo(), "report": asdict(report), "history": history}
    res.write_text(json.dumps(_jsonable(payload), indent=1))
    summ.write_text(report.summary() + "\n")
    return {"result": res, "summary": summ}


def load_result(path) -> dict:
    return json.loads(Path(path).read_text())


def config_from_echo(echo: dict) -> RunConfig:
    """Rebuild a configuration from the ``config`` block of a result file."""
    e = dict(echo)
    e["species"] = {k: Species(s["depth"], s["width"], tuple(ProjectorSpec(**p) for p in s["projectors"]))
                    for k, s in e["species"].items()}
    e["positions"] = np.asarray(e["positions"], float)
    for k in ("domain", "partition", "points_per_element", "buffer"):
        e[k] = tuple(e[k])
    return validate(RunConfig(**e))


SWEEP_PARAMS = {"jk": "basis_per_atom", "buffer": "buffer", "alpha": "alpha"}
SWEEP_FIELDS = ["value", "e_glb", "e_dg", "error_au", "error_mev", "dg_iterations", "dg_converged",
                "basis_s", "assembly_s", "dg_eigensolve_s", "status"]


def _swept(cfg: RunConfig, param: str, value) -> RunConfig:
    if param == "jk":
        return cfg.replace(basis_per_atom=float(value), basis_per_element=None)
    if param == "alpha":
        return cfg.replace(alpha=float(value))
    if param == "buffer":
        # scalar values move the buffer along every axis that already has one
        if np.isscalar(value):
            buf = tuple(float(value) if b > 0 or cfg.partition[a] > 1 else 0.0
                        for a, b in enumerate(cfg.buffer))
        else:
            buf = tuple(float(v) for v in value)
        return cfg.replace(buffer=buf)
    raise ValueError(f"unknown sweep parameter {param!r}; choose from {sorted(SWEEP_PARAMS)}")


def loglog_slope(x, y):
    """Least-squares ``(slope, intercept)`` of ``log y`` against ``log x``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    m = (x > 0) & (y > 0) & np.isfinite(y)
    if m.sum() < 2:
        return float("nan"), float("nan")
    slope, icpt = np.polyfit(np.log(x[m]), np.log(y[m]), 1)
    return float(slope), float(icpt)


@dataclass
class SweepResult:
    param: str
    rows: list
    slope: float = None
    intercept: float = None
    paths: dict = field(default_factory=dict)


def sweep(cfg: RunConfig, param: str, values, write: bool = True, reference=None,
          workers=None) -> SweepResult:
    """One compare run per value with everything else fixed.

    The global reference does not depend on any swept parameter, so it is
    computed once and shared.  Failed points are recorded and skipped.
    """
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    if param not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter {param!r}; choose from {sorted(SWEEP_PARAMS)}")
    cfg = cfg.replace(mode="compare")
    if reference is None:
        reference = run_global(cfg)
    rows = []
    for v in values:
        row = dict.fromkeys(SWEEP_FIELDS, "")
        row["value"] = v
        try:
            c = validate(_swept(cfg, param, v))
            o = run(c, write=False, reference=reference, workers=workers)
            r = o.report
            row.update(e_glb=r.e_glb, e_dg=r.e_dg, error_au=r.error_per_atom_au,
                       error_mev=r.error_per_atom_mev, dg_iterations=r.iterations["dg"],
                       dg_converged=r.converged["dg"], basis_s=r.timings.get("basis", 0.0),
                       assembly_s=r.timings.get("assembly", 0.0),
                       dg_eigensolve_s=r.timings.get("dg_eigensolve", 0.0), status="ok")
        except Exception as exc:  # noqa: BLE001
            log.warning("sweep %s=%s failed: %s", param, v, exc)
            row["status"] = f"failed: {exc}"
        rows.append(row)
        log.info("sweep %s=%s  error/atom %s", param, v, row["error_au"])
    out = SweepResult(param, rows)
    if param == "alpha":
        ok = [r for r in rows if r["status"] == "ok"]
        out.slope, out.intercept = loglog_slope([r["value"] for r in ok], [r["error_au"] for r in ok])
    if write:
        d = Path(cfg.output_dir)
        d.mkdir(parents=True, exist_ok=True)
        p = d / f"sweep_{param}.csv"
        with open(p, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS)
            w.writeheader()
            for r in rows:
                w.writerow({k: (list(r[k]) if isinstance(r[k], tuple) else r[k]) for k in SWEEP_FIELDS})
        out.paths["table"] = p
        if param == "alpha":
            f = d / "sweep_alpha_fit.json"
            f.write_text(json.dumps({"slope": out.slope, "intercept": out.intercept,
                                     "model": "log(error) = slope * log(alpha) + intercept"}, indent=1))
            out.paths["fit"] = f
    return out


def parse_sweep_values(text: str, param: str) -> list:
    vals = [float(t) for t in text.replace(",", " ").split()]
    if not vals:
        raise ValueError("empty sweep value list")
    if any(not math.isfinite(v) for v in vals):
        raise ValueError("sweep values must be finite")
    return vals
