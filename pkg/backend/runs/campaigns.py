"""Campaign entry points behind the management commands and the celery task.

A campaign maps a RunConfig to one data table, optional side tables and the
list of assertions it evaluated. `run_campaign` writes the artifacts, the
JSON manifest and (optionally) the RunRecord rows.
"""
from __future__ import annotations

import json
import logging
import math
import platform
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import django
import networkx as nx
import numpy as np
import scipy
from django.conf import settings
from django.db import transaction
from django.test.utils import override_settings

import spinlab
from droplets.services import (
    CSV_COLUMNS, DropletTable, convergence_table, convergence_tolerance, suq_foel_check, width_verdict,
)
from dynamics.services import clustering_report, lightcone_grid
from hamiltonians.services import (
    OPEN_WITH_FIELD, PERIODIC, Interaction, XxzParams, aklt, assemble, chain_graph, heisenberg, q_from_delta,
    translated, xxz, xxz_params,
)
from hilbert.services import SpinSpace, all_sectors, embed_at, spin_matrices
from lattice.services import SpinGraph, as_spin, bipartition, load_graph, path_graph
from perturbation.services import gap_sweep
from spectral.services import full_spectrum, merge_reports, sector_spectrum, spectral_gap
from spinlab.conf import setting
from spinlab.errors import (
    ConfigError, ConjugacyError, DegenerateSpectrumError, DomainError, OutputError, SpinlabError,
)
from spinlab.pool import pool_map
from ssep.services import is_path, particle_hole_check, relaxation_time, ssep_gaps, xxx_conjugacy_check
from symmetry.services import (
    classify_total_spin, foel_check, level_rows, lieb_mattis_check, lieb_mattis_side_check, su2_algebra, suq2_algebra,
)

from .config import RunConfig
from .emit import Table, emit, write_text
from .models import AssertionRecord, RunRecord

log = logging.getLogger(__name__)

# config key -> Django setting it overrides for the duration of a run
SOLVER_SETTINGS = {
    "dense_cutoff": "SPINLAB_DENSE_CUTOFF",
    "lanczos_tol": "SPINLAB_LANCZOS_TOL",
    "degeneracy_tol": "SPINLAB_DEGENERACY_TOL",
}

# open SU_q chain against the closed form at the largest L
OPEN_CONVERGENCE_TOL = 2e-2
# smallest finite-size gap accepted by the clustering campaign
CLUSTER_MIN_GAP = 0.1


@dataclass
class Check:
    name: str
    passed: bool
    detail: Dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "detail": _json_safe(self.detail)}


@dataclass
class CampaignResult:
    table: Table
    checks: List[Check] = field(default_factory=list)
    extra_tables: Dict[str, Table] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)


def _json_safe(v: Any) -> Any:
    if isinstance(v, dict):
        return {str(k): _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, Fraction):
        return str(v)
    return v


def _tol(cfg: RunConfig, default: float) -> float:
    return default if cfg["tol"] is None else float(cfg["tol"])


# ---------------------------------------------------------------------------
# Models from config
# ---------------------------------------------------------------------------

@dataclass
class Model:
    phi: Interaction
    graph: SpinGraph
    params: Optional[XxzParams] = None

    @cached_property
    def space(self) -> SpinSpace:
        return SpinSpace.for_graph(self.graph)

    @cached_property
    def H(self):
        return assemble(self.phi, self.space)


def _xxz_params(cfg: RunConfig, L: int, boundary: str) -> XxzParams:
    if cfg["Delta"] is None and cfg["q"] is None:
        raise ConfigError("XXZ models need Delta or q", key="q")
    return xxz_params(L, Delta=cfg["Delta"], q=cfg["q"], J=cfg["J"], boundary=boundary)


def graph_file(cfg: RunConfig) -> SpinGraph:
    try:
        return load_graph(cfg["graph"])
    except OSError as exc:
        raise ConfigError(f"cannot read graph file: {exc.strerror}", key="graph") from exc


def build_model(cfg: RunConfig) -> Model:
    name, L, periodic = cfg["model"], cfg["L"], cfg["periodic"]
    if name == "custom":
        raise ConfigError("custom interactions are built in code, not from a run config", key="model")
    if name in ("xxz_open", "xxz_periodic"):
        p = _xxz_params(cfg, L, PERIODIC if name == "xxz_periodic" else OPEN_WITH_FIELD)
        return Model(xxz(p), chain_graph(p.L, p.periodic, J=p.J), p)
    if name == "aklt":
        return Model(aklt(L, periodic), chain_graph(L, periodic, spin=1))
    g = graph_file(cfg) if cfg["graph"] else chain_graph(L, periodic, spin=cfg["spin"], J=cfg["J"])
    return Model(heisenberg(g), g)


def chain_builder(cfg: RunConfig):
    """(L -> Interaction, spin) for finite-size sweeps over L."""
    name, periodic = cfg["model"], cfg["periodic"]
    if name == "aklt":
        return (lambda L: aklt(L, periodic)), Fraction(1)
    if name in ("xxz_open", "xxz_periodic"):
        boundary = PERIODIC if name == "xxz_periodic" else OPEN_WITH_FIELD
        return (lambda L: xxz(_xxz_params(cfg, L, boundary))), Fraction(1, 2)
    if name == "heisenberg" and not cfg["graph"]:
        spin = as_spin(cfg["spin"])
        return (lambda L: heisenberg(chain_graph(L, periodic, spin=spin, J=cfg["J"]))), spin
    raise ConfigError("finite-size sweeps need a chain model", key="model")


def perturbation_builder(kind: str, spin: Fraction, periodic: bool):
    S = spin_matrices(spin)
    local = {"zz": np.kron(S.S3, S.S3), "field": S.S3, "anisotropy": S.S3 @ S.S3}[kind]
    return lambda L: translated(local, L, periodic, site_dim=S.dim, model=kind)


def _site_S3(model: Model, x: int):
    return embed_at(model.space, [(x, spin_matrices(model.graph.spins[x]).S3)], hermitian=True)


# ---------------------------------------------------------------------------
# Campaigns
# ---------------------------------------------------------------------------

def spectrum_campaign(cfg: RunConfig, threads: Optional[int]) -> CampaignResult:
    model = build_model(cfg)
    H = model.H
    sectors = all_sectors(model.space)
    reports = pool_map(lambda s: sector_spectrum(H, s, "all"), sectors, threads)
    rows = [(s.magnetization, k, float(E)) for s, rep in zip(sectors, reports) for k, E in enumerate(rep.eigenvalues)]
    merged = merge_reports(reports)
    summary: Dict[str, Any] = {"dim": model.space.total_dim, "ground_energy": merged.ground_energy}
    try:
        summary["gap"] = spectral_gap(merged).gap
    except DegenerateSpectrumError:
        summary["gap"] = 0.0
    checks = []
    if model.space.total_dim <= setting("SPINLAB_DENSE_CUTOFF"):
        dev = float(np.abs(full_spectrum(H).eigenvalues - merged.eigenvalues).max())
        checks.append(Check("sector_union_matches_full", dev <= _tol(cfg, 1e-10), {"max_deviation": dev}))
    return CampaignResult(Table(("M", "level", "energy"), rows), checks, summary=summary)


def foel_campaign(cfg: RunConfig, threads: Optional[int]) -> CampaignResult:
    model = build_model(cfg)
    H = model.H
    p = model.params
    if p is not None and p.periodic:
        raise ConfigError("the periodic XXZ chain has no total-spin symmetry", key="model")
    algebra = suq2_algebra(p.L, p.q) if p is not None else su2_algebra(model.space)
    levels = classify_total_spin(H, algebra, threads=threads)
    verdict = foel_check(levels)
    checks = [Check("foel", verdict.holds, {"margin": verdict.margin, "witness": verdict.witness})]
    E = levels.entries
    top = levels.S_max
    if verdict.holds and top - 1 in E and model.space.total_dim <= setting("SPINLAB_DENSE_CUTOFF"):
        gap = spectral_gap(full_spectrum(H)).gap
        splitting = E[top - 1] - E[top]
        checks.append(Check("gap_is_top_splitting", abs(gap - splitting) <= _tol(cfg, 1e-9),
                            {"gap": gap, "splitting": splitting}))
    if cfg["model"] == "heisenberg" and all(w > 0 for _, _, w in model.graph.edges):
        try:
            A, B = bipartition(model.graph)
        except DomainError:
            A = B = None
        if A is not None:
            spins = model.graph.spins
            S0 = abs(sum((spins[x] for x in A), Fraction(0)) - sum((spins[x] for x in B), Fraction(0)))
            side = lieb_mattis_side_check(levels, S0)
            checks.append(Check("lieb_mattis_side", side.holds, {"from_spin": S0, "margin": side.margin,
                                                                 "witness": side.witness}))
    table = Table(("S3", "S", "energy"), [(r.S3, r.S, r.energy) for r in level_rows(H, algebra, threads=threads)])
    spin_table = Table(("S", "E", "E_max", "multiplets"),
                       [(S, E[S], max(levels.multiplets[S]), len(levels.multiplets[S]))
                        for S in sorted(E, reverse=True)])
    return CampaignResult(table, checks, {"levels": spin_table}, {"algebra": algebra.name, "S_max": top})


def liebmattis_campaign(cfg: RunConfig, threads: Optional[int]) -> CampaignResult:
    if cfg["model"] != "heisenberg":
        raise ConfigError("Lieb-Mattis ordering is checked on Heisenberg graphs", key="model")
    model = build_model(cfg)
    report = lieb_mattis_check(model.graph, threads=threads)
    v = report.verdict
    table = Table(("S", "E"), report.levels.rows())
    checks = [Check("lieb_mattis", v.holds, {"ground_spin": report.ground_spin, "margin": v.margin,
                                             "witness": v.witness})]
    return CampaignResult(table, checks, summary={"parts": [list(report.parts[0]), list(report.parts[1])]})


def ssep_campaign(cfg: RunConfig, threads: Optional[int]) -> CampaignResult:
    g = graph_file(cfg) if cfg["graph"] else path_graph(cfg["L"], cfg["J"])
    report = ssep_gaps(g, threads)
    table = Table(("n", "dim", "lambda_n", "aldous_margin"), report.rows())
    checks = [
        Check("uniform_is_stationary", max(report.stationary_checks.values(), default=0.0) < 1e-10,
              {"max_residual": max(report.stationary_checks.values(), default=0.0)}),
    ]
    try:
        conj = xxx_conjugacy_check(g, threads=threads)
        checks.append(Check("xxx_conjugacy", True, {"max_deviation": conj.max_deviation}))
    except ConjugacyError as exc:
        checks.append(Check("xxx_conjugacy", False, {"max_deviation": exc.max_deviation}))
    ph = particle_hole_check(g)
    checks.append(Check("particle_hole", ph < 1e-10, {"max_deviation": ph}))
    summary = {"relaxation_time": relaxation_time(report.gaps[1]) if report.gaps else math.nan}
    if is_path(g):
        checks.insert(0, Check("aldous_identity", report.aldous_margin < _tol(cfg, 1e-9),
                               {"aldous_margin": report.aldous_margin}))
    else:
        summary["aldous_margin"] = report.aldous_margin
    return CampaignResult(table, checks, summary=summary)


def droplet_checks(table: DropletTable, q: float, n: int, ring_tol: float) -> List[Check]:
    """Convergence and band-width assertions on a finished droplet table."""
    last = table.rows[-1]
    checks = [Check("ring_convergence", last.dev_periodic < ring_tol, {"L": last.L, "abs_dev": last.dev_periodic})]
    open_rows = [r for r in table.rows if not math.isnan(r.dev_open)]
    if open_rows:
        r = open_rows[-1]
        checks.append(Check("open_chain_convergence", r.dev_open < OPEN_CONVERGENCE_TOL,
                            {"L": r.L, "abs_dev": r.dev_open}))
    widths = [r for r in table.rows if not math.isnan(r.band_width)]
    if n == 1:
        ring = [r for r in table.rows if not math.isnan(r.dev_periodic)]
        worst = max((r.dev_periodic for r in ring), default=0.0)
        checks.append(Check("one_magnon_energy", worst < 1e-9, {"max_abs_dev": worst, "rows": len(ring)}))
        # K = π only exists on even rings
        even = [r for r in widths if r.L % 2 == 0]
        if even:
            r, expected = even[-1], 4 * q / (1 + q * q)
            checks.append(Check("one_magnon_width", abs(r.band_width - expected) < 1e-6,
                                {"L": r.L, "measured": r.band_width, "expected": expected}))
    elif n == 2 and widths:
        r = widths[-1]
        verdict = width_verdict(r.band_width, q, n)
        checks.append(Check("width_single_candidate", verdict in ("printed", "printed_over_delta"),
                            {"L": r.L, "measured": r.band_width, "verdict": verdict}))
    return checks


def droplet_campaign(cfg: RunConfig, threads: Optional[int]) -> CampaignResult:
    q = cfg["q"]
    if q is None:
        if cfg["Delta"] is None:
            raise ConfigError("droplet runs need q or Delta", key="q")
        q = q_from_delta(cfg["Delta"])
    n = cfg["n"]
    Ls = [L for L in range(cfg["Lmin"], cfg["Lmax"] + 1) if L >= max(n, 2)]
    if not Ls:
        raise ConfigError("no chain length in Lmin..Lmax fits the droplet", key="Lmax")
    table = convergence_table(q, n, Ls, threads)
    last = table.rows[-1]
    checks = droplet_checks(table, q, n, _tol(cfg, 1e-2))
    foel_L = min(max(Ls), 8)
    checks.append(Check("open_chain_foel", suq_foel_check(xxz_params(foel_L, q=q), threads).holds, {"L": foel_L}))
    summary: Dict[str, Any] = {
        "E_formula": table.formula_E,
        "convergence_tolerance": convergence_tolerance(q, last.L),
        "open_monotone": table.deviations_monotone("open"),
    }
    if n >= 1 and not math.isnan(last.band_width):
        summary["width_verdict"] = width_verdict(last.band_width, q, n)
    return CampaignResult(Table(CSV_COLUMNS, table.csv_rows()), checks, summary=summary)


def lightcone_campaign(cfg: RunConfig, threads: Optional[int]) -> CampaignResult:
    model = build_model(cfg)
    y = model.graph.n_vertices // 2 if cfg["site"] is None else cfg["site"]
    grid = lightcone_grid(model.H, model.phi, model.graph, _site_S3(model, y), (y,), cfg["times"], cfg["lam"],
                          threads=threads)
    table = Table(("x", "t", "measured", "bound_thm1", "bound_corollary"), grid.rows())
    checks = [Check("lieb_robinson_bound", grid.holds, {"phi_norm": grid.phi_norm, "lambda": cfg["lam"]})]
    return CampaignResult(table, checks, summary={"site": y, "fitted_rates": grid.fitted_rates})


def cluster_campaign(cfg: RunConfig, threads: Optional[int]) -> CampaignResult:
    model = build_model(cfg)
    report = clustering_report(model.H, model.phi, model.graph, lambda x: _site_S3(model, x), cfg["lam"],
                               b_points=cfg["b_points"], threads=threads)
    table = Table(("x", "y", "d", "b", "corr_abs", "bound_decay", "gamma", "mu"), report.table())
    # a degenerate ground state already raised inside clustering_report
    checks = [
        Check("gapped_unique_ground_state", report.gamma > CLUSTER_MIN_GAP,
              {"gamma": report.gamma, "minimum": CLUSTER_MIN_GAP}),
        Check("exponential_clustering", report.holds, {"c_fit": report.c_fit}),
        Check("zero_b_truncated_correlation", report.zero_b_deviation < 1e-10,
              {"max_abs_dev": report.zero_b_deviation}),
        Check("trivial_decay_bound", report.trivial_bound_holds, {}),
    ]
    return CampaignResult(table, checks, summary={"gamma": report.gamma, "mu": report.mu,
                                                  "phi_norm": report.phi_norm})


def perturb_campaign(cfg: RunConfig, threads: Optional[int]) -> CampaignResult:
    base, spin = chain_builder(cfg)
    pert = perturbation_builder(cfg["perturbation"], spin, cfg["periodic"])
    sweep = gap_sweep(base, pert, cfg["lambdas"], cfg["Ls"], spin=spin, threads=threads)
    table = Table(("L", "lambda", "ground_energy", "degeneracy", "gap"), sweep.rows())
    base_gaps = {L: sweep.gaps[(L, 0.0)] for L in sweep.Ls}
    checks = [
        Check("unperturbed_gap", all(g > 0 for g in base_gaps.values()), {"gaps": base_gaps}),
        Check("weyl_bound", all(sweep.weyl_ok.values()), {}),
        Check("gap_continuity", sweep.continuity_ok(), {"norms": sweep.perturbation_norms}),
    ]
    return CampaignResult(table, checks, summary={"stable_range": sweep.stable_range()})


CAMPAIGNS: Dict[str, Callable[[RunConfig, Optional[int]], CampaignResult]] = {
    "spectrum": spectrum_campaign,
    "foel": foel_campaign,
    "liebmattis": liebmattis_campaign,
    "ssep": ssep_campaign,
    "droplet": droplet_campaign,
    "lightcone": lightcone_campaign,
    "cluster": cluster_campaign,
    "perturb": perturb_campaign,
}


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

@dataclass
class RunOutcome:
    exit_code: int
    data_path: Path
    manifest_path: Path
    checks: List[Check]
    extra_paths: List[Path] = field(default_factory=list)
    record_id: Optional[int] = None

    @property
    def failed(self) -> List[Check]:
        return [c for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {
            "exit_code": self.exit_code,
            "data_path": str(self.data_path),
            "manifest_path": str(self.manifest_path),
            "extra_paths": [str(p) for p in self.extra_paths],
            "checks": [c.as_dict() for c in self.checks],
            "record_id": self.record_id,
        }


def versions() -> Dict[str, str]:
    return {
        "spinlab": spinlab.__version__,
        "python": platform.python_version(),
        "django": django.get_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "networkx": nx.__version__,
    }


def output_path(cfg: RunConfig) -> Path:
    if cfg["out"]:
        return Path(cfg["out"])
    base = Path(getattr(settings, "SPINLAB_OUTPUT_DIR", Path.cwd() / "runs_out"))
    return base / f"{cfg.subcommand}.{cfg['format']}"


def sibling(path: Path, name: str) -> Path:
    return path.with_name(f"{path.stem}_{name}{path.suffix}")


def manifest_path_for(path: Path) -> Path:
    return path.with_name(f"{path.stem}.manifest.json")


def exit_code_for(exc: SpinlabError) -> int:
    if isinstance(exc, ConfigError):
        return 2
    if isinstance(exc, OutputError):
        return 4
    return 3


@contextmanager
def solver_settings(cfg: RunConfig):
    changes = {name: cfg[key] for key, name in SOLVER_SETTINGS.items() if cfg[key] is not None}
    if not changes:
        yield
        return
    with override_settings(**changes):
        yield


def _record(cfg: RunConfig, wall: float, exit_code: int, checks: List[Check], data_path: str = "",
            manifest_path: str = "", error: str = "") -> RunRecord:
    with transaction.atomic():
        run = RunRecord.objects.create(
            subcommand=cfg.subcommand, config=cfg.echo(), versions=versions(), wall_time=wall,
            exit_code=exit_code, output_path=data_path, manifest_path=manifest_path, error=error,
        )
        AssertionRecord.objects.bulk_create(
            [AssertionRecord(run=run, name=c.name, passed=bool(c.passed), detail=c.as_dict()["detail"])
             for c in checks]
        )
    return run


def build_manifest(cfg: RunConfig, wall: float, exit_code: int, checks: List[Check], outputs: List[Path],
                   summary: Dict[str, Any]) -> dict:
    return {
        "subcommand": cfg.subcommand,
        "config": cfg.echo(),
        "versions": versions(),
        "wall_time": wall,
        "exit_code": exit_code,
        "outputs": [str(p) for p in outputs],
        "assertions": [c.as_dict() for c in checks],
        "summary": _json_safe(summary),
    }


def run_campaign(cfg: RunConfig, record: Optional[bool] = None) -> RunOutcome:
    """Run one campaign: data file, side tables, manifest and RunRecord; exit code 0 iff every check passed."""
    record = cfg["record"] if record is None else record
    t0 = time.perf_counter()
    path = output_path(cfg)
    try:
        with solver_settings(cfg):
            result = CAMPAIGNS[cfg.subcommand](cfg, cfg["threads"])
        data_path = emit(result.table, cfg["format"], path)
        extra = [emit(t, cfg["format"], sibling(path, name)) for name, t in result.extra_tables.items()]
    except SpinlabError as exc:
        if record:
            _record(cfg, time.perf_counter() - t0, exit_code_for(exc), [], error=str(exc))
        log.error("campaign failed", extra={"subcommand": cfg.subcommand, "error": str(exc)})
        raise
    wall = time.perf_counter() - t0
    exit_code = 0 if all(c.passed for c in result.checks) else 1
    manifest = build_manifest(cfg, wall, exit_code, result.checks, [data_path] + extra, result.summary)
    mpath = write_text(manifest_path_for(path), json.dumps(manifest, indent=1, default=str) + "\n")
    record_id = None
    if record:
        record_id = _record(cfg, wall, exit_code, result.checks, str(data_path), str(mpath)).pk
    passed = sum(1 for c in result.checks if c.passed)
    log.info("campaign finished", extra={"subcommand": cfg.subcommand, "passed": passed,
                                         "failed": len(result.checks) - passed, "seconds": round(wall, 3)})
    return RunOutcome(exit_code, data_path, mpath, result.checks, extra, record_id)
