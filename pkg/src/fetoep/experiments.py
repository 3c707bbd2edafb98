"""
Experiment harness: declarative run configurations, refinement sequences,
iteration tables, spectrum scatters and matrix export.

A plan is an INI document holding one ``[run:<name>]`` section per
configuration; keys given in ``[DEFAULT]`` are shared by every run. The
packaged presets under ``fetoep/presets`` are plans of this form.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import io
import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .assembly import assemble_convection, assemble_diffusion, assemble_rhs, is_symmetric
from .coefficients import parse_coefficient
from .errors import InvalidParameterError
from .krylov import DEFAULT_TOL, SolveReport, solve
from .matrix_io import matrix_symmetry, write_matrix
from .mesh import Mesh, generate_hex_structured, generate_square_fk, import_triangle, perturb, read_triangle, refine_midpoint
from .precond import build_exact, build_surrogate, identity, scaling_diagonal
from .spectral import SpectrumReport, preconditioned_spectrum, rayleigh_bounds
from .structure import FTILDE, build_toeplitz, embed_hex

log = logging.getLogger(__name__)

DOMAINS = ("hexagon", "square")
DOMAIN_ALIASES = {"unit-square": "square", "hex": "hexagon"}
SOURCES = ("structured", "unstructured", "perturbed")
METHODS = ("pcg", "pgmres")
PRECONDS = ("exact", "surrogate", "none")
DEFAULT_M0 = {"hexagon": 4, "square": 10}
RAYLEIGH_CHECK_LIMIT = 500

TABLE_COLUMNS = [
    "run", "domain", "mesh", "level", "m", "n", "h", "a", "b", "method", "precond",
    "iterations", "converged", "relres", "true_relres", "time_s",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """One column of an iteration table: a mesh sequence plus a solver setup.

    ``m0`` is the segments-per-side of level 0 for the structured and
    perturbed sources; level ``k`` uses ``m0 * 2**k``. The unstructured
    source refines ``mesh_file`` (or the packaged coarse mesh) ``k`` times
    by edge midpoints. Perturbed level ``k`` jitters the structured level
    with seed ``seed + k``.
    """

    name: str = "run"
    domain: str = "hexagon"
    source: str = "structured"
    mesh_file: Optional[str] = None
    m0: Optional[int] = None
    levels: int = 5
    alpha: float = 0.2
    seed: int = 0
    a: str = "a1"
    b: str = "none"
    method: str = "pcg"
    precond: str = "exact"
    spacing: str = "edge"
    tol: float = DEFAULT_TOL
    maxit: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "domain", DOMAIN_ALIASES.get(self.domain, self.domain))
        self.validate()

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise InvalidParameterError(f"run {self.name!r}: {msg}")

        need(self.name and all(c.isalnum() or c in "-_." for c in self.name), "name must be alphanumeric, '-', '_' or '.'")
        need(self.domain in DOMAINS, f"domain must be one of {DOMAINS}")
        need(self.source in SOURCES, f"source must be one of {SOURCES}")
        need(self.method in METHODS, f"method must be one of {METHODS}")
        need(self.precond in PRECONDS, f"precond must be one of {PRECONDS}")
        need(isinstance(self.levels, int) and self.levels >= 1, "levels must be a positive integer")
        need(self.m0 is None or (isinstance(self.m0, int) and self.m0 >= 2), "m0 must be an integer >= 2")
        need(0.0 <= self.alpha < 0.5, "alpha must lie in [0, 0.5)")
        need(0.0 < self.tol < 1.0, "tol must lie in (0, 1)")
        need(self.maxit is None or self.maxit >= 1, "maxit must be positive")
        need(self.mesh_file is None or self.source == "unstructured", "mesh_file needs the unstructured source")
        parse_coefficient(self.a, self.domain)
        parse_coefficient(self.b, self.domain, vector=True)
        need(self.method != "pcg" or self.b == "none", "pcg needs b = none (symmetric system)")
        need(self.precond != "surrogate" or self.domain == "hexagon", "the surrogate preconditioner needs the hexagon domain")
        if self.spacing not in ("edge", "area"):
            try:
                need(float(self.spacing) > 0, "spacing must be positive")
            except ValueError:
                need(False, "spacing must be 'edge', 'area' or a number")

    # -- fields -----------------------------------------------------------

    @property
    def diffusion(self):
        return parse_coefficient(self.a, self.domain)

    @property
    def convection(self):
        return parse_coefficient(self.b, self.domain, vector=True)

    @property
    def start_m(self):
        return DEFAULT_M0[self.domain] if self.m0 is None else self.m0

    def replace(self, **changes):
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)

    # -- text form --------------------------------------------------------

    def to_section(self):
        out = {}
        for f in dataclasses.fields(self):
            if f.name == "name":
                continue
            v = getattr(self, f.name)
            out[f.name] = "" if v is None else (repr(v) if isinstance(v, float) else str(v))
        return out

    @classmethod
    def from_section(cls, name, section):
        kinds = {f.name: f.type for f in dataclasses.fields(cls)}
        kw = {"name": name}
        for key, raw in section.items():
            if key not in kinds:
                raise InvalidParameterError(f"run {name!r}: unknown key {key!r}")
            raw = raw.strip()
            kind = kinds[key]
            try:
                if raw == "" and "Optional" in kind:
                    kw[key] = None
                elif "int" in kind:
                    kw[key] = int(raw)
                elif "float" in kind:
                    kw[key] = float(raw)
                else:
                    kw[key] = raw
            except ValueError:
                raise InvalidParameterError(f"run {name!r}: bad value {raw!r} for {key!r}") from None
        return cls(**kw)

    def to_text(self):
        return ExperimentPlan(self.name, (self,)).to_text()

    @classmethod
    def from_text(cls, text):
        plan = ExperimentPlan.from_text(text)
        if len(plan.runs) != 1:
            raise InvalidParameterError(f"expected one run, found {len(plan.runs)}")
        return plan.runs[0]


@dataclass(frozen=True)
class ExperimentPlan:
    name: str
    runs: tuple

    def to_text(self):
        cp = configparser.ConfigParser(interpolation=None)
        for run in self.runs:
            cp[f"run:{run.name}"] = run.to_section()
        buf = io.StringIO()
        buf.write(f"# plan {self.name}\n")
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_text(cls, text, name="plan"):
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise InvalidParameterError(f"bad config text: {exc}") from None
        for line in text.splitlines():
            if line.startswith("# plan "):
                name = line[len("# plan "):].strip()
                break
        runs = []
        for section in cp.sections():
            kind, _, run_name = section.partition(":")
            if kind != "run" or not run_name:
                raise InvalidParameterError(f"unknown section [{section}]")
            runs.append(ExperimentConfig.from_section(run_name, cp[section]))
        if not runs:
            raise InvalidParameterError("config holds no [run:<name>] section")
        return cls(name, tuple(runs))

    def replace(self, **changes):
        return ExperimentPlan(self.name, tuple(r.replace(**changes) for r in self.runs))


def preset_names():
    root = resources.files("fetoep") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def load_preset(name) -> ExperimentPlan:
    path = resources.files("fetoep") / "presets" / f"{name}.ini"
    if not path.is_file():
        raise InvalidParameterError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return ExperimentPlan.from_text(path.read_text(), name=name)


def load_plan(path) -> ExperimentPlan:
    path = Path(path)
    return ExperimentPlan.from_text(path.read_text(), name=path.stem)


# ---------------------------------------------------------------------------
# Meshes
# ---------------------------------------------------------------------------

def builtin_mesh(domain) -> Mesh:
    """Packaged coarse Triangle mesh of ``domain``."""
    base = resources.files("fetoep") / "data"
    return import_triangle(
        (base / f"{domain}_coarse.node").read_text(), (base / f"{domain}_coarse.ele").read_text()
    )


def _structured(domain, m):
    return generate_hex_structured(m) if domain == "hexagon" else generate_square_fk(m)


def mesh_sequence(config: ExperimentConfig, levels=None):
    """Yield ``(level, mesh)`` for ``level = 0 .. levels - 1``."""
    levels = config.levels if levels is None else levels
    if config.source == "unstructured":
        mesh = builtin_mesh(config.domain) if config.mesh_file is None else read_triangle(config.mesh_file)
        for k in range(levels):
            yield k, mesh
            if k + 1 < levels:
                mesh = refine_midpoint(mesh)
        return
    for k in range(levels):
        mesh = _structured(config.domain, config.start_m * 2 ** k)
        if config.source == "perturbed":
            mesh = perturb(mesh, config.alpha, config.seed + k)
        yield k, mesh


def mesh_at(config: ExperimentConfig, level) -> Mesh:
    if not 0 <= level:
        raise InvalidParameterError("level must be nonnegative")
    for k, mesh in mesh_sequence(config, level + 1):
        if k == level:
            return mesh


# ---------------------------------------------------------------------------
# One level
# ---------------------------------------------------------------------------

@dataclass
class LevelSystem:
    mesh: Mesh
    theta: sp.csr_matrix
    psi: Optional[sp.csr_matrix]
    rhs: np.ndarray

    @property
    def matrix(self):
        return self.theta if self.psi is None else (self.theta + self.psi).tocsr()


def assemble_level(config: ExperimentConfig, mesh: Mesh) -> LevelSystem:
    theta = assemble_diffusion(mesh, config.diffusion)
    b = config.convection
    psi = None if b is None else assemble_convection(mesh, b)
    return LevelSystem(mesh, theta, psi, assemble_rhs(mesh, 1.0))


def build_preconditioner(config: ExperimentConfig, system: LevelSystem):
    if config.precond == "none":
        return identity(system.mesh.n)
    if config.precond == "exact":
        return build_exact(system.mesh, config.diffusion, theta=system.theta)
    spacing = config.spacing if config.spacing in ("edge", "area") else float(config.spacing)
    return build_surrogate(system.mesh, config.diffusion, theta=system.theta, spacing=spacing)


def solve_level(config: ExperimentConfig, mesh: Mesh) -> SolveReport:
    system = assemble_level(config, mesh)
    P = build_preconditioner(config, system)
    return solve(system.matrix, system.rhs, P, config.method, config.tol, config.maxit)


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------

def table_row(config, level, mesh, report):
    return {
        "run": config.name,
        "domain": config.domain,
        "mesh": config.source,
        "level": level,
        "m": "" if mesh.m is None else mesh.m,
        "n": mesh.n,
        "h": f"{mesh.h:.12g}",
        "a": config.a,
        "b": config.b,
        "method": config.method,
        "precond": config.precond,
        "iterations": report.iterations,
        "converged": "1" if report.converged else "0",
        "relres": f"{report.relres:.6e}",
        "true_relres": f"{report.true_relres:.6e}",
        "time_s": f"{report.time:.4f}",
    }


@dataclass
class TableResult:
    rows: list

    @property
    def ok(self):
        return all(r["converged"] == "1" for r in self.rows)

    def to_csv(self, with_time=True):
        cols = TABLE_COLUMNS if with_time else TABLE_COLUMNS[:-1]
        buf = io.StringIO()
        w = csv.DictWriter(buf, cols, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        w.writerows(self.rows)
        return buf.getvalue()

    def column(self, run, key="iterations"):
        return [r[key] for r in self.rows if r["run"] == run]


def run_table(plan) -> TableResult:
    """Solve every level of every run; one row per (run, level).

    Levels of a run are processed in order. A run that fails to converge
    keeps its row, flagged ``converged = 0``.
    """
    runs = plan.runs if isinstance(plan, ExperimentPlan) else (plan,)
    rows = []
    for config in runs:
        for level, mesh in mesh_sequence(config):
            report = solve_level(config, mesh)
            rows.append(table_row(config, level, mesh, report))
            log.info("%s level %d n=%d: %d iterations%s", config.name, level, mesh.n, report.iterations,
                     "" if report.converged else " (not converged)")
    return TableResult(rows)


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------

@dataclass
class SpectrumResult:
    config: ExperimentConfig
    level: int
    n: int
    report: SpectrumReport
    checks: dict

    @property
    def ok(self):
        return all(self.checks.values())

    def scatter_csv(self):
        return self.report.scatter_csv()

    def summary_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["run", "level", "n", "eps", "outliers", "min_real", "max_real", "max_abs_imag", "max_abs"])
        r = self.report
        for eps, count in r.outliers.items():
            w.writerow([self.config.name, self.level, self.n, eps, count,
                        f"{r.min_real:.12g}", f"{r.max_real:.12g}", f"{r.max_abs_imag:.12g}", f"{r.max_abs:.12g}"])
        return buf.getvalue()

    def checks_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["run", "level", "check", "passed"])
        for name, passed in self.checks.items():
            w.writerow([self.config.name, self.level, name, int(bool(passed))])
        return buf.getvalue()


def run_spectrum(config: ExperimentConfig, level=0, part="full") -> SpectrumResult:
    """Eigenvalues of ``P^{-1} X`` at one level, ``X`` the full system or
    its real/imaginary part, with diagnostic checks.

    Checks: real parts positive (for the full and real parts) and, up to
    ``RAYLEIGH_CHECK_LIMIT`` unknowns, containment of the spectrum in the
    rectangle spanned by the Rayleigh quotients of the two parts.
    """
    mesh = mesh_at(config, level)
    system = assemble_level(config, mesh)
    P = build_preconditioner(config, system)
    A = system.matrix
    report = preconditioned_spectrum(A, P, part=part)
    checks = {}
    if part != "imag":
        checks["positive_real_part"] = report.min_real > 0
    if part == "full" and mesh.n <= RAYLEIGH_CHECK_LIMIT:
        (re_lo, re_hi), (im_lo, im_hi) = rayleigh_bounds(A, P)
        ev = report.eigenvalues
        slack = 1e-8 * max(1.0, report.max_abs)
        checks["field_of_values"] = bool(
            np.all(ev.real >= re_lo - slack) and np.all(ev.real <= re_hi + slack)
            and np.all(ev.imag >= im_lo - slack) and np.all(ev.imag <= im_hi + slack)
        )
    return SpectrumResult(config, level, mesh.n, report, checks)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def export_matrices(config: ExperimentConfig, level, out_dir):
    """Write the level's matrices in Matrix Market format plus ``manifest.json``.

    Files: ``theta.mtx`` (stiffness with ``a``), ``psi.mtx`` (convection,
    when ``b`` is set), ``a_one.mtx`` (stiffness with ``a = 1``), ``d.mtx``
    (the scaling ``D_n`` as a diagonal matrix) and, for structured hexagon
    meshes, ``toeplitz.mtx`` (``T_N(f~)`` on the enclosing lattice box).
    Returns the manifest dictionary.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    mesh = mesh_at(config, level)
    system = assemble_level(config, mesh)
    a_one = assemble_diffusion(mesh, 1.0)
    d = scaling_diagonal(system.theta, a_one)
    entries = [("theta", "stiffness", system.theta)]
    if system.psi is not None:
        entries.append(("psi", "convection", system.psi))
    entries += [("a_one", "stiffness_a1", a_one), ("d", "scaling_diagonal", sp.diags(d, format="csr"))]
    if mesh.family == "hex":
        outer, _ = embed_hex(mesh)
        entries.append(("toeplitz", "toeplitz_ftilde", build_toeplitz(FTILDE, *outer.lattice_dims)))

    files = []
    for stem, role, mat in entries:
        path = write_matrix(out / f"{stem}.mtx", mat, symmetric=is_symmetric(mat))
        files.append({
            "file": path.name, "role": role, "shape": list(mat.shape), "nnz": int(mat.nnz),
            "symmetry": matrix_symmetry(path),
        })
    manifest = {
        "run": config.name, "level": level, "n": mesh.n, "mesh_family": mesh.family,
        "m": mesh.m, "h": mesh.h, "config": config.to_text(), "files": files,
    }
    path = out / "manifest.json"
    try:
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write manifest {path}: {exc}") from exc
    return manifest
