"""Benchmark harness: builds the standard mesh families, evaluates every
bound against the exact eigenvalue and writes table-style CSV summaries.

Five families are provided:

========================  =====================================================
``per1d`` / ``nonper1d``  1D heat diffusion with an oscillatory (resp.
                          boundary-layer) coefficient, on uniform and on
                          coefficient-adapted meshes, N in ``sizes``.
``zd2d``                  2D Laplacian on a 32x32 square grid, a stretched
                          4x256 grid and a geometrically graded 4x16 grid.
``groundwater_like``      layered-aquifer lookalike: unit grid scaled to
                          (0,100)^2 with two nearly impermeable strips.
``aniso2d``               rotating anisotropic coefficient (ratio kappa) on a
                          quasi-uniform grid and on a direction-aligned patch.
========================  =====================================================

Experiment files are plain INI text, one section per experiment::

    [per1d]
    sizes = 64 128 256
    lumping = both
    output = per1d.csv

Every run is deterministic: the only randomness (Lanczos start vectors) is
seeded, and CSV floats are written with full repr precision.
"""

from __future__ import annotations

import configparser
import json
import math
import os
import warnings
from dataclasses import dataclass, field as _dc_field

import numpy as np

from .mesh import (DIRICHLET, NEUMANN, SimplicialMesh, gen_equidistributed_1d,
                   gen_structured_2d, gen_uniform_1d, load_mesh)
from .fields import (PiecewiseConstantPerElement, adapted_weight, aniso2d,
                     identity, nonper1d, per1d)
from .bounds import stability_report

FAMILIES = ("per1d", "nonper1d", "zd2d", "groundwater_like", "aniso2d")

_DEFAULT_SIZES = (64, 128, 256, 512, 1024)


# ----------------------------------------------------------------------------
# builtin mesh builders beyond the structured generators
# ----------------------------------------------------------------------------

def gen_groundwater_like(n=25, contrast=1e-6):
    """Layered-aquifer benchmark on (0,100)^2; returns (mesh, field).

    Two horizontal strips y in [40,44] and [64,68], truncated to
    x in [20,80], carry diffusion ``contrast * I`` (nearly impermeable);
    everywhere else the diffusion is the identity.  Flow is driven top to
    bottom: y=0 and y=100 are Dirichlet, the vertical sides are no-flux.
    With ``n`` a multiple of 25 the grid lines pass exactly through the
    strip boundaries and corners, so the strips are resolved sharply.
    """
    if n < 5:
        raise ValueError("groundwater grid needs n >= 5")
    base = gen_structured_2d(n, n, diagonal="right")
    nodes = 100.0 * base.nodes
    x, y = nodes[:, 0], nodes[:, 1]
    markers = np.zeros(len(nodes), dtype=np.int64)
    markers[(x == 0.0) | (x == 100.0)] = NEUMANN
    markers[(y == 0.0) | (y == 100.0)] = DIRICHLET

    cent = nodes[base.elements].mean(axis=1)
    cx, cy = cent[:, 0], cent[:, 1]
    in_strip = ((cx >= 20.0) & (cx <= 80.0)
                & (((cy >= 40.0) & (cy <= 44.0))
                   | ((cy >= 64.0) & (cy <= 68.0))))
    tags = in_strip.astype(np.int64)

    mesh = SimplicialMesh(nodes, base.elements, markers, region_tags=tags)
    diffusion = PiecewiseConstantPerElement(
        {0: np.eye(2), 1: contrast * np.eye(2)}, dim=2)
    return mesh, diffusion


def _rot_dirs(kappa):
    """Unit direction fields of the rotating-anisotropy benchmark."""
    del kappa  # orientation does not depend on the aspect ratio

    def principal(p):
        th = math.pi * math.sin(p[0]) * math.cos(p[1])
        return np.array([math.cos(th), math.sin(th)])

    def transverse(p):
        th = math.pi * math.sin(p[0]) * math.cos(p[1])
        return np.array([-math.sin(th), math.cos(th)])

    return principal, transverse


def _rk4(p, f, h):
    k1 = f(p)
    k2 = f(p + 0.5 * h * k1)
    k3 = f(p + 0.5 * h * k2)
    k4 = f(p + h * k3)
    return p + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _march(p0, f, steps_fwd, steps_back, h):
    """Streamline points through p0: steps_back upstream + p0 + steps_fwd."""
    fwd = [np.asarray(p0, dtype=float)]
    for _ in range(steps_fwd):
        fwd.append(_rk4(fwd[-1], f, h))
    back = [fwd[0]]
    for _ in range(steps_back):
        back.append(_rk4(back[-1], f, -h))
    return back[::-1][:-1] + fwd


def gen_metric_aligned(kappa=1000.0, seed_point=(0.45, 0.35),
                       n_long=16, n_short=100,
                       step_long=0.02, step_short=None):
    """Structured patch whose cells follow the rotating-anisotropy axes.

    Starting from ``seed_point``, a spine is traced along the principal
    diffusion direction by RK4 arc-length stepping; from each spine point a
    transversal is traced along the perpendicular direction with the step
    shrunk by sqrt(kappa).  The resulting logically rectangular point set is
    split into triangles (alternating diagonals), giving elements that are
    long across the strong-diffusion axis and short across the weak one --
    the shape that maximizes the stable time step for this coefficient.
    The patch boundary is clamped (Dirichlet).
    """
    if n_long < 2 or n_short < 2:
        raise ValueError("aligned patch needs n_long, n_short >= 2")
    if step_short is None:
        step_short = step_long / math.sqrt(kappa)
    principal, transverse = _rot_dirs(kappa)

    spine = _march(seed_point, principal,
                   n_long // 2, n_long - n_long // 2, step_long)
    rows = [_march(p, transverse, n_short // 2, n_short - n_short // 2,
                   step_short) for p in spine]
    pts = np.array(rows)  # (n_long+1, n_short+1, 2)

    ni, nj = pts.shape[0] - 1, pts.shape[1] - 1
    nodes = pts.reshape(-1, 2)

    def nid(i, j):
        return i * (nj + 1) + j

    elements = []
    for i in range(ni):
        for j in range(nj):
            a, b = nid(i, j), nid(i + 1, j)
            c, d = nid(i + 1, j + 1), nid(i, j + 1)
            if (i + j) % 2 == 0:
                elements.append((a, b, c))
                elements.append((a, c, d))
            else:
                elements.append((a, b, d))
                elements.append((b, c, d))

    markers = np.zeros((ni + 1, nj + 1), dtype=np.int64)
    markers[0, :] = markers[-1, :] = DIRICHLET
    markers[:, 0] = markers[:, -1] = DIRICHLET
    return SimplicialMesh(nodes, np.array(elements), markers.ravel())


# ----------------------------------------------------------------------------
# experiment specification and table rows
# ----------------------------------------------------------------------------

@dataclass
class ExperimentSpec:
    """One benchmark family plus its parameters.

    ``lumping`` selects the mass-surrogate panel: "full", "lumped" or
    "both".  For 1D families "lumped" means the diagonal of vertex-patch
    volumes; for 2D families it means row sums of the eliminated mass
    matrix (the convention under which the reference time-step tables for
    the square-grid family are reproduced).
    """
    name: str
    sizes: tuple = _DEFAULT_SIZES
    eps: float = 2.0 ** -4
    kappa: float = 1000.0
    contrast: float = 1e-6
    lumping: str = "both"
    bounds: tuple = ("diag", "geo", "zhudu", "shewchuk")
    output: str | None = None
    mesh_files: tuple = ()
    stages: int = 1
    quad_order: int = 4

    def __post_init__(self):
        if self.name not in FAMILIES:
            raise ValueError(f"unknown experiment family {self.name!r}; "
                             f"expected one of {FAMILIES}")
        self.sizes = tuple(int(n) for n in self.sizes)
        if any(n < 4 for n in self.sizes):
            raise ValueError("every mesh size N must be >= 4")
        if self.lumping not in ("both", "full", "lumped"):
            raise ValueError(f"lumping must be both/full/lumped, "
                             f"got {self.lumping!r}")
        if self.stages < 1:
            raise ValueError("stages must be >= 1")

    def mass_kinds(self):
        lumped_kind = "lumped" if self.name in ("per1d", "nonper1d") \
            else "lumped_rowsum"
        if self.lumping == "full":
            return ("full",)
        if self.lumping == "lumped":
            return (lumped_kind,)
        return ("full", lumped_kind)


@dataclass
class TableRow:
    """One (mesh, mass surrogate) cell of a benchmark table."""
    mesh_id: str
    n_elements: int
    mass_kind: str
    lambda_max: float
    tau_max_over_s2: float
    tau_h_over_s2: dict = _dc_field(default_factory=dict)
    ratio: dict = _dc_field(default_factory=dict)
    note: str = ""

    @classmethod
    def from_report(cls, report):
        taus = {}
        ratios = {}
        for method, tau_h, ratio in report.method_rows():
            taus[method] = tau_h
            ratios[method] = ratio
        return cls(mesh_id=report.mesh_id, n_elements=report.n_elements,
                   mass_kind=report.mass_kind, lambda_max=report.lambda_exact,
                   tau_max_over_s2=report.tau_max_over_s2,
                   tau_h_over_s2=taus, ratio=ratios)

    def to_dict(self):
        return {"mesh_id": self.mesh_id, "n_elements": self.n_elements,
                "mass_kind": self.mass_kind, "lambda_max": self.lambda_max,
                "tau_max_over_s2": self.tau_max_over_s2,
                "tau_h_over_s2": dict(self.tau_h_over_s2),
                "ratio": dict(self.ratio), "note": self.note}


def _skip_row(mesh_id, note):
    return TableRow(mesh_id=mesh_id, n_elements=0, mass_kind="-",
                    lambda_max=float("nan"), tau_max_over_s2=float("nan"),
                    note=note)


# ----------------------------------------------------------------------------
# family case lists
# ----------------------------------------------------------------------------

def _cases_1d(spec):
    builder = per1d if spec.name == "per1d" else nonper1d
    diffusion = builder(spec.eps)
    weight = adapted_weight(diffusion)
    for n in spec.sizes:
        yield f"{spec.name}-uniform-N{n}", gen_uniform_1d(n), diffusion
        yield (f"{spec.name}-adapted-N{n}",
               gen_equidistributed_1d(n, weight), diffusion)


def _cases_zd2d(spec):
    diffusion = identity(2)
    yield "zd2d-32x32", gen_structured_2d(32, 32), diffusion
    yield "zd2d-4x256", gen_structured_2d(4, 256), diffusion
    yield ("zd2d-bl-4x16",
           gen_structured_2d(4, 16, grading="geometric", ratio_y=1.15),
           diffusion)


def _cases_groundwater(spec):
    mesh, diffusion = gen_groundwater_like(contrast=spec.contrast)
    yield "groundwater-25x25", mesh, diffusion
    for path in spec.mesh_files:
        if not os.path.exists(path):
            yield f"missing:{path}", None, None
            continue
        ext_mesh = load_mesh(path)
        tags = set(np.unique(ext_mesh.region_tags).tolist())
        if not tags <= {0, 1}:
            raise ValueError(f"{path}: region tags must be 0 (background) "
                             f"or 1 (strip), found {sorted(tags)}")
        ext_diff = PiecewiseConstantPerElement(
            {0: np.eye(ext_mesh.dim),
             1: spec.contrast * np.eye(ext_mesh.dim)}, dim=ext_mesh.dim)
        yield f"groundwater-file-{os.path.basename(path)}", ext_mesh, ext_diff


def _cases_aniso2d(spec):
    diffusion = aniso2d(spec.kappa)
    yield "aniso2d-32x32", gen_structured_2d(32, 32), diffusion
    yield "aniso2d-aligned", gen_metric_aligned(spec.kappa), diffusion


_CASE_BUILDERS = {
    "per1d": _cases_1d,
    "nonper1d": _cases_1d,
    "zd2d": _cases_zd2d,
    "groundwater_like": _cases_groundwater,
    "aniso2d": _cases_aniso2d,
}


# ----------------------------------------------------------------------------
# driver
# ----------------------------------------------------------------------------

def run_experiment(spec):
    """Run one family; returns TableRow list (and writes CSV if requested).

    Every row is checked against the bracket guarantee: the diagonal-ratio
    bound must satisfy 1 <= tau_max/tau_h <= C* up to 1e-9; a violation
    aborts the run since it would mean the implementation is wrong.
    """
    rows = []
    for mesh_id, mesh, diffusion in _CASE_BUILDERS[spec.name](spec):
        if mesh is None:
            warnings.warn(f"{spec.name}: skipping missing mesh {mesh_id}")
            rows.append(_skip_row(mesh_id, "missing mesh file"))
            continue
        for kind in spec.mass_kinds():
            report = stability_report(mesh, diffusion, mass_kind=kind,
                                      s=spec.stages,
                                      quad_order=spec.quad_order,
                                      include=spec.bounds, mesh_id=mesh_id)
            row = TableRow.from_report(report)
            r = row.ratio["diag"]
            if not (1.0 - 1e-9 <= r <= report.c_star + 1e-9):
                raise RuntimeError(
                    f"{mesh_id}/{kind}: bracket ratio {r} outside "
                    f"[1, {report.c_star}] -- assembly or bound is broken")
            rows.append(row)
    if spec.output:
        write_rows_csv(spec.output, rows)
    return rows


def write_rows_csv(path, rows):
    """Table rows as CSV; repr floats so equal runs give equal bytes."""
    methods = []
    for row in rows:
        for m in row.tau_h_over_s2:
            if m not in methods:
                methods.append(m)
    header = ["mesh_id", "n_elements", "mass_kind", "lambda_max",
              "tau_max_over_s2"]
    header += [f"tau_h_{m}_over_s2" for m in methods]
    header += [f"ratio_{m}" for m in methods]
    header.append("note")
    lines = [",".join(header)]
    for row in rows:
        vals = [row.mesh_id, str(row.n_elements), row.mass_kind,
                repr(row.lambda_max), repr(row.tau_max_over_s2)]
        vals += [repr(row.tau_h_over_s2[m]) if m in row.tau_h_over_s2 else ""
                 for m in methods]
        vals += [repr(row.ratio[m]) if m in row.ratio else ""
                 for m in methods]
        vals.append(row.note)
        lines.append(",".join(vals))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary_json(path, rows_by_experiment):
    """Combined machine-readable summary over all experiments."""
    payload = {name: [row.to_dict() for row in rows]
               for name, rows in rows_by_experiment.items()}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def compare_lumping(rows):
    """Per-mesh tau_max(lumped)/tau_max(full) plus aggregate min/max.

    Requires exactly one full-mass row and one lumped row per mesh id;
    anything else raises ValueError (unmatched rows).
    """
    by_mesh = {}
    for row in rows:
        if math.isnan(row.lambda_max):
            continue
        by_mesh.setdefault(row.mesh_id, {})[row.mass_kind] = row
    ratios = {}
    for mesh_id, kinds in by_mesh.items():
        lumped_keys = [k for k in kinds if k != "full"]
        if "full" not in kinds or len(lumped_keys) != 1:
            raise ValueError(f"unmatched rows for mesh {mesh_id!r}: "
                             f"have kinds {sorted(kinds)}, need 'full' plus "
                             f"exactly one lumped kind")
        full = kinds["full"]
        lump = kinds[lumped_keys[0]]
        ratios[mesh_id] = lump.tau_max_over_s2 / full.tau_max_over_s2
    if not ratios:
        raise ValueError("no comparable rows")
    vals = list(ratios.values())
    return LumpingSummary(ratios, min(vals), max(vals))


@dataclass
class LumpingSummary:
    per_mesh: dict
    min_ratio: float
    max_ratio: float


# ----------------------------------------------------------------------------
# experiment files
# ----------------------------------------------------------------------------

_FLOAT_KEYS = {"eps", "kappa", "contrast"}
_INT_KEYS = {"stages", "quad_order"}
_TUPLE_KEYS = {"sizes", "bounds", "mesh_files"}


def parse_experiment_file(path):
    """INI-style experiment file -> list of ExperimentSpec.

    Section names are the family names; keys mirror ExperimentSpec fields.
    List-valued keys (sizes, bounds, mesh_files) are whitespace-separated.
    """
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh, source=path)
    specs = []
    for section in parser.sections():
        kwargs = {"name": section}
        for key, raw in parser.items(section):
            if key == "name":
                continue
            if key in _FLOAT_KEYS:
                kwargs[key] = float(raw)
            elif key in _INT_KEYS:
                kwargs[key] = int(raw)
            elif key == "sizes":
                kwargs[key] = tuple(int(tok) for tok in raw.split())
            elif key in _TUPLE_KEYS:
                kwargs[key] = tuple(raw.split())
            elif key in ("lumping", "output"):
                kwargs[key] = raw.strip()
            else:
                raise ValueError(f"{path} [{section}]: unknown key {key!r}")
        try:
            specs.append(ExperimentSpec(**kwargs))
        except ValueError as exc:
            raise ValueError(f"{path} [{section}]: {exc}") from exc
    if not specs:
        raise ValueError(f"{path}: no experiment sections found")
    return specs


def run_experiment_file(path, out_dir="."):
    """Run every experiment in a spec file; returns {name: rows}.

    Per-experiment CSVs go to each spec's ``output`` (resolved against
    ``out_dir`` when relative); a combined ``summary.json`` is always
    written to ``out_dir``.
    """
    specs = parse_experiment_file(path)
    os.makedirs(out_dir, exist_ok=True)
    results = {}
    for spec in specs:
        if spec.output and not os.path.isabs(spec.output):
            spec.output = os.path.join(out_dir, spec.output)
        results[spec.name] = run_experiment(spec)
    write_summary_json(os.path.join(out_dir, "summary.json"), results)
    return results
