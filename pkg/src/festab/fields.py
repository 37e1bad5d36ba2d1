"""Symmetric positive definite tensor fields (diffusion matrices, metrics).

A field maps points to d-by-d SPD matrices.  Variants: constants, analytic
builtins, per-region constants keyed by element tags, and lazy inverses.
The builtin names understood by `parse_field_spec` match the experiment
families: per1d, nonper1d, aniso2d, identity, constant, piecewise.
"""

from __future__ import annotations

import math

import numpy as np

SPD_RTOL = 1e-14


class TensorField:
    """Base class: callable on (m, d) point arrays, returns (m, d, d)."""

    #: spatial dimension, or None when the field works in any dimension
    dim = None
    #: True when evaluation is keyed by element region tag, not by point
    elementwise = False

    def __call__(self, x):
        raise NotImplementedError

    def name(self):
        return type(self).__name__


def _as_points(x, dim=None):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None] if dim in (None, 1) else x[None, :]
    return x


def check_spd(mats, context="field evaluation"):
    """Raise ValueError unless every matrix is symmetric with lmin > 0.

    The positivity threshold is relative: lmin > SPD_RTOL * lmax.
    """
    mats = np.asarray(mats, dtype=float)
    if mats.ndim == 2:
        mats = mats[None]
    asym = np.abs(mats - np.swapaxes(mats, -1, -2)).max()
    scale = np.abs(mats).max()
    if asym > 1e-12 * max(scale, 1e-300):
        raise ValueError(f"{context}: matrix not symmetric "
                         f"(asymmetry {asym:g})")
    ev = np.linalg.eigvalsh(0.5 * (mats + np.swapaxes(mats, -1, -2)))
    lmin = ev[..., 0]
    lmax = ev[..., -1]
    bad = lmin <= SPD_RTOL * np.maximum(lmax, 0.0)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise ValueError(f"{context}: matrix {k} not positive definite "
                         f"(eigenvalues {ev[k]})")


class Constant(TensorField):
    """Spatially constant SPD matrix (a scalar is taken as scalar*I)."""

    def __init__(self, matrix, dim=None):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim == 0:
            if dim is None:
                raise ValueError("scalar Constant needs an explicit dim")
            matrix = float(matrix) * np.eye(dim)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError("Constant needs a square matrix")
        check_spd(matrix, "Constant field")
        self.matrix = matrix
        self.dim = matrix.shape[0]

    def __call__(self, x):
        x = _as_points(x, self.dim)
        return np.broadcast_to(self.matrix, (len(x),) + self.matrix.shape).copy()

    def name(self):
        return f"constant({self.dim}d)"


def identity(dim):
    return Constant(np.eye(dim))


class Analytic(TensorField):
    """Field given by a vectorized function of the point coordinates.

    ``fn`` receives an (m, d) array and may return (m, d, d) matrices or
    (m,) scalars; scalars are promoted to scalar * I.
    """

    def __init__(self, fn, dim, label=None):
        self.fn = fn
        self.dim = dim
        self.label = label or "analytic"

    def __call__(self, x):
        x = _as_points(x, self.dim)
        vals = np.asarray(self.fn(x), dtype=float)
        if vals.ndim == 1:
            out = np.zeros((len(x), self.dim, self.dim))
            idx = np.arange(self.dim)
            out[:, idx, idx] = vals[:, None]
            return out
        return vals

    def name(self):
        return self.label


class PiecewiseConstantPerElement(TensorField):
    """Constant matrix per element region tag.

    Evaluated through `matrix_for(tag)`; point evaluation is undefined and
    the averaging routines special-case this variant.
    """

    elementwise = True

    def __init__(self, table, dim=None):
        self.table = {}
        for tag, mat in table.items():
            mat = np.asarray(mat, dtype=float)
            if mat.ndim == 0:
                if dim is None:
                    raise ValueError("scalar entries need an explicit dim")
                mat = float(mat) * np.eye(dim)
            check_spd(mat, f"piecewise field, region {tag}")
            self.table[int(tag)] = mat
            if dim is None:
                dim = mat.shape[0]
            elif mat.shape[0] != dim:
                raise ValueError("inconsistent matrix sizes in piecewise table")
        if dim is None:
            raise ValueError("empty piecewise table")
        self.dim = dim

    def matrix_for(self, tag):
        try:
            return self.table[int(tag)]
        except KeyError:
            raise ValueError(f"no matrix for region tag {tag}") from None

    def __call__(self, x):
        raise ValueError("piecewise-per-element field has no pointwise value; "
                         "use matrix_for(region_tag)")

    def name(self):
        return f"piecewise({len(self.table)} regions)"


class InverseOf(TensorField):
    """Pointwise inverse of another SPD field."""

    def __init__(self, inner):
        self.inner = inner
        self.dim = inner.dim
        self.elementwise = inner.elementwise

    def __call__(self, x):
        return np.linalg.inv(self.inner(x))

    def matrix_for(self, tag):
        return np.linalg.inv(self.inner.matrix_for(tag))

    def name(self):
        return f"inv({self.inner.name()})"


# ----------------------------------------------------------------------
# Builtins


def per1d(eps=2.0 ** -4):
    """Oscillatory 1D diffusion 1 / (2 - sin(2 pi x / eps))."""
    def fn(x):
        return 1.0 / (2.0 - np.sin(2.0 * np.pi * x[:, 0] / eps))
    return Analytic(fn, dim=1, label=f"per1d(eps={eps:g})")


def nonper1d(eps=2.0 ** -4):
    """Non-periodic oscillatory 1D diffusion with accelerating phase."""
    def fn(x):
        phase = np.tan((1.0 - eps) * np.pi * x[:, 0] / 2.0)
        return 1.0 / (2.0 - np.sin(2.0 * np.pi * phase))
    return Analytic(fn, dim=1, label=f"nonper1d(eps={eps:g})")


def aniso2d(kappa=1000.0):
    """Rotated anisotropic 2D diffusion R(theta) diag(kappa, 1) R(theta)^T
    with theta = pi sin(x) cos(y)."""
    def fn(x):
        th = np.pi * np.sin(x[:, 0]) * np.cos(x[:, 1])
        c, s = np.cos(th), np.sin(th)
        out = np.empty((len(x), 2, 2))
        out[:, 0, 0] = kappa * c * c + s * s
        out[:, 1, 1] = kappa * s * s + c * c
        out[:, 0, 1] = out[:, 1, 0] = (kappa - 1.0) * c * s
        return out
    return Analytic(fn, dim=2, label=f"aniso2d(kappa={kappa:g})")


def load_piecewise(path, dim=None):
    """Read a per-region table: lines `tag` + upper-triangle matrix entries.

    1D: `tag m11`; 2D: `tag m11 m12 m22`; 3D: `tag m11 m12 m13 m22 m23 m33`.
    '#' starts a comment.
    """
    table = {}
    with open(path) as f:
        for ln, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                tag = int(parts[0])
                vals = [float(p) for p in parts[1:]]
            except ValueError:
                raise ValueError(f"{path}:{ln}: malformed region line") from None
            if len(vals) == 1:
                mat = np.array([[vals[0]]])
            elif len(vals) == 3:
                mat = np.array([[vals[0], vals[1]], [vals[1], vals[2]]])
            elif len(vals) == 6:
                mat = np.array([[vals[0], vals[1], vals[2]],
                                [vals[1], vals[3], vals[4]],
                                [vals[2], vals[4], vals[5]]])
            else:
                raise ValueError(f"{path}:{ln}: expected 1, 3 or 6 matrix "
                                 f"entries, got {len(vals)}")
            table[tag] = mat
    return PiecewiseConstantPerElement(table, dim=dim)


_BUILTIN_DEFAULTS = {
    "identity": {},
    "constant": {"value": 1.0},
    "per1d": {"eps": 2.0 ** -4},
    "nonper1d": {"eps": 2.0 ** -4},
    "aniso2d": {"kappa": 1000.0},
    "piecewise": {"file": None},
}


def parse_field_spec(spec, dim=None):
    """Build a field from a `name:key=value,...` string.

    Examples: ``identity``, ``per1d:eps=0.0625``, ``aniso2d:kappa=1000``,
    ``piecewise:file=regions.txt``.  `dim` is required for `identity` and
    scalar `constant` and checked against the builtin's dimension otherwise.
    """
    name, _, rest = spec.partition(":")
    name = name.strip()
    if name not in _BUILTIN_DEFAULTS:
        raise ValueError(f"unknown field {name!r} (choices: "
                         f"{', '.join(sorted(_BUILTIN_DEFAULTS))})")
    params = dict(_BUILTIN_DEFAULTS[name])
    if rest.strip():
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            key = key.strip()
            if not eq or key not in params:
                raise ValueError(f"bad field parameter {item!r} for {name}")
            params[key] = value.strip()

    if name == "identity":
        if dim is None:
            raise ValueError("identity field needs the mesh dimension")
        return identity(dim)
    if name == "constant":
        if dim is None:
            raise ValueError("constant field needs the mesh dimension")
        return Constant(float(params["value"]), dim=dim)
    if name == "per1d":
        field = per1d(float(params["eps"]))
    elif name == "nonper1d":
        field = nonper1d(float(params["eps"]))
    elif name == "aniso2d":
        field = aniso2d(float(params["kappa"]))
    else:
        if not params["file"]:
            raise ValueError("piecewise field needs file=<path>")
        field = load_piecewise(params["file"], dim=dim)
    if dim is not None and field.dim is not None and field.dim != dim:
        raise ValueError(f"field {name} is {field.dim}D but the mesh is {dim}D")
    return field


def adapted_weight(field):
    """1D equidistribution weight w = D^{-1/2} for diffusion-matched meshes."""
    if field.dim not in (None, 1):
        raise ValueError("adapted_weight applies to 1D fields")

    def w(x):
        val = field(np.array([[float(x)]]))[0, 0, 0]
        return 1.0 / math.sqrt(val)
    return w
