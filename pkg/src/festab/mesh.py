"""Simplicial meshes for d in {1, 2, 3}.

Provides the mesh container with boundary markers, affine maps onto the
equilateral unit-volume reference element, node patches, a line-oriented
text format, and the structured / equidistributed generators used by the
stability experiments.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq

INTERIOR = 0
DIRICHLET = 1
NEUMANN = 2

_VALID_MARKERS = (INTERIOR, DIRICHLET, NEUMANN)


def reference_simplex(d):
    """Vertices of the regular reference simplex with unit volume.

    d=1: the segment [0, 1]; d=2: the equilateral triangle with side
    2/3^(1/4); d=3: the regular tetrahedron with side (6*sqrt(2))^(1/3).
    Vertex 0 is always the origin.
    """
    if d == 1:
        return np.array([[0.0], [1.0]])
    if d == 2:
        ell = 2.0 / 3.0 ** 0.25
        return np.array([
            [0.0, 0.0],
            [ell, 0.0],
            [0.5 * ell, 0.5 * math.sqrt(3.0) * ell],
        ])
    if d == 3:
        a = (6.0 * math.sqrt(2.0)) ** (1.0 / 3.0)
        return np.array([
            [0.0, 0.0, 0.0],
            [a, 0.0, 0.0],
            [0.5 * a, 0.5 * math.sqrt(3.0) * a, 0.0],
            [0.5 * a, a / (2.0 * math.sqrt(3.0)), a * math.sqrt(2.0 / 3.0)],
        ])
    raise ValueError(f"unsupported dimension {d}")


def reference_diameter(d):
    """Edge length h-hat of the regular unit-volume reference simplex."""
    if d == 1:
        return 1.0
    if d == 2:
        return 2.0 / 3.0 ** 0.25
    if d == 3:
        return (6.0 * math.sqrt(2.0)) ** (1.0 / 3.0)
    raise ValueError(f"unsupported dimension {d}")


def reference_edge_matrix(d):
    """Matrix E-hat whose columns are the reference edge vectors v_j - v_0."""
    v = reference_simplex(d)
    return (v[1:] - v[0]).T.copy()


class SimplicialMesh:
    """Conforming simplicial mesh with per-node boundary markers.

    Parameters
    ----------
    nodes : (n, d) array of vertex coordinates.
    elements : (ne, d+1) integer array of vertex indices.
    node_markers : (n,) integer array; 0 interior, 1 Dirichlet, 2 Neumann.
    region_tags : optional (ne,) integer array of material/region labels.

    Elements are reoriented on construction so every signed volume is
    positive (the last two vertices are swapped where needed).
    """

    def __init__(self, nodes, elements, node_markers, region_tags=None,
                 validate=True):
        nodes = np.array(nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        elements = np.array(elements, dtype=np.int64)
        if elements.ndim == 1:
            elements = elements[None, :]
        self.nodes = nodes
        self.elements = elements
        self.node_markers = np.array(node_markers, dtype=np.int64)
        if region_tags is None:
            region_tags = np.zeros(len(elements), dtype=np.int64)
        self.region_tags = np.array(region_tags, dtype=np.int64)

        self._canonicalize_orientation()
        self._volumes = None
        if validate:
            self.validate()

    # ------------------------------------------------------------------
    @property
    def dim(self):
        return self.nodes.shape[1]

    @property
    def num_nodes(self):
        return self.nodes.shape[0]

    @property
    def num_elements(self):
        return self.elements.shape[0]

    def element_matrices(self):
        """(ne, d, d) array of edge matrices E_K with columns x_j - x_0."""
        p = self.nodes[self.elements]
        return np.swapaxes(p[:, 1:, :] - p[:, :1, :], 1, 2)

    def signed_volumes(self):
        return np.linalg.det(self.element_matrices()) / math.factorial(self.dim)

    def volumes(self):
        if self._volumes is None:
            self._volumes = self.signed_volumes()
        return self._volumes

    def free_nodes(self):
        """Indices of interior and Neumann nodes (the FE unknowns)."""
        return np.flatnonzero(self.node_markers != DIRICHLET)

    def dirichlet_nodes(self):
        return np.flatnonzero(self.node_markers == DIRICHLET)

    # ------------------------------------------------------------------
    def _canonicalize_orientation(self):
        if self.num_elements == 0:
            return
        neg = np.linalg.det(self.element_matrices()) < 0.0
        if np.any(neg):
            elems = self.elements
            elems[neg, -1], elems[neg, -2] = (
                elems[neg, -2].copy(), elems[neg, -1].copy())

    def validate(self):
        """Check all mesh invariants; raise ValueError on the first failure."""
        d = self.dim
        if d not in (1, 2, 3):
            raise ValueError(f"unsupported dimension {d}")
        if self.num_nodes == 0 or self.num_elements == 0:
            raise ValueError("empty mesh")
        if self.elements.shape[1] != d + 1:
            raise ValueError(
                f"elements must have {d + 1} vertices in dimension {d}, "
                f"got {self.elements.shape[1]}")
        if self.elements.min() < 0 or self.elements.max() >= self.num_nodes:
            bad = np.flatnonzero((self.elements < 0).any(axis=1) |
                                 (self.elements >= self.num_nodes).any(axis=1))
            raise ValueError(f"element {bad[0]} has out-of-range node index")
        sorted_el = np.sort(self.elements, axis=1)
        dup = (np.diff(sorted_el, axis=1) == 0).any(axis=1)
        if dup.any():
            raise ValueError(
                f"element {np.flatnonzero(dup)[0]} has repeated vertices")
        if self.node_markers.shape != (self.num_nodes,):
            raise ValueError("node_markers length does not match node count")
        if not np.isin(self.node_markers, _VALID_MARKERS).all():
            raise ValueError("node markers must be 0 (interior), "
                             "1 (dirichlet) or 2 (neumann)")
        if self.region_tags.shape != (self.num_elements,):
            raise ValueError("region_tags length does not match element count")
        vols = self.signed_volumes()
        if not (vols > 0.0).all():
            k = int(np.argmin(vols))
            raise ValueError(f"degenerate element {k} (volume {vols[k]:g})")
        if (self.node_markers == DIRICHLET).sum() == 0:
            raise ValueError("no Dirichlet nodes (the problem would be "
                             "singular for pure-Neumann data)")
        if len(self.free_nodes()) == 0:
            raise ValueError("no free nodes")

    # ------------------------------------------------------------------
    def save(self, path):
        save_mesh(self, path)


@dataclass(frozen=True)
class AffineMap:
    """Affine map x = origin + F' xhat from the unit-volume reference element.

    ``jacobian`` is F'_K = E_K Ehat^{-1}; its determinant equals |K|.
    """
    origin: np.ndarray
    jacobian: np.ndarray

    @property
    def volume(self):
        return float(np.linalg.det(self.jacobian))

    def apply(self, xhat):
        xhat = np.asarray(xhat, dtype=float)
        return self.origin + xhat @ self.jacobian.T


def affine_map(mesh, k):
    """AffineMap of element k onto the regular reference simplex."""
    if not 0 <= k < mesh.num_elements:
        raise ValueError(f"element id {k} out of range")
    E = mesh.element_matrices()[k]
    F = E @ np.linalg.inv(reference_edge_matrix(mesh.dim))
    if abs(np.linalg.det(F)) < 1e-300:
        raise ValueError(f"degenerate element {k}")
    return AffineMap(origin=mesh.nodes[mesh.elements[k, 0]].copy(), jacobian=F)


class PatchIndex:
    """Node-to-element incidence with patch volumes.

    ``elements_of(i)`` lists the elements of the patch omega_i,
    ``volumes[i]`` is |omega_i|, and ``p_max`` the largest incidence count.
    """

    def __init__(self, mesh):
        d1 = mesh.dim + 1
        flat = mesh.elements.ravel()
        order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=mesh.num_nodes)
        self._ptr = np.concatenate(([0], np.cumsum(counts)))
        self._elems = order // d1
        vols = mesh.volumes()
        self.volumes = np.bincount(flat, weights=np.repeat(vols, d1),
                                   minlength=mesh.num_nodes)
        self.counts = counts
        self.p_max = int(counts.max())
        if not (self.volumes > 0.0).all():
            i = int(np.argmin(self.volumes))
            raise ValueError(f"node {i} has an empty element patch")

    def elements_of(self, i):
        return self._elems[self._ptr[i]:self._ptr[i + 1]]


def build_patches(mesh):
    return PatchIndex(mesh)


# ----------------------------------------------------------------------
# Text I/O


def save_mesh(mesh, path):
    """Write a mesh in the line-oriented text format (17 significant digits)."""
    write_tags = bool(np.any(mesh.region_tags != 0))
    with open(path, "w") as f:
        f.write(f"dim {mesh.dim}\n")
        f.write(f"nodes {mesh.num_nodes}\n")
        for x, m in zip(mesh.nodes, mesh.node_markers):
            coords = " ".join(f"{c:.16e}" for c in x)
            f.write(f"{coords} {m}\n")
        f.write(f"elements {mesh.num_elements}\n")
        for el, tag in zip(mesh.elements, mesh.region_tags):
            line = " ".join(str(i) for i in el)
            if write_tags:
                line += f" {tag}"
            f.write(line + "\n")


def _content_lines(path):
    with open(path) as f:
        for ln, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield ln, line


def load_mesh(path):
    """Parse and validate a mesh file; see `save_mesh` for the format."""
    lines = _content_lines(path)

    def next_line(what):
        try:
            return next(lines)
        except StopIteration:
            raise ValueError(f"{path}: unexpected end of file, "
                             f"expected {what}") from None

    ln, line = next_line("'dim <d>'")
    parts = line.split()
    if len(parts) != 2 or parts[0] != "dim":
        raise ValueError(f"{path}:{ln}: expected 'dim <d>'")
    try:
        d = int(parts[1])
    except ValueError:
        raise ValueError(f"{path}:{ln}: bad dimension {parts[1]!r}") from None

    ln, line = next_line("'nodes <n>'")
    parts = line.split()
    if len(parts) != 2 or parts[0] != "nodes":
        raise ValueError(f"{path}:{ln}: expected 'nodes <n>'")
    n = int(parts[1])

    nodes = np.empty((n, max(d, 1)))
    markers = np.empty(n, dtype=np.int64)
    for i in range(n):
        ln, line = next_line("a node line")
        parts = line.split()
        if len(parts) != d + 1:
            raise ValueError(f"{path}:{ln}: node line needs {d} coordinates "
                             f"and a marker, got {len(parts)} fields")
        try:
            nodes[i] = [float(p) for p in parts[:d]]
            markers[i] = int(parts[d])
        except ValueError:
            raise ValueError(f"{path}:{ln}: malformed node line") from None

    ln, line = next_line("'elements <N>'")
    parts = line.split()
    if len(parts) != 2 or parts[0] != "elements":
        raise ValueError(f"{path}:{ln}: expected 'elements <N>'")
    ne = int(parts[1])

    elements = np.empty((ne, d + 1), dtype=np.int64)
    tags = np.zeros(ne, dtype=np.int64)
    for k in range(ne):
        ln, line = next_line("an element line")
        parts = line.split()
        if len(parts) not in (d + 1, d + 2):
            raise ValueError(f"{path}:{ln}: element line needs {d + 1} node "
                             f"indices (+ optional region tag)")
        try:
            vals = [int(p) for p in parts]
        except ValueError:
            raise ValueError(f"{path}:{ln}: malformed element line") from None
        elements[k] = vals[:d + 1]
        if len(vals) == d + 2:
            tags[k] = vals[d + 1]

    return SimplicialMesh(nodes, elements, markers, region_tags=tags)


# ----------------------------------------------------------------------
# Generators


def gen_uniform_1d(n):
    """Uniform mesh of (0,1) with n cells; both endpoints Dirichlet."""
    if n < 1:
        raise ValueError("need at least one element")
    nodes = np.arange(n + 1) / n
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    markers = np.zeros(n + 1, dtype=np.int64)
    markers[0] = markers[-1] = DIRICHLET
    return SimplicialMesh(nodes, elements, markers)


def gen_equidistributed_1d(n, w):
    """1D mesh whose cells carry equal weight integral.

    Nodes 0 = x_0 < ... < x_n = 1 satisfy
    int_{x_{i-1}}^{x_i} w dx = const for the strictly positive weight w.
    Used with w = det(M)^{1/2} this produces M-uniform meshes; the
    diffusion-adapted case is w(x) = D(x)^{-1/2}.

    The cumulative integral is tabulated by adaptive quadrature on a fine
    partition and each node solved by bracketed root finding.
    """
    if n < 2:
        raise ValueError("need at least two elements")

    probe = np.linspace(0.0, 1.0, 33)
    samples = np.array([float(w(x)) for x in probe])
    if not (samples > 0.0).all():
        x_bad = probe[int(np.argmin(samples))]
        raise ValueError(f"weight is not strictly positive (w({x_bad:g}) = "
                         f"{samples.min():g})")
    if np.ptp(samples) == 0.0:
        # Constant weight: exact uniform nodes (keeps the bit-identity
        # with gen_uniform_1d).
        return gen_uniform_1d(n)

    m = max(1024, 4 * n)
    grid = np.arange(m + 1) / m
    cell = np.empty(m)
    with warnings.catch_warnings():
        # Tiny subintervals of oscillatory weights trip the roundoff
        # warning; the node placement is validated downstream by the
        # per-element integral equality, so the warning is just noise.
        warnings.simplefilter("ignore", IntegrationWarning)
        for j in range(m):
            cell[j], _ = quad(w, grid[j], grid[j + 1], limit=200)
    if not (cell > 0.0).all():
        raise ValueError("weight integrates to zero on a subinterval")
    cum = np.concatenate(([0.0], np.cumsum(cell)))
    total = cum[-1]

    nodes = np.empty(n + 1)
    nodes[0], nodes[-1] = 0.0, 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        for i in range(1, n):
            t = total * i / n
            j = int(np.searchsorted(cum, t, side="right")) - 1
            j = min(max(j, 0), m - 1)
            lo, hi = grid[j], grid[j + 1]

            def g(x, _j=j, _t=t, _lo=lo):
                val, _ = quad(w, _lo, x, limit=200)
                return cum[_j] + val - _t

            glo, ghi = g(lo), g(hi)
            if glo >= 0.0:
                nodes[i] = lo
            elif ghi <= 0.0:
                nodes[i] = hi
            else:
                try:
                    nodes[i] = brentq(g, lo, hi, xtol=1e-14,
                                      rtol=4.0 * np.finfo(float).eps)
                except Exception as exc:
                    raise ValueError(
                        f"equidistribution root finding failed at node {i} "
                        f"(bracket residuals {glo:g}, {ghi:g})") from exc
    if not (np.diff(nodes) > 0.0).all():
        raise ValueError("equidistributed nodes are not strictly increasing")

    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    markers = np.zeros(n + 1, dtype=np.int64)
    markers[0] = markers[-1] = DIRICHLET
    return SimplicialMesh(nodes, elements, markers)


def _spacings(n, ratio):
    """n positive spacings summing to 1 in geometric progression `ratio`."""
    if ratio <= 0.0 or not np.isfinite(ratio):
        raise ValueError(f"grading ratio must be positive, got {ratio}")
    if ratio == 1.0:
        return np.full(n, 1.0 / n)
    g = ratio ** np.arange(n)
    total = g.sum()
    if not np.isfinite(total) or g[0] / total <= 0.0:
        raise ValueError(f"grading ratio {ratio} underflows the first cell")
    return g / total


def gen_structured_2d(nx, ny, grading="uniform", diagonal="right",
                      ratio_x=1.0, ratio_y=1.0):
    """Triangulated nx-by-ny grid on the unit square; boundary all Dirichlet.

    ``diagonal`` selects the cell split: "right" (all diagonals from the
    lower-left to the upper-right corner), "left" (the mirror image) or
    "alternating" (checkerboard of the two).  With ``grading="geometric"``
    node spacings follow a geometric progression with the given ratio, so
    ratios > 1 refine towards x=0 / y=0.
    """
    if nx < 1 or ny < 1:
        raise ValueError("grid needs at least one cell per direction")
    if grading not in ("uniform", "geometric"):
        raise ValueError(f"unknown grading {grading!r}")
    if diagonal not in ("right", "left", "alternating"):
        raise ValueError(f"unknown diagonal pattern {diagonal!r}")
    if grading == "uniform":
        ratio_x = ratio_y = 1.0

    xs = np.concatenate(([0.0], np.cumsum(_spacings(nx, ratio_x))))
    ys = np.concatenate(([0.0], np.cumsum(_spacings(ny, ratio_y))))
    xs[-1] = 1.0
    ys[-1] = 1.0

    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    markers = np.zeros((ny + 1, nx + 1), dtype=np.int64)
    markers[0, :] = markers[-1, :] = DIRICHLET
    markers[:, 0] = markers[:, -1] = DIRICHLET

    def nid(i, j):
        return j * (nx + 1) + i

    elements = []
    for j in range(ny):
        for i in range(nx):
            v00, v10 = nid(i, j), nid(i + 1, j)
            v01, v11 = nid(i, j + 1), nid(i + 1, j + 1)
            if diagonal == "right" or (diagonal == "alternating"
                                       and (i + j) % 2 == 0):
                elements.append((v00, v10, v11))
                elements.append((v00, v11, v01))
            else:
                elements.append((v00, v10, v01))
                elements.append((v10, v11, v01))
    return SimplicialMesh(nodes, np.array(elements), markers.ravel())


_KUHN_PERMS = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]


def gen_structured_3d(nx, ny, nz):
    """Unit cube split into 6 tetrahedra per cell; boundary all Dirichlet."""
    if min(nx, ny, nz) < 1:
        raise ValueError("grid needs at least one cell per direction")
    xs, ys, zs = (np.arange(m + 1) / m for m in (nx, ny, nz))
    shape = (nx + 1, ny + 1, nz + 1)

    def nid(i, j, k):
        return (k * (ny + 1) + j) * (nx + 1) + i

    nodes = np.empty(((nx + 1) * (ny + 1) * (nz + 1), 3))
    markers = np.zeros(len(nodes), dtype=np.int64)
    for k in range(nz + 1):
        for j in range(ny + 1):
            for i in range(nx + 1):
                idx = nid(i, j, k)
                nodes[idx] = (xs[i], ys[j], zs[k])
                if (i in (0, nx)) or (j in (0, ny)) or (k in (0, nz)):
                    markers[idx] = DIRICHLET

    elements = []
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                base = np.array([i, j, k])
                for perm in _KUHN_PERMS:
                    # Walk from the cell's low corner to its high corner
                    # one axis at a time: each order gives one tetrahedron.
                    corners = [base.copy()]
                    p = base.copy()
                    for axis in perm:
                        p = p.copy()
                        p[axis] += 1
                        corners.append(p)
                    elements.append([nid(*c) for c in corners])
    return SimplicialMesh(nodes, np.array(elements), markers)
