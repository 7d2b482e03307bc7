"""Admissible TPFA meshes of the unit square and their nested subdivisions.

A :class:`Mesh` stores polygonal cells together with cell centers such that the
segment joining two neighbouring centers is orthogonal to the shared face.
Internal faces carry a fixed orientation ``K -> L`` (``K < L``) and the unit
normal ``n_{K,sigma}`` points from ``K`` to ``L``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

ORTHO_TOL = 1e-10
MASS_TOL = 1e-12


class MeshError(ValueError):
    pass


class AdmissibilityViolation(MeshError):
    def __init__(self, message: str, faces=()):
        super().__init__(message)
        self.faces = list(faces)


class NotAcute(MeshError):
    pass


class ParseError(MeshError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def _frozen(a, dtype=float):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.flags.writeable = False
    return a


def signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(poly: np.ndarray) -> np.ndarray:
    x, y = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum() / 2.0
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * a)


def circumcenter(a, b, c) -> np.ndarray:
    a, b, c = (np.asarray(p, dtype=float) for p in (a, b, c))
    bx, by = b - a
    cx, cy = c - a
    d = 2.0 * (bx * cy - by * cx)
    b2, c2 = bx * bx + by * by, cx * cx + cy * cy
    return a + np.array([cy * b2 - by * c2, bx * c2 - cx * b2]) / d


def triangle_angles(poly: np.ndarray) -> np.ndarray:
    """Interior angles (radians) of a triangle given as a (3, 2) array."""
    out = np.empty(3)
    for i in range(3):
        u = poly[(i + 1) % 3] - poly[i]
        v = poly[(i + 2) % 3] - poly[i]
        out[i] = np.arccos(np.clip(u @ v / np.linalg.norm(u) / np.linalg.norm(v), -1.0, 1.0))
    return out


class Mesh:
    """Polygonal mesh with TPFA face geometry.

    Parameters
    ----------
    vertices : (nv, 2) array
    cells : sequence of counter-clockwise vertex index lists
    centers : (nc, 2) array, optional
        Cell centers. When omitted, triangles get their circumcenter and any
        other polygon its centroid.
    """

    def __init__(self, vertices, cells, centers=None):
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("vertices must have shape (nv, 2)")
        cells = [tuple(int(i) for i in c) for c in cells]
        if not cells:
            raise MeshError("mesh has no cells")
        for k, c in enumerate(cells):
            if len(c) < 3 or len(set(c)) != len(c):
                raise MeshError(f"cell {k} is degenerate")
            if min(c) < 0 or max(c) >= len(vertices):
                raise MeshError(f"cell {k} references a missing vertex")

        areas = np.empty(len(cells))
        diam = np.empty(len(cells))
        for k, c in enumerate(cells):
            poly = vertices[list(c)]
            areas[k] = signed_area(poly)
            diff = poly[:, None, :] - poly[None, :, :]
            diam[k] = np.sqrt((diff**2).sum(-1)).max()
        if (areas <= 0).any():
            bad = np.flatnonzero(areas <= 0)
            raise MeshError(f"cells {bad.tolist()} are not counter-clockwise")

        if centers is None:
            centers = np.array([
                circumcenter(*vertices[list(c)]) if len(c) == 3 else polygon_centroid(vertices[list(c)])
                for c in cells
            ])
        centers = np.asarray(centers, dtype=float)
        if centers.shape != (len(cells), 2):
            raise MeshError("centers must have shape (ncells, 2)")

        self.vertices = _frozen(vertices)
        self.cells = tuple(cells)
        self.cell_centers = _frozen(centers)
        self.cell_measures = _frozen(areas)
        self.cell_diameters = _frozen(diam)
        self._build_faces()

    # -- construction ------------------------------------------------------

    def _build_faces(self):
        owners: dict[tuple[int, int], list[tuple[int, int, int]]] = {}
        for k, c in enumerate(self.cells):
            for i in range(len(c)):
                a, b = c[i], c[(i + 1) % len(c)]
                owners.setdefault((min(a, b), max(a, b)), []).append((k, a, b))

        internal, boundary = [], []
        for key, own in owners.items():
            if len(own) == 1:
                boundary.append(own[0])
            elif len(own) == 2:
                (k1, a1, b1), (k2, a2, b2) = sorted(own)
                if (a1, b1) != (b2, a2):
                    raise MeshError(f"cells {k1} and {k2} have inconsistent orientation")
                internal.append((k1, k2, a1, b1))
            else:
                raise MeshError(f"edge {key} is shared by more than two cells")

        x = self.vertices
        xc = self.cell_centers

        def geometry(a, b):
            pa, pb = x[a], x[b]
            t = pb - pa
            length = np.linalg.norm(t, axis=-1)
            n = np.stack([t[:, 1], -t[:, 0]], axis=-1) / length[:, None]
            return length, n, 0.5 * (pa + pb)

        fi = np.array(internal, dtype=np.int64).reshape(-1, 4)
        K, L, a, b = fi.T
        m, n, mid = geometry(a, b)
        dK = np.einsum("ij,ij->i", mid - xc[K], n)
        dL = np.einsum("ij,ij->i", xc[L] - mid, n)
        dvec = xc[L] - xc[K]
        self.face_cells = _frozen(fi[:, :2], np.int64)
        self.face_vertices = _frozen(fi[:, 2:], np.int64)
        self.face_measures = _frozen(m)
        self.face_normals = _frozen(n)
        self.face_midpoints = _frozen(mid)
        self.face_d = _frozen(np.linalg.norm(dvec, axis=-1))
        self.face_dK = _frozen(dK)
        self.face_dL = _frozen(dL)

        fb = np.array(boundary, dtype=np.int64).reshape(-1, 3)
        Kb, a, b = fb.T
        m, n, mid = geometry(a, b)
        self.bface_cells = _frozen(Kb, np.int64)
        self.bface_vertices = _frozen(fb[:, 1:], np.int64)
        self.bface_measures = _frozen(m)
        self.bface_normals = _frozen(n)
        self.bface_dK = _frozen(np.einsum("ij,ij->i", mid - xc[Kb], n))

    # -- basic properties --------------------------------------------------

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_faces(self) -> int:
        return len(self.face_measures)

    @property
    def area(self) -> float:
        return float(self.cell_measures.sum())

    @property
    def h(self) -> float:
        return float(self.cell_diameters.max())

    @property
    def diamond_weights(self) -> np.ndarray:
        """Weights ``m_sigma * d_sigma`` of the diamond scalar product."""
        return self.face_measures * self.face_d

    def polygon(self, k: int) -> np.ndarray:
        return self.vertices[list(self.cells[k])]

    def internal_faces(self):
        """Tuples ``(K, L, m, d, dK, dL, n)`` in the stored orientation."""
        for i in range(self.n_faces):
            K, L = self.face_cells[i]
            yield (int(K), int(L), self.face_measures[i], self.face_d[i],
                   self.face_dK[i], self.face_dL[i], self.face_normals[i])

    def boundary_faces(self):
        for i in range(len(self.bface_cells)):
            yield (int(self.bface_cells[i]), self.bface_measures[i],
                   self.bface_dK[i], self.bface_normals[i])

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (self.cells == other.cells
                and np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.cell_centers, other.cell_centers))

    __hash__ = None

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.vertices.tobytes())
        h.update(self.cell_centers.tobytes())
        h.update(repr(self.cells).encode())
        return h.hexdigest()

    def __repr__(self):
        return f"Mesh(n_cells={self.n_cells}, n_faces={self.n_faces}, h={self.h:.4g})"


@dataclass(frozen=True, eq=False)
class NestedMeshPair:
    """Coarse mesh carrying densities and fine mesh carrying potentials.

    ``containment[K]`` is the coarse cell containing fine cell ``K``.
    """

    coarse: Mesh
    fine: Mesh
    containment: np.ndarray
    identical: bool = False

    def __post_init__(self):
        c = np.asarray(self.containment, dtype=np.int64)
        if c.shape != (self.fine.n_cells,):
            raise MeshError("containment must map every fine cell")
        if c.min() < 0 or c.max() >= self.coarse.n_cells:
            raise MeshError("containment references a missing coarse cell")
        object.__setattr__(self, "containment", _frozen(c, np.int64))
        sums = np.bincount(c, weights=self.fine.cell_measures, minlength=self.coarse.n_cells)
        rel = np.abs(sums - self.coarse.cell_measures) / self.coarse.cell_measures
        if rel.max() > MASS_TOL * 10:
            raise MeshError("fine cells do not partition their coarse cells")

    @classmethod
    def same(cls, mesh: Mesh) -> "NestedMeshPair":
        """Non-enriched pair: coarse and fine coincide."""
        return cls(mesh, mesh, np.arange(mesh.n_cells), identical=True)


@dataclass(frozen=True)
class MeshQuality:
    zeta: float
    eta_h: float
    max_center_of_mass_defect: float
    h: float
    hbar: float


# -- generators ---------------------------------------------------------------

def generate_cartesian(nx: int, ny: int) -> Mesh:
    """Uniform ``nx`` x ``ny`` rectangles on the unit square, centroid centers."""
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be positive")
    xs = np.arange(nx + 1) / nx
    ys = np.arange(ny + 1) / ny
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    cells, centers = [], []
    for j in range(ny):
        for i in range(nx):
            cells.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)))
            centers.append(((xs[i] + xs[i + 1]) / 2, (ys[j] + ys[j + 1]) / 2))
    return Mesh(vertices, cells, centers)


# Row-end and corner layout in lattice units (base = height = 1).  Even row
# lines carry vertices at 0, 1, 2, ..., odd lines at 1/2, 3/2, ...; near the
# left side the first vertices move to _ROW_END and boundary vertices sit at
# mid-row heights, so no right angle is left at the side.
_ROW_END = {0: 0.85, 1: 1.14}
# the corner patch replaces every lattice point within _CORNER_RADIUS of a corner
_CORNER_RADIUS = 1.55
_CORNER_POINTS = np.array([
    [0.0, 0.0], [0.9938, 0.0], [0.0, 1.2017],
    [1.1813, 0.9804], [1.6142, 0.7506], [0.6412, 0.9122],
])


def _acute_points(n: int) -> np.ndarray:
    pts = []
    for j in range(n + 1):
        e = _ROW_END[j % 2]
        if j % 2 == 0:
            inner = [float(k) for k in range(2, n - 1)]
        else:
            inner = [k + 0.5 for k in range(2, n - 2)]
        pts += [(x, j) for x in [e, *inner, n - e]]
    pts += [(0.0, j + 0.5) for j in range(n)] + [(float(n), j + 0.5) for j in range(n)]
    pts = np.array(pts, dtype=float)
    corners = np.array([[0, 0], [n, 0], [0, n], [n, n]], dtype=float)
    dist = np.linalg.norm(pts[:, None, :] - corners[None], axis=2).min(axis=1)
    pts = [pts[dist > _CORNER_RADIUS]]
    for flip_x in (False, True):
        for flip_y in (False, True):
            c = _CORNER_POINTS.copy()
            if flip_x:
                c[:, 0] = n - c[:, 0]
            if flip_y:
                c[:, 1] = n - c[:, 1]
            pts.append(c)
    pts = np.unique(np.round(np.vstack(pts), 12), axis=0)
    return pts / n


def _delaunay_in_square(points: np.ndarray) -> list[tuple[int, int, int]]:
    """Delaunay triangles of points in the unit square, boundary edges enforced.

    The points are reflected across the four sides before triangulating, so
    that the sides appear as edges whenever the triangles next to them have
    acute opposite angles.
    """
    mirrored = [points, points * [-1, 1], points * [1, -1],
                [2, 0] + points * [-1, 1], [0, 2] + points * [1, -1]]
    allp = np.unique(np.round(np.vstack(mirrored), 12), axis=0)
    index = {tuple(p): i for i, p in enumerate(np.round(points, 12))}
    cells = []
    for simplex in Delaunay(allp).simplices:
        tri = allp[simplex]
        c = tri.mean(axis=0)
        if not ((c > 0).all() and (c < 1).all()):
            continue
        ids = [index.get(tuple(q)) for q in tri]
        if None in ids:
            raise MeshError("triangle crosses the boundary of the unit square")
        if signed_area(points[ids]) < 0:
            ids = ids[::-1]
        cells.append(tuple(ids))
    return sorted(cells)


def generate_acute_triangulation(n: int) -> Mesh:
    """Acute triangulation of the unit square built from rows of isoceles triangles.

    The interior is the lattice of triangles with base ``1/n`` and height
    ``1/n`` (apex up and apex down alternating); the ends of every row and the
    four corners are replaced by a fixed acute patch, since halving a lattice
    triangle at the side would create right angles.  ``n`` must be even and at
    least 4.  Cell centers are circumcenters.
    """
    if n < 4 or n % 2:
        raise ValueError("n must be an even integer >= 4")
    points = _acute_points(n)
    mesh = Mesh(points, _delaunay_in_square(points))
    if not np.isclose(mesh.cell_measures.sum(), 1.0, rtol=0, atol=1e-12):
        raise MeshError("triangulation does not cover the unit square")
    worst = max(triangle_angles(mesh.polygon(k)).max() for k in range(mesh.n_cells))
    if worst >= np.pi / 2:
        raise NotAcute(f"largest angle {np.degrees(worst):.2f} deg")
    return mesh


def subdivide_to_nested(coarse: Mesh) -> NestedMeshPair:
    """Split each acute triangle into three quadrilaterals around its circumcenter.

    Each quadrilateral (vertex A, midpoint of AB, circumcenter O, midpoint of
    AC) has right angles at both midpoints, so its circumcenter is the
    midpoint of A and O.
    """
    vertices = [p for p in coarse.vertices]
    edge_mid: dict[tuple[int, int], int] = {}

    def midpoint(a, b):
        key = (min(a, b), max(a, b))
        if key not in edge_mid:
            edge_mid[key] = len(vertices)
            vertices.append(0.5 * (coarse.vertices[a] + coarse.vertices[b]))
        return edge_mid[key]

    cells, centers, containment = [], [], []
    for k, c in enumerate(coarse.cells):
        if len(c) != 3:
            raise NotAcute(f"coarse cell {k} is not a triangle")
        poly = coarse.polygon(k)
        if triangle_angles(poly).max() >= np.pi / 2:
            raise NotAcute(f"coarse cell {k} has an angle of at least 90 degrees")
        o = circumcenter(*poly)
        if not np.allclose(o, coarse.cell_centers[k], rtol=0, atol=1e-12):
            raise NotAcute(f"coarse cell {k} center is not its circumcenter")
        io = len(vertices)
        vertices.append(coarse.cell_centers[k])
        for i in range(3):
            a, b, prev = c[i], c[(i + 1) % 3], c[(i - 1) % 3]
            cells.append((a, midpoint(a, b), io, midpoint(prev, a)))
            centers.append(0.5 * (coarse.vertices[a] + coarse.cell_centers[k]))
            containment.append(k)
    fine = Mesh(np.array(vertices), cells, np.array(centers))
    return NestedMeshPair(coarse, fine, np.array(containment))


# -- validation ---------------------------------------------------------------

def check_admissible(mesh: Mesh, tol: float = ORTHO_TOL):
    """Raise :class:`AdmissibilityViolation` if orthogonality or partition fails."""
    xc = mesh.cell_centers
    K, L = mesh.face_cells.T
    dvec = xc[L] - xc[K]
    t = np.stack([-mesh.face_normals[:, 1], mesh.face_normals[:, 0]], axis=-1)
    tangential = np.abs(np.einsum("ij,ij->i", dvec, t))
    normal = np.einsum("ij,ij->i", dvec, mesh.face_normals)
    bad = np.flatnonzero((tangential > tol * mesh.face_d) | (normal <= 0) | (mesh.face_d <= 0))
    if bad.size:
        raise AdmissibilityViolation(
            f"{bad.size} internal faces violate orthogonality: {bad[:10].tolist()}", bad)
    split = np.abs(mesh.face_dK + mesh.face_dL - mesh.face_d)
    bad = np.flatnonzero(split > 1e-12 * mesh.face_d * 10)
    if bad.size:
        raise AdmissibilityViolation(f"d_K + d_L != d on faces {bad[:10].tolist()}", bad)
    if abs(mesh.area - 1.0) > MASS_TOL * 10 and abs(mesh.area - _hull_area(mesh)) > MASS_TOL * 10 * mesh.area:
        raise AdmissibilityViolation("cells do not partition the domain")


def _hull_area(mesh: Mesh) -> float:
    # boundary faces form closed loops; their oriented area is the domain area
    a = mesh.vertices[mesh.bface_vertices[:, 0]]
    b = mesh.vertices[mesh.bface_vertices[:, 1]]
    return 0.5 * float((a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]).sum())


def center_of_mass_tensors(mesh: Mesh) -> np.ndarray:
    """Per-cell ``sum_sigma m_sigma d_{K,sigma} n (x) n / m_K`` over all faces."""
    T = np.zeros((mesh.n_cells, 2, 2))
    n = mesh.face_normals
    nn = n[:, :, None] * n[:, None, :]
    K, L = mesh.face_cells.T
    np.add.at(T, K, (mesh.face_measures * mesh.face_dK)[:, None, None] * nn)
    np.add.at(T, L, (mesh.face_measures * mesh.face_dL)[:, None, None] * nn)
    nb = mesh.bface_normals
    np.add.at(T, mesh.bface_cells, (mesh.bface_measures * mesh.bface_dK)[:, None, None]
              * nb[:, :, None] * nb[:, None, :])
    return T / mesh.cell_measures[:, None, None]


def validate(mesh: Mesh, hbar: float | None = None) -> MeshQuality:
    """Check admissibility and measure the regularity constants of ``mesh``."""
    check_admissible(mesh)
    K, L = mesh.face_cells.T
    d = mesh.face_d
    ratios = np.concatenate([
        mesh.cell_diameters[K] / d, mesh.cell_diameters[L] / d,
        d / mesh.cell_diameters[K], d / mesh.cell_diameters[L],
    ])
    zeta = float(ratios.max()) if ratios.size else 1.0
    # distance of each center to its own cell, zero when inside
    outside = 0.0
    for k in range(mesh.n_cells):
        dist = _distance_to_polygon(mesh.cell_centers[k], mesh.polygon(k))
        outside = max(outside, dist / mesh.cell_diameters[k])
    zeta = max(zeta, outside)

    T = center_of_mass_tensors(mesh)
    eig = np.linalg.eigvalsh(T)
    eta = max(0.0, float(eig.max() - 1.0))
    defect = float(np.linalg.norm(T - np.eye(2), axis=(1, 2)).max())
    return MeshQuality(zeta=zeta, eta_h=eta, max_center_of_mass_defect=defect,
                       h=mesh.h, hbar=mesh.h if hbar is None else hbar)


def validate_pair(pair: NestedMeshPair) -> MeshQuality:
    q = validate(pair.fine)
    return MeshQuality(q.zeta, q.eta_h, q.max_center_of_mass_defect, q.h, pair.coarse.h)


def _distance_to_polygon(p, poly) -> float:
    inside = True
    for i in range(len(poly)):
        a, b = poly[i], poly[(i + 1) % len(poly)]
        if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) < -1e-14:
            inside = False
            break
    if inside:
        return 0.0
    best = np.inf
    for i in range(len(poly)):
        a, b = poly[i], poly[(i + 1) % len(poly)]
        t = np.clip((p - a) @ (b - a) / ((b - a) @ (b - a)), 0.0, 1.0)
        best = min(best, float(np.linalg.norm(p - (a + t * (b - a)))))
    return best


def cocircularity_defect(mesh: Mesh) -> float:
    """Max relative spread of vertex distances to the cell center."""
    worst = 0.0
    for k in range(mesh.n_cells):
        r = np.linalg.norm(mesh.polygon(k) - mesh.cell_centers[k], axis=1)
        worst = max(worst, float((r.max() - r.min()) / r.max()))
    return worst


# -- text format --------------------------------------------------------------

HEADER = "tpfa-mesh 1"


def format_mesh(mesh: Mesh, centers: bool = True) -> str:
    lines = [HEADER, f"vertices {len(mesh.vertices)}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines.append(f"cells {mesh.n_cells}")
    lines += [" ".join(str(i) for i in c) for c in mesh.cells]
    if centers:
        lines.append(f"centers {mesh.n_cells}")
        lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.cell_centers]
    return "\n".join(lines) + "\n"


def save_mesh(mesh: Mesh, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_mesh(mesh))


def parse_mesh(text: str, check: bool = True) -> Mesh:
    rows = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    rows = [(i, ln) for i, ln in rows if ln and not ln.startswith("#")]
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(rows):
            raise ParseError("unexpected end of file", rows[-1][0] if rows else 1)
        pos += 1
        return rows[pos - 1]

    def section(name):
        lineno, ln = take()
        parts = ln.split()
        if len(parts) != 2 or parts[0] != name:
            raise ParseError(f"expected '{name} <count>'", lineno)
        try:
            count = int(parts[1])
        except ValueError:
            raise ParseError(f"bad count {parts[1]!r}", lineno) from None
        if count < 0:
            raise ParseError("negative count", lineno)
        return count

    def points(count):
        out = np.empty((count, 2))
        for r in range(count):
            lineno, ln = take()
            parts = ln.split()
            if len(parts) != 2:
                raise ParseError("expected two coordinates", lineno)
            try:
                out[r] = [float(parts[0]), float(parts[1])]
            except ValueError:
                raise ParseError(f"bad number in {ln!r}", lineno) from None
            if not np.isfinite(out[r]).all():
                raise ParseError("non-finite coordinate", lineno)
        return out

    lineno, ln = take()
    if ln != HEADER:
        raise ParseError(f"expected header {HEADER!r}", lineno)
    vertices = points(section("vertices"))
    ncells = section("cells")
    cells = []
    for _ in range(ncells):
        lineno, ln = take()
        try:
            c = [int(t) for t in ln.split()]
        except ValueError:
            raise ParseError(f"bad vertex index in {ln!r}", lineno) from None
        if len(c) < 3 or len(set(c)) != len(c) or min(c) < 0 or max(c) >= len(vertices):
            raise ParseError("invalid cell", lineno)
        if signed_area(vertices[c]) <= 0:
            raise ParseError("cell is not counter-clockwise", lineno)
        cells.append(c)
    centers = None
    if pos < len(rows):
        count = section("centers")
        if count != ncells:
            raise ParseError("centers count differs from cells count", rows[pos - 1][0])
        centers = points(count)
    if pos < len(rows):
        raise ParseError("trailing content", rows[pos][0])
    try:
        mesh = Mesh(vertices, cells, centers)
    except AdmissibilityViolation:
        raise
    except MeshError as exc:
        raise ParseError(str(exc)) from exc
    if check:
        validate(mesh)
    return mesh


def load_mesh(path, check: bool = True) -> Mesh:
    return parse_mesh(Path(path).read_text(), check=check)


def save_pair(pair: NestedMeshPair, stem) -> tuple[Path, Path, Path]:
    """Write ``<stem>.coarse.txt``, ``<stem>.fine.txt`` and ``<stem>.map.txt``."""
    stem = Path(stem)
    base = stem.with_suffix("") if stem.suffix == ".txt" else stem
    paths = (Path(f"{base}.coarse.txt"), Path(f"{base}.fine.txt"), Path(f"{base}.map.txt"))
    save_mesh(pair.coarse, paths[0])
    save_mesh(pair.fine, paths[1])
    paths[2].write_text("".join(f"{c}\n" for c in pair.containment))
    return paths


def load_pair(stem) -> NestedMeshPair:
    stem = Path(stem)
    base = stem.with_suffix("") if stem.suffix == ".txt" else stem
    coarse = load_mesh(f"{base}.coarse.txt")
    fine = load_mesh(f"{base}.fine.txt")
    mp = Path(f"{base}.map.txt")
    containment = []
    for i, ln in enumerate(mp.read_text().splitlines(), 1):
        if ln.strip():
            try:
                containment.append(int(ln))
            except ValueError:
                raise ParseError(f"bad containment entry {ln!r}", i) from None
    return NestedMeshPair(coarse, fine, np.array(containment), identical=coarse == fine)


def build_pair(hbar: float, enriched: bool) -> NestedMeshPair:
    """Mesh pair for a refinement level: ``n = 2 round(3 / (4 hbar))`` rows.

    This gives ``n = 6, 12, 24, ...`` for ``hbar = 1/4, 1/8, 1/16, ...``, the
    coarsest even row counts whose largest cell diameter stays below ``hbar``.
    """
    n = max(4, 2 * int(round(0.75 / hbar)))
    coarse = generate_acute_triangulation(n)
    return subdivide_to_nested(coarse) if enriched else NestedMeshPair.same(coarse)
