"""Conforming triangulations of polygons with oriented edge topology.

Meshes are built from a max-min-angle triangulation of the polygon's own
vertices and refined by midpoint quadrisection, which gives nested families
whose children are similar to their parents.
"""
import hashlib
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

MIN_ANGLE_FLOOR = 20.0

UNIT_SQUARE = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))
L_SHAPE = ((0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (0.5, 0.5), (0.5, 1.0), (0.0, 1.0))
GEOMETRIES = {"square": UNIT_SQUARE, "lshape": L_SHAPE}


class MeshError(ValueError):
    pass


class Point2(NamedTuple):
    x: float
    y: float


class InteriorEdge(NamedTuple):
    endpoints: tuple
    K_plus: int
    K_minus: int
    normal: np.ndarray
    h_e: float


class BoundarySegment(NamedTuple):
    endpoints: tuple
    owner: int
    outward_normal: np.ndarray
    h_e: float
    parent_side: int


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangle mesh.

    Edge data is stored as parallel arrays. Interior edge ``e`` runs from
    ``iedge_vertices[e, 0]`` to ``iedge_vertices[e, 1]`` in the counterclockwise
    order of ``iedge_minus[e]``, so ``iedge_normal[e]`` is the outward normal of
    the minus element and points into the plus element. Boundary segments are
    oriented counterclockwise around the domain.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    iedge_vertices: np.ndarray = field(repr=False)
    iedge_plus: np.ndarray = field(repr=False)
    iedge_minus: np.ndarray = field(repr=False)
    iedge_normal: np.ndarray = field(repr=False)
    iedge_length: np.ndarray = field(repr=False)
    bseg_vertices: np.ndarray = field(repr=False)
    bseg_owner: np.ndarray = field(repr=False)
    bseg_normal: np.ndarray = field(repr=False)
    bseg_length: np.ndarray = field(repr=False)
    bseg_side: np.ndarray = field(repr=False)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_interior_edges(self):
        return len(self.iedge_plus)

    @property
    def n_boundary_segments(self):
        return len(self.bseg_owner)

    @property
    def h_max(self):
        return float(max(self.iedge_length.max(initial=0.0), self.bseg_length.max()))

    @property
    def areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def area(self):
        return float(self.areas.sum())

    @property
    def boundary_length(self):
        return float(self.bseg_length.sum())

    @property
    def interior_edges(self):
        return [
            InteriorEdge(tuple(self.iedge_vertices[e]), int(self.iedge_plus[e]), int(self.iedge_minus[e]),
                         self.iedge_normal[e], float(self.iedge_length[e]))
            for e in range(self.n_interior_edges)
        ]

    @property
    def boundary_segments(self):
        return [
            BoundarySegment(tuple(self.bseg_vertices[s]), int(self.bseg_owner[s]), self.bseg_normal[s],
                            float(self.bseg_length[s]), int(self.bseg_side[s]))
            for s in range(self.n_boundary_segments)
        ]

    def boundary_endpoints(self):
        """Start and end coordinates of every boundary segment, each (nseg, 2)."""
        return self.vertices[self.bseg_vertices[:, 0]], self.vertices[self.bseg_vertices[:, 1]]

    def element_diameters(self):
        p = self.vertices[self.triangles]
        lens = np.linalg.norm(p[:, [1, 2, 0]] - p, axis=2)
        return lens.max(axis=1)

    def min_angle(self):
        return float(triangle_angles(self.vertices[self.triangles]).min())

    def hash(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices, dtype=np.float64).tobytes())
        h.update(np.ascontiguousarray(self.triangles, dtype=np.int64).tobytes())
        return h.hexdigest()[:16]

    def diameter(self):
        b = self.vertices[np.unique(self.bseg_vertices)]
        d = b[:, None, :] - b[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())


def triangle_angles(p):
    """Interior angles in degrees of triangles given as (n, 3, 2) coordinates."""
    angles = np.empty(p.shape[:2])
    for i in range(3):
        a = p[:, (i + 1) % 3] - p[:, i]
        b = p[:, (i + 2) % 3] - p[:, i]
        cosang = (a * b).sum(-1) / (np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1))
        angles[:, i] = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
    return angles


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _segments_cross(p1, p2, q1, q2):
    """Proper or touching intersection test for closed segments."""
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True

    def on_seg(a, b, c):
        return min(a[0], b[0]) - 1e-14 <= c[0] <= max(a[0], b[0]) + 1e-14 and \
            min(a[1], b[1]) - 1e-14 <= c[1] <= max(a[1], b[1]) + 1e-14

    eps = 1e-14
    return (abs(d1) < eps and on_seg(q1, q2, p1)) or (abs(d2) < eps and on_seg(q1, q2, p2)) or \
        (abs(d3) < eps and on_seg(p1, p2, q1)) or (abs(d4) < eps and on_seg(p1, p2, q2))


def _point_in_polygon(pt, poly):
    inside = False
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        if (a[1] > pt[1]) != (b[1] > pt[1]):
            xint = a[0] + (pt[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
            if pt[0] < xint:
                inside = not inside
    return inside


def validate_polygon(polygon):
    """Return the polygon as an (n, 2) array or raise MeshError with a diagnostic."""
    poly = np.asarray(polygon, dtype=float)
    if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3:
        raise MeshError("polygon must be a list of at least 3 (x, y) vertices")
    if not np.all(np.isfinite(poly)):
        raise MeshError("polygon has non-finite coordinates")
    n = len(poly)
    for i in range(n):
        a, b, c = poly[i - 1], poly[i], poly[(i + 1) % n]
        if np.linalg.norm(b - a) == 0.0:
            raise MeshError(f"polygon has repeated vertex {i}")
        if abs(_cross(a, b, c)) < 1e-14 * np.linalg.norm(b - a) * np.linalg.norm(c - b):
            raise MeshError(f"polygon is degenerate at vertex {i} (collinear neighbours)")
    signed = 0.5 * np.sum(poly[:, 0] * np.roll(poly[:, 1], -1) - np.roll(poly[:, 0], -1) * poly[:, 1])
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]):
                raise MeshError(f"polygon is not simple: sides {i} and {j} intersect")
    if signed <= 0:
        raise MeshError("polygon must be counterclockwise (positive signed area)")
    return poly


def _diagonal_ok(poly, i, j):
    n = len(poly)
    if (j - i) % n in (1, n - 1):
        return True
    p, q = poly[i], poly[j]
    for a in range(n):
        b = (a + 1) % n
        if a in (i, j) or b in (i, j):
            continue
        if _segments_cross(p, q, poly[a], poly[b]):
            return False
    for a in range(n):
        if a in (i, j):
            continue
        if abs(_cross(p, q, poly[a])) < 1e-14 and \
                min(p[0], q[0]) <= poly[a][0] <= max(p[0], q[0]) and min(p[1], q[1]) <= poly[a][1] <= max(p[1], q[1]):
            return False
    return _point_in_polygon(0.5 * (p + q), poly)


def _maxmin_triangulation(poly):
    """Triangulation of a simple polygon maximizing the minimum angle (O(n^3) DP)."""
    n = len(poly)
    ok = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            ok[i, j] = ok[j, i] = _diagonal_ok(poly, i, j)
    best = np.full((n, n), -np.inf)
    split = -np.ones((n, n), dtype=int)
    for i in range(n - 1):
        best[i, i + 1] = np.inf
    for gap in range(2, n):
        for i in range(n - gap):
            j = i + gap
            if not ok[i, j]:
                continue
            for m in range(i + 1, j):
                if not (ok[i, m] and ok[m, j]):
                    continue
                tri = poly[[i, m, j]]
                if _cross(*tri) <= 0:
                    continue
                val = min(best[i, m], best[m, j], triangle_angles(tri[None])[0].min())
                if val > best[i, j]:
                    best[i, j] = val
                    split[i, j] = m
    if not np.isfinite(best[0, n - 1]):
        raise MeshError("polygon could not be triangulated")
    tris = []

    def collect(i, j):
        if j - i < 2:
            return
        m = split[i, j]
        tris.append((i, m, j))
        collect(i, m)
        collect(m, j)

    collect(0, n - 1)
    return np.array(sorted(tris), dtype=np.int64)


def triangulate_polygon(polygon, initial_subdivisions=0, min_angle=MIN_ANGLE_FLOOR):
    """Triangulate a simple counterclockwise polygon and refine it uniformly.

    The coarse mesh uses only the polygon's vertices; each subdivision is one
    midpoint quadrisection.
    """
    if isinstance(polygon, str):
        try:
            polygon = GEOMETRIES[polygon]
        except KeyError:
            raise MeshError(f"unknown geometry {polygon!r}; known: {sorted(GEOMETRIES)}") from None
    poly = validate_polygon(polygon)
    mesh = build_edge_topology(poly, _maxmin_triangulation(poly), min_angle=min_angle)
    for _ in range(initial_subdivisions):
        mesh = refine_uniform(mesh)
    return mesh


def refine_uniform(mesh):
    """Split every triangle into four similar children through edge midpoints."""
    verts = [tuple(v) for v in mesh.vertices]
    mid = {}

    def midpoint(a, b):
        key = (a, b) if a < b else (b, a)
        if key not in mid:
            mid[key] = len(verts)
            pa, pb = mesh.vertices[a], mesh.vertices[b]
            verts.append(tuple(0.5 * (pa + pb)))
        return mid[key]

    tris = []
    for a, b, c in mesh.triangles:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        tris += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
    return build_edge_topology(np.array(verts), np.array(tris, dtype=np.int64), min_angle=0.0)


def build_edge_topology(vertices, triangles, min_angle=MIN_ANGLE_FLOOR):
    """Validate a triangle list and derive interior-edge and boundary data.

    The minus side of each interior edge is the triangle with the lower index.
    """
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise MeshError("triangles must be an (n, 3) index array")
    if triangles.min() < 0 or triangles.max() >= len(vertices):
        raise MeshError("triangle vertex index out of range")
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    signed = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    if np.any(signed <= 0):
        bad = int(np.flatnonzero(signed <= 0)[0])
        raise MeshError(f"triangle {bad} is not counterclockwise")
    if min_angle > 0:
        angle = triangle_angles(p).min()
        if angle < min_angle - 1e-9:
            raise MeshError(f"minimum angle {angle:.3f} deg below shape-regularity floor {min_angle} deg")

    owners = {}
    for t, tri in enumerate(triangles):
        for i in range(3):
            a, b = int(tri[i]), int(tri[(i + 1) % 3])
            key = (a, b) if a < b else (b, a)
            owners.setdefault(key, []).append((t, a, b))

    ie_v, ie_p, ie_m, bs_v, bs_o = [], [], [], [], []
    for key, own in owners.items():
        if len(own) > 2:
            raise MeshError(f"non-conforming mesh: edge {key} shared by {len(own)} triangles")
        if len(own) == 2:
            (t1, a1, b1), (t2, a2, b2) = sorted(own)
            if (a1, b1) != (b2, a2):
                raise MeshError(f"inconsistent orientation across edge {key}")
            ie_v.append((a1, b1))
            ie_m.append(t1)
            ie_p.append(t2)
        else:
            t, a, b = own[0]
            bs_v.append((a, b))
            bs_o.append(t)

    ie_v = np.array(ie_v, dtype=np.int64).reshape(-1, 2)
    order = np.lexsort((ie_p, ie_m)) if len(ie_m) else np.array([], dtype=np.int64)
    ie_v = ie_v[order]
    ie_m = np.array(ie_m, dtype=np.int64)[order]
    ie_p = np.array(ie_p, dtype=np.int64)[order]
    t_ie = vertices[ie_v[:, 1]] - vertices[ie_v[:, 0]]
    ie_len = np.linalg.norm(t_ie, axis=1)
    ie_nrm = np.column_stack([t_ie[:, 1], -t_ie[:, 0]]) / ie_len[:, None] if len(ie_len) else np.zeros((0, 2))

    bs_v, bs_o = _order_boundary_loop(np.array(bs_v, dtype=np.int64), np.array(bs_o, dtype=np.int64))
    t_bs = vertices[bs_v[:, 1]] - vertices[bs_v[:, 0]]
    bs_len = np.linalg.norm(t_bs, axis=1)
    bs_nrm = np.column_stack([t_bs[:, 1], -t_bs[:, 0]]) / bs_len[:, None]
    sides = _infer_sides(t_bs / bs_len[:, None])
    return Mesh(vertices, triangles, ie_v, ie_p, ie_m, ie_nrm, ie_len, bs_v, bs_o, bs_nrm, bs_len, sides)


def _order_boundary_loop(bs_v, bs_o):
    """Order boundary segments head-to-tail along a single loop starting at a corner."""
    nxt = {int(a): s for s, (a, b) in enumerate(bs_v)}
    if len(nxt) != len(bs_v):
        raise MeshError("boundary is not a simple closed curve")
    start = int(np.argmin(bs_v[:, 0]))
    order = [start]
    while True:
        s = nxt.get(int(bs_v[order[-1], 1]))
        if s is None:
            raise MeshError("boundary loop is open")
        if s == start:
            break
        order.append(s)
    if len(order) != len(bs_v):
        raise MeshError("boundary has more than one component")
    return bs_v[order], bs_o[order]


def _infer_sides(tangents):
    """Polygon side index of each boundary segment (new side at each direction change)."""
    n = len(tangents)
    turn = np.abs(tangents[:, 0] * np.roll(tangents[:, 1], 1) - tangents[:, 1] * np.roll(tangents[:, 0], 1)) > 1e-10
    turn |= (tangents * np.roll(tangents, 1, axis=0)).sum(1) < 0
    if not turn.any():
        return np.zeros(n, dtype=np.int64)
    first = int(np.argmax(turn))
    sides = np.empty(n, dtype=np.int64)
    side = -1
    for i in range(n):
        j = (first + i) % n
        if turn[j]:
            side += 1
        sides[j] = side
    return sides


def mesh_quality(mesh):
    """Shape statistics; the quasi-uniformity ratio is over elements touching the boundary."""
    diam = mesh.element_diameters()
    touch = np.unique(np.concatenate([mesh.bseg_owner, _vertex_touching(mesh)]))
    ang = triangle_angles(mesh.vertices[mesh.triangles])
    return {
        "min_angle": float(ang.min()),
        "h_max": mesh.h_max,
        "h_max_near_boundary": float(diam[touch].max()),
        "h_min_near_boundary": float(diam[touch].min()),
        "quasi_uniformity_near_boundary": float(diam[touch].max() / diam[touch].min()),
        "shape_regularity": float((diam ** 2 / (2.0 * mesh.areas)).max()),
    }


def _vertex_touching(mesh):
    bverts = np.unique(mesh.bseg_vertices)
    return np.flatnonzero(np.isin(mesh.triangles, bverts).any(axis=1))


def write_mesh(mesh, path):
    with open(path, "w") as fh:
        fh.write("dgbem-mesh v1\n")
        fh.write(f"{len(mesh.vertices)}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        fh.write(f"{len(mesh.triangles)}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a} {b} {c}\n")


def read_mesh(path, min_angle=MIN_ANGLE_FLOOR):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "dgbem-mesh v1":
        raise MeshError(f"{path}: missing 'dgbem-mesh v1' header")
    try:
        nv = int(lines[1])
        verts = np.array([[float(t) for t in ln.split()] for ln in lines[2:2 + nv]])
        nt = int(lines[2 + nv])
        tris = np.array([[int(t) for t in ln.split()] for ln in lines[3 + nv:3 + nv + nt]], dtype=np.int64)
    except (IndexError, ValueError) as exc:
        raise MeshError(f"{path}: malformed mesh file ({exc})") from None
    if verts.shape != (nv, 2) or tris.shape != (nt, 3):
        raise MeshError(f"{path}: counts do not match data")
    return build_edge_topology(verts, tris, min_angle=min_angle)
