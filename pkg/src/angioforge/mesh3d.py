"""Tube lofting from a centerline graph and CFD-readiness validation.

The 2D projected vessel width is read as the diameter of a circular tube.
Each edge is swept with a regular polygon using rotation-minimizing frames
(double reflection); junctions are closed by convex-hull patching of the
incident ring openings placed on a common sphere, endpoint openings are
capped with fans. The result is a single closed, consistently oriented
surface in millimeters.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DegenerateCenterline, EmptyMesh, SelfIntersectingInput
from .stlio import TriMesh

_MIN_RADIUS_FACTOR = 0.3   # floor on tube radius, in pixel-pitch units
_STANDOFF_FACTOR = 1.5     # junction sphere radius vs largest incident tube


@dataclass
class ValidationReport:
    watertight: bool
    edge_manifold: bool
    consistently_oriented: bool
    euler_characteristic: int
    boundary_edge_count: int
    signed_volume: float
    triangle_count: int
    min_dihedral_quality: float

    @property
    def cfd_ready(self) -> bool:
        return (self.watertight and self.edge_manifold
                and self.consistently_oriented and self.signed_volume > 0)

    def to_dict(self) -> dict:
        return {
            "watertight": self.watertight,
            "edge_manifold": self.edge_manifold,
            "consistently_oriented": self.consistently_oriented,
            "euler_characteristic": self.euler_characteristic,
            "boundary_edge_count": self.boundary_edge_count,
            "signed_volume": self.signed_volume,
            "triangle_count": self.triangle_count,
            "min_dihedral_quality": self.min_dihedral_quality,
        }


def validate_mesh(mesh: TriMesh) -> ValidationReport:
    """Topology and orientation audit plus divergence-theorem volume."""
    tris = np.asarray(mesh.triangles, dtype=np.int64)
    verts = np.asarray(mesh.vertices, dtype=np.float64)
    if len(tris) == 0 or len(verts) == 0:
        raise EmptyMesh("mesh has no geometry to validate")
    undirected = {}
    directed = {}
    for tri in tris:
        for k in range(3):
            a, b = int(tri[k]), int(tri[(k + 1) % 3])
            undirected[(min(a, b), max(a, b))] = \
                undirected.get((min(a, b), max(a, b)), 0) + 1
            directed[(a, b)] = directed.get((a, b), 0) + 1
    boundary = sum(1 for c in undirected.values() if c == 1)
    edge_manifold = all(c == 2 for c in undirected.values())
    oriented = all(c <= 1 for c in directed.values()) and all(
        directed.get((a, b), 0) == directed.get((b, a), 0)
        for (a, b) in directed)
    v_count = len(verts)
    e_count = len(undirected)
    f_count = len(tris)
    a = verts[tris[:, 0]]
    b = verts[tris[:, 1]]
    c = verts[tris[:, 2]]
    volume = float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)

    quality = 1.0
    if edge_manifold and len(tris):
        normals = np.cross(b - a, c - a)
        norms = np.linalg.norm(normals, axis=1)
        normals = np.divide(normals, norms[:, None],
                            out=np.zeros_like(normals), where=norms[:, None] > 0)
        edge_faces = {}
        for fi, tri in enumerate(tris):
            for k in range(3):
                p, q = int(tri[k]), int(tri[(k + 1) % 3])
                edge_faces.setdefault((min(p, q), max(p, q)), []).append(fi)
        for faces in edge_faces.values():
            if len(faces) == 2:
                d = float(np.clip(np.dot(normals[faces[0]], normals[faces[1]]),
                                  -1.0, 1.0))
                fold = math.acos(d)  # 0 = flat
                quality = min(quality, (math.pi - fold) / math.pi)

    return ValidationReport(
        watertight=boundary == 0 and edge_manifold,
        edge_manifold=edge_manifold,
        consistently_oriented=oriented,
        euler_characteristic=v_count - e_count + f_count,
        boundary_edge_count=boundary,
        signed_volume=volume,
        triangle_count=f_count,
        min_dihedral_quality=quality,
    )


def _unit(v):
    n = np.linalg.norm(v)
    if n == 0:
        return v
    return v / n


def _perp_frame(t):
    ref = np.array([0.0, 0.0, 1.0]) if abs(t[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    m1 = _unit(np.cross(t, ref))
    return m1


def _rmf_frames(points, tangents, m1_start):
    """Rotation-minimizing frames by the double-reflection method."""
    m1 = _unit(m1_start - np.dot(m1_start, tangents[0]) * tangents[0])
    frames = [m1]
    for i in range(len(points) - 1):
        v1 = points[i + 1] - points[i]
        c1 = float(np.dot(v1, v1))
        if c1 < 1e-18:
            frames.append(frames[-1])
            continue
        rl = frames[-1] - (2.0 / c1) * np.dot(v1, frames[-1]) * v1
        tl = tangents[i] - (2.0 / c1) * np.dot(v1, tangents[i]) * v1
        v2 = tangents[i + 1] - tl
        c2 = float(np.dot(v2, v2))
        nxt = rl if c2 < 1e-18 else rl - (2.0 / c2) * np.dot(v2, rl) * v2
        nxt = _unit(nxt - np.dot(nxt, tangents[i + 1]) * tangents[i + 1])
        frames.append(nxt)
    return frames


class _Builder:
    def __init__(self):
        self.vertices = []
        self.triangles = []

    def add_vertex(self, p) -> int:
        self.vertices.append(np.asarray(p, dtype=np.float64))
        return len(self.vertices) - 1

    def add_ring(self, center, radius, m1, m2, n_sides):
        ids = []
        for k in range(n_sides):
            phi = 2.0 * math.pi * k / n_sides
            p = center + radius * (math.cos(phi) * m1 + math.sin(phi) * m2)
            ids.append(self.add_vertex(p))
        return ids

    def tri(self, a, b, c):
        self.triangles.append((a, b, c))

    def stitch(self, ring_a, ring_b, offset=0):
        n = len(ring_a)
        for k in range(n):
            a0 = ring_a[k]
            a1 = ring_a[(k + 1) % n]
            b0 = ring_b[(k + offset) % n]
            b1 = ring_b[(k + 1 + offset) % n]
            self.tri(a0, b1, b0)
            self.tri(a0, a1, b1)

    def best_offset(self, ring_a, ring_b):
        pa = np.array([self.vertices[i] for i in ring_a])
        pb = np.array([self.vertices[i] for i in ring_b])
        n = len(ring_a)
        best, best_d = 0, math.inf
        for o in range(n):
            d = float(((pa - pb[(np.arange(n) + o) % n]) ** 2).sum())
            if d < best_d:
                best, best_d = o, d
        return best

    def cap_start(self, ring, apex):
        c = self.add_vertex(apex)
        n = len(ring)
        for k in range(n):
            self.tri(c, ring[(k + 1) % n], ring[k])

    def cap_end(self, ring, apex):
        c = self.add_vertex(apex)
        n = len(ring)
        for k in range(n):
            self.tri(c, ring[k], ring[(k + 1) % n])


def _edge_geometry(edge, pixel_pitch):
    pts = np.column_stack([edge.points * pixel_pitch,
                           np.zeros(len(edge.points))])
    radii = np.maximum(edge.radii * pixel_pitch,
                       _MIN_RADIUS_FACTOR * pixel_pitch)
    d = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    keep = np.concatenate(([True], d > 1e-12))
    pts, radii = pts[keep], radii[keep]
    d = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate(([0.0], np.cumsum(d)))
    return pts, radii, s


def _interp_path(pts, radii, s, targets):
    x = np.interp(targets, s, pts[:, 0])
    y = np.interp(targets, s, pts[:, 1])
    z = np.interp(targets, s, pts[:, 2])
    r = np.interp(targets, s, radii)
    return np.column_stack([x, y, z]), r


def _tangents(points):
    t = np.gradient(points, axis=0)
    norms = np.linalg.norm(t, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return t / norms


def _junction_rings(center, ring_specs, n_sides):
    """Place one polygon ring per incident edge on a sphere around the
    junction so the convex hull exposes each ring opening as a facet.

    ring_specs: list of (direction, radius). Returns (R, list of
    (ring_center, ring_radius, m1, m2)) or raises SelfIntersectingInput.
    """
    del center  # rings are built in node-local coordinates
    dirs = [np.asarray(u, dtype=np.float64) for u, _ in ring_specs]
    radii = [r for _, r in ring_specs]

    def build(R):
        rings = []
        pts = []
        for u, r in zip(dirs, radii):
            r_eff = min(r, 0.85 * R)
            h = math.sqrt(max(R * R - r_eff * r_eff, 1e-12))
            m1 = _perp_frame(u)
            m2 = np.cross(u, m1)
            c = h * u
            rings.append((c, r_eff, m1, m2))
            for k in range(n_sides):
                phi = 2.0 * math.pi * k / n_sides
                pts.append(c + r_eff * (math.cos(phi) * m1 + math.sin(phi) * m2))
        return rings, np.array(pts)

    def hull_clean(points):
        try:
            hull = ConvexHull(points, qhull_options="Qt")
        except QhullError:
            return None
        if len(hull.vertices) != len(points):
            return None
        ring_of = np.arange(len(points)) // n_sides
        pure = {i: [] for i in range(len(dirs))}
        patch = []
        for simplex in hull.simplices:
            rings_used = set(ring_of[simplex])
            if len(rings_used) == 1:
                pure[rings_used.pop()].append(tuple(simplex))
            else:
                patch.append(tuple(simplex))
        for i in range(len(dirs)):
            if len(pure[i]) != n_sides - 2:
                return None
            edge_use = {}
            for f in pure[i]:
                for k in range(3):
                    a, b = f[k], f[(k + 1) % 3]
                    edge_use[(min(a, b), max(a, b))] = \
                        edge_use.get((min(a, b), max(a, b)), 0) + 1
            bound = {e for e, c in edge_use.items() if c == 1}
            base = i * n_sides
            expect = {(min(base + k, base + (k + 1) % n_sides),
                       max(base + k, base + (k + 1) % n_sides))
                      for k in range(n_sides)}
            if bound != expect:
                return None
        # orient patch faces outward using hull equations
        oriented = []
        for fi, simplex in enumerate(hull.simplices):
            if tuple(simplex) not in set(patch):
                continue
            a, b, c = (points[j] for j in simplex)
            n = hull.equations[fi][:3]
            if np.dot(np.cross(b - a, c - a), n) < 0:
                oriented.append((simplex[0], simplex[2], simplex[1]))
            else:
                oriented.append(tuple(simplex))
        return oriented

    R = max(radii) * _STANDOFF_FACTOR
    R_max = None
    for _ in range(7):
        rings, pts = build(R)
        patch = hull_clean(pts)
        if patch is not None:
            return R, rings, patch
        R *= 1.35
        if R_max is not None and R > R_max:
            break
    raise SelfIntersectingInput(
        "cannot place junction rings in convex position; branch angles too "
        "narrow for the local radii")


def loft_tube(graph, n_sides: int = 16, pixel_pitch: float = 0.25) -> TriMesh:
    """Sweep every centerline edge and close junctions and endpoints into a
    single watertight surface (millimeters)."""
    if n_sides < 6:
        raise ValueError("n_sides must be >= 6")
    if pixel_pitch <= 0:
        raise ValueError("pixel_pitch must be positive")
    if len(graph.nodes) < 2 or not graph.edges:
        raise DegenerateCenterline(
            f"{len(graph.nodes)} node(s), {len(graph.edges)} edge(s)")

    pp = pixel_pitch
    incident = {i: [] for i in range(len(graph.nodes))}
    for ei, e in enumerate(graph.edges):
        incident[e.u].append((ei, 0))
        incident[e.v].append((ei, 1))
        if e.u == e.v:
            raise SelfIntersectingInput("self-loop edge cannot be lofted")

    geom = [_edge_geometry(e, pp) for e in graph.edges]
    for ei, (_, _, s) in enumerate(geom):
        if len(s) < 2 or s[-1] <= 0:
            raise DegenerateCenterline(f"edge {ei} has zero length")
    builder = _Builder()

    # junction rings first so tube sweeps can share their vertex ids
    junction_ring_ids = {}   # (edge_idx, end) -> ring vertex ids
    junction_standoff = {}   # (edge_idx, end) -> arc-length standoff
    for ni, inc in incident.items():
        if len(inc) < 2:
            continue
        node = graph.nodes[ni]
        center = np.array([node.x * pp, node.y * pp, 0.0])
        min_len = min(geom[ei][2][-1] for ei, _ in inc)
        end_radii = []
        for ei, end in inc:
            radii = geom[ei][1]
            end_radii.append(radii[0] if end == 0 else radii[-1])
        R0 = min(max(max(end_radii), node.radius * pp) * _STANDOFF_FACTOR,
                 0.45 * min_len)
        if R0 <= 0:
            raise SelfIntersectingInput("degenerate junction spacing")

        specs = []
        for (ei, end), r_end in zip(inc, end_radii):
            pts, radii, s = geom[ei]
            target = R0 if end == 0 else s[-1] - R0
            p, r_at = _interp_path(pts, radii, s, np.array([target]))
            u = _unit(p[0] - center)
            if np.linalg.norm(u) == 0:
                u = _unit(pts[1] - pts[0]) if end == 0 else _unit(pts[-2] - pts[-1])
            specs.append((u, min(float(r_at[0]), r_end if r_end > 0 else float(r_at[0]))))
        R, rings, patch = _junction_rings(center, specs, n_sides)
        ring_ids = []
        for c, r_eff, m1, m2 in rings:
            ring_ids.append(builder.add_ring(center + c, r_eff, m1, m2, n_sides))
        for (ei, end), ids in zip(inc, ring_ids):
            junction_ring_ids[(ei, end)] = ids
            junction_standoff[(ei, end)] = R
        for a, b, c in patch:
            ra, ka = divmod(a, n_sides)
            rb, kb = divmod(b, n_sides)
            rc, kc = divmod(c, n_sides)
            builder.tri(ring_ids[ra][ka], ring_ids[rb][kb], ring_ids[rc][kc])

    for ei, e in enumerate(graph.edges):
        pts, radii, s = geom[ei]
        total = s[-1]
        u_j = (ei, 0) in junction_ring_ids
        v_j = (ei, 1) in junction_ring_ids
        s0 = junction_standoff.get((ei, 0), 0.0)
        s1 = total - junction_standoff.get((ei, 1), 0.0)
        if s1 - s0 <= 1e-9:
            raise SelfIntersectingInput(
                f"edge {ei} too short for its junction standoffs")
        spacing = 2.0 * pp
        m = max(1, int(math.ceil((s1 - s0) / spacing)))
        targets = s0 + (s1 - s0) * np.arange(m + 1) / m
        path, r_path = _interp_path(pts, radii, s, targets)
        tangents = _tangents(path)

        if u_j:
            start_ring = junction_ring_ids[(ei, 0)]
            c0 = np.mean([builder.vertices[i] for i in start_ring], axis=0)
            m1_0 = _unit(builder.vertices[start_ring[0]] - c0)
        else:
            start_ring = None
            m1_0 = _perp_frame(tangents[0])
        frames = _rmf_frames(path, tangents, m1_0)

        rings = []
        first_swept = 1 if u_j else 0
        for j in range(first_swept, m + 1):
            m1 = frames[j]
            m2 = np.cross(tangents[j], m1)
            rings.append(builder.add_ring(path[j], r_path[j], m1, m2, n_sides))

        chain = ([start_ring] if u_j else []) + rings
        if v_j:
            chain.append(list(reversed(junction_ring_ids[(ei, 1)])))
        for idx in range(len(chain) - 1):
            a, b = chain[idx], chain[idx + 1]
            boundary_pair = (u_j and idx == 0) or (v_j and idx == len(chain) - 2)
            offset = builder.best_offset(a, b) if boundary_pair else 0
            builder.stitch(a, b, offset)
        if not u_j:
            builder.cap_start(chain[0], path[0])
        if not v_j:
            builder.cap_end(chain[-1], path[-1])

    vertices = np.array(builder.vertices)
    triangles = np.array(builder.triangles, dtype=np.int64)
    # drop exactly degenerate triangles (repeated indices)
    ok = ((triangles[:, 0] != triangles[:, 1])
          & (triangles[:, 1] != triangles[:, 2])
          & (triangles[:, 0] != triangles[:, 2]))
    mesh = TriMesh(vertices=vertices, triangles=triangles[ok])
    report = validate_mesh(mesh)
    if report.signed_volume < 0:
        mesh = TriMesh(vertices=vertices, triangles=mesh.triangles[:, ::-1])
    return mesh
