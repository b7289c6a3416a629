"""Virtual hemodynamic flow visualization.

From a binary vessel mask: extract the medial-axis centerline with local
radii, assign volumetric flow by mass conservation (projected width read as
the diameter of a circular tube, so v = Q / (pi r^2)), flag stagnation
zones below a relative velocity threshold, and render a velocity-coded
streamline overlay.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from skimage.morphology import skeletonize as _sk_skeletonize

from .errors import (DegenerateSkeleton, DimensionMismatch, EmptyMask,
                     NoInlet, UnreachableOutlet)

_NEIGH = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def distance_transform(mask: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance (pixels) to the nearest background pixel."""
    if not mask.any():
        raise EmptyMask("mask has no foreground")
    padded = np.pad(mask, 1)  # image boundary counts as background
    return ndimage.distance_transform_edt(padded)[1:-1, 1:-1]


def skeletonize(mask: np.ndarray) -> np.ndarray:
    """Topology-preserving thinning to a 1-px-wide, 8-connected skeleton."""
    if not mask.any():
        raise EmptyMask("mask has no foreground")
    return _sk_skeletonize(mask)


@dataclass
class CenterlineNode:
    x: float
    y: float
    radius: float


@dataclass
class CenterlineEdge:
    u: int
    v: int
    points: np.ndarray  # (N, 2) x, y pixel path from u to v
    radii: np.ndarray   # (N,) local radius at each path point

    @property
    def arclength(self) -> np.ndarray:
        d = np.hypot(np.diff(self.points[:, 0]), np.diff(self.points[:, 1]))
        return np.concatenate(([0.0], np.cumsum(d)))

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    @property
    def mean_radius(self) -> float:
        return float(self.radii.mean())


@dataclass
class CenterlineGraph:
    nodes: list
    edges: list
    width: int
    height: int

    def degree(self, i: int) -> int:
        return sum((e.u == i) + (e.v == i) for e in self.edges)

    def endpoints(self):
        return [i for i in range(len(self.nodes)) if self.degree(i) == 1]


def _neighbors(y, x, on):
    for dy, dx in _NEIGH:
        p = (y + dy, x + dx)
        if p in on:
            yield p


def build_centerline_graph(skeleton: np.ndarray, dist: np.ndarray,
                           spur_min: float = 5.0) -> CenterlineGraph:
    """Nodes at endpoints/junctions of the skeleton, edges along the
    degree-2 chains between them; spurs shorter than spur_min pruned."""
    h, w = skeleton.shape
    ys, xs = np.nonzero(skeleton)
    on = set(zip(ys.tolist(), xs.tolist()))
    if not on:
        raise DegenerateSkeleton("empty skeleton")
    deg = {p: sum(1 for _ in _neighbors(*p, on)) for p in on}

    # cluster node pixels (degree != 2); adjacent junction pixels merge
    node_px = [p for p in on if deg[p] != 2]
    cluster_of = {}
    clusters = []
    for p in node_px:
        if p in cluster_of:
            continue
        cid = len(clusters)
        stack, members = [p], []
        cluster_of[p] = cid
        while stack:
            q = stack.pop()
            members.append(q)
            for r in _neighbors(*q, on):
                if deg[r] != 2 and r not in cluster_of:
                    cluster_of[r] = cid
                    stack.append(r)
        clusters.append(members)

    edges_raw = []  # (cid_a, cid_b, path list)
    visited_chain = set()
    seen_direct = set()
    for p in node_px:
        for q in _neighbors(*p, on):
            if deg[q] != 2:
                ca, cb = cluster_of[p], cluster_of[q]
                if ca == cb:
                    continue
                key = (min(ca, cb), max(ca, cb), min(p, q))
                if key not in seen_direct:
                    seen_direct.add(key)
                    edges_raw.append((ca, cb, [p, q]))
                continue
            if q in visited_chain:
                continue
            # walk the degree-2 chain
            path = [p, q]
            visited_chain.add(q)
            prev, cur = p, q
            while deg[cur] == 2:
                nxt = next(r for r in _neighbors(*cur, on) if r != prev)
                path.append(nxt)
                if deg[nxt] == 2:
                    if nxt in visited_chain:
                        break
                    visited_chain.add(nxt)
                prev, cur = cur, nxt
            end = path[-1]
            if deg[end] != 2:
                edges_raw.append((cluster_of[p], cluster_of[end], path))

    # pure cycles (all pixels degree 2) get a synthetic anchor node
    leftovers = [p for p in on if deg[p] == 2 and p not in visited_chain]
    leftover_set = set(leftovers)
    while leftover_set:
        start = min(leftover_set)
        cid = len(clusters)
        clusters.append([start])
        cluster_of[start] = cid
        path = [start]
        leftover_set.discard(start)
        prev, cur = None, start
        while True:
            nxt = next((r for r in _neighbors(*cur, on)
                        if r != prev and r in leftover_set), None)
            if nxt is None:
                break
            path.append(nxt)
            leftover_set.discard(nxt)
            prev, cur = cur, nxt
        path.append(start)
        edges_raw.append((cid, cid, path))

    # prune spurs: short edges hanging off a junction by an isolated tip
    def path_len(path):
        return sum(math.hypot(a[0] - b[0], a[1] - b[1])
                   for a, b in zip(path, path[1:]))

    changed = True
    while changed:
        changed = False
        degree = {}
        for ca, cb, _ in edges_raw:
            degree[ca] = degree.get(ca, 0) + 1
            degree[cb] = degree.get(cb, 0) + 1
        kept = []
        for ca, cb, path in edges_raw:
            tip_a = degree.get(ca, 0) == 1 and len(clusters[ca]) == 1
            tip_b = degree.get(cb, 0) == 1 and len(clusters[cb]) == 1
            is_spur = (path_len(path) < spur_min
                       and ((tip_a and degree.get(cb, 0) >= 3)
                            or (tip_b and degree.get(ca, 0) >= 3)))
            if is_spur:
                changed = True
            else:
                kept.append((ca, cb, path))
        edges_raw = kept

    # a pruned junction left with exactly two incident chains is no longer
    # a junction; splice the chains together through it
    spliced = True
    while spliced:
        spliced = False
        degree = {}
        for ca, cb, _ in edges_raw:
            degree[ca] = degree.get(ca, 0) + 1
            degree[cb] = degree.get(cb, 0) + 1
        for c, d in degree.items():
            if d != 2:
                continue
            inc = [k for k, e in enumerate(edges_raw) if c in (e[0], e[1])]
            if len(inc) != 2:  # self-loop anchor: keep as is
                continue
            (a1, b1, p1), (a2, b2, p2) = edges_raw[inc[0]], edges_raw[inc[1]]
            other1, path1 = (a1, p1) if b1 == c else (b1, p1[::-1])
            other2, path2 = (b2, p2) if a2 == c else (a2, p2[::-1])
            edges_raw = [e for k, e in enumerate(edges_raw) if k not in inc]
            edges_raw.append((other1, other2, path1 + path2[1:]))
            spliced = True
            break

    used = sorted({c for ca, cb, _ in edges_raw for c in (ca, cb)})
    if len(used) < 2:
        raise DegenerateSkeleton(
            f"{len(used)} node(s) after pruning; need at least 2")
    remap = {c: i for i, c in enumerate(used)}

    nodes = []
    for c in used:
        members = clusters[c]
        cy = float(np.mean([m[0] for m in members]))
        cx = float(np.mean([m[1] for m in members]))
        r = float(max(dist[m] for m in members))
        nodes.append(CenterlineNode(x=cx, y=cy, radius=max(r, 0.5)))

    edges = []
    for ca, cb, path in edges_raw:
        pts = np.array([[x, y] for (y, x) in path], dtype=np.float64)
        radii = np.maximum(np.array([dist[p] for p in path]), 0.5)
        edges.append(CenterlineEdge(u=remap[ca], v=remap[cb],
                                    points=pts, radii=radii))
    return CenterlineGraph(nodes=nodes, edges=edges, width=w, height=h)


@dataclass
class EdgeFlow:
    edge: int            # index into graph.edges
    src: int             # node the flow enters from
    dst: int
    Q: float
    s: np.ndarray        # arc length, oriented src -> dst
    r: np.ndarray
    v: np.ndarray
    points: np.ndarray   # (N, 2), oriented src -> dst


@dataclass
class FlowField:
    edges: list
    inlets: list
    outlets: list
    width: int
    height: int

    def all_velocities(self) -> np.ndarray:
        if not self.edges:
            return np.empty(0)
        return np.concatenate([e.v for e in self.edges])


def default_endpoints(graph: CenterlineGraph):
    """Inlets default to the two lowest endpoints on the image (caval
    inflow); everything else is an outlet. Override via configuration."""
    eps = graph.endpoints()
    if len(eps) < 2:
        raise NoInlet("graph has fewer than 2 endpoints")
    by_lowness = sorted(eps, key=lambda i: -graph.nodes[i].y)
    n_in = 2 if len(eps) > 2 else 1
    inlets = by_lowness[:n_in]
    outlets = [e for e in eps if e not in inlets]
    return inlets, outlets


def assign_flow(graph: CenterlineGraph, inlets, outlets) -> FlowField:
    """Mass-conservation flow: unit total inflow split equally over inlets,
    junction outflow split proportional to child cross-sectional area."""
    if not inlets:
        raise NoInlet("no inlet nodes given")
    inlets = list(inlets)
    outlets = list(outlets)
    if set(inlets) & set(outlets):
        raise ValueError("inlets and outlets must be disjoint")
    adj = {i: [] for i in range(len(graph.nodes))}
    for ei, e in enumerate(graph.edges):
        adj[e.u].append((ei, e.v))
        adj[e.v].append((ei, e.u))

    # orient edges away from the inlets (BFS forest)
    order = []
    parent_edge = {}
    children = {i: [] for i in adj}
    seen = set(inlets)
    frontier = list(inlets)
    while frontier:
        nxt = []
        for n in frontier:
            order.append(n)
            for ei, m in adj[n]:
                if m not in seen and parent_edge.get(ei) is None:
                    seen.add(m)
                    parent_edge[ei] = (n, m)
                    children[n].append((ei, m))
                    nxt.append(m)
        frontier = nxt
    missing = [o for o in outlets if o not in seen]
    if missing:
        raise UnreachableOutlet(f"outlets {missing} not reachable from inlets")

    # which nodes drain toward an outlet
    feeds = set(outlets)
    for n in reversed(order):
        if any(m in feeds for _, m in children[n]):
            feeds.add(n)

    inflow = {n: 0.0 for n in adj}
    for i in inlets:
        inflow[i] += 1.0 / len(inlets)
    edge_Q = {}
    for n in order:
        q = inflow[n]
        if n in outlets:
            continue
        eligible = [(ei, m) for ei, m in children[n] if m in feeds]
        if not eligible:
            continue
        weights = [math.pi * graph.edges[ei].mean_radius ** 2
                   for ei, _ in eligible]
        wsum = sum(weights)
        for (ei, m), wgt in zip(eligible, weights):
            share = q * wgt / wsum
            edge_Q[ei] = share
            inflow[m] += share

    flows = []
    for ei, e in enumerate(graph.edges):
        if ei in parent_edge:
            src, dst = parent_edge[ei]
        else:
            src, dst = e.u, e.v  # unused loop edge carries no flow
        Q = edge_Q.get(ei, 0.0)
        pts, radii = e.points, e.radii
        if src == e.v and dst == e.u:
            pts, radii = pts[::-1].copy(), radii[::-1].copy()
        d = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
        s = np.concatenate(([0.0], np.cumsum(d)))
        v = Q / (math.pi * radii ** 2)
        flows.append(EdgeFlow(edge=ei, src=src, dst=dst, Q=Q,
                              s=s, r=radii, v=v, points=pts))
    return FlowField(edges=flows, inlets=inlets, outlets=outlets,
                     width=graph.width, height=graph.height)


@dataclass
class StagnationZone:
    edge: int
    s_start: float
    s_end: float
    mean_velocity: float
    centroid: tuple


@dataclass
class StagnationReport:
    zones: list
    threshold_used: float
    median_velocity: float = 0.0

    def to_dict(self) -> dict:
        return {
            "threshold_used": self.threshold_used,
            "median_velocity": self.median_velocity,
            "zones": [
                {"edge": z.edge,
                 "arc_interval": [z.s_start, z.s_end],
                 "mean_velocity": z.mean_velocity,
                 "centroid": [z.centroid[0], z.centroid[1]]}
                for z in self.zones
            ],
        }


def detect_stagnation(field: FlowField, rel_threshold: float = 0.5,
                      merge_gap: int = 3) -> StagnationReport:
    """Flag maximal arc intervals with v below rel_threshold x median(v);
    intervals separated by fewer than merge_gap samples merge."""
    vels = field.all_velocities()
    if vels.size == 0:
        return StagnationReport(zones=[], threshold_used=0.0)
    median = float(np.median(vels))
    thr = rel_threshold * median
    zones = []
    for ef in field.edges:
        below = ef.v < thr
        runs = []
        i = 0
        n = len(below)
        while i < n:
            if below[i]:
                j = i
                while j + 1 < n and below[j + 1]:
                    j += 1
                runs.append([i, j])
                i = j + 1
            else:
                i += 1
        merged = []
        for run in runs:
            if merged and run[0] - merged[-1][1] - 1 < merge_gap:
                merged[-1][1] = run[1]
            else:
                merged.append(run)
        for i0, i1 in merged:
            seg_v = ef.v[i0:i1 + 1]
            seg_p = ef.points[i0:i1 + 1]
            zones.append(StagnationZone(
                edge=ef.edge,
                s_start=float(ef.s[i0]),
                s_end=float(ef.s[i1]),
                mean_velocity=float(seg_v.mean()),
                centroid=(float(seg_p[:, 0].mean()), float(seg_p[:, 1].mean())),
            ))
    return StagnationReport(zones=zones, threshold_used=thr,
                            median_velocity=median)


def _draw_line(img, x0, y0, x1, y1, color):
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    h, w = img.shape[:2]
    while True:
        if 0 <= y0 < h and 0 <= x0 < w:
            img[y0, x0] = color
        if x0 == x1 and y0 == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def _draw_circle(img, cx, cy, radius, color):
    h, w = img.shape[:2]
    x, y, err = int(radius), 0, 1 - int(radius)
    while x >= y:
        for px, py in ((x, y), (y, x), (-y, x), (-x, y),
                       (-x, -y), (-y, -x), (y, -x), (x, -y)):
            xx, yy = cx + px, cy + py
            if 0 <= yy < h and 0 <= xx < w:
                img[yy, xx] = color
        y += 1
        if err < 0:
            err += 2 * y + 1
        else:
            x -= 1
            err += 2 * (y - x) + 1


def _velocity_color(t: float):
    # blue (slow) -> red (fast)
    r = int(math.floor(255.0 * t + 0.5))
    b = int(math.floor(255.0 * (1.0 - t) + 0.5))
    return (r, 0, b)


def render_streamlines(base: np.ndarray, field: FlowField,
                       report: StagnationReport) -> np.ndarray:
    """Velocity-coded centerline polylines over the base image; stagnation
    zones ringed in white. Pure integer rasterization, so the PNG is
    bit-stable across runs."""
    if base.shape[:2] != (field.height, field.width):
        raise DimensionMismatch(
            f"base {base.shape[1]}x{base.shape[0]} vs field "
            f"{field.width}x{field.height}")
    if base.ndim == 2:
        rgb = np.stack([base] * 3, axis=-1).astype(np.uint8)
    else:
        rgb = base.astype(np.uint8).copy()
    vels = field.all_velocities()
    if vels.size == 0:
        return rgb
    vmin, vmax = float(vels.min()), float(vels.max())
    span = vmax - vmin
    for ef in field.edges:
        pts = np.floor(ef.points + 0.5).astype(int)
        for k in range(len(pts) - 1):
            t = 0.5 if span == 0 else (float(ef.v[k]) - vmin) / span
            _draw_line(rgb, pts[k, 0], pts[k, 1], pts[k + 1, 0], pts[k + 1, 1],
                       _velocity_color(t))
    for z in report.zones:
        ef = next(e for e in field.edges if e.edge == z.edge)
        in_zone = (ef.s >= z.s_start) & (ef.s <= z.s_end)
        ring_r = int(math.ceil(float(ef.r[in_zone].max()))) + 3 if in_zone.any() else 5
        _draw_circle(rgb, int(round(z.centroid[0])), int(round(z.centroid[1])),
                     ring_r, (255, 255, 255))
    return rgb
