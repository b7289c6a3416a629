"""Synthetic phantoms: deterministic stand-ins for clinical angiograms.

The Fontan phantom models a failing total cavopulmonary connection: two
caval tubes joining two pulmonary-branch tubes through a dilated central
pouch, rendered dark on a bright field like a contrast angiogram.
"""

import math

import numpy as np

from .flowviz import CenterlineEdge, CenterlineGraph, CenterlineNode


def _segment_distance(yy, xx, p0, p1):
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    d = p1 - p0
    L2 = float(d @ d)
    if L2 == 0:
        return np.hypot(xx - p0[0], yy - p0[1])
    t = np.clip(((xx - p0[0]) * d[0] + (yy - p0[1]) * d[1]) / L2, 0.0, 1.0)
    return np.hypot(xx - (p0[0] + t * d[0]), yy - (p0[1] + t * d[1]))


def fontan_phantom(size: int = 1024, seed: int = 7) -> np.ndarray:
    """Grayscale synthetic Fontan angiogram (vessels dark, field bright)."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    c = size / 2.0
    r_caval = size * 0.035
    r_pa = size * 0.028
    r_pouch = size * 0.085

    # signed distance to the vessel union (negative = inside)
    segs = [
        ((c - size * 0.02, size * 0.10), (c, c), r_caval),          # upper caval
        ((c + size * 0.02, size * 0.90), (c, c), r_caval),          # lower caval
        ((c, c), (size * 0.10, c - size * 0.10), r_pa),             # left PA
        ((c, c), (size * 0.90, c - size * 0.08), r_pa),             # right PA
    ]
    sdf = np.full((size, size), np.inf)
    for p0, p1, r in segs:
        sdf = np.minimum(sdf, _segment_distance(yy, xx, p0, p1) - r)
    pouch = np.hypot(xx - c, yy - c) - r_pouch
    sdf = np.minimum(sdf, pouch)

    background = 210.0 - 8.0 * (np.hypot(xx - c, yy - c) / c) ** 2
    vessel = 55.0
    blend = np.clip(0.5 - sdf / 3.0, 0.0, 1.0)  # ~3 px soft edge
    img = background + (vessel - background) * blend
    rng = np.random.default_rng(seed)
    img = img + rng.normal(0.0, 3.0, img.shape)
    return np.clip(img, 0, 255).astype(np.uint8)


def bulge_tube_mask(width: int = 512, height: int = 160, radius: float = 12.0,
                    bulge_factor: float = 2.0, bulge_frac: float = 0.2) -> np.ndarray:
    """Horizontal tube whose radius swells by bulge_factor over the central
    bulge_frac of its length; models a dilated pouch on a single conduit."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    yc = height / 2.0
    x0, x1 = width * 0.08, width * 0.92
    length = x1 - x0
    half_b = bulge_frac * length / 2.0
    mid = (x0 + x1) / 2.0
    ramp = radius  # smooth transition over ~1 radius
    u = np.clip((np.abs(xx - mid) - half_b) / ramp, 0.0, 1.0)
    t = u * u * (3.0 - 2.0 * u)  # smoothstep, 0 inside bulge
    r_of_x = radius * (bulge_factor + (1.0 - bulge_factor) * t)
    inside = (xx >= x0) & (xx <= x1) & (np.abs(yy - yc) <= r_of_x)
    cap_l = np.hypot(xx - x0, yy - yc) <= radius
    cap_r = np.hypot(xx - x1, yy - yc) <= radius
    return inside | cap_l | cap_r


def straight_tube_graph(length: float = 100.0, radius: float = 10.0,
                        samples: int = 101) -> CenterlineGraph:
    pts = np.column_stack([np.linspace(0.0, length, samples),
                           np.full(samples, radius * 4.0)])
    edge = CenterlineEdge(u=0, v=1, points=pts,
                          radii=np.full(samples, radius))
    nodes = [CenterlineNode(0.0, radius * 4.0, radius),
             CenterlineNode(length, radius * 4.0, radius)]
    side = int(length + radius * 8)
    return CenterlineGraph(nodes=nodes, edges=[edge], width=side, height=side)


def random_tree_graph(rng: np.random.Generator, max_depth: int = 3) -> tuple:
    """Random planar vessel tree with well-separated branch angles.

    Returns (graph, inlets, outlets): the root endpoint feeds the leaves.
    """
    nodes = []
    edges = []

    def add_node(x, y, r):
        nodes.append(CenterlineNode(float(x), float(y), float(r)))
        return len(nodes) - 1

    def add_edge(i, j, r):
        p0 = np.array([nodes[i].x, nodes[i].y])
        p1 = np.array([nodes[j].x, nodes[j].y])
        n = max(8, int(np.hypot(*(p1 - p0)) / 2))
        t = np.linspace(0.0, 1.0, n)[:, None]
        pts = p0 + t * (p1 - p0)
        edges.append(CenterlineEdge(u=i, v=j, points=pts,
                                    radii=np.full(n, float(r))))

    def grow(node_idx, direction, radius, depth):
        length = float(rng.uniform(10.0, 14.0)) * radius
        end = np.array([nodes[node_idx].x, nodes[node_idx].y]) + direction * length
        child = add_node(end[0], end[1], radius)
        add_edge(node_idx, child, radius)
        if depth >= max_depth or rng.random() < 0.25:
            return
        spread = float(rng.uniform(28.0, 55.0))
        for sign in (-1.0, 1.0):
            ang = math.radians(sign * spread + float(rng.uniform(-5.0, 5.0)))
            rot = np.array([[math.cos(ang), -math.sin(ang)],
                            [math.sin(ang), math.cos(ang)]])
            child_r = radius * float(rng.uniform(0.68, 0.85))
            grow(child, rot @ direction, child_r, depth + 1)

    r0 = float(rng.uniform(8.0, 14.0))
    root = add_node(500.0, 950.0, r0)
    grow(root, np.array([0.0, -1.0]), r0, 1)

    graph = CenterlineGraph(nodes=nodes, edges=edges, width=1024, height=1024)
    leaves = [i for i in graph.endpoints() if i != root]
    return graph, [root], leaves
