"""Bit-exact STL reading and writing, binary and ascii.

Binary layout: 80-byte zero-padded header, little-endian uint32 triangle
count, then 50 bytes per triangle (normal + 3 vertices as float32 triples,
2-byte zero attribute). Vertices are canonically cast to float32 before
emission so write -> read -> write is byte-identical.
"""

import re
import struct
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMesh, MalformedStl

BINARY = "Binary"
ASCII = "Ascii"

_HEADER_SIGNATURE = b"angioforge tube mesh"

_TRI_DTYPE = np.dtype([
    ("normal", "<f4", (3,)),
    ("verts", "<f4", (3, 3)),
    ("attr", "<u2"),
])
assert _TRI_DTYPE.itemsize == 50


@dataclass
class TriMesh:
    vertices: np.ndarray   # (V, 3) float64, millimeters
    triangles: np.ndarray  # (T, 3) int, CCW outward winding

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)


def _facet_normals(verts32: np.ndarray) -> np.ndarray:
    """Unit normals from winding, computed on the float32-cast vertices so
    repeated writes agree bytewise."""
    a = verts32[:, 0].astype(np.float64)
    b = verts32[:, 1].astype(np.float64)
    c = verts32[:, 2].astype(np.float64)
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n, axis=1)
    safe = norm > 0
    n[safe] /= norm[safe, None]
    n[~safe] = 0.0
    return n.astype(np.float32)


def write_stl(mesh: TriMesh, fmt: str = BINARY) -> bytes:
    if mesh.n_triangles == 0:
        raise EmptyMesh("mesh has no triangles")
    verts32 = mesh.vertices.astype(np.float32)[mesh.triangles]  # (T, 3, 3)
    normals = _facet_normals(verts32)
    if fmt == BINARY:
        rec = np.zeros(len(verts32), dtype=_TRI_DTYPE)
        rec["normal"] = normals
        rec["verts"] = verts32
        header = _HEADER_SIGNATURE.ljust(80, b"\x00")
        return header + struct.pack("<I", len(rec)) + rec.tobytes()
    if fmt == ASCII:
        lines = ["solid angioforge"]
        for n, tri in zip(normals, verts32):
            lines.append(f"  facet normal {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}")
            lines.append("    outer loop")
            for v in tri:
                lines.append(f"      vertex {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
            lines.append("    endloop")
            lines.append("  endfacet")
        lines.append("endsolid angioforge")
        return ("\n".join(lines) + "\n").encode("ascii")
    raise ValueError(f"unknown STL format {fmt!r}")


def _dedup(tri_verts: np.ndarray) -> TriMesh:
    """Rebuild shared topology by exact bit equality of coordinates."""
    flat = np.ascontiguousarray(tri_verts.reshape(-1, 3), dtype=np.float32)
    index = {}
    vert_list = []
    tri_flat = np.empty(len(flat), dtype=np.int64)
    for i, row in enumerate(flat):
        key = row.tobytes()
        j = index.get(key)
        if j is None:
            j = len(vert_list)
            index[key] = j
            vert_list.append(row)
        tri_flat[i] = j
    vertices = np.array(vert_list, dtype=np.float64)
    triangles = tri_flat.reshape(-1, 3)
    return TriMesh(vertices=vertices, triangles=triangles)


_ASCII_FLOAT = r"[-+0-9.eE]+"
_FACET_RE = re.compile(
    rf"facet\s+normal\s+{_ASCII_FLOAT}\s+{_ASCII_FLOAT}\s+{_ASCII_FLOAT}\s+"
    rf"outer\s+loop\s+"
    rf"vertex\s+({_ASCII_FLOAT})\s+({_ASCII_FLOAT})\s+({_ASCII_FLOAT})\s+"
    rf"vertex\s+({_ASCII_FLOAT})\s+({_ASCII_FLOAT})\s+({_ASCII_FLOAT})\s+"
    rf"vertex\s+({_ASCII_FLOAT})\s+({_ASCII_FLOAT})\s+({_ASCII_FLOAT})\s+"
    rf"endloop\s+endfacet")


def read_stl(data: bytes) -> TriMesh:
    """Parse binary or ascii STL, auto-detected."""
    if len(data) >= 84:
        count = struct.unpack_from("<I", data, 80)[0]
        if len(data) == 84 + 50 * count and count > 0:
            rec = np.frombuffer(data, dtype=_TRI_DTYPE, count=count, offset=84)
            return _dedup(rec["verts"])
    if data[:5] == b"solid":
        try:
            text = data.decode("ascii")
        except UnicodeDecodeError as exc:
            raise MalformedStl("ascii STL with non-ascii bytes") from exc
        facets = _FACET_RE.findall(text)
        if not facets:
            raise MalformedStl("no facets parsed from ascii STL")
        n_open = text.count("facet normal")
        n_close = text.count("endfacet")
        if len(facets) != n_open or n_open != n_close:
            raise MalformedStl("ascii STL facet grammar violation")
        try:
            tri_verts = np.array(facets, dtype=np.float64).reshape(-1, 3, 3)
        except ValueError as exc:
            raise MalformedStl("bad vertex number in ascii STL") from exc
        return _dedup(tri_verts.astype(np.float32))
    if len(data) >= 84:
        raise MalformedStl(
            f"binary STL size {len(data)} does not match triangle count "
            f"{struct.unpack_from('<I', data, 80)[0]}")
    raise MalformedStl("input too short for STL")
