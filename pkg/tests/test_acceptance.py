"""End-to-end acceptance criteria.

One test per criterion, each stating its tolerance explicitly. These are
deliberately redundant with the per-module suites: they are the release
gate, run against the public API only.
"""

import json
import math
import struct
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from angioforge.backends import RemoteBackend
from angioforge.config import BackendConfig, SessionConfig
from angioforge.errors import BackendUnavailable, MalformedStl
from angioforge.flowviz import (assign_flow, build_centerline_graph,
                                detect_stagnation, distance_transform,
                                skeletonize)
from angioforge.mesh3d import loft_tube, validate_mesh
from angioforge.outputs import OUTPUT_NAMES, compute_outputs
from angioforge.phantom import (bulge_tube_mask, fontan_phantom,
                                random_tree_graph, straight_tube_graph)
from angioforge.raster import encode_png
from angioforge.service import create_app
from angioforge.session import (COMPLETE, SessionStore, accept_step,
                                advance_step, create_session, replay)
from angioforge.stlio import BINARY, TriMesh, read_stl, write_stl

from test_backends import _request, _remote, stub_factory  # noqa: F401
from test_imageops import _otsu_brute_force


def _complete_session(store, png, config):
    from angioforge.backends import make_backend
    session = create_session(store, png, config)
    backend = make_backend(config.backend)
    while session.status != COMPLETE:
        rec = advance_step(store, session, backend)
        accept_step(store, session, rec.step_index, rec.iteration)
    return session


def test_16_step_completion_under_60s(tmp_path):
    """Batch run on the 1024x1024 Fontan phantom: exactly 16 accepted
    steps, all four final artifacts, wall clock < 60 s."""
    png = encode_png(fontan_phantom(1024))
    store = SessionStore(tmp_path / "store")
    config = SessionConfig(backend=BackendConfig(kind="local"))
    t0 = time.monotonic()
    session = _complete_session(store, png, config)
    results = compute_outputs(store, session)
    elapsed = time.monotonic() - t0
    accepted = [r for r in session.records if r.state == "Accepted"]
    assert len(accepted) == 16
    assert sorted(r.step_index for r in accepted) == list(range(1, 17))
    assert set(results) >= set(OUTPUT_NAMES)
    assert all(len(results[name]) > 0 for name in OUTPUT_NAMES)
    assert elapsed < 60.0, f"pipeline took {elapsed:.1f} s"


def test_segmentation_oracle():
    """otsu_threshold agrees with exhaustive 256-threshold brute force on
    200 random 64x64 images: 100% agreement required."""
    from angioforge.imageops import otsu_threshold
    rng = np.random.default_rng(1234)
    for _ in range(200):
        img = rng.integers(0, 256, size=(64, 64), dtype=np.uint8)
        t, _ = otsu_threshold(img)
        assert t == _otsu_brute_force(img)


def test_conservation_suite():
    """50 random trees: junction inflow = outflow within 1e-9 relative;
    every inlet-to-outlet cut carries Q = 1 +/- 1e-9."""
    rng = np.random.default_rng(777)
    for _ in range(50):
        graph, inlets, outlets = random_tree_graph(rng)
        field = assign_flow(graph, inlets, outlets)
        into, out_of = {}, {}
        for ef in field.edges:
            out_of[ef.src] = out_of.get(ef.src, 0.0) + ef.Q
            into[ef.dst] = into.get(ef.dst, 0.0) + ef.Q
        for node in set(into) & set(out_of):
            assert abs(into[node] - out_of[node]) <= 1e-9 * into[node]
        assert abs(sum(out_of.get(i, 0.0) for i in inlets) - 1.0) <= 1e-9
        assert abs(sum(into.get(o, 0.0) for o in outlets) - 1.0) <= 1e-9


def test_analytic_velocity():
    """Constant-radius tube: v = 1/pi everywhere to 1e-12. Radius-halving
    constriction: x4 velocity jump to 1e-9."""
    from angioforge.flowviz import CenterlineEdge, CenterlineGraph, \
        CenterlineNode
    tube = straight_tube_graph(radius=1.0)
    v = assign_flow(tube, [0], [1]).all_velocities()
    assert np.abs(v - 1.0 / math.pi).max() <= 1e-12

    pts1 = np.column_stack([np.linspace(0, 100, 51), np.zeros(51)])
    pts2 = np.column_stack([np.linspace(100, 200, 51), np.zeros(51)])
    graph = CenterlineGraph(
        nodes=[CenterlineNode(0, 0, 2), CenterlineNode(100, 0, 2),
               CenterlineNode(200, 0, 1)],
        edges=[CenterlineEdge(0, 1, pts1, np.full(51, 2.0)),
               CenterlineEdge(1, 2, pts2, np.full(51, 1.0))],
        width=256, height=256)
    field = assign_flow(graph, [0], [2])
    v_wide = next(e for e in field.edges if e.edge == 0).v.mean()
    v_narrow = next(e for e in field.edges if e.edge == 1).v.mean()
    assert abs(v_narrow / v_wide - 4.0) <= 1e-9


def test_stagnation_localization():
    """Tube with radius x2 over the central 20%: exactly one stagnation
    zone, centroid inside the pouch footprint."""
    mask = bulge_tube_mask(bulge_factor=2.0, bulge_frac=0.2)
    graph = build_centerline_graph(skeletonize(mask),
                                   distance_transform(mask))
    eps = graph.endpoints()
    left = min(eps, key=lambda i: graph.nodes[i].x)
    right = max(eps, key=lambda i: graph.nodes[i].x)
    report = detect_stagnation(assign_flow(graph, [left], [right]))
    assert len(report.zones) == 1
    cx, cy = report.zones[0].centroid
    h, w = mask.shape
    assert mask[int(round(cy)), int(round(cx))]
    # pouch spans the central 20% of the tube length
    assert abs(cx - w / 2) <= 0.15 * w


def test_mesh_validity():
    """50 random graphs loft to watertight, edge-manifold, consistently
    oriented, positive-volume meshes with V - E + F = 2; straight-tube
    volume matches the prism formula to 1e-9 relative and the cylinder
    within 0.2% at n_sides = 64."""
    rng = np.random.default_rng(31337)
    for _ in range(50):
        graph, _, _ = random_tree_graph(rng)
        r = validate_mesh(loft_tube(graph, n_sides=12))
        assert r.watertight and r.edge_manifold and r.consistently_oriented
        assert r.euler_characteristic == 2
        assert r.signed_volume > 0

    radius, length, pitch = 10.0, 100.0, 0.25
    for n, tol_kind in ((16, "prism"), (64, "cylinder")):
        mesh = loft_tube(straight_tube_graph(length=length, radius=radius),
                         n_sides=n, pixel_pitch=pitch)
        vol = validate_mesh(mesh).signed_volume
        r_mm, l_mm = radius * pitch, length * pitch
        prism = 0.5 * n * math.sin(2 * math.pi / n) * r_mm ** 2 * l_mm
        assert abs(vol - prism) <= 1e-9 * prism
        if tol_kind == "cylinder":
            cylinder = math.pi * r_mm ** 2 * l_mm
            assert abs(vol - cylinder) / cylinder < 0.002


def test_stl_bit_exactness():
    """Binary write-read-write is byte-identical; one triangle is exactly
    134 bytes; malformed input raises MalformedStl."""
    mesh = loft_tube(straight_tube_graph(), n_sides=12)
    data = write_stl(mesh, fmt=BINARY)
    assert write_stl(read_stl(data), fmt=BINARY) == data

    tri = TriMesh(vertices=np.eye(3), triangles=np.array([[0, 1, 2]]))
    assert len(write_stl(tri, fmt=BINARY)) == 134

    with pytest.raises(MalformedStl):
        read_stl(b"bogus" * 40)
    with pytest.raises(MalformedStl):
        read_stl(data[:-7])
    bad_count = data[:80] + struct.pack("<I", 999) + data[84:]
    with pytest.raises(MalformedStl):
        read_stl(bad_count)


def test_replay_determinism(tmp_path):
    """Replaying a completed local-backend session reproduces all 16
    stored output hashes exactly."""
    png = encode_png(fontan_phantom(512))
    store = SessionStore(tmp_path / "store")
    config = SessionConfig(backend=BackendConfig(kind="local"))
    session = _complete_session(store, png, config)
    hashes = replay(store, store.manifest_path(session.id))
    expected = [session.accepted_record(i).output_hash for i in range(1, 17)]
    assert hashes == expected


def test_backend_resilience(stub_factory):  # noqa: F811
    """429-then-200 succeeds with exactly one retry; persistent 500 with
    max_retries 3 raises BackendUnavailable after 4 attempts with
    exponentially growing waits."""
    ok = stub_factory([429, 200])
    _remote(ok.url).edit_image(_request())
    assert ok.server.request_count == 2

    down = stub_factory([500])
    with pytest.raises(BackendUnavailable) as exc_info:
        _remote(down.url, max_retries=3, backoff=40).edit_image(_request())
    assert down.server.request_count == 4
    assert exc_info.value.attempts == 4
    t = down.server.timestamps
    gaps = [t[i + 1] - t[i] for i in range(3)]
    assert gaps[0] >= 0.040 and gaps[1] >= 0.080 and gaps[2] >= 0.160


def test_api_contract(tmp_path):
    """Scripted client exercise against the mock backend: create (201),
    16x advance/accept (200), one regenerate with a custom prompt,
    artifact download, documented error codes."""
    app = create_app(tmp_path / "store",
                     backend_config=BackendConfig(kind="mock"))
    png = encode_png(fontan_phantom(256))
    with TestClient(app) as client:
        created = client.post(
            "/sessions", files={"image": ("a.png", png, "image/png")})
        assert created.status_code == 201
        sid = created.json()["id"]

        for step in range(1, 17):
            adv = client.post(f"/sessions/{sid}/advance")
            assert adv.status_code == 200
            iteration = adv.json()["iteration"]
            if step == 7:
                reg = client.post(
                    f"/sessions/{sid}/steps/7/regenerate",
                    json={"prompt": "fill the holes more aggressively"})
                assert reg.status_code == 200
                assert reg.json()["prompt_used"] == \
                    "fill the holes more aggressively"
                iteration = reg.json()["iteration"]
            acc = client.post(
                f"/sessions/{sid}/steps/{step}/iterations/{iteration}/accept")
            assert acc.status_code == 200

        summary = client.get(f"/sessions/{sid}").json()
        assert summary["status"] == "Complete"

        records = client.get(f"/sessions/{sid}/history").json()["records"]
        art_hash = records[0]["output_hash"]
        art = client.get(f"/sessions/{sid}/artifacts/{art_hash}")
        assert art.status_code == 200
        assert art.content[:4] == b"\x89PNG"

        assert client.get("/sessions/missing").status_code == 404
        assert client.post(f"/sessions/{sid}/advance").status_code == 409
