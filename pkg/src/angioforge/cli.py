"""Command-line batch runner and inspection tools.

Exit codes for `run`: 0 success, 2 input error, 3 backend failure, 4 mesh
validation failure. `validate` exits 0 only for a CFD-ready mesh, 1 for a
well-formed but invalid mesh, 2 for a malformed file.
"""

import json
import logging
import shutil
import sys
from datetime import datetime
from pathlib import Path

import click

from . import session as sess
from .backends import make_backend
from .config import LOCAL, MOCK, REMOTE, BackendConfig, SessionConfig
from .errors import (AngioforgeError, BackendFailure, DegenerateCenterline,
                     DegenerateSkeleton, EmptyMask, EmptyMesh, MalformedStl,
                     ManifestCorrupt, MeshValidationFailure, NoInlet,
                     SelfIntersectingInput, UnreachableOutlet)
from .mesh3d import validate_mesh
from .outputs import OUTPUT_NAMES, compute_outputs
from .phantom import fontan_phantom
from .raster import encode_png
from .stlio import read_stl

EXIT_INPUT = 2
EXIT_BACKEND = 3
EXIT_MESH = 4

# failures of geometry extraction or mesh generation, as opposed to bad input
GEOMETRY_ERRORS = (DegenerateSkeleton, DegenerateCenterline, EmptyMask,
                   EmptyMesh, NoInlet, UnreachableOutlet,
                   SelfIntersectingInput, MeshValidationFailure)

log = logging.getLogger("angioforge")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging to stderr.")
def main(verbose):
    logging.basicConfig(stream=sys.stderr,
                        level=logging.DEBUG if verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")


def _session_config(backend, pixel_pitch, n_sides, inlets, outlets):
    def parse_ids(text):
        return [int(t) for t in text.split(",")] if text else None
    return SessionConfig(
        backend=BackendConfig(kind=backend),
        pixel_pitch=pixel_pitch, n_sides=n_sides,
        inlets=parse_ids(inlets), outlets=parse_ids(outlets))


@main.command()
@click.argument("input_path", type=click.Path(path_type=Path))
@click.option("-o", "--output", "out_dir", required=True,
              type=click.Path(path_type=Path), help="Output directory.")
@click.option("--backend", type=click.Choice([LOCAL, MOCK]), default=LOCAL,
              show_default=True)
@click.option("--pixel-pitch", default=0.25, show_default=True,
              help="Millimeters per pixel.")
@click.option("--n-sides", default=16, show_default=True,
              help="Polygon sides for tube lofting.")
@click.option("--inlets", default=None, help="Inlet node ids, comma separated.")
@click.option("--outlets", default=None, help="Outlet node ids, comma separated.")
def run(input_path, out_dir, backend, pixel_pitch, n_sides, inlets, outlets):
    """Run the full 16-step pipeline non-interactively (auto-accept)."""
    try:
        data = input_path.read_bytes()
    except OSError as exc:
        click.echo(f"cannot read input: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    out_dir.mkdir(parents=True, exist_ok=True)
    store = sess.SessionStore(out_dir / "session-data")
    config = _session_config(backend, pixel_pitch, n_sides, inlets, outlets)
    try:
        session = sess.create_session(store, data, config)
    except AngioforgeError as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    be = make_backend(config.backend)
    try:
        for _ in range(16):
            record = sess.advance_step(store, session, be)
            sess.accept_step(store, session, record.step_index, record.iteration)
            log.info("step %2d %-28s %s", record.step_index,
                     session.pipeline.step(record.step_index).name,
                     record.output_hash[:12])
    except BackendFailure as exc:
        click.echo(f"backend failure: {exc}", err=True)
        sys.exit(EXIT_BACKEND)
    except GEOMETRY_ERRORS as exc:
        click.echo(f"mesh/finalization failure: {exc}", err=True)
        sys.exit(EXIT_MESH)
    except AngioforgeError as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    try:
        results = compute_outputs(store, session)
    except AngioforgeError as exc:
        click.echo(f"mesh/finalization failure: {exc}", err=True)
        sys.exit(EXIT_MESH)
    for name in OUTPUT_NAMES:
        (out_dir / name).write_bytes(results[name])
    shutil.copyfile(store.manifest_path(session.id), out_dir / "manifest.json")
    click.echo(f"session {session.id}: 16 steps complete, outputs in {out_dir}")


@main.command()
@click.argument("manifest", type=click.Path(path_type=Path))
def inspect(manifest):
    """Print the processing history recorded in a session manifest."""
    store = sess.SessionStore(manifest.parent.parent)
    try:
        session = store.load_manifest(manifest, verify_artifacts=False)
    except ManifestCorrupt as exc:
        click.echo(f"manifest corrupt: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    click.echo(f"session {session.id}  status {session.status}  "
               f"cursor {session.cursor}")
    header = f"{'step':>4} {'iter':>4} {'state':<9} {'secs':>6} " \
             f"{'output hash':<16} prompt"
    click.echo(header)
    for r in session.records:
        t0 = datetime.fromisoformat(r.started_at)
        t1 = datetime.fromisoformat(r.finished_at)
        dur = (t1 - t0).total_seconds()
        prompt = r.prompt_used if len(r.prompt_used) <= 48 \
            else r.prompt_used[:45] + "..."
        click.echo(f"{r.step_index:>4} {r.iteration:>4} {r.state:<9} "
                   f"{dur:>6.2f} {r.output_hash[:16]:<16} {prompt}")


@main.command()
@click.argument("stl_path", type=click.Path(path_type=Path))
def validate(stl_path):
    """Validate an STL file for CFD readiness."""
    try:
        data = stl_path.read_bytes()
    except OSError as exc:
        click.echo(f"cannot read file: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    try:
        mesh = read_stl(data)
    except MalformedStl as exc:
        click.echo(f"malformed STL: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    report = validate_mesh(mesh)
    click.echo(json.dumps(report.to_dict(), indent=2))
    ok = (report.watertight and report.edge_manifold
          and report.consistently_oriented)
    sys.exit(0 if ok else 1)


@main.command()
@click.argument("out_path", type=click.Path(path_type=Path))
@click.option("--size", default=1024, show_default=True)
def phantom(out_path, size):
    """Write the synthetic Fontan phantom angiogram as PNG."""
    out_path.write_bytes(encode_png(fontan_phantom(size)))
    click.echo(f"wrote {size}x{size} phantom to {out_path}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--store", "store_root", default="./angioforge-store",
              show_default=True, type=click.Path(path_type=Path))
@click.option("--backend", type=click.Choice([LOCAL, MOCK, REMOTE]),
              default=LOCAL, show_default=True)
@click.option("--endpoint-url", default=None,
              help="Remote backend endpoint URL.")
@click.option("--credential-env", default="ANGIOFORGE_API_KEY",
              show_default=True, help="Env var holding the API key.")
@click.option("--pixel-pitch", default=0.25, show_default=True)
@click.option("--n-sides", default=16, show_default=True)
@click.option("--ui-dir", default=None, type=click.Path(path_type=Path),
              help="Static web UI bundle to serve under /ui.")
def serve(host, port, store_root, backend, endpoint_url, credential_env,
          pixel_pitch, n_sides, ui_dir):
    """Serve the HTTP API (and optionally the web UI)."""
    import uvicorn

    from .service import create_app
    backend_config = BackendConfig(kind=backend, endpoint_url=endpoint_url,
                                   credential_source=credential_env)
    defaults = SessionConfig(backend=backend_config, pixel_pitch=pixel_pitch,
                             n_sides=n_sides)
    if ui_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = bundled if bundled.is_dir() else None
    app = create_app(store_root, backend_config, defaults, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
