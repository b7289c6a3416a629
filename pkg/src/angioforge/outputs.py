"""Final artifact production for a completed session.

projection.png  - accepted output of the final export step
flow.png        - accepted output of the flow-visualization step
report.json     - stagnation zones + mesh validation summary
model.stl       - watertight tube mesh lofted from the final silhouette
"""

import json

from . import flowviz, ops, raster
from .errors import MeshValidationFailure, RecordNotFound
from .mesh3d import loft_tube, validate_mesh
from .session import COMPLETE, Session, SessionStore
from .stlio import BINARY, write_stl

OUTPUT_NAMES = ("projection.png", "flow.png", "report.json", "model.stl")

_SILHOUETTE_STEP = 14
_FLOW_STEP = 15
_EXPORT_STEP = 16


def outputs_ready(session: Session) -> bool:
    return session.status == COMPLETE


def compute_outputs(store: SessionStore, session: Session) -> dict:
    """Produce (and cache on disk) the four final artifacts."""
    if not outputs_ready(session):
        raise RecordNotFound("session is not complete; no final outputs yet")
    out_dir = store.outputs_dir(session.id)
    if all((out_dir / name).exists() for name in OUTPUT_NAMES):
        return {name: (out_dir / name).read_bytes() for name in OUTPUT_NAMES}

    cfg = session.config
    proj = store.get_artifact(
        session.id, session.accepted_record(_EXPORT_STEP).output_hash)
    flow = store.get_artifact(
        session.id, session.accepted_record(_FLOW_STEP).output_hash)
    mask_bytes = store.get_artifact(
        session.id, session.accepted_record(_SILHOUETTE_STEP).output_hash)
    mask = raster.image_to_mask(raster.decode_image(mask_bytes))

    graph = ops.centerline_graph(mask, cfg)
    inlets, outlets = ops.pick_endpoints(graph, cfg)
    field = flowviz.assign_flow(graph, inlets, outlets)
    stagnation = flowviz.detect_stagnation(field)

    mesh = loft_tube(graph, n_sides=cfg.n_sides, pixel_pitch=cfg.pixel_pitch)
    validation = validate_mesh(mesh)
    if not validation.cfd_ready:
        raise MeshValidationFailure(
            "lofted mesh failed CFD-readiness validation", report=validation)
    stl = write_stl(mesh, BINARY)

    report = json.dumps({
        "session": session.id,
        "inlets": inlets,
        "outlets": outlets,
        "stagnation": stagnation.to_dict(),
        "mesh_validation": validation.to_dict(),
    }, indent=2).encode()

    results = {
        "projection.png": proj,
        "flow.png": flow,
        "report.json": report,
        "model.stl": stl,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, data in results.items():
        (out_dir / name).write_bytes(data)
    return results
