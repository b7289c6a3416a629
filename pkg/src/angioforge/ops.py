"""Named op registry binding step op chains to the pure transforms.

Every op maps a uint8 array (grayscale, mask-coded {0,255}, or RGB) to a
uint8 array of identical dimensions, parameterized only by SessionConfig,
so the local backend stays referentially transparent.
"""

import numpy as np

from . import flowviz, imageops, raster
from .config import SessionConfig


def _as_mask(arr: np.ndarray) -> np.ndarray:
    return raster.image_to_mask(arr)


def _op_to_gray(arr, cfg):
    return imageops.to_gray(arr)


def _op_normalize(arr, cfg):
    return imageops.normalize(imageops.to_gray(arr))


def _op_denoise(arr, cfg):
    return imageops.denoise_median(imageops.to_gray(arr))


def _op_enhance(arr, cfg):
    return imageops.enhance_contrast(imageops.to_gray(arr),
                                     tile=cfg.clahe_tile, clip=cfg.clahe_clip)


def _op_ensure_bright(arr, cfg):
    return imageops.ensure_bright(imageops.to_gray(arr))


def _op_otsu(arr, cfg):
    _, mask = imageops.otsu_threshold(imageops.to_gray(arr))
    return raster.mask_to_image(mask)


def _op_remove_small(arr, cfg):
    return raster.mask_to_image(
        imageops.remove_small_components(_as_mask(arr), cfg.min_area))


def _op_fill_holes(arr, cfg):
    return raster.mask_to_image(imageops.fill_holes(_as_mask(arr)))


def _op_smooth(arr, cfg):
    return raster.mask_to_image(
        imageops.smooth_boundary(_as_mask(arr), cfg.smooth_radius))


def _op_close(arr, cfg):
    return raster.mask_to_image(
        imageops.close_gaps(_as_mask(arr), cfg.close_radius))


def _op_audit(arr, cfg):
    # canonical 0/255 silhouette render for visual proportion review
    return raster.mask_to_image(_as_mask(arr))


def _op_suppress_background(arr, cfg):
    return raster.mask_to_image(
        imageops.remove_small_components(_as_mask(arr), 4 * cfg.min_area))


def _op_majority(arr, cfg):
    return raster.mask_to_image(imageops.majority_smooth(_as_mask(arr)))


def _op_largest(arr, cfg):
    return raster.mask_to_image(imageops.largest_component(_as_mask(arr)))


def _op_flow_overlay(arr, cfg):
    mask = _as_mask(arr)
    graph = centerline_graph(mask, cfg)
    inlets, outlets = pick_endpoints(graph, cfg)
    field = flowviz.assign_flow(graph, inlets, outlets)
    report = flowviz.detect_stagnation(field)
    base = raster.mask_to_image(mask)
    return flowviz.render_streamlines(base, field, report)


def _op_export(arr, cfg):
    return raster.mask_to_image(_as_mask(arr))


def centerline_graph(mask: np.ndarray, cfg: SessionConfig):
    dist = flowviz.distance_transform(mask)
    skel = flowviz.skeletonize(mask)
    return flowviz.build_centerline_graph(skel, dist, spur_min=cfg.spur_min)


def pick_endpoints(graph, cfg: SessionConfig):
    if cfg.inlets:
        inlets = list(cfg.inlets)
        outlets = list(cfg.outlets) if cfg.outlets else [
            e for e in graph.endpoints() if e not in inlets]
        return inlets, outlets
    return flowviz.default_endpoints(graph)


OP_REGISTRY = {
    "to_gray": _op_to_gray,
    "normalize": _op_normalize,
    "denoise_median": _op_denoise,
    "enhance_contrast": _op_enhance,
    "ensure_bright": _op_ensure_bright,
    "otsu_segment": _op_otsu,
    "remove_small_components": _op_remove_small,
    "fill_holes": _op_fill_holes,
    "smooth_boundary": _op_smooth,
    "close_gaps": _op_close,
    "audit_render": _op_audit,
    "suppress_background": _op_suppress_background,
    "majority_smooth": _op_majority,
    "largest_component": _op_largest,
    "flow_overlay": _op_flow_overlay,
    "export_projection": _op_export,
}


def run_chain(chain, arr: np.ndarray, cfg: SessionConfig) -> np.ndarray:
    for name in chain:
        arr = OP_REGISTRY[name](arr, cfg)
    return arr
