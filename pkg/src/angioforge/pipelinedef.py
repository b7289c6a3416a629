"""The canonical 16-step refinement sequence.

Each step is a named, replayable image transform in one of the five
workflow stages. The local backend realizes a step by running its
op chain; the remote backend submits the step's prompt instead.
Step 16 re-exports the step-14 silhouette (the flow overlay of step 15 is
a terminal visualization branch, not an input to the final projection).
"""

from dataclasses import dataclass, field
from enum import Enum

from . import raster


class Stage(Enum):
    VASCULAR_ANALYSIS = "VascularAnalysis"
    PROJECTION_REFINEMENT = "ProjectionRefinement"
    VASCULAR_OPTIMIZATION = "VascularOptimization"
    QUALITY_OPTIMIZATION = "QualityOptimization"
    FLOW_VISUALIZATION = "FlowVisualization"


@dataclass(frozen=True)
class StepSpec:
    index: int
    name: str
    stage: Stage
    default_prompt: str
    local_op_chain: tuple
    output_kind: str = raster.PROJECTION
    input_from: int | None = None  # defaults to the previous step


@dataclass(frozen=True)
class PipelineDefinition:
    version: str
    steps: tuple

    def __post_init__(self):
        if len(self.steps) != 16:
            raise ValueError(f"pipeline must have 16 steps, got {len(self.steps)}")
        for i, s in enumerate(self.steps, start=1):
            if s.index != i:
                raise ValueError(f"step indices must run 1..16; slot {i} has {s.index}")
            if not s.default_prompt:
                raise ValueError(f"step {i} has an empty default prompt")
            if not s.local_op_chain:
                raise ValueError(f"step {i} has an empty op chain")
            if s.input_from is not None and not 1 <= s.input_from < s.index:
                raise ValueError(f"step {i} cannot take input from step {s.input_from}")

    def step(self, index: int) -> StepSpec:
        return self.steps[index - 1]


PIPELINE_VERSION = "fontan-16step/1"

PIPELINE = PipelineDefinition(version=PIPELINE_VERSION, steps=(
    StepSpec(1, "grayscale-normalization", Stage.VASCULAR_ANALYSIS,
             "Convert the angiogram to clean grayscale and stretch the "
             "intensity range to full contrast.",
             ("to_gray", "normalize")),
    StepSpec(2, "denoise", Stage.VASCULAR_ANALYSIS,
             "Remove speckle and quantum noise while preserving vessel edges.",
             ("denoise_median",)),
    StepSpec(3, "polarity-correction", Stage.VASCULAR_ANALYSIS,
             "Render the contrast-filled lumen bright on a dark background.",
             ("ensure_bright",)),
    StepSpec(4, "adaptive-contrast", Stage.VASCULAR_ANALYSIS,
             "Enhance local contrast so faintly opacified vessel segments "
             "become distinct from background.",
             ("enhance_contrast",)),
    StepSpec(5, "global-segmentation", Stage.PROJECTION_REFINEMENT,
             "Segment the vascular tree from the background.",
             ("otsu_segment",), output_kind=raster.MASK),
    StepSpec(6, "artifact-removal", Stage.PROJECTION_REFINEMENT,
             "Remove catheter fragments, wires and isolated specks that are "
             "not part of the vascular tree.",
             ("remove_small_components",), output_kind=raster.MASK),
    StepSpec(7, "hole-filling", Stage.PROJECTION_REFINEMENT,
             "Fill interior dropouts so each vessel reads as a solid lumen.",
             ("fill_holes",), output_kind=raster.MASK),
    StepSpec(8, "boundary-smoothing", Stage.VASCULAR_OPTIMIZATION,
             "Smooth serrated vessel boundaries without changing caliber.",
             ("smooth_boundary",), output_kind=raster.MASK),
    StepSpec(9, "continuity-closing", Stage.VASCULAR_OPTIMIZATION,
             "Bridge small gaps so every vessel segment is continuous.",
             ("close_gaps",), output_kind=raster.MASK),
    StepSpec(10, "proportion-audit", Stage.VASCULAR_OPTIMIZATION,
             "Render the current silhouette for a geometric-proportion audit "
             "against the source angiogram.",
             ("audit_render",), output_kind=raster.MASK),
    StepSpec(11, "background-suppression", Stage.QUALITY_OPTIMIZATION,
             "Suppress residual background structure outside the vessels.",
             ("suppress_background",), output_kind=raster.MASK),
    StepSpec(12, "edge-sharpening", Stage.QUALITY_OPTIMIZATION,
             "Sharpen vessel edges to a crisp binary boundary.",
             ("majority_smooth",), output_kind=raster.MASK),
    StepSpec(13, "segmentation-refinement", Stage.QUALITY_OPTIMIZATION,
             "Refine the segmentation: re-fill lumen dropouts and drop "
             "remaining debris.",
             ("fill_holes", "remove_small_components"), output_kind=raster.MASK),
    StepSpec(14, "silhouette-extraction", Stage.QUALITY_OPTIMIZATION,
             "Keep only the connected vascular silhouette of interest.",
             ("largest_component",), output_kind=raster.MASK),
    StepSpec(15, "flow-visualization", Stage.FLOW_VISUALIZATION,
             "Overlay velocity-coded virtual flow streamlines with "
             "stagnation zones marked.",
             ("flow_overlay",), output_kind=raster.FLOW_OVERLAY),
    StepSpec(16, "final-projection-export", Stage.QUALITY_OPTIMIZATION,
             "Export the final optimized binary projection for 3D conversion.",
             ("export_projection",), output_kind=raster.PROJECTION,
             input_from=14),
))
