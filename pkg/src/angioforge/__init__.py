"""angioforge: human-in-the-loop angiogram refinement pipeline.

Transforms a single 2D contrast angiogram through a 16-step iterative
sequence into an optimized binary vessel projection, a velocity-coded
virtual flow visualization with stagnation-zone detection, and a
watertight STL tube mesh, with pluggable image-edit backends and a full
audit trail.
"""

__version__ = "0.1.0"
