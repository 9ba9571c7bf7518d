"""Kernel backend selection.

The JIT backend is the default.  Set ``GEOFORGE_BACKEND=numpy`` to force
the pure-numpy fallback (useful where numba is unavailable or for
A/B benchmarking); any other value, or an import failure of numba,
falls through accordingly.
"""

import os
import warnings

_requested = os.environ.get("GEOFORGE_BACKEND", "").strip().lower()

if _requested == "numpy":
    from . import numpy_backend as _impl
elif _requested in ("", "numba"):
    try:
        from . import numba_backend as _impl
    except ImportError:
        if _requested == "numba":
            raise
        warnings.warn("numba unavailable, using pure-numpy kernels")
        from . import numpy_backend as _impl
else:
    raise ValueError(
        f"unknown GEOFORGE_BACKEND={_requested!r} (expected 'numba' or 'numpy')")

BACKEND_NAME = _impl.BACKEND_NAME

closest_point_batch = _impl.closest_point_batch
udf_grid = _impl.udf_grid
ray_hit_triangle = _impl.ray_hit_triangle
visibility_labels = _impl.visibility_labels
visibility_labels_points = _impl.visibility_labels_points
flood_reached = _impl.flood_reached
mc_classify = _impl.mc_classify
mc_emit = _impl.mc_emit
fps_indices = _impl.fps_indices
surface_voxel_mask = _impl.surface_voxel_mask
