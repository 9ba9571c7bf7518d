"""geoforge: watertight occupancy remeshing and dataset payloads for
3D generative model training."""

from .bvh import TriangleBVH, any_ray_escape, build_bvh, closest_point
from .grids import LabelGrid, ScalarGrid, dump_grid, load_grid
from .mcubes import marching_cubes
from .mesh import (GeometryError, NormalizationTransform, TriangleMesh,
                   is_watertight, mesh_volume, normalize_mesh)
from .meshio import load_mesh, read_mesh, save_mesh
from .metrics import (MetricReport, chamfer, compare_meshes, emd_exact,
                      f_score, volume_conservation, voxel_iou)
from .pipeline import Manifest, parse_manifest, run, validate
from .remesh import (RemeshConfig, RemeshResult, compute_udf_grid,
                     compute_visibility_labels, exterior_flood_fill,
                     fibonacci_directions, remesh_watertight,
                     synthesize_signed_grid)
from .sampling import (ConditionPayload, PointCloud, QuerySet, SampleSet,
                       SamplingSpec, bbox_corners, fps_downsample,
                       make_partial, make_sample_set, sample_queries,
                       sample_surface, sparse_cloud, voxelize16)

__version__ = "0.1.0"

__all__ = [
    "TriangleBVH", "any_ray_escape", "build_bvh", "closest_point",
    "LabelGrid", "ScalarGrid", "dump_grid", "load_grid",
    "marching_cubes",
    "GeometryError", "NormalizationTransform", "TriangleMesh",
    "is_watertight", "mesh_volume", "normalize_mesh",
    "load_mesh", "read_mesh", "save_mesh",
    "MetricReport", "chamfer", "compare_meshes", "emd_exact", "f_score",
    "volume_conservation", "voxel_iou",
    "Manifest", "parse_manifest", "run", "validate",
    "RemeshConfig", "RemeshResult", "compute_udf_grid",
    "compute_visibility_labels", "exterior_flood_fill",
    "fibonacci_directions", "remesh_watertight", "synthesize_signed_grid",
    "ConditionPayload", "PointCloud", "QuerySet", "SampleSet",
    "SamplingSpec", "bbox_corners", "fps_downsample", "make_partial",
    "make_sample_set", "sample_queries", "sample_surface", "sparse_cloud",
    "voxelize16",
    "__version__",
]
