"""Command-line surface: geoforge {remesh|sample|voxelize|metrics|run|validate}."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .mesh import GeometryError, is_watertight, normalize_mesh
from .meshio import MeshFormatError, load_mesh, save_mesh
from .metrics import compare_meshes
from .occs import write_samples
from .pipeline import default_workers, parse_manifest, run as run_batch, validate
from .remesh import LABELING_FLOOD, LABELING_RAY, RemeshConfig, remesh_watertight
from .sampling import SamplingSpec, make_sample_set, voxelize16

_LABELING = {"ray": LABELING_RAY, "flood": LABELING_FLOOD}


def _add_remesh_flags(p: argparse.ArgumentParser, res_default: int = 256):
    p.add_argument("--res", type=int, default=res_default,
                   help="grid resolution per axis")
    p.add_argument("--dirs", type=int, default=64,
                   help="probe directions for visibility labeling")
    p.add_argument("--tau", type=float, default=0.0,
                   help="escaping-probe fraction tolerated for inside points")
    p.add_argument("--iso", type=float, default=0.0,
                   help="iso level in voxel units")
    p.add_argument("--shell", type=float, default=None,
                   help="thin-sheet shell half-thickness in voxel units")
    p.add_argument("--labeling", choices=sorted(_LABELING), default="ray",
                   help="inside/outside labeling strategy")
    p.add_argument("--margin", type=float, default=0.02,
                   help="normalization margin inside [-1,1]^3")


def _remesh_config(args) -> RemeshConfig:
    return RemeshConfig(grid_res=args.res, directions=args.dirs,
                        escape_threshold=args.tau, iso_level=args.iso,
                        shell_epsilon=args.shell,
                        labeling_mode=_LABELING[args.labeling],
                        margin=args.margin)


def _cmd_remesh(args) -> int:
    result = remesh_watertight(load_mesh(args.input), _remesh_config(args))
    out = Path(args.out or Path(args.input).stem + "_wt.obj")
    save_mesh(out, result.mesh)
    s = result.stats
    print(f"{args.input}: {s['input_triangles']} tris "
          f"({s['input_boundary_edges']} boundary edges) -> "
          f"{s['output_triangles']} tris, volume {s['output_volume']:.6g}, "
          f"inside {s['inside_fraction']:.1%}, {s['seconds']:.1f}s -> {out}")
    return 0


def _cmd_sample(args) -> int:
    n_uniform, n_near = (int(x) for x in args.queries.split(","))
    cfg = _remesh_config(args)
    mesh = load_mesh(args.input)
    norm_mesh, _ = normalize_mesh(mesh, cfg.margin)
    result = remesh_watertight(norm_mesh, cfg)
    spec = SamplingSpec(n_uniform=n_uniform, n_near=n_near, seed=args.seed)
    samples = make_sample_set(norm_mesh, result.signed_grid,
                              result.label_grid, spec,
                              surface_size=args.surface)
    out = Path(args.out or Path(args.input).stem + ".occs")
    write_samples(out, Path(args.input).stem, samples)
    print(f"{args.input}: surface {len(samples.surface)}, "
          f"downsample {len(samples.downsample)}, "
          f"queries {len(samples.queries)} "
          f"({samples.queries.labels.mean():.1%} inside), "
          f"{len(samples.payloads)} payloads -> {out}")
    return 0


def _cmd_voxelize(args) -> int:
    mesh = load_mesh(args.input)
    norm_mesh, _ = normalize_mesh(mesh, args.margin)
    payload = voxelize16(norm_mesh, directions=args.dirs, tau=args.tau)
    out = Path(args.out or Path(args.input).stem + "_vox16.npy")
    np.save(out, payload.voxel)
    print(f"{args.input}: {int(payload.voxel.sum())}/{payload.voxel.size} "
          f"cells occupied -> {out}")
    return 0


def _cmd_metrics(args) -> int:
    mesh_a, _ = normalize_mesh(load_mesh(args.mesh_a))
    mesh_b, _ = normalize_mesh(load_mesh(args.mesh_b))
    report = compare_meshes(mesh_a, mesh_b, samples=args.samples,
                            seed=args.seed, fscore_threshold=args.fscore_d,
                            emd_samples=args.emd_n)
    for line in report.format_lines():
        print(line)
    if args.json:
        Path(args.json).write_text(json.dumps(report.to_dict(), indent=1))
    return 0


def _cmd_run(args) -> int:
    manifest = parse_manifest(args.manifest)

    def progress(report):
        mark = "ok" if report["status"] == "ok" else f"FAILED: {report['error']}"
        print(f"  {report['asset_id']}: {mark} ({report['seconds']:.1f}s)",
              flush=True)

    summary = run_batch(manifest, workers=args.workers, resume=args.resume,
                        output_dir=args.out, seed=args.seed,
                        progress=progress)
    print(f"{summary['ok']} ok, {summary['skipped']} skipped, "
          f"{summary['failed']} failed in {summary['seconds']:.1f}s "
          f"-> {summary['output_dir']}")
    return 0 if summary["failed"] == 0 else 1


def _cmd_validate(args) -> int:
    report = validate(args.output_dir, consistency_assets=args.consistency)
    print(json.dumps(report, indent=1))
    return 0 if report["ok"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geoforge",
        description="Watertight remeshing and dataset payload pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("remesh", help="seal one mesh into a watertight shell")
    p.add_argument("input")
    _add_remesh_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_remesh)

    p = sub.add_parser("sample", help="emit the OCCS sample container")
    p.add_argument("input")
    _add_remesh_flags(p)
    p.add_argument("--surface", type=int, default=8192)
    p.add_argument("--queries", default="8192,8192",
                   help="uniform,near-surface query counts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("voxelize", help="16^3 occupancy payload")
    p.add_argument("input")
    p.add_argument("--dirs", type=int, default=64)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--margin", type=float, default=0.02)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_voxelize)

    p = sub.add_parser("metrics", help="metric suite between two meshes")
    p.add_argument("mesh_a")
    p.add_argument("mesh_b")
    p.add_argument("--fscore-d", type=float, default=0.02)
    p.add_argument("--samples", type=int, default=8192)
    p.add_argument("--emd-n", type=int, default=0,
                   help="exact-EMD sample count (0 = skip, max 1024)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", default=None)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("run", help="process a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=default_workers())
    p.add_argument("--resume", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("validate", help="re-check a pipeline output tree")
    p.add_argument("output_dir")
    p.add_argument("--consistency", type=int, default=2,
                   help="assets whose labels are re-derived from scratch")
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GeometryError, MeshFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
