"""Manifest-driven batch pipeline: load, remesh, sample, measure, write.

The manifest is line-delimited JSON.  An optional record carrying a
"global" key sets defaults (output dir, seed, config deltas, per-asset
time budget); every other record is one asset:

    {"global": {"output_dir": "out", "seed": 7,
                "defaults": {"remesh": {"grid_res": 128}}}}
    {"asset_id": "chair_0", "input_path": "meshes/chair_0.obj"}
    {"asset_id": "lamp_1", "input_path": "meshes/lamp_1.ply",
     "overrides": {"remesh": {"directions": 128}, "surface_size": 8192}}

Per-asset outputs land in ``<output_dir>/assets/<asset_id>/``: the
watertight mesh, the OCCS sample container, and a report.json written
last via atomic rename, which doubles as the resume marker (an asset is
skipped when its report says ok and every recorded checksum still
matches).  One asset's failure never aborts the batch.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from .grids import ScalarGrid
from .mesh import (GeometryError, component_count, is_watertight, mesh_volume,
                   normalize_mesh)
from .meshio import MeshFormatError, load_mesh, read_mesh, save_obj
from .metrics import compare_meshes, volume_conservation
from .occs import read_samples, write_samples
from .remesh import RemeshConfig, remesh_watertight
from .sampling import (SamplingSpec, VOXEL_RES, make_sample_set,
                       PAYLOAD_BBOX, PAYLOAD_PARTIAL, PAYLOAD_SPARSE,
                       PAYLOAD_VOXEL)

MESH_FILENAME = "watertight.obj"
SAMPLES_FILENAME = "samples.occs"
REPORT_FILENAME = "report.json"
DEFAULT_BUDGET_SECONDS = 600.0


class ManifestError(ValueError):
    """Malformed manifest; aborts the run before any work starts."""


class AssetBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    asset_id: str
    input_path: str
    overrides: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Manifest:
    entries: tuple
    output_dir: str = "out"
    seed: int = 0
    defaults: dict = field(default_factory=dict)
    budget_seconds: float = DEFAULT_BUDGET_SECONDS


def parse_manifest(path) -> Manifest:
    entries = []
    global_cfg: dict = {}
    seen = set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            if "global" in rec:
                global_cfg.update(rec["global"])
                continue
            try:
                asset_id = str(rec["asset_id"])
                input_path = str(rec["input_path"])
            except KeyError as exc:
                raise ManifestError(
                    f"{path}:{lineno}: entry missing {exc}") from exc
            if asset_id in seen:
                raise ManifestError(
                    f"{path}:{lineno}: duplicate asset_id {asset_id!r}")
            if "/" in asset_id or asset_id in ("", ".", ".."):
                raise ManifestError(
                    f"{path}:{lineno}: unusable asset_id {asset_id!r}")
            seen.add(asset_id)
            entries.append(ManifestEntry(
                asset_id=asset_id, input_path=input_path,
                overrides=dict(rec.get("overrides", {}))))
    return Manifest(
        entries=tuple(entries),
        output_dir=str(global_cfg.get("output_dir", "out")),
        seed=int(global_cfg.get("seed", 0)),
        defaults=dict(global_cfg.get("defaults", {})),
        budget_seconds=float(global_cfg.get("budget_seconds",
                                            DEFAULT_BUDGET_SECONDS)))


# ---------------------------------------------------------------------------
# hashing and atomic writes
# ---------------------------------------------------------------------------

def file_hash(path) -> str:
    """64-bit content hash used by the resume index."""
    digest = hashlib.blake2b(digest_size=8)
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _atomic_write_json(path: Path, obj) -> None:
    _atomic_write_bytes(path, json.dumps(obj, indent=1, sort_keys=True)
                        .encode() + b"\n")


def _atomic_save(path: Path, writer) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    writer(tmp)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# per-asset processing
# ---------------------------------------------------------------------------

def _config_from(defaults: dict, overrides: dict):
    remesh_kw = {**defaults.get("remesh", {}), **overrides.get("remesh", {})}
    sampling_kw = {**defaults.get("sampling", {}),
                   **overrides.get("sampling", {})}
    surface_size = overrides.get("surface_size",
                                 defaults.get("surface_size"))
    return RemeshConfig(**remesh_kw), sampling_kw, surface_size


class _Budget:
    def __init__(self, seconds: float):
        self.deadline = time.perf_counter() + seconds
        self.seconds = seconds

    def check(self, stage: str):
        if time.perf_counter() > self.deadline:
            raise AssetBudgetExceeded(
                f"asset exceeded {self.seconds:.0f}s budget during {stage}")


def process_asset(entry_dict: dict, output_dir: str, seed: int,
                  defaults: dict, budget_seconds: float) -> dict:
    """Run one asset through the full pipeline; returns its report dict.

    Never raises for per-asset problems: failures are reported with
    status "failed" and leave no partial output files behind.
    """
    entry = ManifestEntry(**entry_dict)
    asset_dir = Path(output_dir) / "assets" / entry.asset_id
    asset_dir.mkdir(parents=True, exist_ok=True)
    for stale in asset_dir.glob("*.tmp"):
        stale.unlink()
    report = {
        "asset_id": entry.asset_id,
        "input_path": str(Path(entry.input_path).resolve()),
        "status": "failed",
        "error": None,
        "stage_seconds": {},
        "checksums": {},
    }
    t_total = time.perf_counter()
    budget = _Budget(budget_seconds)
    try:
        remesh_cfg, sampling_kw, surface_size = _config_from(
            defaults, entry.overrides)

        t0 = time.perf_counter()
        loaded = read_mesh(entry.input_path)
        norm_mesh, _ = normalize_mesh(loaded.mesh, remesh_cfg.margin)
        topo = is_watertight(norm_mesh)
        report["filter_flags"] = {
            "triangle_count": norm_mesh.n_triangles,
            "boundary_edges": topo.boundary_edges,
            "nonmanifold_edges": topo.nonmanifold_edges,
            "component_count": component_count(norm_mesh),
            "dropped_triangles": loaded.dropped_triangles,
        }
        report["input_watertight"] = topo.watertight
        report["stage_seconds"]["load"] = time.perf_counter() - t0
        budget.check("load")

        t0 = time.perf_counter()
        result = remesh_watertight(norm_mesh, remesh_cfg)
        report["stage_seconds"]["remesh"] = time.perf_counter() - t0
        budget.check("remesh")

        t0 = time.perf_counter()
        spec = SamplingSpec(seed=seed, **sampling_kw)
        from .occs import asset_hash
        samples = make_sample_set(
            norm_mesh, result.signed_grid, result.label_grid, spec,
            asset_key=asset_hash(entry.asset_id),
            surface_size=surface_size)
        report["stage_seconds"]["sample"] = time.perf_counter() - t0
        budget.check("sample")

        t0 = time.perf_counter()
        metrics = compare_meshes(norm_mesh, result.mesh, seed=seed,
                                 labels_b=result.label_grid)
        conservation = volume_conservation(norm_mesh, result)
        report["metrics"] = metrics.to_dict()
        report["stage_seconds"]["metrics"] = time.perf_counter() - t0
        budget.check("metrics")

        t0 = time.perf_counter()
        mesh_path = asset_dir / MESH_FILENAME
        occs_path = asset_dir / SAMPLES_FILENAME
        _atomic_save(mesh_path, lambda p: save_obj(p, result.mesh))
        _atomic_save(occs_path, lambda p: write_samples(
            p, entry.asset_id, samples))
        report["checksums"] = {
            MESH_FILENAME: file_hash(mesh_path),
            SAMPLES_FILENAME: file_hash(occs_path),
        }
        report["stage_seconds"]["write"] = time.perf_counter() - t0

        report["volume"] = {
            "output": result.stats["output_volume"],
            "inside_fraction": result.stats["inside_fraction"],
            "conservation_ratio": conservation,
        }
        report["config"] = {
            "remesh": dataclasses.asdict(remesh_cfg),
            "sampling": dataclasses.asdict(spec),
            "surface_size": samples.surface_size,
        }
        report["status"] = "ok"
    except (GeometryError, MeshFormatError, AssetBudgetExceeded,
            OSError, ValueError) as exc:
        report["error"] = f"{type(exc).__name__}: {exc}"
        for name in (MESH_FILENAME, SAMPLES_FILENAME):
            partial = asset_dir / name
            if partial.exists():
                partial.unlink()
    report["seconds"] = time.perf_counter() - t_total
    _atomic_write_json(asset_dir / REPORT_FILENAME, report)
    return report


def _asset_completed(asset_dir: Path) -> bool:
    report_path = asset_dir / REPORT_FILENAME
    if not report_path.exists():
        return False
    try:
        report = json.loads(report_path.read_text())
    except json.JSONDecodeError:
        return False
    if report.get("status") != "ok":
        return False
    for name, expect in report.get("checksums", {}).items():
        path = asset_dir / name
        if not path.exists() or file_hash(path) != expect:
            return False
    return True


# ---------------------------------------------------------------------------
# the batch driver
# ---------------------------------------------------------------------------

def _worker_init(n_threads: int):
    try:
        import numba
        numba.set_num_threads(max(1, n_threads))
    except ImportError:
        pass


def _worker_task(args):
    return process_asset(*args)


def default_workers() -> int:
    env = os.environ.get("GEOFORGE_WORKERS", "").strip()
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run(manifest, workers: int | None = None, resume: bool = False,
        output_dir: str | None = None, seed: int | None = None,
        progress=None) -> dict:
    """Process every manifest entry; returns the batch summary.

    With ``resume`` set, assets whose outputs already exist with
    matching checksums are skipped.  Failures are per-asset; the summary
    carries exit status semantics (ok iff no failures).
    """
    if not isinstance(manifest, Manifest):
        manifest = parse_manifest(manifest)
    if workers is None:
        workers = default_workers()
    out_dir = output_dir or manifest.output_dir
    run_seed = manifest.seed if seed is None else seed
    Path(out_dir).mkdir(parents=True, exist_ok=True)

    todo = []
    skipped = []
    for entry in manifest.entries:
        asset_dir = Path(out_dir) / "assets" / entry.asset_id
        if resume and _asset_completed(asset_dir):
            skipped.append(entry.asset_id)
            continue
        todo.append(entry)

    t0 = time.perf_counter()
    reports = []

    def note(report):
        reports.append(report)
        if progress is not None:
            progress(report)

    if workers <= 1 or len(todo) <= 1:
        _worker_init(os.cpu_count() or 1)
        for entry in todo:
            note(process_asset(dataclasses.asdict(entry), out_dir, run_seed,
                               manifest.defaults, manifest.budget_seconds))
    else:
        per_worker = max(1, (os.cpu_count() or 1) // workers)
        ctx = get_context("spawn")
        tasks = [(dataclasses.asdict(e), out_dir, run_seed,
                  manifest.defaults, manifest.budget_seconds) for e in todo]
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx,
                                 initializer=_worker_init,
                                 initargs=(per_worker,)) as pool:
            for report in pool.map(_worker_task, tasks):
                note(report)

    failed = [r for r in reports if r["status"] != "ok"]
    summary = {
        "total": len(manifest.entries),
        "ok": len([r for r in reports if r["status"] == "ok"]),
        "skipped": len(skipped),
        "failed": len(failed),
        "failures": {r["asset_id"]: r["error"] for r in failed},
        "seconds": time.perf_counter() - t0,
        "output_dir": str(out_dir),
        "workers": workers,
    }
    _atomic_write_json(Path(out_dir) / "summary.json", summary)
    return summary


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

_EXPECTED_PAYLOADS = {PAYLOAD_VOXEL: 0, PAYLOAD_BBOX: 1,
                      PAYLOAD_SPARSE: 2, PAYLOAD_PARTIAL: 3}


def _check_asset_files(asset_dir: Path, report: dict, issues: list) -> bool:
    """Checksums, watertightness, payload lengths.  True if clean."""
    clean = True

    def issue(check, detail):
        nonlocal clean
        clean = False
        issues.append({"asset_id": report.get("asset_id", asset_dir.name),
                       "check": check, "detail": detail})

    for name, expect in report.get("checksums", {}).items():
        path = asset_dir / name
        if not path.exists():
            issue("missing_output", name)
            continue
        actual = file_hash(path)
        if actual != expect:
            issue("checksum", f"{name}: {actual} != {expect}")

    mesh_path = asset_dir / MESH_FILENAME
    if mesh_path.exists():
        try:
            wt = is_watertight(load_mesh(mesh_path))
            if not wt.watertight:
                issue("watertight",
                      f"{wt.boundary_edges} boundary edges, "
                      f"{wt.nonmanifold_edges} non-manifold edges")
        except (GeometryError, MeshFormatError) as exc:
            issue("mesh_parse", str(exc))

    occs_path = asset_dir / SAMPLES_FILENAME
    if occs_path.exists():
        try:
            data = read_samples(occs_path)
            n = len(data["surface"])
            cfg = report.get("config", {})
            want_n = cfg.get("surface_size")
            if want_n is not None and n != want_n:
                issue("surface_size", f"{n} != {want_n}")
            ratio = cfg.get("sampling", {}).get("downsample_ratio", 4)
            if len(data["downsample"]) * ratio != n:
                issue("downsample_size",
                      f"{len(data['downsample'])} != {n}/{ratio}")
            if len(data["labels"]) != len(data["queries"]):
                issue("label_count", f"{len(data['labels'])} != "
                                     f"{len(data['queries'])}")
            kinds = {p.kind for p in data["payloads"]}
            missing = set(_EXPECTED_PAYLOADS) - kinds
            if missing:
                issue("payload_kinds", f"missing {sorted(missing)}")
            for p in data["payloads"]:
                if p.kind == PAYLOAD_VOXEL and p.voxel.shape != (VOXEL_RES,) * 3:
                    issue("payload_length", "voxel16 shape")
                if p.kind == PAYLOAD_BBOX and p.corners.shape != (8, 3):
                    issue("payload_length", "bbox8 shape")
                if p.kind == PAYLOAD_SPARSE and p.points.shape != (512, 3):
                    issue("payload_length", "sparse512 shape")
                if p.kind == PAYLOAD_PARTIAL and (
                        p.points.shape != (2048, 3)
                        or p.corners.shape != (8, 3)):
                    issue("payload_length", "partial2048+8 shape")
        except (GeometryError, ValueError) as exc:
            issue("occs_parse", str(exc))
    return clean


def _check_label_consistency(asset_dir: Path, report: dict,
                             issues: list) -> None:
    """Recompute the signed field from the recorded input and config and
    re-derive every stored query label."""
    from .bvh import build_bvh
    from .remesh import (LABELING_RAY, compute_udf_grid,
                         compute_visibility_labels, exterior_flood_fill,
                         synthesize_signed_grid)

    def issue(check, detail):
        issues.append({"asset_id": report.get("asset_id", asset_dir.name),
                       "check": check, "detail": detail})

    input_path = report.get("input_path")
    if not input_path or not Path(input_path).exists():
        issue("consistency_input_missing", str(input_path))
        return
    try:
        cfg = RemeshConfig(**report["config"]["remesh"])
        mesh, _ = normalize_mesh(load_mesh(input_path), cfg.margin)
        bvh = build_bvh(mesh)
        udf = compute_udf_grid(bvh, cfg.grid_res)
        if cfg.labeling_mode == LABELING_RAY:
            labels = compute_visibility_labels(
                bvh, cfg.grid_res, cfg.directions, cfg.escape_threshold,
                cfg.t_min)
        else:
            labels = exterior_flood_fill(udf, cfg.flood_open_threshold)
        signed = synthesize_signed_grid(udf, labels, cfg.shell_epsilon)
        data = read_samples(asset_dir / SAMPLES_FILENAME)
        queries = data["queries"].astype(np.float64)
        iso = cfg.iso_level * signed.spacing
        expect = (signed.trilinear(queries) < iso).astype(np.uint8)
        mismatches = int((expect != data["labels"]).sum())
        if mismatches:
            issue("label_consistency", f"{mismatches} mismatched labels")
    except (GeometryError, MeshFormatError, KeyError, ValueError) as exc:
        issue("consistency_error", f"{type(exc).__name__}: {exc}")


def validate(output_dir, consistency_assets: int = 2) -> dict:
    """Re-check a pipeline output tree; returns a machine-readable report.

    Verifies checksums, watertightness of written meshes and payload
    lengths for every asset, and re-derives query labels from scratch
    for a small deterministic subset of ok assets.
    """
    out = Path(output_dir)
    assets_root = out / "assets"
    issues: list = []
    checked = []
    ok_assets = []
    if not assets_root.exists():
        return {"ok": False, "assets_checked": 0,
                "issues": [{"asset_id": "", "check": "missing_outputs",
                            "detail": f"{assets_root} does not exist"}]}
    for asset_dir in sorted(assets_root.iterdir()):
        if not asset_dir.is_dir():
            continue
        report_path = asset_dir / REPORT_FILENAME
        if not report_path.exists():
            issues.append({"asset_id": asset_dir.name, "check": "missing_report",
                           "detail": str(report_path)})
            continue
        report = json.loads(report_path.read_text())
        checked.append(asset_dir.name)
        if report.get("status") != "ok":
            issues.append({"asset_id": asset_dir.name, "check": "status",
                           "detail": report.get("error") or "failed"})
            continue
        if _check_asset_files(asset_dir, report, issues):
            ok_assets.append((asset_dir, report))
    for asset_dir, report in ok_assets[:consistency_assets]:
        _check_label_consistency(asset_dir, report, issues)
    result = {
        "ok": not issues,
        "assets_checked": len(checked),
        "consistency_checked": min(consistency_assets, len(ok_assets)),
        "issues": issues,
    }
    _atomic_write_json(out / "validation.json", result)
    return result
