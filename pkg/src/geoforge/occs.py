"""OCCS sample container: one binary file per asset.

Layout (little-endian throughout):

    magic   "OCCS"
    u32     version = 1
    u64     asset-id hash (blake2b-64 of the asset id string)
    u32     section count
    n x     section record: u32 kind, u32 reserved, u64 offset, u64 nbytes
    ...     section bytes at the recorded offsets

Sections: 0 surface points (N x 3 f32), 1 downsample (K x 3 f32),
2 queries (Q x 3 f32), 3 query labels (Q u8), 4 payload records.

The payload section is: u32 record count, then per record u32 kind,
u32 reserved, u64 nbytes, bytes.  Payload kinds: 0 voxel16 (packed bits,
512 bytes), 1 bbox8 (8 x 3 f32), 2 sparse512 (512 x 3 f32), 3 partial
(u32 npoints, u32 ncorners, points f32, corners f32).
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from .mesh import GeometryError
from .sampling import (PAYLOAD_BBOX, PAYLOAD_PARTIAL, PAYLOAD_SPARSE,
                       PAYLOAD_VOXEL, ConditionPayload, SampleSet, VOXEL_RES)

MAGIC = b"OCCS"
VERSION = 1

SECTION_SURFACE = 0
SECTION_DOWNSAMPLE = 1
SECTION_QUERIES = 2
SECTION_LABELS = 3
SECTION_PAYLOADS = 4

_PAYLOAD_IDS = {PAYLOAD_VOXEL: 0, PAYLOAD_BBOX: 1,
                PAYLOAD_SPARSE: 2, PAYLOAD_PARTIAL: 3}
_PAYLOAD_NAMES = {v: k for k, v in _PAYLOAD_IDS.items()}


def asset_hash(asset_id: str) -> int:
    return int.from_bytes(
        hashlib.blake2b(asset_id.encode(), digest_size=8).digest(), "little")


def _payload_bytes(p: ConditionPayload) -> bytes:
    if p.kind == PAYLOAD_VOXEL:
        return np.packbits(p.voxel.ravel()).tobytes()
    if p.kind == PAYLOAD_BBOX:
        return p.corners.astype("<f4").tobytes()
    if p.kind == PAYLOAD_SPARSE:
        return p.points.astype("<f4").tobytes()
    if p.kind == PAYLOAD_PARTIAL:
        head = struct.pack("<II", len(p.points), len(p.corners))
        return (head + p.points.astype("<f4").tobytes()
                + p.corners.astype("<f4").tobytes())
    raise GeometryError(f"unknown payload kind {p.kind!r}")


def _decode_payload(kind_id: int, blob: bytes):
    kind = _PAYLOAD_NAMES.get(kind_id)
    if kind == PAYLOAD_VOXEL:
        bits = np.unpackbits(np.frombuffer(blob, dtype=np.uint8))
        voxel = bits[:VOXEL_RES ** 3].reshape((VOXEL_RES,) * 3)
        return ConditionPayload(kind=kind, voxel=voxel.astype(np.uint8))
    if kind == PAYLOAD_BBOX:
        corners = np.frombuffer(blob, dtype="<f4").astype(np.float64)
        return ConditionPayload(kind=kind, corners=corners.reshape(8, 3))
    if kind == PAYLOAD_SPARSE:
        pts = np.frombuffer(blob, dtype="<f4").astype(np.float64)
        return ConditionPayload(kind=kind, points=pts.reshape(-1, 3))
    if kind == PAYLOAD_PARTIAL:
        npts, ncorners = struct.unpack_from("<II", blob, 0)
        off = 8
        pts = np.frombuffer(blob, dtype="<f4", count=npts * 3,
                            offset=off).astype(np.float64)
        off += npts * 12
        corners = np.frombuffer(blob, dtype="<f4", count=ncorners * 3,
                                offset=off).astype(np.float64)
        return ConditionPayload(kind=kind, points=pts.reshape(npts, 3),
                                corners=corners.reshape(ncorners, 3))
    raise GeometryError(f"unknown payload id {kind_id}")


def write_samples(path, asset_id: str, samples: SampleSet) -> None:
    sections = [
        (SECTION_SURFACE, samples.surface.points.astype("<f4").tobytes()),
        (SECTION_DOWNSAMPLE, samples.downsample.points.astype("<f4").tobytes()),
        (SECTION_QUERIES, samples.queries.queries.astype("<f4").tobytes()),
        (SECTION_LABELS, samples.queries.labels.tobytes()),
    ]
    records = b"".join(
        struct.pack("<IIQ", _PAYLOAD_IDS[p.kind], 0, len(blob)) + blob
        for p, blob in ((p, _payload_bytes(p)) for p in samples.payloads))
    sections.append(
        (SECTION_PAYLOADS,
         struct.pack("<I", len(samples.payloads)) + records))

    header_size = 4 + 4 + 8 + 4 + len(sections) * 24
    offset = header_size
    table = b""
    body = b""
    for kind, blob in sections:
        table += struct.pack("<IIQQ", kind, 0, offset, len(blob))
        body += blob
        offset += len(blob)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQI", VERSION, asset_hash(asset_id),
                             len(sections)))
        fh.write(table)
        fh.write(body)


def read_samples(path) -> dict:
    """Parse an OCCS file into arrays keyed by section name."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise GeometryError(f"{path}: not an OCCS file")
    version, ahash, n_sections = struct.unpack_from("<IQI", blob, 4)
    if version != VERSION:
        raise GeometryError(f"{path}: unsupported OCCS version {version}")
    out = {"asset_hash": ahash, "sections": {}}
    pos = 20
    for _ in range(n_sections):
        kind, _, offset, nbytes = struct.unpack_from("<IIQQ", blob, pos)
        pos += 24
        if offset + nbytes > len(blob):
            raise GeometryError(f"{path}: truncated section {kind}")
        out["sections"][kind] = blob[offset:offset + nbytes]
    sec = out["sections"]
    if SECTION_SURFACE in sec:
        out["surface"] = np.frombuffer(
            sec[SECTION_SURFACE], dtype="<f4").reshape(-1, 3)
    if SECTION_DOWNSAMPLE in sec:
        out["downsample"] = np.frombuffer(
            sec[SECTION_DOWNSAMPLE], dtype="<f4").reshape(-1, 3)
    if SECTION_QUERIES in sec:
        out["queries"] = np.frombuffer(
            sec[SECTION_QUERIES], dtype="<f4").reshape(-1, 3)
    if SECTION_LABELS in sec:
        out["labels"] = np.frombuffer(sec[SECTION_LABELS], dtype=np.uint8)
    if SECTION_PAYLOADS in sec:
        raw = sec[SECTION_PAYLOADS]
        (count,) = struct.unpack_from("<I", raw, 0)
        pos = 4
        payloads = []
        for _ in range(count):
            kind_id, _, nbytes = struct.unpack_from("<IIQ", raw, pos)
            pos += 16
            payloads.append(_decode_payload(kind_id, raw[pos:pos + nbytes]))
            pos += nbytes
        out["payloads"] = payloads
    return out
