"""Snapshot and trace serialization: raw float64 arrays with JSON sidecars, CSV traces."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
from pathlib import Path

import numpy as np

from .solver import RectGrid, Snapshot


def _jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def write_json(path, payload) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path


def save_snapshot(stem, snap: Snapshot, grid: RectGrid, params) -> list[Path]:
    """Write ``<stem>.u.bin`` (and ``<stem>.v.bin``) plus ``<stem>.json``."""
    stem = Path(stem)
    out = []
    files = {"u": f"{stem.name}.u.bin"}
    snap.u.astype("<f8").tofile(stem.with_name(files["u"]))
    out.append(stem.with_name(files["u"]))
    if snap.v is not None:
        files["v"] = f"{stem.name}.v.bin"
        snap.v.astype("<f8").tofile(stem.with_name(files["v"]))
        out.append(stem.with_name(files["v"]))
    meta = {
        "t": snap.t,
        "tainted": snap.tainted,
        "grid": grid,
        "params": params,
        "files": files,
        "dtype": "float64-le",
        "v_shape": [grid.ny, grid.nx],
    }
    out.append(write_json(stem.with_suffix(".json"), meta))
    return out


def load_snapshot(sidecar) -> tuple[Snapshot, dict]:
    sidecar = Path(sidecar)
    meta = json.loads(sidecar.read_text())
    u = np.fromfile(sidecar.with_name(meta["files"]["u"]), dtype="<f8")
    v = None
    if "v" in meta["files"]:
        v = np.fromfile(sidecar.with_name(meta["files"]["v"]), dtype="<f8").reshape(meta["v_shape"])
    return Snapshot(meta["t"], u, v, meta["tainted"]), meta


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(["" if (isinstance(c, float) and not np.isfinite(c)) else c for c in row])
    return path


def write_pgm(path, image: np.ndarray, vmax: float | None = None) -> Path:
    """8-bit binary graymap; row 0 of ``image`` is drawn at the bottom."""
    img = np.asarray(image, dtype=float)
    top = vmax if vmax is not None else max(float(np.max(img)), 1e-300)
    data = np.clip(np.rint(255.0 * img[::-1] / top), 0, 255).astype(np.uint8)
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(f"P5\n{data.shape[1]} {data.shape[0]}\n255\n".encode())
        fh.write(data.tobytes())
    return path


def sha256_of(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
