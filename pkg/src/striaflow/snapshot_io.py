"""Snapshot directories: meta.json plus raw little-endian float64 arrays.

Layout of a snapshot directory:

    meta.json      format tag, version, time, grid, epsilon, field list,
                   marker count, and the configuration digest of the run
    rho.f64        n*n physical values, row major, little endian float64
    omega.f64      same layout
    pi.f64         present only when the state carries a pressure solution
    x0_0.f64 ...   striation member k, component i, named xk_i.f64
    markers.f64    m*2 boundary marker positions (absent when m == 0)

Arrays round trip bitwise: read_snapshot returns exactly the bytes written.
Reconstructing a state transforms the stored physical values back to
coefficients, so spectral data agrees to rounding, not bitwise; diagnostics
on a reloaded state are reproducible because they start from identical
physical arrays.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .dynamics import FlowMarkers, StratifiedState
from .grid import GridSpec, VectorField, field_from_values

FORMAT_TAG = "striaflow-snapshot"
FORMAT_VERSION = 1


class SnapshotError(RuntimeError):
    """Snapshot directory missing, malformed, or from a different format."""


@dataclass(frozen=True)
class SnapshotBundle:
    """Raw contents of a snapshot directory before state reconstruction."""

    meta: dict
    arrays: dict  # name -> (n, n) float64 array, C order
    markers: np.ndarray | None


def _write_array(path: str, arr: np.ndarray):
    np.ascontiguousarray(arr, dtype="<f8").tofile(path)


def _read_array(path: str, expected_shape) -> np.ndarray:
    count = 1
    for s in expected_shape:
        count *= s
    try:
        flat = np.fromfile(path, dtype="<f8")
    except OSError as exc:
        raise SnapshotError(f"{path}: cannot read array: {exc}") from exc
    if flat.size != count:
        raise SnapshotError(
            f"{path}: expected {count} float64 values for shape "
            f"{tuple(expected_shape)}, found {flat.size}; file is truncated "
            f"or from a different grid"
        )
    return flat.reshape(expected_shape)


def write_snapshot(dirpath, state: StratifiedState, markers: FlowMarkers | None = None,
                   config_digest: str | None = None, epsilon: float | None = None):
    """Write state (and optional markers) into dirpath, creating it."""
    os.makedirs(dirpath, exist_ok=True)
    grid = state.grid
    fields = {"rho": state.rho.values(), "omega": state.omega.values()}
    if state.pi_cache is not None:
        fields["pi"] = state.pi_cache.values()
    for k, xf in enumerate(state.x_fields):
        fields[f"x{k}_0"] = xf[0].values()
        fields[f"x{k}_1"] = xf[1].values()

    meta = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "time": state.time,
        "n": grid.n,
        "length": grid.length,
        "x_count": len(state.x_fields),
        "has_pressure": state.pi_cache is not None,
        "fields": sorted(fields),
        "marker_count": 0 if markers is None else int(markers.positions.shape[0]),
    }
    if config_digest is not None:
        meta["config_digest"] = config_digest
    if epsilon is not None:
        meta["epsilon"] = epsilon

    for name, arr in fields.items():
        _write_array(os.path.join(dirpath, name + ".f64"), arr)
    if markers is not None and markers.positions.shape[0] > 0:
        _write_array(os.path.join(dirpath, "markers.f64"), markers.positions)
    tmp = os.path.join(dirpath, "meta.json.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, os.path.join(dirpath, "meta.json"))


def read_snapshot(dirpath) -> SnapshotBundle:
    """Load and verify a snapshot directory without rebuilding the state."""
    meta_path = os.path.join(dirpath, "meta.json")
    try:
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError as exc:
        raise SnapshotError(f"{dirpath}: not a snapshot (missing meta.json)") from exc
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"{meta_path}: malformed JSON: {exc}") from exc

    if meta.get("format") != FORMAT_TAG:
        raise SnapshotError(
            f"{meta_path}: format tag {meta.get('format')!r} is not {FORMAT_TAG!r}"
        )
    if meta.get("version") != FORMAT_VERSION:
        raise SnapshotError(
            f"{meta_path}: snapshot version {meta.get('version')!r} not supported; "
            f"this build reads version {FORMAT_VERSION}"
        )
    for key in ("time", "n", "length", "x_count", "fields", "marker_count"):
        if key not in meta:
            raise SnapshotError(f"{meta_path}: missing required key {key!r}")
    n = int(meta["n"])

    arrays = {}
    for name in meta["fields"]:
        arrays[name] = _read_array(os.path.join(dirpath, name + ".f64"), (n, n))
    markers = None
    m = int(meta["marker_count"])
    if m > 0:
        markers = _read_array(os.path.join(dirpath, "markers.f64"), (m, 2))
    return SnapshotBundle(meta=meta, arrays=arrays, markers=markers)


def state_from_snapshot(bundle: SnapshotBundle):
    """Rebuild (state, markers) from a loaded snapshot bundle."""
    meta = bundle.meta
    grid = GridSpec(n=int(meta["n"]), length=float(meta["length"]))
    need = {"rho", "omega"}
    for k in range(int(meta["x_count"])):
        need.add(f"x{k}_0")
        need.add(f"x{k}_1")
    missing = sorted(need - set(bundle.arrays))
    if missing:
        raise SnapshotError(f"snapshot lacks required fields: {missing}")

    rho = field_from_values(grid, bundle.arrays["rho"])
    omega = field_from_values(grid, bundle.arrays["omega"])
    x_fields = tuple(
        VectorField((
            field_from_values(grid, bundle.arrays[f"x{k}_0"]),
            field_from_values(grid, bundle.arrays[f"x{k}_1"]),
        ))
        for k in range(int(meta["x_count"]))
    )
    pi_cache = None
    if meta.get("has_pressure") and "pi" in bundle.arrays:
        # warm-start field only; diagnostics re-solve before reporting residuals
        pi_cache = field_from_values(grid, bundle.arrays["pi"])
    state = StratifiedState(
        time=float(meta["time"]), rho=rho, omega=omega,
        x_fields=x_fields, pi_cache=pi_cache,
    )
    markers = None
    if bundle.markers is not None:
        markers = FlowMarkers(positions=bundle.markers)
    return state, markers
