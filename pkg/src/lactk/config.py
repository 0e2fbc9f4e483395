"""Flat key=value text files and geometry (de)serialization.

Files hold one ``key=value`` pair per line; blank lines and ``#`` comments
are ignored.  Geometry records carry every field explicitly so a file
never depends on construction-time defaults.
"""

from __future__ import annotations

import numpy as np

from .errors import FormatError, InvalidArgumentError
from .geometry import (
    FanGeometry,
    ImageGrid,
    ParallelGeometry,
    ViewSelection,
)
from .projector import Geometry


def parse_kv_text(text: str, where: str = "<string>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"{where}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in out:
            raise FormatError(f"{where}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def read_kv(path: str) -> dict[str, str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_kv_text(fh.read(), where=path)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc


def write_kv(path: str, pairs: dict[str, str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in pairs.items():
            fh.write(f"{key}={value}\n")


def _fmt(x: float) -> str:
    return repr(float(x))


def geometry_to_kv(geom: Geometry, sel: ViewSelection | None = None) -> dict[str, str]:
    """Explicit-field serialization of a geometry (and optional selection)."""
    out = {
        "grid.width": str(geom.grid.width),
        "grid.height": str(geom.grid.height),
        "grid.pixel_size": _fmt(geom.grid.pixel_size),
    }
    if isinstance(geom, ParallelGeometry):
        out["kind"] = "parallel"
        out["n_angles"] = str(geom.n_angles)
        out["n_detectors"] = str(geom.n_detectors)
        out["detector_spacing"] = _fmt(geom.detector_spacing)
        out["detector_center"] = _fmt(geom.detector_center)
    elif isinstance(geom, FanGeometry):
        out["kind"] = "fan"
        out["n_angles"] = str(geom.n_angles)
        out["source_radius"] = _fmt(geom.source_radius)
        out["fan_half_angle"] = _fmt(geom.fan_half_angle)
        out["detector_step"] = _fmt(
            geom.detector_angular_positions[1] - geom.detector_angular_positions[0]
            if geom.n_detectors > 1
            else 2 * geom.fan_half_angle
        )
    else:
        raise InvalidArgumentError(f"cannot serialize geometry {type(geom).__name__}")
    if sel is not None:
        out["views.full"] = str(sel.n_full_views)
        out["views.selected"] = ",".join(str(i) for i in sel.selected)
    return out


def _need(kv: dict[str, str], key: str, where: str) -> str:
    if key not in kv:
        raise FormatError(f"{where}: missing geometry key {key!r}")
    return kv[key]


def geometry_from_kv(kv: dict[str, str], where: str = "<config>") -> Geometry:
    grid = ImageGrid(
        width=int(_need(kv, "grid.width", where)),
        height=int(_need(kv, "grid.height", where)),
        pixel_size=float(_need(kv, "grid.pixel_size", where)),
    )
    kind = _need(kv, "kind", where)
    n_angles = int(_need(kv, "n_angles", where))
    if kind == "parallel":
        return ParallelGeometry(
            grid=grid,
            angles=np.arange(n_angles, dtype=np.float64) * (np.pi / n_angles),
            n_detectors=int(_need(kv, "n_detectors", where)),
            detector_spacing=float(_need(kv, "detector_spacing", where)),
            detector_center=float(_need(kv, "detector_center", where)),
        )
    if kind == "fan":
        from .geometry import make_fan

        geom = make_fan(
            grid,
            n_angles,
            float(_need(kv, "source_radius", where)),
            float(_need(kv, "fan_half_angle", where)),
            float(_need(kv, "detector_step", where)),
        )
        return geom
    raise FormatError(f"{where}: unknown geometry kind {kind!r}")


def selection_from_kv(kv: dict[str, str], where: str = "<config>") -> ViewSelection:
    full = int(_need(kv, "views.full", where))
    selected = tuple(
        int(tok) for tok in _need(kv, "views.selected", where).split(",") if tok != ""
    )
    return ViewSelection(n_full_views=full, selected=selected)
