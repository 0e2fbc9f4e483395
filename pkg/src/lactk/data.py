"""Phantoms, dataset assembly, image-quality metrics, and file formats.

File formats
------------
* LACT tensor: magic ``LACT`` (4 bytes), version byte 0x01, dtype byte
  (0x00 = float32 LE, 0x01 = float64 LE), ndim byte, reserved byte 0x00,
  then ndim little-endian uint32 dims and the row-major payload.
* Metrics CSV: header ``id,method,psnr_db,ssim``, values at 6 significant
  digits.
* Image export: binary 16-bit PGM (P5) with the min/max window recorded in
  a comment line.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass

import numpy as np

from .analytic import RAM_LAK, FilterSpec, fbp_values
from .config import (
    geometry_from_kv,
    geometry_to_kv,
    read_kv,
    selection_from_kv,
    write_kv,
)
from .errors import FormatError, InvalidArgumentError, UndefinedMetricError
from .geometry import ViewSelection
from .projector import (
    Geometry,
    Image,
    LimitedSinogram,
    Sinogram,
    pad_dual_values,
    project,
    restrict,
)

# (amplitude, semi_x, semi_y, center_x, center_y, angle_degrees)
_SHEPP_LOGAN_ELLIPSES = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.98, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.02, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.02, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.01, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.01, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.01, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.01, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.01, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.01, 0.0230, 0.0460, 0.06, -0.605, 0.0),
)


@dataclass(frozen=True)
class PhantomSpec:
    """Phantom family selector: the analytic head phantom or seeded random
    ellipse collections."""

    kind: str = "shepp-logan"
    size: int = 128
    seed: int = 0
    n_ellipses: int = 6

    def __post_init__(self):
        if self.kind not in ("shepp-logan", "random-ellipses"):
            raise InvalidArgumentError(f"unknown phantom kind {self.kind!r}")
        if self.size < 8:
            raise InvalidArgumentError("phantom size must be >= 8")
        if self.n_ellipses < 1:
            raise InvalidArgumentError("n_ellipses must be >= 1")


def _ellipse_mask(size: int, amp, a, b, x0, y0, deg, out: np.ndarray) -> None:
    coords = (np.arange(size, dtype=np.float64) - (size - 1) / 2.0) / (size / 2.0)
    xg, yg = np.meshgrid(coords, coords)
    phi = math.radians(deg)
    xr = (xg - x0) * math.cos(phi) + (yg - y0) * math.sin(phi)
    yr = -(xg - x0) * math.sin(phi) + (yg - y0) * math.cos(phi)
    out[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += amp


def shepp_logan(size: int) -> np.ndarray:
    """Standard 10-ellipse head phantom, scaled to [0, 1]."""
    if size < 8:
        raise InvalidArgumentError("phantom size must be >= 8")
    img = np.zeros((size, size), dtype=np.float64)
    for amp, a, b, x0, y0, deg in _SHEPP_LOGAN_ELLIPSES:
        _ellipse_mask(size, amp, a, b, x0, y0, deg, img)
    peak = img.max()
    if peak > 0:
        img /= peak
    return img


def random_phantom(spec: PhantomSpec) -> np.ndarray:
    """Sum of seeded random ellipses, clipped to [0, 1]."""
    rng = np.random.default_rng(spec.seed)
    img = np.zeros((spec.size, spec.size), dtype=np.float64)
    for _ in range(spec.n_ellipses):
        amp = rng.uniform(0.15, 0.6)
        a = rng.uniform(0.08, 0.45)
        b = rng.uniform(0.08, 0.45)
        x0, y0 = rng.uniform(-0.55, 0.55, size=2)
        deg = rng.uniform(0.0, 180.0)
        _ellipse_mask(spec.size, amp, a, b, x0, y0, deg, img)
    return np.clip(img, 0.0, 1.0)


def make_phantom(spec: PhantomSpec) -> np.ndarray:
    if spec.kind == "shepp-logan":
        return shepp_logan(spec.size)
    return random_phantom(spec)


@dataclass(frozen=True)
class Sample:
    """One dataset entry: label image, its full sinogram, the limited-angle
    measurement, and the FBP initial guess."""

    image_label: Image
    sino_label: Sinogram
    limited: LimitedSinogram
    u0: Image


def make_sample(
    img: Image, geom: Geometry, sel: ViewSelection, filt: FilterSpec = RAM_LAK
) -> Sample:
    sino = project(img, geom)
    lim = restrict(sino, sel)
    u0 = fbp_values(pad_dual_values(lim.values, sel), geom, filt)
    return Sample(
        image_label=img,
        sino_label=sino,
        limited=lim,
        u0=Image(grid=geom.grid, values=u0),
    )


# ---------------------------------------------------------------------------
# LACT tensor files
# ---------------------------------------------------------------------------

_MAGIC = b"LACT"
_VERSION = 1
_DTYPE_CODES = {np.dtype(np.float32): 0x00, np.dtype(np.float64): 0x01}
_CODE_DTYPES = {0x00: np.dtype("<f4"), 0x01: np.dtype("<f8")}


def write_lact(path: str, arr: np.ndarray) -> None:
    a = np.asarray(arr)
    if a.dtype not in _DTYPE_CODES:
        raise FormatError(f"LACT stores float32/float64 arrays, not {a.dtype}")
    header = _MAGIC + bytes([_VERSION, _DTYPE_CODES[a.dtype], a.ndim, 0x00])
    dims = struct.pack(f"<{a.ndim}I", *a.shape)
    payload = np.ascontiguousarray(a).astype(a.dtype.newbyteorder("<"), copy=False).tobytes()
    with open(path, "wb") as fh:
        fh.write(header + dims + payload)


def read_lact(path: str) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if len(blob) < 8 or blob[:4] != _MAGIC:
        raise FormatError(f"{path}: bad magic bytes, not a LACT file")
    version, dtype_code, ndim, reserved = blob[4], blob[5], blob[6], blob[7]
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported LACT version {version}")
    if dtype_code not in _CODE_DTYPES:
        raise FormatError(f"{path}: unknown dtype code {dtype_code:#x}")
    if reserved != 0:
        raise FormatError(f"{path}: reserved byte must be zero")
    need = 8 + 4 * ndim
    if len(blob) < need:
        raise FormatError(f"{path}: truncated header")
    shape = struct.unpack(f"<{ndim}I", blob[8:need])
    dt = _CODE_DTYPES[dtype_code]
    count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
    if len(blob) != need + count * dt.itemsize:
        raise FormatError(f"{path}: payload size mismatch")
    arr = np.frombuffer(blob, dtype=dt, count=count, offset=need).reshape(shape)
    return arr.astype(dt.newbyteorder("="), copy=True)


# ---------------------------------------------------------------------------
# 16-bit PGM export
# ---------------------------------------------------------------------------


def write_pgm(path: str, values: np.ndarray, window: tuple[float, float] | None = None) -> None:
    """Quantize to 16-bit grayscale; the linear window is kept in a comment."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2:
        raise InvalidArgumentError("PGM export expects a 2-D raster")
    lo, hi = window if window is not None else (float(v.min()), float(v.max()))
    span = hi - lo if hi > lo else 1.0
    q = np.clip(np.rint((v - lo) / span * 65535.0), 0, 65535).astype(">u2")
    header = f"P5\n# window {lo!r} {hi!r}\n{v.shape[1]} {v.shape[0]}\n65535\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii") + q.tobytes())


def read_pgm(path: str) -> tuple[np.ndarray, tuple[float, float]]:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if not blob.startswith(b"P5\n"):
        raise FormatError(f"{path}: bad magic bytes, not a binary PGM file")
    try:
        rest = blob[3:]
        comment, rest = rest.split(b"\n", 1)
        if not comment.startswith(b"# window "):
            raise FormatError(f"{path}: missing window comment")
        lo, hi = (float(tok) for tok in comment[len(b"# window ") :].split())
        dims, rest = rest.split(b"\n", 1)
        width, height = (int(tok) for tok in dims.split())
        maxval, payload = rest.split(b"\n", 1)
        if maxval != b"65535":
            raise FormatError(f"{path}: expected 16-bit maxval")
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: malformed PGM header") from exc
    if len(payload) != width * height * 2:
        raise FormatError(f"{path}: payload size mismatch")
    q = np.frombuffer(payload, dtype=">u2").reshape(height, width)
    return q.copy(), (lo, hi)


# ---------------------------------------------------------------------------
# Quality metrics
# ---------------------------------------------------------------------------


def _raster(x) -> np.ndarray:
    return x.values if isinstance(x, Image) else np.asarray(x)


def psnr(u, label) -> float:
    """10*log10(range^2 / mse) with range taken from the label.

    Returns math.inf for identical inputs; a constant label makes the
    metric undefined.
    """
    uv, lv = _raster(u), _raster(label)
    if uv.shape != lv.shape:
        raise InvalidArgumentError(f"shape mismatch {uv.shape} vs {lv.shape}")
    vrange = float(lv.max() - lv.min())
    if vrange == 0.0:
        raise UndefinedMetricError("psnr is undefined for a constant label")
    mse = float(np.mean((uv - lv) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(vrange * vrange / mse)


def ssim(u, label) -> float:
    """Single-window structural similarity over the whole image.

    Uses population moments and C1=(0.01*range)^2, C2=(0.03*range)^2 with
    the range taken from the label (a zero range falls back to 1 so that
    two identical constants score exactly 1).
    """
    uv, lv = _raster(u).astype(np.float64), _raster(label).astype(np.float64)
    if uv.shape != lv.shape:
        raise InvalidArgumentError(f"shape mismatch {uv.shape} vs {lv.shape}")
    vrange = float(lv.max() - lv.min())
    if vrange == 0.0:
        vrange = 1.0
    c1 = (0.01 * vrange) ** 2
    c2 = (0.03 * vrange) ** 2
    mu1 = float(uv.mean())
    mu2 = float(lv.mean())
    var1 = float(np.mean((uv - mu1) ** 2))
    var2 = float(np.mean((lv - mu2) ** 2))
    cov = float(np.mean((uv - mu1) * (lv - mu2)))
    return ((2 * mu1 * mu2 + c1) * (2 * cov + c2)) / (
        (mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2)
    )


@dataclass(frozen=True)
class MetricsRow:
    sample_id: str
    method: str
    psnr_db: float
    ssim: float


def _sig6(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.6g}"


def write_metrics_csv(path: str, rows: list[MetricsRow]) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("id,method,psnr_db,ssim\n")
        for r in rows:
            fh.write(f"{r.sample_id},{r.method},{_sig6(r.psnr_db)},{_sig6(r.ssim)}\n")


def read_metrics_csv(path: str) -> list[MetricsRow]:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "id,method,psnr_db,ssim":
        raise FormatError(f"{path}: bad metrics header")
    out = []
    for ln in lines[1:]:
        sid, method, p, s = ln.split(",")
        out.append(MetricsRow(sid, method, float(p), float(s)))
    return out


# ---------------------------------------------------------------------------
# Dataset assembly
# ---------------------------------------------------------------------------

_SAMPLE_FILES = ("image", "sino", "limited", "u0")


def build_dataset(
    spec: PhantomSpec,
    geom: Geometry,
    sel: ViewSelection,
    count: int,
    out_dir: str,
    split_counts: tuple[int, int, int] | None = None,
    filt: FilterSpec = RAM_LAK,
    images: list[np.ndarray] | None = None,
) -> str:
    """Generate ``count`` samples into ``out_dir`` and write a manifest.

    Phantom seeds are ``spec.seed + index``.  ``split_counts`` tags the
    first samples train, the next val, the rest test (defaults to all
    train).  When ``images`` is given it overrides phantom generation.
    Returns the manifest path.
    """
    if count < 1:
        raise InvalidArgumentError("count must be >= 1")
    if images is not None and len(images) != count:
        raise InvalidArgumentError("images list does not match count")
    n_train, n_val, n_test = split_counts or (count, 0, 0)
    if n_train + n_val + n_test != count:
        raise InvalidArgumentError("split counts must sum to count")
    os.makedirs(out_dir, exist_ok=True)
    pairs = geometry_to_kv(geom, sel)
    pairs["count"] = str(count)
    lines = []
    for i in range(count):
        if images is not None:
            raster = np.asarray(images[i], dtype=np.float64)
        elif spec.kind == "shepp-logan":
            raster = shepp_logan(spec.size)
        else:
            raster = random_phantom(
                PhantomSpec(spec.kind, spec.size, spec.seed + i, spec.n_ellipses)
            )
        sample = make_sample(Image(grid=geom.grid, values=raster), geom, sel, filt)
        split = "train" if i < n_train else ("val" if i < n_train + n_val else "test")
        names = {}
        for tag, arr in zip(
            _SAMPLE_FILES,
            (
                sample.image_label.values,
                sample.sino_label.values,
                sample.limited.values,
                sample.u0.values,
            ),
        ):
            fname = f"sample_{i:04d}_{tag}.lact"
            write_lact(os.path.join(out_dir, fname), np.asarray(arr, dtype=np.float64))
            names[tag] = fname
        lines.append(
            f"sample={i:04d} split={split} "
            + " ".join(f"{tag}={names[tag]}" for tag in _SAMPLE_FILES)
        )
    manifest = os.path.join(out_dir, "manifest.txt")
    with open(manifest, "w", encoding="utf-8") as fh:
        for key, value in pairs.items():
            fh.write(f"{key}={value}\n")
        fh.write("\n")
        fh.write("\n".join(lines) + "\n")
    return manifest


def load_dataset(
    in_dir: str, verify: bool = False, splits: tuple[str, ...] | None = None
) -> tuple[Geometry, ViewSelection, list[tuple[str, str, Sample]]]:
    """Load a dataset directory; returns (geometry, selection, entries)
    where entries are (sample_id, split, Sample) in manifest order.

    With ``verify`` the stored sinogram label is checked against a fresh
    projection of the image label (max abs deviation 1e-6).
    """
    manifest = os.path.join(in_dir, "manifest.txt")
    try:
        with open(manifest, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read {manifest}: {exc}") from exc
    head, _, tail = text.partition("\n\n")
    kv = {}
    for ln in head.splitlines():
        if "=" in ln:
            k, v = ln.split("=", 1)
            kv[k] = v
    geom = geometry_from_kv(kv, where=manifest)
    sel = selection_from_kv(kv, where=manifest)
    entries = []
    for ln in tail.splitlines():
        ln = ln.strip()
        if not ln:
            continue
        fields = dict(tok.split("=", 1) for tok in ln.split())
        missing = {"sample", "split", *_SAMPLE_FILES} - fields.keys()
        if missing:
            raise FormatError(f"{manifest}: sample line missing {sorted(missing)}")
        if splits is not None and fields["split"] not in splits:
            continue
        arrs = {
            tag: read_lact(os.path.join(in_dir, fields[tag])) for tag in _SAMPLE_FILES
        }
        sample = Sample(
            image_label=Image(grid=geom.grid, values=arrs["image"]),
            sino_label=Sinogram(geometry=geom, values=arrs["sino"]),
            limited=LimitedSinogram(geometry=geom, selection=sel, values=arrs["limited"]),
            u0=Image(grid=geom.grid, values=arrs["u0"]),
        )
        if verify:
            fresh = project(sample.image_label, geom).values
            dev = float(np.max(np.abs(fresh - sample.sino_label.values)))
            if dev > 1e-6:
                raise FormatError(
                    f"{manifest}: sample {fields['sample']} sinogram deviates by {dev:.3g}"
                )
        entries.append((fields["sample"], fields["split"], sample))
    return geom, sel, entries
