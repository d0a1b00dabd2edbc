"""Image ingestion, edge extraction and mask construction.

Pixel conventions used throughout:
- RasterImage pixels are uint8, row-major, shape (height, width, channels).
- Edge maps are single-channel uint8, 0 = no edge, 255 = strongest edge
  (edges bright on dark).
- Masks are strictly binary single-channel uint8 in {0, 255};
  255 marks the region to regenerate.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Literal, Protocol

import numpy as np
from PIL import Image, ImageOps, UnidentifiedImageError

from .errors import (
    CorruptImage,
    DetectorUnavailable,
    EmptyMask,
    ImageTooSmall,
    OutOfBounds,
    UnsupportedFormat,
)

MIN_DIMENSION = 64
MAX_DIMENSION = 4096

SUPPORTED_MEDIA_TYPES = {
    "image/png": "png",
    "image/jpeg": "jpg",
}


@dataclass(frozen=True)
class RasterImage:
    """Decoded 8-bit raster, sRGB (3 or 4 channels) or grayscale (1)."""

    pixels: np.ndarray  # (h, w, c) uint8

    def __post_init__(self):
        px = self.pixels
        if px.dtype != np.uint8 or px.ndim != 3:
            raise ValueError("pixels must be a (h, w, c) uint8 array")
        h, w, c = px.shape
        if c not in (1, 3, 4):
            raise ValueError(f"unsupported channel count {c}")
        if not (MIN_DIMENSION <= w <= MAX_DIMENSION and MIN_DIMENSION <= h <= MAX_DIMENSION):
            raise ValueError(f"dimensions {w}x{h} outside [{MIN_DIMENSION}, {MAX_DIMENSION}]")
        if not px.flags["C_CONTIGUOUS"]:
            object.__setattr__(self, "pixels", np.ascontiguousarray(px))
        self.pixels.setflags(write=False)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def color_space(self) -> str:
        return "grayscale" if self.channels == 1 else "sRGB"

    def to_png_bytes(self) -> bytes:
        return _encode_png(self.pixels[..., 0] if self.channels == 1 else self.pixels)


@dataclass(frozen=True)
class EdgeMap:
    """Single-channel edge intensities; dimensions match the source image."""

    intensities: np.ndarray  # (h, w) uint8

    def __post_init__(self):
        e = self.intensities
        if e.dtype != np.uint8 or e.ndim != 2:
            raise ValueError("intensities must be a (h, w) uint8 array")
        if not e.flags["C_CONTIGUOUS"]:
            object.__setattr__(self, "intensities", np.ascontiguousarray(e))
        self.intensities.setflags(write=False)

    @property
    def width(self) -> int:
        return self.intensities.shape[1]

    @property
    def height(self) -> int:
        return self.intensities.shape[0]

    polarity = "edges_bright"

    def to_png_bytes(self) -> bytes:
        return _encode_png(self.intensities)


@dataclass(frozen=True)
class MaskImage:
    """Strictly binary mask; 255 = regenerate, 0 = preserve."""

    values: np.ndarray  # (h, w) uint8, values in {0, 255}

    def __post_init__(self):
        v = self.values
        if v.dtype != np.uint8 or v.ndim != 2:
            raise ValueError("values must be a (h, w) uint8 array")
        if not np.isin(v, (0, 255)).all():
            raise ValueError("mask values must be strictly in {0, 255}")
        if not v.flags["C_CONTIGUOUS"]:
            object.__setattr__(self, "values", np.ascontiguousarray(v))
        self.values.setflags(write=False)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def masked_fraction(self) -> float:
        return float(np.count_nonzero(self.values)) / (self.width * self.height)

    def to_png_bytes(self) -> bytes:
        return _encode_png(self.values)


@dataclass(frozen=True)
class Stroke:
    points: tuple[tuple[float, float], ...]
    radius: float
    mode: Literal["add", "erase"] = "add"


@dataclass(frozen=True)
class StrokeSet:
    strokes: tuple[Stroke, ...]

    @classmethod
    def from_json_obj(cls, obj) -> "StrokeSet":
        strokes = []
        for s in obj:
            points = tuple((float(x), float(y)) for x, y in s["points"])
            strokes.append(Stroke(points=points, radius=float(s["radius"]),
                                  mode=s.get("mode", "add")))
        return cls(strokes=tuple(strokes))


@dataclass(frozen=True)
class MaskReport:
    ok: bool
    binary: bool
    dimension_match: bool
    masked_fraction: float


def _encode_png(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(array).save(buf, format="PNG")
    return buf.getvalue()


def decode_single_channel_png(data: bytes) -> np.ndarray:
    """Decode a PNG to a (h, w) uint8 array (converted to grayscale if needed)."""
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            if im.mode != "L":
                im = im.convert("L")
            return np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise CorruptImage(str(exc)) from exc


def ingest_image(data: bytes, declared_media_type: str | None = None) -> RasterImage:
    """Decode, orientation-normalize and bound an uploaded draft or photo.

    Camera-rotation metadata is applied, the result is converted to
    3-channel sRGB, and anything larger than 4096 px is downscaled
    proportionally (floor) so the longer side is exactly 4096.
    """
    if declared_media_type is not None and declared_media_type not in SUPPORTED_MEDIA_TYPES:
        raise UnsupportedFormat(f"unsupported media type {declared_media_type!r}")
    try:
        im = Image.open(io.BytesIO(data))
        fmt = im.format
        if fmt not in ("PNG", "JPEG"):
            raise UnsupportedFormat(f"unsupported container {fmt!r}")
        im.load()
    except UnidentifiedImageError as exc:
        raise UnsupportedFormat(str(exc)) from exc
    except UnsupportedFormat:
        raise
    except OSError as exc:
        raise CorruptImage(str(exc)) from exc

    im = ImageOps.exif_transpose(im)
    im = im.convert("RGB")
    w, h = im.size
    if w < MIN_DIMENSION or h < MIN_DIMENSION:
        raise ImageTooSmall(f"{w}x{h} is below the {MIN_DIMENSION} px minimum")
    if max(w, h) > MAX_DIMENSION:
        if w >= h:
            new_w, new_h = MAX_DIMENSION, math.floor(h * MAX_DIMENSION / w)
        else:
            new_w, new_h = math.floor(w * MAX_DIMENSION / h), MAX_DIMENSION
        if new_w < MIN_DIMENSION or new_h < MIN_DIMENSION:
            raise ImageTooSmall(f"aspect ratio forces {new_w}x{new_h} after downscale")
        im = im.resize((new_w, new_h), Image.Resampling.LANCZOS)
    return RasterImage(pixels=np.asarray(im, dtype=np.uint8))


# --- edge detection ---

class EdgeDetector(Protocol):
    name: str

    def detect(self, image: RasterImage) -> EdgeMap: ...


_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.int64)
_SOBEL_Y = _SOBEL_X.T


def _convolve_replicate(gray: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    padded = np.pad(gray, 1, mode="edge")
    out = np.zeros_like(gray)
    for dy in range(3):
        for dx in range(3):
            k = kernel[dy, dx]
            if k != 0:
                out += k * padded[dy:dy + gray.shape[0], dx:dx + gray.shape[1]]
    return out


def luma_scaled(image: RasterImage) -> np.ndarray:
    """ITU-R 601 grayscale scaled by 1000, as exact int64."""
    px = image.pixels.astype(np.int64)
    if image.channels == 1:
        return px[..., 0] * 1000
    return 299 * px[..., 0] + 587 * px[..., 1] + 114 * px[..., 2]


class GradientEdgeDetector:
    """Built-in reference detector: Sobel gradient magnitude, max-normalized.

    Deterministic and dependency-light so the full pipeline is testable
    without any neural weights. Gradients are accumulated in exact integer
    arithmetic so reflection-equivariance holds bit-for-bit.
    """

    name = "gradient"

    def detect(self, image: RasterImage) -> EdgeMap:
        gray = luma_scaled(image)
        gx = _convolve_replicate(gray, _SOBEL_X)
        gy = _convolve_replicate(gray, _SOBEL_Y)
        mag = np.sqrt((gx * gx + gy * gy).astype(np.float64))
        peak = mag.max()
        if peak > 0.0:
            out = np.rint(mag * (255.0 / peak))
        else:
            out = np.zeros_like(mag)
        return EdgeMap(intensities=np.clip(out, 0, 255).astype(np.uint8))


class NeuralEdgeDetector:
    """Contract slot for an external neural edge model.

    Weights are multi-GB and not bundled; construction succeeds only when a
    loader is supplied (e.g. wrapping a locally installed model). Without one,
    detect() raises DetectorUnavailable.
    """

    name = "neural"

    def __init__(self, infer=None):
        # infer: Callable[[RasterImage], np.ndarray (h, w) uint8]
        self._infer = infer

    def detect(self, image: RasterImage) -> EdgeMap:
        if self._infer is None:
            raise DetectorUnavailable("no neural edge model loaded")
        result = self._infer(image)
        if result.shape != (image.height, image.width):
            raise DetectorUnavailable("neural detector returned wrong dimensions")
        return EdgeMap(intensities=result.astype(np.uint8))


_DETECTORS: dict[str, EdgeDetector] = {
    "gradient": GradientEdgeDetector(),
    "neural": NeuralEdgeDetector(),
}


def get_detector(name: str) -> EdgeDetector:
    try:
        return _DETECTORS[name]
    except KeyError:
        raise DetectorUnavailable(f"unknown detector {name!r}") from None


def detect_edges(image: RasterImage, detector: EdgeDetector | str = "gradient",
                 threshold: int | None = None) -> EdgeMap:
    """Extract an edge map with source dimensions.

    Soft intensities pass through unchanged; an optional threshold binarizes
    at >= threshold.
    """
    if isinstance(detector, str):
        detector = get_detector(detector)
    edges = detector.detect(image)
    if edges.width != image.width or edges.height != image.height:
        raise DetectorUnavailable("detector output dimensions differ from input")
    if threshold is not None:
        binary = np.where(edges.intensities >= threshold, 255, 0).astype(np.uint8)
        edges = EdgeMap(intensities=binary)
    return edges


# --- mask construction ---

def _segment_coverage(canvas_shape: tuple[int, int],
                      p0: tuple[float, float], p1: tuple[float, float],
                      radius: float) -> np.ndarray:
    """Boolean coverage: pixels whose center (ix, iy) lies within `radius`
    of the segment p0-p1 (point-to-segment distance, inclusive endpoints)."""
    h, w = canvas_shape
    x0, y0 = p0
    x1, y1 = p1
    lo_x = max(0, int(math.floor(min(x0, x1) - radius)))
    hi_x = min(w - 1, int(math.ceil(max(x0, x1) + radius)))
    lo_y = max(0, int(math.floor(min(y0, y1) - radius)))
    hi_y = min(h - 1, int(math.ceil(max(y0, y1) + radius)))
    cov = np.zeros(canvas_shape, dtype=bool)
    if lo_x > hi_x or lo_y > hi_y:
        return cov
    ys, xs = np.mgrid[lo_y:hi_y + 1, lo_x:hi_x + 1]
    xs = xs.astype(np.float64)
    ys = ys.astype(np.float64)
    dx = x1 - x0
    dy = y1 - y0
    len2 = dx * dx + dy * dy
    if len2 == 0.0:
        ddx = xs - x0
        ddy = ys - y0
    else:
        t = ((xs - x0) * dx + (ys - y0) * dy) / len2
        t = np.clip(t, 0.0, 1.0)
        ddx = xs - (x0 + t * dx)
        ddy = ys - (y0 + t * dy)
    cov[lo_y:hi_y + 1, lo_x:hi_x + 1] = ddx * ddx + ddy * ddy <= radius * radius
    return cov


def rasterize_mask(strokes: StrokeSet, width: int, height: int) -> MaskImage:
    """Render a StrokeSet to a strictly binary mask.

    Each stroke sweeps a disk of its radius along the polyline (exact
    point-to-segment distance, so coverage has no gaps at any point
    spacing). Later strokes win; erase strokes clear their coverage.
    """
    canvas = np.zeros((height, width), dtype=bool)
    for stroke in strokes.strokes:
        if stroke.radius < 1:
            raise OutOfBounds(f"brush radius {stroke.radius} below 1")
        if not stroke.points:
            raise OutOfBounds("stroke has no points")
        for x, y in stroke.points:
            if not (0 <= x < width and 0 <= y < height):
                raise OutOfBounds(f"point ({x}, {y}) outside {width}x{height}")
        pts = stroke.points
        segments = [(pts[0], pts[0])] if len(pts) == 1 else list(zip(pts, pts[1:]))
        for p0, p1 in segments:
            cov = _segment_coverage((height, width), p0, p1, stroke.radius)
            if stroke.mode == "add":
                canvas |= cov
            else:
                canvas &= ~cov
    if not canvas.any():
        raise EmptyMask("stroke set rasterizes to an empty mask")
    return MaskImage(values=(canvas.astype(np.uint8) * 255))


def validate_mask(mask: "MaskImage | np.ndarray", target: RasterImage) -> MaskReport:
    """Check a mask (possibly raw pixels) against a target image.

    Returns a report; never raises. Callers decide what to do with failures.
    """
    values = mask.values if isinstance(mask, MaskImage) else np.asarray(mask)
    binary = bool(np.isin(values, (0, 255)).all()) and values.ndim == 2
    dims_match = values.ndim == 2 and values.shape == (target.height, target.width)
    total = values.size if values.size else 1
    fraction = float(np.count_nonzero(values == 255)) / total
    return MaskReport(ok=binary and dims_match, binary=binary,
                      dimension_match=dims_match, masked_fraction=fraction)
